//! Plain-text field snapshots.
//!
//! ```text
//! AXIFIELD v1 nr=<int> nz=<int> rmax=<float> zmin=<float> zmax=<float> parity=<even|odd>
//! <nr*nz values, z fastest>
//! ```
//!
//! Values are written with 17 significant digits, one radial column per line,
//! so a write/read cycle reproduces every bit.

use super::{GridSpec, Parity, ScalarField};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub const AXIFIELD_MAGIC: &str = "AXIFIELD v1";

pub fn format_axifield(field: &ScalarField) -> String {
    let g = field.grid();
    let mut s = String::with_capacity(g.len() * 25 + 128);
    let _ = writeln!(
        s,
        "{AXIFIELD_MAGIC} nr={} nz={} rmax={} zmin={} zmax={} parity={}",
        g.nr(),
        g.nz(),
        g.rmax(),
        g.zmin(),
        g.zmax(),
        field.parity()
    );
    for col in field.values().chunks(g.nz()) {
        let mut first = true;
        for v in col {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{v:.16e}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_axifield(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let rest = header.strip_prefix(AXIFIELD_MAGIC).ok_or_else(|| Error::Parse {
        line: 1,
        msg: format!("expected header starting with '{AXIFIELD_MAGIC}'"),
    })?;

    let bad = |msg: String| Error::Parse { line: 1, msg };
    let mut nr = None;
    let mut nz = None;
    let mut rmax = None;
    let mut zmin = None;
    let mut zmax = None;
    let mut parity = None;
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header token '{tok}'")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad number for {k}: '{v}'")));
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad integer for {k}: '{v}'")));
        match k {
            "nr" => nr = Some(int(v)?),
            "nz" => nz = Some(int(v)?),
            "rmax" => rmax = Some(num(v)?),
            "zmin" => zmin = Some(num(v)?),
            "zmax" => zmax = Some(num(v)?),
            "parity" => {
                parity = Some(match v {
                    "even" => Parity::Even,
                    "odd" => Parity::Odd,
                    _ => return Err(bad(format!("parity must be even or odd, got '{v}'"))),
                })
            }
            _ => return Err(bad(format!("unknown header key '{k}'"))),
        }
    }
    let missing = |k: &str| bad(format!("header is missing '{k}'"));
    let nr = nr.ok_or_else(|| missing("nr"))?;
    let nz = nz.ok_or_else(|| missing("nz"))?;
    let rmax = rmax.ok_or_else(|| missing("rmax"))?;
    let zmin = zmin.ok_or_else(|| missing("zmin"))?;
    let zmax = zmax.ok_or_else(|| missing("zmax"))?;
    let parity = parity.ok_or_else(|| missing("parity"))?;
    if zmin != -zmax {
        return Err(bad(format!("zmin must equal -zmax, got {zmin} and {zmax}")));
    }
    let grid = GridSpec::new(nr, nz, rmax, zmax)?;

    let mut values = Vec::with_capacity(grid.len());
    for (ln, line) in lines {
        for tok in line.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                line: ln + 1,
                msg: format!("bad value '{tok}'"),
            })?;
            values.push(v);
        }
    }
    if values.len() != grid.len() {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("expected {} values, found {}", grid.len(), values.len()),
        });
    }
    ScalarField::from_values(grid, values, parity)
}

pub fn write_axifield(path: &Path, field: &ScalarField) -> Result<()> {
    std::fs::write(path, format_axifield(field))?;
    Ok(())
}

pub fn read_axifield(path: &Path) -> Result<ScalarField> {
    parse_axifield(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = GridSpec::new(9, 11, 1.3, 0.7).unwrap();
        let f = ScalarField::from_fn(g, Parity::Even, |r, z| (r * 1.7 + z).sin() / 3.0 - 1e-300)
            .unwrap();
        let back = parse_axifield(&format_axifield(&f)).unwrap();
        assert_eq!(back, f);
        let odd = ScalarField::from_fn(g, Parity::Odd, |r, z| r * z.exp()).unwrap();
        assert_eq!(parse_axifield(&format_axifield(&odd)).unwrap(), odd);
    }

    #[test]
    fn header_layout() {
        let g = GridSpec::square(8 + 1, 1.5).unwrap();
        let s = format_axifield(&ScalarField::zeros(g, Parity::Even));
        let first = s.lines().next().unwrap();
        assert_eq!(
            first,
            "AXIFIELD v1 nr=9 nz=17 rmax=1.5 zmin=-1.5 zmax=1.5 parity=even"
        );
        assert_eq!(s.lines().count(), 1 + 9);
    }

    #[test]
    fn malformed_inputs_report_lines() {
        assert!(matches!(parse_axifield(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_axifield("AXIFIELD v2 nr=9"),
            Err(Error::Parse { line: 1, .. })
        ));
        let g = GridSpec::square(9, 1.0).unwrap();
        let mut s = format_axifield(&ScalarField::zeros(g, Parity::Even));
        s = s.replacen("0.0000000000000000e0", "zero", 1);
        assert!(matches!(parse_axifield(&s), Err(Error::Parse { line: 2, .. })));
        let short = "AXIFIELD v1 nr=9 nz=9 rmax=1 zmin=-1 zmax=1 parity=even\n1 2 3\n";
        assert!(matches!(parse_axifield(short), Err(Error::Parse { .. })));
        let asym = "AXIFIELD v1 nr=9 nz=9 rmax=1 zmin=-2 zmax=1 parity=even\n";
        assert!(parse_axifield(asym).is_err());
    }
}
