//! Text forms of the entropy, rotation and density laws.
//!
//! - entropy: `constant:<s>`, `radial-quadratic:<a>`, `spheroidal:a=<a>,b=<b>`
//! - omega2: `none`, `constant:<Omega>`, `rigid-squared:<Omega^2>`, `rational:a=<a>,b=<b>`
//! - density: `ellipsoid:a=<a>,b=<b>[,power=<k>]`, `file:<axifield>`, `solution:<axifield>`

use crate::config::parse_f64;
use rotstar::eos::{EntropyRule, Omega2Rule};
use std::collections::BTreeMap;

fn split(text: &str) -> (&str, &str) {
    match text.split_once(':') {
        Some((k, v)) => (k.trim(), v.trim()),
        None => (text.trim(), ""),
    }
}

/// `a=1,b=2` into a map; every key must be in `keys`.
fn named(args: &str, keys: &[&str]) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for part in args.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected name=value, got '{part}'"))?;
        let k = k.trim();
        if !keys.contains(&k) {
            return Err(format!("unknown parameter '{k}' (expected {})", keys.join(", ")));
        }
        out.insert(k.to_string(), parse_f64(v)?);
    }
    Ok(out)
}

fn need(m: &BTreeMap<String, f64>, k: &str) -> Result<f64, String> {
    m.get(k).copied().ok_or_else(|| format!("missing parameter '{k}'"))
}

fn single(args: &str) -> Result<f64, String> {
    if args.is_empty() {
        return Err("missing value after ':'".into());
    }
    parse_f64(args)
}

pub fn parse_entropy(text: &str) -> Result<EntropyRule, String> {
    let (kind, args) = split(text);
    match kind {
        "constant" => Ok(EntropyRule::Constant { value: single(args)? }),
        "radial-quadratic" => Ok(EntropyRule::RadialQuadratic { a: single(args)? }),
        "spheroidal" => {
            let m = named(args, &["a", "b"])?;
            Ok(EntropyRule::Spheroidal {
                a: need(&m, "a")?,
                b: need(&m, "b")?,
            })
        }
        _ => Err(format!("unknown entropy law '{kind}' (constant, radial-quadratic, spheroidal)")),
    }
}

pub fn parse_omega2(text: &str) -> Result<Omega2Rule, String> {
    let (kind, args) = split(text);
    let rule = match kind {
        "none" => Omega2Rule::RigidSquared { value: 0.0 },
        "constant" => Omega2Rule::Constant { omega: single(args)? },
        "rigid-squared" => Omega2Rule::RigidSquared { value: single(args)? },
        "rational" => {
            let m = named(args, &["a", "b"])?;
            Omega2Rule::Rational {
                a: need(&m, "a")?,
                b: need(&m, "b")?,
            }
        }
        _ => return Err(format!("unknown rotation law '{kind}' (none, constant, rigid-squared, rational)")),
    };
    match rule {
        Omega2Rule::RigidSquared { value } if value < 0.0 => Err("Omega^2 must be non-negative".into()),
        Omega2Rule::Rational { a, b } if a < 0.0 || b < 0.0 => Err("a and b must be non-negative".into()),
        r => Ok(r),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySource {
    Ellipsoid { a: f64, b: f64, power: f64 },
    File(String),
    Solution(String),
}

pub fn parse_density(text: &str) -> Result<DensitySource, String> {
    let (kind, args) = split(text);
    match kind {
        "ellipsoid" => {
            let m = named(args, &["a", "b", "power"])?;
            Ok(DensitySource::Ellipsoid {
                a: need(&m, "a")?,
                b: need(&m, "b")?,
                power: m.get("power").copied().unwrap_or(1.0),
            })
        }
        "file" | "solution" if args.is_empty() => Err("missing path after ':'".into()),
        "file" => Ok(DensitySource::File(args.to_string())),
        "solution" => Ok(DensitySource::Solution(args.to_string())),
        _ => Err(format!("unknown density source '{kind}' (ellipsoid, file, solution)")),
    }
}
