use crate::error::CliError;
use rotstar::field::{write_axifield, ScalarField};
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.jsonl";
pub const PROFILES: &str = "profiles.csv";

/// Artifact directory of one run. Iteration records go to `report.jsonl` as
/// they are produced; the manifest lists every file written.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    report: BufWriter<File>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        let report = BufWriter::new(File::create(dir.join(REPORT))?);
        Ok(Self {
            dir: dir.to_path_buf(),
            files: vec![REPORT.to_string()],
            report,
        })
    }

    fn track(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn field(&mut self, name: &str, field: &ScalarField) -> Result<(), CliError> {
        let file = format!("{name}.axifield");
        write_axifield(&self.dir.join(&file), field)?;
        self.track(&file);
        Ok(())
    }

    pub fn record(&mut self, value: &Value) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.report, value)?;
        self.report.write_all(b"\n")?;
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.dir.join(name), text)?;
        self.track(name);
        Ok(())
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.as_ref())?;
        }
        w.flush()?;
        self.track(name);
        Ok(())
    }

    /// Fields along the equator (`z = 0`) and the axis (`r = 0`).
    pub fn profiles(&mut self, fields: &[(&str, &ScalarField)]) -> Result<(), CliError> {
        let g = *fields[0].1.grid();
        let mut header = vec!["line", "coord"];
        header.extend(fields.iter().map(|(n, _)| *n));
        let mut rows: Vec<Vec<String>> = Vec::new();
        for i in 0..g.nr() {
            let mut row = vec!["equator".to_string(), num(g.r(i))];
            row.extend(fields.iter().map(|(_, f)| num(f.at(i, g.center()))));
            rows.push(row);
        }
        for j in 0..g.nz() {
            let mut row = vec!["axis".to_string(), num(g.z(j))];
            row.extend(fields.iter().map(|(_, f)| num(f.at(0, j))));
            rows.push(row);
        }
        self.csv(PROFILES, &header, &rows)
    }

    pub fn finish(mut self, command: &str, seed: u64, config: Value, data: Value) -> Result<(), CliError> {
        self.report.flush()?;
        let files = self.files.clone();
        self.json(
            MANIFEST,
            &json!({
                "command": command,
                "version": env!("CARGO_PKG_VERSION"),
                "seed": seed,
                "config": config,
                "files": files,
                "data": data,
            }),
        )
    }
}

pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

/// JSON number, with non-finite values as strings.
pub fn jnum(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}
