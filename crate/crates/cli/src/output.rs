use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

/// Everything a command produces; nothing touches the disk until the
/// command has finished.
#[derive(Debug, Default)]
pub struct Report {
    pub summary: Vec<(String, String)>,
    pub json: Map<String, Value>,
    /// `(suffix, contents)`; written as `<name><suffix>.csv`.
    pub tables: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn put(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.put(key, fmt(value));
        self.json.insert(key.to_string(), num_json(value));
    }

    pub fn text(&mut self, key: &str, value: &str) {
        self.put(key, value);
        self.json.insert(key.to_string(), Value::String(value.to_string()));
    }

    pub fn detail(&mut self, key: &str, value: Value) {
        self.json.insert(key.to_string(), value);
    }

    pub fn table(&mut self, suffix: &str, csv: String) {
        self.tables.push((suffix.to_string(), csv));
    }

    pub fn summary_line(&self) -> String {
        self.summary
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Shortest round-trip form, `inf`/`-inf`/`nan` spelled out.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn num_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(fmt(x))
    }
}

/// Write `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_report(
    report: &Report,
    out: &Path,
    name: &str,
    command: &str,
    csv: bool,
    json_out: bool,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = vec![];
    if csv {
        for (suffix, body) in &report.tables {
            let p = out.join(format!("{name}{suffix}.csv"));
            write_atomic(&p, body)?;
            written.push(p);
        }
    }
    if json_out {
        let doc = json!({
            "command": command,
            "status": "ok",
            "summary": Value::Object(report.json.clone()),
            "notes": report.notes,
        });
        let p = out.join(format!("{name}.json"));
        write_atomic(&p, &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
        written.push(p);
    }
    Ok(written)
}

pub fn write_failure(out: &Path, name: &str, command: &str, kind: &str, message: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(out)?;
    let doc = json!({
        "command": command,
        "status": "error",
        "error": { "kind": kind, "message": message },
    });
    let p = out.join(format!("{name}.error.json"));
    write_atomic(&p, &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
    Ok(p)
}
