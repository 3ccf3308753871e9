//! CSV tables, the JSON summary, and the single emitter that writes them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value as Json};

use crate::config::Flat;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Primary table as CSV on stdout.
    Csv,
    /// Summary document as JSON on stdout.
    JsonSummary,
}

/// Shortest scientific representation that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn json_f64(x: f64) -> Json {
    if x.is_finite() {
        Json::from(x)
    } else {
        Json::Null
    }
}

pub fn json_opt(x: Option<f64>) -> Json {
    x.map_or(Json::Null, json_f64)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Writes the table preceded by the configuration as `# key = value`
    /// comment lines.
    pub fn write_csv<W: Write>(&self, config: &Flat, mut out: W) -> Result<(), CliError> {
        for line in config_lines(config) {
            writeln!(out, "# {line}")?;
        }
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::render))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, config: &Flat) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write_csv(config, &mut buf)?;
        String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
    }
}

/// The resolved configuration in the file syntax, one key per line.
pub fn config_lines(config: &Flat) -> Vec<String> {
    config
        .iter()
        .map(|(k, v)| format!("{k} = {}", toml_value(v)))
        .collect()
}

fn toml_value(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(x) => fmt_f64(*x),
        toml::Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(toml_value).collect();
            format!("[{}]", inner.join(", "))
        }
        other => other.to_string(),
    }
}

pub fn config_json(config: &Flat) -> Json {
    let mut map = Map::new();
    for (k, v) in config {
        map.insert(k.clone(), toml_to_json(v));
    }
    Json::Object(map)
}

fn toml_to_json(v: &toml::Value) -> Json {
    match v {
        toml::Value::String(s) => Json::from(s.as_str()),
        toml::Value::Integer(i) => Json::from(*i),
        toml::Value::Float(x) => json_f64(*x),
        toml::Value::Boolean(b) => Json::from(*b),
        toml::Value::Datetime(d) => Json::from(d.to_string()),
        toml::Value::Array(a) => Json::Array(a.iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Json::Object(
            t.iter()
                .map(|(k, v)| (k.clone(), toml_to_json(v)))
                .collect(),
        ),
    }
}

/// Summary document with a fixed section layout.
#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub command: String,
    pub derived: Map<String, Json>,
    pub prediction: Map<String, Json>,
    pub fit: Map<String, Json>,
    pub checks: Vec<Json>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn to_json(&self, config: &Flat) -> Json {
        serde_json::json!({
            "command": self.command,
            "inputs": config_json(config),
            "derived": self.derived,
            "prediction": self.prediction,
            "fit": self.fit,
            "checks": self.checks,
            "warnings": self.warnings,
        })
    }
}

/// Serializes all writes: stdout gets the table or the summary depending on
/// the format, and an output directory, if set, gets both.
pub struct Emitter {
    pub format: Format,
    pub out_dir: Option<PathBuf>,
}

impl Emitter {
    pub fn emit(
        &self,
        config: &Flat,
        summary: &Summary,
        table: &Table,
        table_file: &str,
    ) -> Result<(), CliError> {
        let doc = serde_json::to_string_pretty(&summary.to_json(config))
            .map_err(|e| CliError::Io(e.to_string()))?;
        if let Some(dir) = &self.out_dir {
            fs::create_dir_all(dir)?;
            write_file(&dir.join("summary.json"), format!("{doc}\n").as_bytes())?;
            write_file(
                &dir.join(table_file),
                table.to_csv_string(config)?.as_bytes(),
            )?;
        }
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        match self.format {
            Format::Csv => table.write_csv(config, &mut lock)?,
            Format::JsonSummary => writeln!(lock, "{doc}")?,
        }
        for w in &summary.warnings {
            eprintln!("warning: {w}");
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
