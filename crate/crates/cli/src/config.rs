//! Flat dotted-key configuration.
//!
//! A file is TOML restricted to scalar values and flat arrays; nested tables
//! are flattened so that `[device]\nf_qubit_hz = 4.2e9` and
//! `device.f_qubit_hz = 4.2e9` are the same key. Every physical quantity
//! carries a unit suffix in its key.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use cqed_core::device::{CavityGeometry, CoherenceRecord, DeviceParams, DissipationSource, Port};
use cqed_core::engine::{EvolveOptions, HilbertConfig};
use toml::Value;

use crate::error::CliError;

pub type Flat = BTreeMap<String, Value>;

/// Accepted unit suffixes for physical quantities.
pub const UNIT_SUFFIXES: [&str; 5] = ["_hz", "_k", "_s", "_f", "_m"];

const DEFAULT_SAMPLES: i64 = 401;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Float,
    Integer,
    Bool,
    Protocol,
    Port,
    Command,
    Path,
    FloatList,
}

const STATIC_KEYS: &[(&str, Kind)] = &[
    ("device.f_qubit_hz", Kind::Float),
    ("device.f_cavity_hz", Kind::Float),
    ("device.g_over_2pi_hz", Kind::Float),
    ("device.c_sigma_f", Kind::Float),
    ("device.e_j_over_h_hz", Kind::Float),
    ("device.chi_over_2pi_hz", Kind::Float),
    ("device.q_total", Kind::Float),
    ("device.coupling_ratio", Kind::Float),
    ("device.t1_intrinsic_s", Kind::Float),
    ("device.tphi_intrinsic_s", Kind::Float),
    ("device.f_occupation_hz", Kind::Float),
    ("geometry.a_m", Kind::Float),
    ("geometry.b_m", Kind::Float),
    ("geometry.d_m", Kind::Float),
    ("geometry.max_mode_index", Kind::Integer),
    ("hilbert.fock_cutoff", Kind::Integer),
    ("experiment.protocol", Kind::Protocol),
    ("experiment.t_final_s", Kind::Float),
    ("experiment.samples", Kind::Integer),
    ("experiment.detuning_hz", Kind::Float),
    ("experiment.fit_window_start_s", Kind::Float),
    ("experiment.rel_tol", Kind::Float),
    ("experiment.abs_tol", Kind::Float),
    ("experiment.noise_sigma", Kind::Float),
    ("experiment.noise_seed", Kind::Integer),
    ("predict.as_printed", Kind::Bool),
    ("sweep.command", Kind::Command),
    ("verify.chi_over_kappa", Kind::FloatList),
    ("verify.n_th", Kind::FloatList),
    ("verify.kappa_over_2pi_hz", Kind::Float),
];

fn key_kind(key: &str) -> Option<Kind> {
    if let Some(&(_, kind)) = STATIC_KEYS.iter().find(|(k, _)| *k == key) {
        return Some(kind);
    }
    let parts: Vec<&str> = key.split('.').collect();
    match parts.as_slice() {
        ["source", label, field] if valid_label(label) => match *field {
            "kappa_over_2pi_hz" | "temperature_k" => Some(Kind::Float),
            "port" => Some(Kind::Port),
            _ => None,
        },
        ["coherence", label, "t1_s" | "t2_star_s"] if valid_label(label) => Some(Kind::Float),
        ["sweep", "axis", name, field] if valid_label(name) => match *field {
            "path" => Some(Kind::Path),
            "values" => Some(Kind::FloatList),
            _ => None,
        },
        _ => None,
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Whether a parameter may be the target of a sweep axis.
pub fn is_sweepable(key: &str) -> bool {
    matches!(key_kind(key), Some(Kind::Float))
}

/// Parses and validates the flat key set of a configuration file.
pub fn parse_flat(text: &str) -> Result<Flat, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        CliError::Config(format!("cannot parse configuration: {e}"))
    })?;
    let mut flat = Flat::new();
    flatten("", &Value::Table(table), &mut flat)?;
    for (key, value) in &flat {
        check_key(key, value)?;
    }
    Ok(flat)
}

fn flatten(prefix: &str, value: &Value, out: &mut Flat) -> Result<(), CliError> {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out)?;
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
    Ok(())
}

fn check_key(key: &str, value: &Value) -> Result<(), CliError> {
    let Some(kind) = key_kind(key) else {
        let last = key.rsplit('.').next().unwrap_or(key);
        let looks_physical = !UNIT_SUFFIXES.iter().any(|s| last.ends_with(s));
        return Err(CliError::Config(
            if looks_physical && matches!(value, Value::Float(_) | Value::Integer(_)) {
                format!(
                    "unknown key `{key}`: physical quantities need a unit suffix ({})",
                    UNIT_SUFFIXES.join(", ")
                )
            } else {
                format!("unknown key `{key}`")
            },
        ));
    };
    let ok = match kind {
        Kind::Float => as_f64(value).is_some(),
        Kind::Integer => matches!(value, Value::Integer(i) if *i >= 0),
        Kind::Bool => matches!(value, Value::Boolean(_)),
        Kind::Protocol => matches!(value, Value::String(s) if s == "t1" || s == "ramsey"),
        Kind::Port => matches!(value, Value::String(s) if s == "internal" || s == "external"),
        Kind::Command => matches!(value, Value::String(s) if s == "predict" || s == "simulate"),
        Kind::Path => matches!(value, Value::String(_)),
        Kind::FloatList => {
            matches!(value, Value::Array(a) if !a.is_empty() && a.iter().all(|v| as_f64(v).is_some()))
        }
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "key `{key}` has an invalid value `{value}`"
        )))
    }
}

fn as_f64(value: &Value) -> Option<f64> {
    match value {
        Value::Float(f) if f.is_finite() => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolChoice {
    T1,
    Ramsey,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: ProtocolChoice,
    pub evolve: EvolveOptions,
    pub detuning_hz: f64,
    pub fit_window_start_s: Option<f64>,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub chi_over_kappa: Vec<f64>,
    pub n_th: Vec<f64>,
    pub kappa_over_2pi_hz: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            chi_over_kappa: vec![0.1, 1.0, 10.0],
            n_th: vec![0.005, 0.05],
            kappa_over_2pi_hz: 1.0e6,
        }
    }
}

/// A validated configuration. Sections are parsed on demand by the
/// commands that need them.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    flat: Flat,
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        Ok(Self {
            flat: parse_flat(text)?,
        })
    }

    pub fn empty() -> Self {
        Self { flat: Flat::new() }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.flat.contains_key(key)
    }

    /// A copy with one numeric parameter replaced.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self, CliError> {
        if !is_sweepable(key) {
            return Err(CliError::Config(format!(
                "`{key}` is not a numeric parameter"
            )));
        }
        let mut flat = self.flat.clone();
        flat.insert(key.to_string(), Value::Float(value));
        Ok(Self { flat })
    }

    fn float(&self, key: &str) -> Option<f64> {
        self.flat.get(key).and_then(as_f64)
    }

    fn required(&self, key: &str) -> Result<f64, CliError> {
        self.float(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn integer(&self, key: &str) -> Option<i64> {
        match self.flat.get(key) {
            Some(Value::Integer(i)) => Some(*i),
            _ => None,
        }
    }

    fn string(&self, key: &str) -> Option<&str> {
        match self.flat.get(key) {
            Some(Value::String(s)) => Some(s),
            _ => None,
        }
    }

    fn list(&self, key: &str) -> Option<Vec<f64>> {
        match self.flat.get(key) {
            Some(Value::Array(a)) => a.iter().map(as_f64).collect(),
            _ => None,
        }
    }

    pub fn device(&self) -> Result<DeviceParams, CliError> {
        let device = DeviceParams {
            f_qubit_hz: self.required("device.f_qubit_hz")?,
            f_cavity_hz: self.required("device.f_cavity_hz")?,
            g_over_2pi_hz: self.required("device.g_over_2pi_hz")?,
            c_sigma_f: self.float("device.c_sigma_f"),
            e_j_over_h_hz: self.float("device.e_j_over_h_hz"),
            chi_over_2pi_hz: self.float("device.chi_over_2pi_hz"),
            q_total: self.required("device.q_total")?,
            coupling_ratio: self.required("device.coupling_ratio")?,
            t1_intrinsic_s: self.float("device.t1_intrinsic_s"),
            tphi_intrinsic_s: self.float("device.tphi_intrinsic_s"),
        };
        device.validate()?;
        Ok(device)
    }

    /// Frequency used in every Bose factor; the cavity frequency by default.
    pub fn f_occupation_hz(&self) -> Result<f64, CliError> {
        match self.float("device.f_occupation_hz") {
            Some(f) => Ok(f),
            None => self.required("device.f_cavity_hz"),
        }
    }

    fn labels(&self, section: &str) -> Vec<String> {
        let mut labels: Vec<String> = self
            .flat
            .keys()
            .filter_map(|k| {
                let rest = k.strip_prefix(section)?.strip_prefix('.')?;
                rest.split('.').next().map(str::to_string)
            })
            .collect();
        labels.dedup();
        labels
    }

    /// Cavity baths in label order.
    pub fn sources(&self) -> Result<Vec<DissipationSource>, CliError> {
        self.labels("source")
            .into_iter()
            .map(|label| {
                let kappa = self.required(&format!("source.{label}.kappa_over_2pi_hz"))?;
                let temperature = self.required(&format!("source.{label}.temperature_k"))?;
                let port = match self.string(&format!("source.{label}.port")) {
                    Some("external") => Port::External,
                    _ => Port::Internal,
                };
                Ok(DissipationSource::new(label, TAU * kappa, temperature)?.with_port(port))
            })
            .collect()
    }

    pub fn coherence_records(&self) -> Result<Vec<(String, CoherenceRecord)>, CliError> {
        self.labels("coherence")
            .into_iter()
            .map(|label| {
                let t1 = self.required(&format!("coherence.{label}.t1_s"))?;
                let t2 = self.required(&format!("coherence.{label}.t2_star_s"))?;
                Ok((label, CoherenceRecord::new(t1, t2)?))
            })
            .collect()
    }

    pub fn geometry(&self) -> Result<Option<(CavityGeometry, u32)>, CliError> {
        if !self.flat.keys().any(|k| k.starts_with("geometry.")) {
            return Ok(None);
        }
        let geom = CavityGeometry::new(
            self.required("geometry.a_m")?,
            self.required("geometry.b_m")?,
            self.required("geometry.d_m")?,
        )?;
        let max = self.integer("geometry.max_mode_index").unwrap_or(3);
        let max = u32::try_from(max)
            .map_err(|_| CliError::Config("geometry.max_mode_index is too large".into()))?;
        Ok(Some((geom, max)))
    }

    pub fn hilbert(&self) -> Result<Option<HilbertConfig>, CliError> {
        match self.integer("hilbert.fock_cutoff") {
            Some(n) => Ok(Some(HilbertConfig::new(n as usize)?)),
            None => Ok(None),
        }
    }

    pub fn as_printed(&self) -> bool {
        matches!(
            self.flat.get("predict.as_printed"),
            Some(Value::Boolean(true))
        )
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let protocol = match self.string("experiment.protocol") {
            Some("t1") => ProtocolChoice::T1,
            Some("ramsey") => ProtocolChoice::Ramsey,
            _ => {
                return Err(CliError::Config(
                    "missing required key `experiment.protocol`".into(),
                ))
            }
        };
        let t_final = self.required("experiment.t_final_s")?;
        let samples = self
            .integer("experiment.samples")
            .unwrap_or(DEFAULT_SAMPLES);
        let mut evolve = EvolveOptions::new(t_final, samples as usize);
        if let Some(r) = self.float("experiment.rel_tol") {
            evolve.rel_tol = r;
        }
        if let Some(a) = self.float("experiment.abs_tol") {
            evolve.abs_tol = a;
        }
        evolve.validate()?;
        let noise_sigma = self.float("experiment.noise_sigma").unwrap_or(0.0);
        if noise_sigma < 0.0 {
            return Err(CliError::Config(
                "experiment.noise_sigma must be >= 0".into(),
            ));
        }
        Ok(ExperimentConfig {
            protocol,
            evolve,
            detuning_hz: self.float("experiment.detuning_hz").unwrap_or(0.0),
            fit_window_start_s: self.float("experiment.fit_window_start_s"),
            noise_sigma,
            noise_seed: self.integer("experiment.noise_seed").unwrap_or(0) as u64,
        })
    }

    pub fn sweep_axes(&self) -> Result<Vec<SweepAxis>, CliError> {
        let names = {
            let mut n: Vec<String> = self
                .flat
                .keys()
                .filter_map(|k| {
                    k.strip_prefix("sweep.axis.")?
                        .split('.')
                        .next()
                        .map(str::to_string)
                })
                .collect();
            n.dedup();
            n
        };
        names
            .into_iter()
            .map(|name| {
                let path = self
                    .string(&format!("sweep.axis.{name}.path"))
                    .ok_or_else(|| CliError::Config(format!("sweep axis `{name}` needs a path")))?
                    .to_string();
                let values = self
                    .list(&format!("sweep.axis.{name}.values"))
                    .ok_or_else(|| CliError::Config(format!("sweep axis `{name}` needs values")))?;
                if !is_sweepable(&path) {
                    return Err(CliError::Config(format!(
                        "sweep axis `{name}` targets `{path}`, which is not a numeric parameter"
                    )));
                }
                if !self.contains(&path) {
                    return Err(CliError::Config(format!(
                        "sweep axis `{name}` targets `{path}`, which is not set in this configuration"
                    )));
                }
                Ok(SweepAxis { name, path, values })
            })
            .collect()
    }

    pub fn sweep_simulates(&self) -> bool {
        self.string("sweep.command") == Some("simulate")
    }

    pub fn verify(&self) -> VerifyConfig {
        let mut v = VerifyConfig::default();
        if let Some(x) = self.list("verify.chi_over_kappa") {
            v.chi_over_kappa = x;
        }
        if let Some(n) = self.list("verify.n_th") {
            v.n_th = n;
        }
        if let Some(k) = self.float("verify.kappa_over_2pi_hz") {
            v.kappa_over_2pi_hz = k;
        }
        v
    }

    /// The configuration with every default that a command relies on
    /// written out, for embedding in output files.
    pub fn resolved(&self) -> Flat {
        let mut flat = self.flat.clone();
        let mut default = |key: &str, value: Value| {
            flat.entry(key.to_string()).or_insert(value);
        };
        if let Some(f) = self.float("device.f_cavity_hz") {
            default("device.f_occupation_hz", Value::Float(f));
        }
        default("predict.as_printed", Value::Boolean(false));
        if self.contains("experiment.protocol") {
            default("experiment.samples", Value::Integer(DEFAULT_SAMPLES));
            default(
                "experiment.rel_tol",
                Value::Float(EvolveOptions::DEFAULT_REL_TOL),
            );
            default(
                "experiment.abs_tol",
                Value::Float(EvolveOptions::DEFAULT_ABS_TOL),
            );
            default("experiment.noise_sigma", Value::Float(0.0));
            default("experiment.noise_seed", Value::Integer(0));
            default("experiment.detuning_hz", Value::Float(0.0));
        }
        if let Ok(sources) = self.sources() {
            for s in sources {
                default(
                    &format!("source.{}.port", s.label),
                    Value::String("internal".into()),
                );
            }
        }
        if self.contains("geometry.a_m") {
            default("geometry.max_mode_index", Value::Integer(3));
        }
        flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
device.f_qubit_hz = 4.2e9
device.f_cavity_hz = 12.1e9
device.g_over_2pi_hz = 153e6
device.q_total = 10400
device.coupling_ratio = 0.25

[source.walls]
kappa_over_2pi_hz = 0.87e6
temperature_k = 0.008

[source.feedline]
kappa_over_2pi_hz = 0.29e6
temperature_k = 0.1
port = "external"
"#;

    #[test]
    fn tables_and_dotted_keys_flatten_alike() {
        let cfg = RunConfig::from_text(REFERENCE).unwrap();
        assert!(cfg.contains("source.walls.temperature_k"));
        let d = cfg.device().unwrap();
        assert_eq!(d.q_total, 10_400.0);
        let s = cfg.sources().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].label, "feedline");
        assert_eq!(s[0].port, Port::External);
        assert!((s[1].kappa_rad_s - TAU * 0.87e6).abs() < 1e-6);
    }

    #[test]
    fn missing_unit_suffix_is_rejected() {
        let err = RunConfig::from_text("device.f_qubit = 4.2e9").unwrap_err();
        assert!(err.to_string().contains("unit suffix"), "{err}");
        assert!(RunConfig::from_text("device.unknown_hz = 1.0").is_err());
        assert!(RunConfig::from_text("experiment.protocol = \"echo\"").is_err());
        assert!(RunConfig::from_text("this is not toml").is_err());
    }

    #[test]
    fn samples_must_be_at_least_two() {
        let cfg = RunConfig::from_text(
            "experiment.protocol = \"t1\"\nexperiment.t_final_s = 1e-4\nexperiment.samples = 1",
        )
        .unwrap();
        assert!(cfg.experiment().is_err());
    }

    #[test]
    fn sweep_axis_must_target_a_set_parameter() {
        // dotted keys go first; after a table header they would nest under it
        let text = format!("sweep.axis.t.path = \"source.feedline.temperature_k\"\nsweep.axis.t.values = [0.02, 0.2]\n{REFERENCE}");
        let cfg = RunConfig::from_text(&text).unwrap();
        assert_eq!(cfg.sweep_axes().unwrap()[0].values, vec![0.02, 0.2]);

        let bad = format!("sweep.axis.t.path = \"source.line.temperature_k\"\nsweep.axis.t.values = [0.1]\n{REFERENCE}");
        assert!(RunConfig::from_text(&bad).unwrap().sweep_axes().is_err());
        let bad = format!(
            "sweep.axis.t.path = \"source.walls.port\"\nsweep.axis.t.values = [0.1]\n{REFERENCE}"
        );
        assert!(RunConfig::from_text(&bad).unwrap().sweep_axes().is_err());
    }

    #[test]
    fn resolved_fills_defaults() {
        let cfg = RunConfig::from_text(REFERENCE).unwrap();
        let r = cfg.resolved();
        assert_eq!(r["device.f_occupation_hz"], Value::Float(12.1e9));
        assert_eq!(r["source.walls.port"], Value::String("internal".into()));
    }
}
