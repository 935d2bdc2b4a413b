//! Job configuration: per-command key tables, preset defaults, config files
//! and flag overrides, resolved into one flat `key=value` map.

use std::collections::BTreeMap;

use sinchaos::io::read_key_values;
use sinchaos::State5;

use crate::Failure;

pub const COMMANDS: &[&str] = &[
    "trace",
    "equilibria",
    "nullclines",
    "lyapunov",
    "returnmap",
    "encode",
    "sweep-lyapunov",
    "sweep-isi-lz",
    "sweep-homsd",
    "scan-theta",
    "sweep-isi-1d",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self, Failure> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Failure::Usage(format!(
                "--preset: expected desk or paper, got {s:?}"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }
}

/// One configurable key; the flag is `--<name>`.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
    }
}

const TAU_X: Key = key("tau_x", "100", "slow gate time constant (ms)");

fn grid_keys() -> Vec<Key> {
    vec![
        key("dCa_lo", "-45", "first dCa value (mV)"),
        key("dCa_hi", "15", "last dCa value (mV)"),
        key("dCa_n", "200", "number of dCa values"),
        key("dVx_lo", "-4", "first dVx value (mV)"),
        key("dVx_hi", "1", "last dVx value (mV)"),
        key("dVx_n", "200", "number of dVx values"),
        TAU_X,
    ]
}

fn integrator_keys(tol: &'static str, max_step: &'static str) -> Vec<Key> {
    vec![
        key("method", "rk45", "rk45 (adaptive) or rk4 (fixed step)"),
        key("tol", tol, "absolute and relative tolerance"),
        key("dt", "0.1", "fixed step, or initial adaptive step (ms)"),
        key("max_step", max_step, "largest adaptive step (ms)"),
    ]
}

/// Keys accepted by `command`, in help order.
pub fn keys(command: &str) -> Vec<Key> {
    let mut k = match command {
        "trace" => vec![
            key("dCa", "-38.285", "calcium reversal shift (mV)"),
            key("dVx", "-0.9", "x half-activation shift (mV)"),
            TAU_X,
            key("t", "20000", "integration time (ms)"),
            key("seed", "sd", "sd (lower separatrix of the upper saddle), sweep, or V,h,n,x,Ca"),
            key("eps", "1e-4", "separatrix seed offset (scaled units)"),
            key("max_entries", "0", "stop after this many SSCS entries; 0 = no limit"),
        ],
        "equilibria" => vec![
            key("dCa", "-35.98", "calcium reversal shift (mV)"),
            key("dVx", "-1.1", "x half-activation shift (mV)"),
            TAU_X,
            key("dCa_end", "", "scan dCa linearly up to this value when n > 1"),
            key("n", "1", "number of dCa values"),
        ],
        "nullclines" => vec![
            key("dCa", "-4.6", "calcium reversal shift (mV)"),
            key("dVx", "-2", "x half-activation shift (mV)"),
            TAU_X,
            key("v_lo", "-70", "first voltage of the parameterization (mV)"),
            key("v_hi", "20", "last voltage of the parameterization (mV)"),
            key("points", "2000", "number of voltage samples"),
        ],
        "lyapunov" => vec![
            key("dCa", "-38.285", "calcium reversal shift (mV)"),
            key("dVx", "-0.9", "x half-activation shift (mV)"),
            TAU_X,
            key("seed", "sweep", "sweep or V,h,n,x,Ca"),
            key("t_transient", "1e4", "discarded transient (ms)"),
            key("t_total", "1e5", "averaging horizon (ms)"),
            key("renorm", "1", "QR re-orthonormalization interval (ms)"),
            key("checkpoints", "20", "running estimates recorded"),
        ],
        "returnmap" => vec![
            key("dCa", "-36.3", "calcium reversal shift (mV)"),
            key("dVx", "-1.08", "x half-activation shift (mV)"),
            TAU_X,
            key("samples", "500", "section samples"),
            key("min_time", "50", "minimum flight time before a return (ms)"),
            key("timeout", "1e5", "flight time after which a sample is flagged (ms)"),
            key("eps", "1e-4", "separatrix seed offset (scaled units)"),
            key("iterate_from", "", "iterate the interpolated map from this voltage"),
            key("iterate_steps", "100", "map iterations"),
        ],
        "encode" => vec![
            key("events", "", "events CSV (as written by trace) to encode"),
            key("symbols", "", "event string over i (V' max), + (spike), - (subthreshold max), . (end)"),
            key("sscs", "", "signed spike-count sequence, comma separated"),
            key("itinerary", "", "itinerary over A-F"),
        ],
        "sweep-lyapunov" => {
            let mut v = grid_keys();
            v.extend([
                key("seed", "sweep", "sweep or V,h,n,x,Ca"),
                key("t_transient", "1e4", "discarded transient (ms)"),
                key("t_total", "1e5", "averaging horizon (ms)"),
                key("renorm", "10", "QR re-orthonormalization interval (ms)"),
                key("checkpoints", "20", "running estimates recorded"),
            ]);
            v
        }
        "sweep-isi-lz" => {
            let mut v = grid_keys();
            v.extend([
                key("seed", "sweep", "sweep or V,h,n,x,Ca"),
                key("t_transient", "1e4", "discarded transient (ms)"),
                key("t_record", "2e5", "recording horizon (ms)"),
                key("max_entries", "256", "SSCS entries recorded per cell"),
                key("max_period", "32", "longest period tested"),
                key("period_window", "256", "trailing entries tested for periodicity"),
            ]);
            v
        }
        "sweep-homsd" => {
            let mut v = grid_keys();
            v.extend([
                key("eps", "1e-4", "separatrix seed offset (scaled units)"),
                key("timeout", "5e4", "flight time after which a cell fails (ms)"),
            ]);
            v
        }
        "scan-theta" => vec![
            key("dCa_lo", "-37", "first dCa value (mV)"),
            key("dCa_hi", "-35", "last dCa value (mV)"),
            key("dCa_n", "200", "number of dCa values"),
            key("theta_n", "100", "angles on the circle"),
            key("dVx", "-1.1", "x half-activation shift (mV)"),
            TAU_X,
            key("eps", "1e-4", "circle radius (scaled units)"),
            key("clip", "1", "distance ceiling"),
            key("timeout", "5e5", "flight time after which a cell fails (ms)"),
        ],
        "sweep-isi-1d" => vec![
            key("dCa_lo", "-37", "first dCa value (mV)"),
            key("dCa_hi", "-35", "last dCa value (mV)"),
            key("dCa_n", "200", "number of dCa values"),
            key("dVx", "-1.1", "x half-activation shift (mV)"),
            TAU_X,
            key("seed", "sweep", "sweep or V,h,n,x,Ca"),
            key("t_warmup", "1e4", "relaxation before the first value (ms)"),
            key("t_transient", "5e3", "discarded at every value (ms)"),
            key("t_record", "5e4", "recorded at every value (ms)"),
        ],
        _ => Vec::new(),
    };
    match command {
        "trace" | "returnmap" | "sweep-homsd" | "scan-theta" | "sweep-isi-1d" => {
            let step = if matches!(command, "trace" | "returnmap") { "1" } else { "5" };
            k.extend(integrator_keys("1e-8", step));
        }
        "lyapunov" => k.extend(integrator_keys("1e-6", "1")),
        "sweep-lyapunov" => k.extend(integrator_keys("1e-6", "10")),
        "sweep-isi-lz" => k.extend(integrator_keys("1e-6", "5")),
        _ => {}
    }
    k
}

/// Defaults replaced by the production preset.
fn paper_overrides(command: &str) -> &'static [(&'static str, &'static str)] {
    match command {
        "sweep-lyapunov" => &[
            ("dCa_n", "1000"),
            ("dVx_n", "1000"),
            ("t_total", "1e6"),
            ("renorm", "0.1"),
            ("max_step", "1"),
        ],
        "sweep-isi-lz" | "sweep-homsd" => &[("dCa_n", "1000"), ("dVx_n", "1000")],
        "lyapunov" => &[("t_total", "1e6"), ("renorm", "0.1")],
        _ => &[],
    }
}

/// Keys of a config or meta file that are not job keys.
const RESERVED: &[&str] = &["command", "preset", "code_version"];
const DERIVED_PREFIX: &str = "resolved.";

/// Fully resolved job.
#[derive(Debug, Clone)]
pub struct Job {
    pub command: String,
    pub preset: Preset,
    pub values: BTreeMap<String, String>,
}

impl Job {
    /// Merge defaults, then `config`, then `flags`; later sources win.
    pub fn resolve(
        command: &str,
        preset_flag: Option<&str>,
        config: Option<&str>,
        flags: &[(String, String)],
    ) -> Result<Self, Failure> {
        let table = keys(command);
        let file = match config {
            Some(text) => read_key_values(text).map_err(|e| Failure::Usage(format!("--config: {e}")))?,
            None => BTreeMap::new(),
        };
        if let Some(c) = file.get("command") {
            if c != command {
                return Err(Failure::Usage(format!(
                    "--config: file is for command {c:?}, not {command:?}"
                )));
            }
        }
        let preset = match (preset_flag, file.get("preset")) {
            (Some(p), _) => Preset::parse(p)?,
            (None, Some(p)) => Preset::parse(p)?,
            (None, None) => Preset::Desk,
        };
        let mut values: BTreeMap<String, String> = table
            .iter()
            .map(|k| (k.name.to_string(), k.default.to_string()))
            .collect();
        if preset == Preset::Paper {
            for (k, v) in paper_overrides(command) {
                values.insert(k.to_string(), v.to_string());
            }
        }
        for (k, v) in &file {
            if RESERVED.contains(&k.as_str()) || k.starts_with(DERIVED_PREFIX) {
                continue;
            }
            if !values.contains_key(k) {
                return Err(Failure::Usage(format!(
                    "--config: unknown key {k:?} for {command}"
                )));
            }
            values.insert(k.clone(), v.clone());
        }
        for (k, v) in flags {
            values.insert(k.clone(), v.clone());
        }
        Ok(Self {
            command: command.to_string(),
            preset,
            values,
        })
    }

    fn raw(&self, name: &str) -> &str {
        self.values.get(name).map_or("", String::as_str)
    }

    fn bad(name: &str, v: &str, what: &str) -> Failure {
        Failure::Usage(format!("--{name}: expected {what}, got {v:?}"))
    }

    pub fn f64(&self, name: &str) -> Result<f64, Failure> {
        let v = self.raw(name);
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Self::bad(name, v, "a finite number"))
    }

    pub fn usize(&self, name: &str) -> Result<usize, Failure> {
        let v = self.raw(name);
        v.trim().parse::<usize>().map_err(|_| Self::bad(name, v, "a non-negative integer"))
    }

    /// `None` when the value is empty.
    pub fn opt_f64(&self, name: &str) -> Result<Option<f64>, Failure> {
        if self.raw(name).trim().is_empty() {
            Ok(None)
        } else {
            self.f64(name).map(Some)
        }
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        let v = self.raw(name).trim();
        (!v.is_empty()).then_some(v)
    }

    pub fn str(&self, name: &str) -> &str {
        self.raw(name).trim()
    }

    /// `sweep` (the fixed sweep seed), `sd`, or five comma-separated values.
    pub fn seed(&self) -> Result<SeedSpec, Failure> {
        let v = self.str("seed");
        match v {
            "sweep" => Ok(SeedSpec::Sweep),
            "sd" => Ok(SeedSpec::Separatrix),
            _ => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| Self::bad("seed", v, "sweep, sd or V,h,n,x,Ca"))?;
                let arr: [f64; 5] = parts
                    .try_into()
                    .map_err(|_| Self::bad("seed", v, "five comma-separated values"))?;
                Ok(SeedSpec::State(State5::from_array(arr)))
            }
        }
    }

    /// Contents of the meta sidecar; loadable again with `--config`.
    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = self.values.clone();
        m.insert("command".into(), self.command.clone());
        m.insert("preset".into(), self.preset.label().into());
        m.insert("code_version".into(), env!("CARGO_PKG_VERSION").into());
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedSpec {
    Sweep,
    Separatrix,
    State(State5),
}

/// Prefix marking derived entries in a meta file.
pub fn derived_key(k: &str) -> String {
    format!("{DERIVED_PREFIX}{k}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_command_has_unique_keys() {
        for c in COMMANDS {
            let ks = keys(c);
            assert!(!ks.is_empty(), "{c}");
            let mut names: Vec<_> = ks.iter().map(|k| k.name).collect();
            names.sort_unstable();
            let n = names.len();
            names.dedup();
            assert_eq!(n, names.len(), "{c}");
            for (k, _) in paper_overrides(c) {
                assert!(ks.iter().any(|x| x.name == *k), "{c}: {k}");
            }
        }
    }

    #[test]
    fn flags_override_config_override_defaults() {
        let cfg = "dCa_n=7\ndVx_n=9\n";
        let flags = vec![("dVx_n".to_string(), "3".to_string())];
        let j = Job::resolve("sweep-homsd", None, Some(cfg), &flags).unwrap();
        assert_eq!(j.usize("dCa_n").unwrap(), 7);
        assert_eq!(j.usize("dVx_n").unwrap(), 3);
        assert_eq!(j.f64("eps").unwrap(), 1e-4);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let e = Job::resolve("trace", None, Some("bogus=1\n"), &[]).unwrap_err();
        assert!(matches!(e, Failure::Usage(m) if m.contains("bogus")));
    }

    #[test]
    fn paper_preset_sets_production_values() {
        let j = Job::resolve("sweep-lyapunov", Some("paper"), None, &[]).unwrap();
        assert_eq!(j.usize("dCa_n").unwrap(), 1000);
        assert_eq!(j.usize("dVx_n").unwrap(), 1000);
        assert_eq!(j.f64("t_total").unwrap(), 1e6);
        assert_eq!(j.f64("t_transient").unwrap(), 1e4);
        assert_eq!(j.f64("renorm").unwrap(), 0.1);
        assert_eq!(j.f64("tol").unwrap(), 1e-6);
        assert_eq!(j.f64("dt").unwrap(), 0.1);
    }

    #[test]
    fn meta_round_trips_through_config() {
        let flags = vec![("dCa".to_string(), "-12.5".to_string())];
        let j = Job::resolve("lyapunov", Some("paper"), None, &flags).unwrap();
        let text: String = j
            .meta()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .chain(std::iter::once(format!("{}=x\n", derived_key("anything"))))
            .collect();
        let back = Job::resolve("lyapunov", None, Some(&text), &[]).unwrap();
        assert_eq!(back.values, j.values);
        assert_eq!(back.preset, Preset::Paper);
    }

    #[test]
    fn bad_values_name_the_flag() {
        let flags = vec![("tol".to_string(), "abc".to_string())];
        let j = Job::resolve("trace", None, None, &flags).unwrap();
        assert!(matches!(j.f64("tol"), Err(Failure::Usage(m)) if m.starts_with("--tol")));
    }
}
