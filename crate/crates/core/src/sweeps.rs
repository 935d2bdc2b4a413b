//! Parameter-grid engines.
//!
//! Cells are pure functions of their parameters and are evaluated in
//! parallel chunks; results are always stored in row-major order (axis 2
//! index major, axis 1 index minor). A checkpoint file receives every
//! finished chunk so an interrupted sweep can resume where it stopped.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::equilibria::{
    find_equilibria, focus_circle_point, lower_equilibrium, unstable_directions, upper_saddle,
    Classification, UnstableDirections, SEED_EPSILON,
};
use crate::error::{Error, Result};
use crate::integrator::{detector_vmax, integrate, EventKind, IntegratorConfig};
use crate::io::{fmt_f64, parse_f64, write_meta};
use crate::lyapunov::{lyapunov_spectrum, LyapunovConfig};
use crate::model::{ModelParams, State5};
use crate::symbolic::{eventual_period, lz76, sscs_from_trajectory};

/// Fixed initial state for every Lyapunov and ISI cell.
pub const SWEEP_SEED: State5 = State5::new(-50.0, 0.5, 0.1, 0.7, 0.9);

/// Spike threshold (mV) where no upper saddle exists.
pub const FALLBACK_SPIKE_THRESHOLD: f64 = -30.0;

/// Ceiling of the slow-plane distance recorded by the theta scan.
pub const THETA_DISTANCE_CLIP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
            n,
        }
    }

    /// `lo (1 - t) + hi t` with `t = i / (n - 1)`, exact at both ends; `lo` when `n == 1`.
    pub fn value(&self, i: usize) -> f64 {
        if self.n <= 1 {
            self.lo
        } else {
            let t = i as f64 / (self.n - 1) as f64;
            self.lo * (1.0 - t) + self.hi * t
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "axis {} needs n >= 1 and finite bounds",
                self.name
            )));
        }
        Ok(())
    }
}

/// Axis 1 is `dCa`, axis 2 is `dVx` unless a sweep says otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axis1: Axis,
    pub axis2: Option<Axis>,
}

impl GridSpec {
    pub fn new(dca: (f64, f64, usize), dvx: (f64, f64, usize)) -> Self {
        Self {
            axis1: Axis::new("dCa", dca.0, dca.1, dca.2),
            axis2: Some(Axis::new("dVx", dvx.0, dvx.1, dvx.2)),
        }
    }

    pub fn n1(&self) -> usize {
        self.axis1.n
    }

    pub fn n2(&self) -> usize {
        self.axis2.as_ref().map_or(1, |a| a.n)
    }

    pub fn len(&self) -> usize {
        self.n1() * self.n2()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis values of row-major cell `k`.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.n1(), k / self.n1());
        let v2 = self.axis2.as_ref().map_or(f64::NAN, |a| a.value(j));
        (self.axis1.value(i), v2)
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        if let Some(a) = &self.axis2 {
            a.validate()?;
        }
        Ok(())
    }

    fn describe(&self, meta: &mut BTreeMap<String, String>) {
        for (key, axis) in [("axis1", Some(&self.axis1)), ("axis2", self.axis2.as_ref())] {
            if let Some(a) = axis {
                meta.insert(format!("{key}.name"), a.name.clone());
                meta.insert(format!("{key}.lo"), fmt_f64(a.lo));
                meta.insert(format!("{key}.hi"), fmt_f64(a.hi));
                meta.insert(format!("{key}.n"), a.n.to_string());
            }
        }
    }
}

/// Result of one cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome<T> {
    Ok(T),
    /// The cell was attempted and failed (integration error, timeout).
    Failed(String),
    /// The cell's precondition does not hold (e.g. no saddle).
    Skipped(String),
}

impl<T> CellOutcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            CellOutcome::Ok(v) => Some(v),
            _ => None,
        }
    }

    pub fn status(&self) -> String {
        match self {
            CellOutcome::Ok(_) => "ok".into(),
            CellOutcome::Failed(r) => format!("failed:{r}"),
            CellOutcome::Skipped(r) => format!("skipped:{r}"),
        }
    }
}

/// Per-cell record with a lossless text form.
pub trait CellRecord: Sized + Clone + Send + Sync {
    /// Names of the numeric output fields.
    const FIELDS: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(f: &[&str]) -> Result<Self>;
    /// Numeric value of field `k` for matrices and images.
    fn field(&self, k: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Append finished cells here and skip cells already present.
    pub checkpoint: Option<PathBuf>,
    /// Stop with `Interrupted` once this many cells are complete.
    pub stop_after: Option<usize>,
    /// Cells per checkpoint flush.
    pub chunk: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            workers: None,
            checkpoint: None,
            stop_after: None,
            chunk: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid<T> {
    pub kind: String,
    pub spec: GridSpec,
    /// Row-major, `spec.len()` entries.
    pub cells: Vec<CellOutcome<T>>,
    /// Resolved configuration of the run.
    pub config: BTreeMap<String, String>,
    pub wall_time: f64,
}

/// Cell tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Progress {
    pub succeeded: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl<T: CellRecord> SweepGrid<T> {
    pub fn get(&self, i: usize, j: usize) -> &CellOutcome<T> {
        &self.cells[j * self.spec.n1() + i]
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress::default();
        for c in &self.cells {
            match c {
                CellOutcome::Ok(_) => p.succeeded += 1,
                CellOutcome::Failed(_) => p.failed += 1,
                CellOutcome::Skipped(_) => p.skipped += 1,
            }
        }
        p
    }

    /// Row-major values of one field; NaN where the cell is not `Ok`.
    pub fn field_values(&self, name: &str) -> Result<Vec<f64>> {
        let k = T::FIELDS
            .iter()
            .position(|f| *f == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown field {name}")))?;
        Ok(self
            .cells
            .iter()
            .map(|c| c.ok().map_or(f64::NAN, |v| v.field(k)))
            .collect())
    }

    /// Sidecar contents: configuration, axes and tallies. Wall time is kept
    /// out so that reruns produce identical files.
    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = self.config.clone();
        m.insert("sweep".into(), self.kind.clone());
        m.insert("code_version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("layout".into(), "row-major; row j = axis2[j], column i = axis1[i]".into());
        self.spec.describe(&mut m);
        let p = self.progress();
        m.insert("cells.succeeded".into(), p.succeeded.to_string());
        m.insert("cells.failed".into(), p.failed.to_string());
        m.insert("cells.skipped".into(), p.skipped.to_string());
        m
    }

    /// Write `<field>.csv` matrices, `status.csv`, `cells.csv`, `meta.txt`
    /// and `timing.txt` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let (n1, n2) = (self.spec.n1(), self.spec.n2());
        for name in T::FIELDS {
            let vals = self.field_values(name)?;
            let mut w = BufWriter::new(File::create(dir.join(format!("{name}.csv")))?);
            for j in 0..n2 {
                let row: Vec<String> = (0..n1).map(|i| fmt_f64(vals[j * n1 + i])).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            w.flush()?;
        }
        let mut w = BufWriter::new(File::create(dir.join("status.csv"))?);
        for j in 0..n2 {
            let row: Vec<String> = (0..n1).map(|i| self.get(i, j).status()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        self.write_cells_csv(BufWriter::new(File::create(dir.join("cells.csv"))?))?;
        write_meta(&dir.join("meta.txt"), &self.meta())?;
        std::fs::write(dir.join("timing.txt"), format!("wall_time_s={}\n", fmt_f64(self.wall_time)))?;
        Ok(())
    }

    /// Long-form CSV: one row per cell with axis values, status and fields.
    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let a2 = self.spec.axis2.as_ref().map_or("axis2", |a| a.name.as_str());
        writeln!(w, "{},{},status,{}", self.spec.axis1.name, a2, T::FIELDS.join(","))?;
        for (k, c) in self.cells.iter().enumerate() {
            let (v1, v2) = self.spec.coords(k);
            let fields = match c {
                CellOutcome::Ok(v) => v.to_fields(),
                _ => vec!["NaN".to_string(); T::FIELDS.len()],
            };
            writeln!(w, "{},{},{},{}", fmt_f64(v1), fmt_f64(v2), c.status(), fields.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn outcome_line<T: CellRecord>(k: usize, c: &CellOutcome<T>) -> String {
    match c {
        CellOutcome::Ok(v) => format!("{k},ok,{}", v.to_fields().join(",")),
        CellOutcome::Failed(r) => format!("{k},failed,{}", r.replace([',', '\n'], " ")),
        CellOutcome::Skipped(r) => format!("{k},skipped,{}", r.replace([',', '\n'], " ")),
    }
}

fn parse_outcome<T: CellRecord>(line: &str) -> Result<(usize, CellOutcome<T>)> {
    let mut parts = line.splitn(3, ',');
    let bad = || Error::Parse(format!("checkpoint line {line:?}"));
    let k: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let tag = parts.next().ok_or_else(bad)?;
    let rest = parts.next().unwrap_or("");
    let c = match tag {
        "ok" => CellOutcome::Ok(T::from_fields(&rest.split(',').collect::<Vec<_>>())?),
        "failed" => CellOutcome::Failed(rest.to_string()),
        "skipped" => CellOutcome::Skipped(rest.to_string()),
        _ => return Err(bad()),
    };
    Ok((k, c))
}

fn checkpoint_header(kind: &str, n: usize, config: &BTreeMap<String, String>) -> Vec<String> {
    let mut h = vec![format!("# sweep={kind} cells={n}")];
    h.extend(config.iter().map(|(k, v)| format!("# {k}={v}")));
    h
}

fn load_checkpoint<T: CellRecord>(
    path: &Path,
    header: &[String],
) -> Result<HashMap<usize, CellOutcome<T>>> {
    let mut done = HashMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let found: Vec<&String> = lines.iter().take_while(|l| l.starts_with('#')).collect();
    if found.len() != header.len() || found.iter().zip(header).any(|(a, b)| *a != b) {
        return Err(Error::InvalidArgument(format!(
            "checkpoint {} belongs to a different sweep configuration",
            path.display()
        )));
    }
    for l in lines.iter().skip(header.len()).filter(|l| !l.trim().is_empty()) {
        // A torn final line from an interrupted write is dropped.
        if let Ok((k, c)) = parse_outcome::<T>(l) {
            done.insert(k, c);
        }
    }
    Ok(done)
}

/// Evaluate `cell(k)` for every row-major index of `spec`.
pub fn run_grid<T, F>(
    kind: &str,
    spec: &GridSpec,
    config: BTreeMap<String, String>,
    opts: &SweepOptions,
    cell: F,
) -> Result<SweepGrid<T>>
where
    T: CellRecord,
    F: Fn(usize) -> CellOutcome<T> + Sync,
{
    spec.validate()?;
    let start = Instant::now();
    let n = spec.len();
    let header = checkpoint_header(kind, n, &config);
    let mut done: HashMap<usize, CellOutcome<T>> = match &opts.checkpoint {
        Some(p) => load_checkpoint(p, &header)?,
        None => HashMap::new(),
    };
    let mut sink = match &opts.checkpoint {
        Some(p) => {
            let fresh = !p.exists() || std::fs::metadata(p)?.len() == 0;
            let mut f = BufWriter::new(OpenOptions::new().create(true).append(true).open(p)?);
            if fresh {
                for h in &header {
                    writeln!(f, "{h}")?;
                }
                f.flush()?;
            }
            Some(f)
        }
        None => None,
    };
    let todo: Vec<usize> = (0..n).filter(|k| !done.contains_key(k)).collect();
    let pool = match opts.workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        ),
        None => None,
    };
    let chunk = opts.chunk.max(1);
    for block in todo.chunks(chunk) {
        let eval = || -> Vec<(usize, CellOutcome<T>)> {
            block.par_iter().map(|&k| (k, cell(k))).collect()
        };
        let results = match &pool {
            Some(p) => p.install(eval),
            None => eval(),
        };
        if let Some(f) = sink.as_mut() {
            for (k, c) in &results {
                writeln!(f, "{}", outcome_line(*k, c))?;
            }
            f.flush()?;
        }
        done.extend(results);
        if let Some(limit) = opts.stop_after {
            if done.len() >= limit && done.len() < n {
                return Err(Error::Interrupted {
                    completed: done.len(),
                });
            }
        }
    }
    let cells = (0..n)
        .map(|k| done.remove(&k).expect("every cell evaluated"))
        .collect();
    Ok(SweepGrid {
        kind: kind.to_string(),
        spec: spec.clone(),
        cells,
        config,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Adaptive integrator for event-counting sweeps: 5 ms step ceiling.
pub fn event_integrator(tol: f64) -> IntegratorConfig {
    IntegratorConfig {
        max_step: 5.0,
        ..IntegratorConfig::adaptive(tol, 1e4)
    }
}

fn params_at(base: &ModelParams, dca: f64, dvx: f64) -> ModelParams {
    ModelParams { dca, dvx, ..*base }
}

fn integrator_meta(prefix: &str, c: &IntegratorConfig, m: &mut BTreeMap<String, String>) {
    let method = match c.method {
        crate::integrator::Method::AdaptiveRk45 => "rk45",
        crate::integrator::Method::FixedRk4 => "rk4",
    };
    m.insert(format!("{prefix}.method"), method.into());
    m.insert(format!("{prefix}.abs_tol"), fmt_f64(c.abs_tol));
    m.insert(format!("{prefix}.rel_tol"), fmt_f64(c.rel_tol));
    m.insert(format!("{prefix}.dt"), fmt_f64(c.dt));
    m.insert(format!("{prefix}.max_step"), fmt_f64(c.max_step));
    m.insert(format!("{prefix}.t_max"), fmt_f64(c.t_max));
    m.insert(format!("{prefix}.event_refine_tol"), fmt_f64(c.event_refine_tol));
}

fn params_meta(p: &ModelParams, m: &mut BTreeMap<String, String>) {
    for (k, v) in [
        ("c_m", p.c_m),
        ("g_i", p.g_i),
        ("g_k", p.g_k),
        ("g_l", p.g_l),
        ("g_t", p.g_t),
        ("g_kca", p.g_kca),
        ("e_i", p.e_i),
        ("e_k", p.e_k),
        ("e_l", p.e_l),
        ("e_ca", p.e_ca),
        ("rho", p.rho),
        ("k_c", p.k_c),
        ("tau_x", p.tau_x),
    ] {
        m.insert(format!("model.{k}"), fmt_f64(v));
    }
}

fn state_meta(key: &str, s: &State5, m: &mut BTreeMap<String, String>) {
    let v: Vec<String> = s.to_array().iter().map(|x| fmt_f64(*x)).collect();
    m.insert(key.into(), v.join(" "));
}

fn parse_fields<const K: usize>(f: &[&str]) -> Result<[f64; K]> {
    if f.len() != K {
        return Err(Error::Parse(format!("expected {K} fields, found {}", f.len())));
    }
    let mut out = [0.0; K];
    for (o, s) in out.iter_mut().zip(f) {
        *o = parse_f64(s)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------- Lyapunov

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCell {
    pub exponents: [f64; 5],
    /// NaN when undefined.
    pub dim_l: f64,
    pub converged: bool,
}

impl CellRecord for LyapunovCell {
    const FIELDS: &'static [&'static str] = &["l1", "l2", "l3", "l4", "l5", "dimL", "converged"];

    fn to_fields(&self) -> Vec<String> {
        let mut v: Vec<String> = self.exponents.iter().map(|x| fmt_f64(*x)).collect();
        v.push(fmt_f64(self.dim_l));
        v.push(u8::from(self.converged).to_string());
        v
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        let x: [f64; 7] = parse_fields(f)?;
        Ok(Self {
            exponents: [x[0], x[1], x[2], x[3], x[4]],
            dim_l: x[5],
            converged: x[6] != 0.0,
        })
    }

    fn field(&self, k: usize) -> f64 {
        match k {
            0..=4 => self.exponents[k],
            5 => self.dim_l,
            _ => f64::from(u8::from(self.converged)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSweepConfig {
    pub params: ModelParams,
    pub seed: State5,
    pub lyapunov: LyapunovConfig,
}

impl Default for LyapunovSweepConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl LyapunovSweepConfig {
    /// Desk protocol: 1e4 ms transient, 1e5 ms average, frames
    /// re-orthonormalized every 10 ms, tolerance 1e-6.
    pub fn desk() -> Self {
        let lyapunov = LyapunovConfig {
            t_transient: 1e4,
            t_total: 1e5,
            renorm_interval: 10.0,
            integrator: IntegratorConfig {
                max_step: 10.0,
                ..IntegratorConfig::adaptive(1e-6, 1e4)
            },
            ..LyapunovConfig::default()
        };
        Self {
            params: ModelParams::new(0.0, 0.0),
            seed: SWEEP_SEED,
            lyapunov,
        }
    }

    /// Production protocol: 1e4 ms transient, 1e6 ms average, frames
    /// re-orthonormalized every 0.1 ms, tolerance 1e-6.
    pub fn paper() -> Self {
        let mut c = Self::desk();
        c.lyapunov.t_total = 1e6;
        c.lyapunov.renorm_interval = 0.1;
        c.lyapunov.integrator = IntegratorConfig::adaptive(1e-6, 1e4);
        c
    }

    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        params_meta(&self.params, &mut m);
        state_meta("seed", &self.seed, &mut m);
        let l = &self.lyapunov;
        m.insert("lyapunov.t_transient".into(), fmt_f64(l.t_transient));
        m.insert("lyapunov.t_total".into(), fmt_f64(l.t_total));
        m.insert("lyapunov.renorm_interval".into(), fmt_f64(l.renorm_interval));
        m.insert("lyapunov.checkpoints".into(), l.checkpoints.to_string());
        integrator_meta("integrator", &l.integrator, &mut m);
        m
    }
}

pub fn lyapunov_cell(p: &ModelParams, cfg: &LyapunovSweepConfig) -> CellOutcome<LyapunovCell> {
    match lyapunov_spectrum(&cfg.seed, p, &cfg.lyapunov) {
        Ok(r) => CellOutcome::Ok(LyapunovCell {
            exponents: r.exponents,
            dim_l: r.dim_l.unwrap_or(f64::NAN),
            converged: r.converged,
        }),
        Err(e) => CellOutcome::Failed(e.to_string()),
    }
}

pub fn sweep_lyapunov(
    spec: &GridSpec,
    cfg: &LyapunovSweepConfig,
    opts: &SweepOptions,
) -> Result<SweepGrid<LyapunovCell>> {
    cfg.lyapunov.validate()?;
    run_grid("lyapunov", spec, cfg.meta(), opts, |k| {
        let (dca, dvx) = spec.coords(k);
        lyapunov_cell(&params_at(&cfg.params, dca, dvx), cfg)
    })
}

// ------------------------------------------------------------ ISI and LZ76

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// No spikes after the transient.
    Quiescent,
    /// Spikes but no completed burst.
    Tonic,
    /// Signed spike counts eventually periodic.
    Periodic,
    Chaotic,
}

impl Regime {
    pub fn code(self) -> u8 {
        match self {
            Regime::Quiescent => 0,
            Regime::Tonic => 1,
            Regime::Periodic => 2,
            Regime::Chaotic => 3,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Regime::Quiescent,
            1 => Regime::Tonic,
            2 => Regime::Periodic,
            3 => Regime::Chaotic,
            _ => return Err(Error::Parse(format!("regime code {c}"))),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Quiescent => "quiescent",
            Regime::Tonic => "tonic",
            Regime::Periodic => "periodic",
            Regime::Chaotic => "chaotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsiLzCell {
    pub spikes: usize,
    /// NaN with fewer than two spikes.
    pub isi_mean: f64,
    /// NaN with fewer than three spikes.
    pub isi_variance: f64,
    pub sscs_len: usize,
    pub lz76: usize,
    /// 0 when not eventually periodic.
    pub period: usize,
    pub regime: Regime,
}

impl CellRecord for IsiLzCell {
    const FIELDS: &'static [&'static str] = &[
        "spikes",
        "isi_mean",
        "isi_variance",
        "sscs_len",
        "lz76",
        "period",
        "regime",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.spikes.to_string(),
            fmt_f64(self.isi_mean),
            fmt_f64(self.isi_variance),
            self.sscs_len.to_string(),
            self.lz76.to_string(),
            self.period.to_string(),
            self.regime.code().to_string(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        if f.len() != 7 {
            return Err(Error::Parse("isi cell needs 7 fields".into()));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        Ok(Self {
            spikes: int(f[0])?,
            isi_mean: parse_f64(f[1])?,
            isi_variance: parse_f64(f[2])?,
            sscs_len: int(f[3])?,
            lz76: int(f[4])?,
            period: int(f[5])?,
            regime: Regime::from_code(int(f[6])? as u8)?,
        })
    }

    fn field(&self, k: usize) -> f64 {
        match k {
            0 => self.spikes as f64,
            1 => self.isi_mean,
            2 => self.isi_variance,
            3 => self.sscs_len as f64,
            4 => self.lz76 as f64,
            5 => self.period as f64,
            _ => f64::from(self.regime.code()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsiLzConfig {
    pub params: ModelParams,
    pub seed: State5,
    pub t_transient: f64,
    /// Recording horizon after the transient (ms).
    pub t_record: f64,
    /// Recording also stops after this many signed spike counts.
    pub max_entries: usize,
    pub max_period: usize,
    pub period_window: usize,
    pub integrator: IntegratorConfig,
}

impl Default for IsiLzConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(0.0, 0.0),
            seed: SWEEP_SEED,
            t_transient: 1e4,
            t_record: 2e5,
            max_entries: 256,
            max_period: 32,
            period_window: 256,
            integrator: event_integrator(1e-6),
        }
    }
}

impl IsiLzConfig {
    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        params_meta(&self.params, &mut m);
        state_meta("seed", &self.seed, &mut m);
        m.insert("isi.t_transient".into(), fmt_f64(self.t_transient));
        m.insert("isi.t_record".into(), fmt_f64(self.t_record));
        m.insert("isi.max_entries".into(), self.max_entries.to_string());
        m.insert("isi.max_period".into(), self.max_period.to_string());
        m.insert("isi.period_window".into(), self.period_window.to_string());
        integrator_meta("integrator", &self.integrator, &mut m);
        m
    }
}

/// Spike threshold at `p`: the upper-saddle voltage, or the fallback.
pub fn spike_threshold(p: &ModelParams) -> f64 {
    find_equilibria(p)
        .ok()
        .and_then(|eqs| upper_saddle(&eqs).map(|e| e.state.v))
        .unwrap_or(FALLBACK_SPIKE_THRESHOLD)
}

/// Relax from `s0` for `t` ms and return the final state.
pub fn relax(s0: &State5, p: &ModelParams, cfg: &IntegratorConfig, t: f64) -> Result<State5> {
    if t <= 0.0 {
        return Ok(*s0);
    }
    let c = IntegratorConfig { t_max: t, ..*cfg };
    Ok(integrate(s0, p, &c, &[], |_| false)?.final_state)
}

/// Mean and sample variance of consecutive differences of `times`.
pub fn isi_stats(times: &[f64]) -> (f64, f64) {
    let isi: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if isi.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = isi.iter().sum::<f64>() / isi.len() as f64;
    if isi.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = isi.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (isi.len() - 1) as f64;
    (mean, var)
}

pub fn isi_lz_cell(p: &ModelParams, cfg: &IsiLzConfig) -> CellOutcome<IsiLzCell> {
    let run = || -> Result<IsiLzCell> {
        let v_sd = spike_threshold(p);
        let s = relax(&cfg.seed, p, &cfg.integrator, cfg.t_transient)?;
        let icfg = IntegratorConfig {
            t_max: cfg.t_record,
            ..cfg.integrator
        };
        let (sscs, run) = sscs_from_trajectory(&s, p, &icfg, v_sd, Some(cfg.max_entries))?;
        let times: Vec<f64> = run
            .events
            .iter()
            .filter(|e| e.kind == EventKind::VMaxAbove)
            .map(|e| e.t)
            .collect();
        let (isi_mean, isi_variance) = isi_stats(&times);
        let period = eventual_period(&sscs, cfg.max_period, cfg.period_window);
        let regime = if times.is_empty() {
            Regime::Quiescent
        } else if sscs.iter().all(|&c| c == 0) {
            Regime::Tonic
        } else if period.is_some() {
            Regime::Periodic
        } else {
            Regime::Chaotic
        };
        Ok(IsiLzCell {
            spikes: times.len(),
            isi_mean,
            isi_variance,
            sscs_len: sscs.len(),
            lz76: lz76(&sscs),
            period: period.unwrap_or(0),
            regime,
        })
    };
    match run() {
        Ok(c) => CellOutcome::Ok(c),
        Err(e) => CellOutcome::Failed(e.to_string()),
    }
}

pub fn sweep_isi_lz(spec: &GridSpec, cfg: &IsiLzConfig, opts: &SweepOptions) -> Result<SweepGrid<IsiLzCell>> {
    cfg.integrator.validate()?;
    run_grid("isi_lz", spec, cfg.meta(), opts, |k| {
        let (dca, dvx) = spec.coords(k);
        isi_lz_cell(&params_at(&cfg.params, dca, dvx), cfg)
    })
}

// ------------------------------------------------------ upper-saddle count

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HomsdCell {
    pub spikes: u32,
}

impl CellRecord for HomsdCell {
    const FIELDS: &'static [&'static str] = &["spikes"];

    fn to_fields(&self) -> Vec<String> {
        vec![self.spikes.to_string()]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        match f {
            [s] => Ok(Self {
                spikes: s.parse().map_err(|e| Error::Parse(format!("{s:?}: {e}")))?,
            }),
            _ => Err(Error::Parse("homsd cell needs 1 field".into())),
        }
    }

    fn field(&self, _k: usize) -> f64 {
        f64::from(self.spikes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomsdConfig {
    pub params: ModelParams,
    /// Seed offset from the saddle in scaled units.
    pub eps: f64,
    /// Flight time after which the cell fails (ms).
    pub timeout: f64,
    pub integrator: IntegratorConfig,
}

impl Default for HomsdConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(0.0, 0.0),
            eps: SEED_EPSILON,
            timeout: 5e4,
            integrator: event_integrator(1e-8),
        }
    }
}

impl HomsdConfig {
    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        params_meta(&self.params, &mut m);
        m.insert("homsd.eps".into(), fmt_f64(self.eps));
        m.insert("homsd.timeout".into(), fmt_f64(self.timeout));
        integrator_meta("integrator", &self.integrator, &mut m);
        m
    }
}

/// Spikes along the lower unstable separatrix of the upper saddle before the
/// first voltage maximum below the saddle voltage.
pub fn homsd_cell(p: &ModelParams, cfg: &HomsdConfig) -> CellOutcome<HomsdCell> {
    let eqs = match find_equilibria(p) {
        Ok(e) => e,
        Err(e) => return CellOutcome::Failed(e.to_string()),
    };
    let Some(sd) = upper_saddle(&eqs) else {
        return CellOutcome::Skipped("no_saddle".into());
    };
    let beneath = match unstable_directions(sd, cfg.eps) {
        Ok(UnstableDirections::Separatrix { beneath, .. }) => beneath,
        Ok(_) => return CellOutcome::Skipped("no_saddle".into()),
        Err(e) => return CellOutcome::Failed(e.to_string()),
    };
    let icfg = IntegratorConfig {
        t_max: cfg.timeout,
        ..cfg.integrator
    };
    let mut spikes = 0u32;
    let run = integrate(&beneath, p, &icfg, &[detector_vmax(sd.state.v)], |ev| match ev.kind {
        EventKind::VMaxAbove => {
            spikes += 1;
            false
        }
        EventKind::VMaxBelow => true,
        _ => false,
    });
    match run {
        Ok(r) if r.stopped => CellOutcome::Ok(HomsdCell { spikes }),
        Ok(_) => CellOutcome::Failed("timeout".into()),
        Err(e) => CellOutcome::Failed(e.to_string()),
    }
}

pub fn sweep_homsd(spec: &GridSpec, cfg: &HomsdConfig, opts: &SweepOptions) -> Result<SweepGrid<HomsdCell>> {
    cfg.integrator.validate()?;
    run_grid("homsd", spec, cfg.meta(), opts, |k| {
        let (dca, dvx) = spec.coords(k);
        homsd_cell(&params_at(&cfg.params, dca, dvx), cfg)
    })
}

// --------------------------------------------------------------- theta scan

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaScanCell {
    pub theta: f64,
    pub dca: f64,
    pub spikes: u32,
    /// Slow-plane distance from the saddle-focus, clipped at the ceiling.
    pub distance: f64,
}

impl CellRecord for ThetaScanCell {
    const FIELDS: &'static [&'static str] = &["theta", "dCa", "spikes", "distance"];

    fn to_fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.theta),
            fmt_f64(self.dca),
            self.spikes.to_string(),
            fmt_f64(self.distance),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        let x: [f64; 4] = parse_fields(f)?;
        Ok(Self {
            theta: x[0],
            dca: x[1],
            spikes: x[2] as u32,
            distance: x[3],
        })
    }

    fn field(&self, k: usize) -> f64 {
        match k {
            0 => self.theta,
            1 => self.dca,
            2 => f64::from(self.spikes),
            _ => self.distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaScanConfig {
    pub params: ModelParams,
    /// Circle radius in scaled units.
    pub eps: f64,
    pub clip: f64,
    pub timeout: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ThetaScanConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(0.0, -1.1),
            eps: SEED_EPSILON,
            clip: THETA_DISTANCE_CLIP,
            timeout: 5e5,
            integrator: event_integrator(1e-8),
        }
    }
}

impl ThetaScanConfig {
    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        params_meta(&self.params, &mut m);
        m.insert("theta.dVx".into(), fmt_f64(self.params.dvx));
        m.insert("theta.eps".into(), fmt_f64(self.eps));
        m.insert("theta.clip".into(), fmt_f64(self.clip));
        m.insert("theta.timeout".into(), fmt_f64(self.timeout));
        integrator_meta("integrator", &self.integrator, &mut m);
        m
    }
}

/// Geometry shared by all angles at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusSetup {
    pub sf: State5,
    pub dirs: UnstableDirections,
    pub v_sd: f64,
}

pub fn focus_setup(p: &ModelParams, eps: f64) -> Result<FocusSetup> {
    let eqs = find_equilibria(p)?;
    let sf = lower_equilibrium(&eqs)
        .filter(|e| e.classification == Classification::SaddleFocus32)
        .ok_or(Error::NoSaddleFocus {
            dca: p.dca,
            dvx: p.dvx,
        })?;
    let sd = upper_saddle(&eqs).ok_or(Error::MissingSaddle {
        dca: p.dca,
        dvx: p.dvx,
    })?;
    Ok(FocusSetup {
        sf: sf.state,
        dirs: unstable_directions(sf, eps)?,
        v_sd: sd.state.v,
    })
}

/// Fly from the circle point at `theta` through one spiking excursion and
/// stop at the next subthreshold maximum.
pub fn theta_cell(p: &ModelParams, setup: &FocusSetup, theta: f64, cfg: &ThetaScanConfig) -> CellOutcome<ThetaScanCell> {
    let s0 = match focus_circle_point(&setup.dirs, cfg.eps, theta) {
        Ok(s) => s,
        Err(e) => return CellOutcome::Failed(e.to_string()),
    };
    let icfg = IntegratorConfig {
        t_max: cfg.timeout,
        ..cfg.integrator
    };
    let mut spikes = 0u32;
    let run = integrate(&s0, p, &icfg, &[detector_vmax(setup.v_sd)], |ev| match ev.kind {
        EventKind::VMaxAbove => {
            spikes += 1;
            false
        }
        EventKind::VMaxBelow => spikes > 0,
        _ => false,
    });
    match run {
        Ok(r) if r.stopped => {
            let s = r.final_state;
            let d = ((s.x - setup.sf.x).powi(2) + (s.ca - setup.sf.ca).powi(2)).sqrt();
            CellOutcome::Ok(ThetaScanCell {
                theta,
                dca: p.dca,
                spikes,
                distance: d.min(cfg.clip),
            })
        }
        Ok(_) => CellOutcome::Failed("timeout".into()),
        Err(e) => CellOutcome::Failed(e.to_string()),
    }
}

/// Angle axis over `[0, 2 pi)` with `n` points.
pub fn theta_axis(n: usize) -> Axis {
    let two_pi = std::f64::consts::TAU;
    Axis::new("theta", 0.0, two_pi * (n.saturating_sub(1)) as f64 / n.max(1) as f64, n)
}

/// `dCa` by `theta` scan; axis 1 is `dCa`, axis 2 is `theta`.
pub fn scan_theta(
    dca: (f64, f64, usize),
    n_theta: usize,
    cfg: &ThetaScanConfig,
    opts: &SweepOptions,
) -> Result<SweepGrid<ThetaScanCell>> {
    cfg.integrator.validate()?;
    let spec = GridSpec {
        axis1: Axis::new("dCa", dca.0, dca.1, dca.2),
        axis2: Some(theta_axis(n_theta)),
    };
    spec.validate()?;
    let setups: Vec<Result<FocusSetup>> = spec
        .axis1
        .values()
        .into_par_iter()
        .map(|d| focus_setup(&params_at(&cfg.params, d, cfg.params.dvx), cfg.eps))
        .collect();
    run_grid("theta", &spec, cfg.meta(), opts, |k| {
        let i = k % spec.n1();
        let (d, theta) = spec.coords(k);
        match &setups[i] {
            Ok(s) => theta_cell(&params_at(&cfg.params, d, cfg.params.dvx), s, theta, cfg),
            Err(e) => CellOutcome::Skipped(e.to_string()),
        }
    })
}

/// Per-`dCa` minimum distance over angles, with its arg-min `dCa`.
pub fn theta_minima(g: &SweepGrid<ThetaScanCell>) -> (Vec<f64>, Option<f64>) {
    let (n1, n2) = (g.spec.n1(), g.spec.n2());
    let mins: Vec<f64> = (0..n1)
        .map(|i| {
            (0..n2)
                .filter_map(|j| g.get(i, j).ok().map(|c| c.distance))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let apex = mins
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| g.spec.axis1.value(i));
    (mins, apex)
}

// ------------------------------------------------------- one-parameter ISI

#[derive(Debug, Clone, PartialEq)]
pub struct IsiSweepConfig {
    pub params: ModelParams,
    pub seed: State5,
    /// Relaxation from `seed` before the first value (ms).
    pub t_warmup: f64,
    /// Discarded at every value (ms).
    pub t_transient: f64,
    pub t_record: f64,
    pub integrator: IntegratorConfig,
}

impl Default for IsiSweepConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(0.0, -1.1),
            seed: SWEEP_SEED,
            t_warmup: 1e4,
            t_transient: 5e3,
            t_record: 5e4,
            integrator: event_integrator(1e-8),
        }
    }
}

impl IsiSweepConfig {
    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        params_meta(&self.params, &mut m);
        state_meta("seed", &self.seed, &mut m);
        m.insert("isi1d.dVx".into(), fmt_f64(self.params.dvx));
        m.insert("isi1d.t_warmup".into(), fmt_f64(self.t_warmup));
        m.insert("isi1d.t_transient".into(), fmt_f64(self.t_transient));
        m.insert("isi1d.t_record".into(), fmt_f64(self.t_record));
        integrator_meta("integrator", &self.integrator, &mut m);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsiColumn {
    pub dca: f64,
    pub isis: Vec<f64>,
    pub final_state: State5,
}

/// Warm-started `dCa` continuation: each value starts from the final state
/// of the previous one.
pub fn sweep_isi_1d(values: &[f64], cfg: &IsiSweepConfig) -> Result<Vec<IsiColumn>> {
    cfg.integrator.validate()?;
    let monotone = values.windows(2).all(|w| w[1] > w[0]) || values.windows(2).all(|w| w[1] < w[0]);
    if !monotone {
        return Err(Error::InvalidArgument("dCa schedule must be strictly monotone".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut state = match values.first() {
        Some(&d) => relax(&cfg.seed, &params_at(&cfg.params, d, cfg.params.dvx), &cfg.integrator, cfg.t_warmup)?,
        None => return Ok(out),
    };
    for &d in values {
        let p = params_at(&cfg.params, d, cfg.params.dvx);
        let (isis, fin) = isi_column(&state, &p, cfg)?;
        out.push(IsiColumn {
            dca: d,
            isis,
            final_state: fin,
        });
        state = fin;
    }
    Ok(out)
}

/// ISIs at one parameter value from `s0`, and the final state.
pub fn isi_column(s0: &State5, p: &ModelParams, cfg: &IsiSweepConfig) -> Result<(Vec<f64>, State5)> {
    let v_th = spike_threshold(p);
    let s = relax(s0, p, &cfg.integrator, cfg.t_transient)?;
    let icfg = IntegratorConfig {
        t_max: cfg.t_record,
        ..cfg.integrator
    };
    let run = integrate(&s, p, &icfg, &[detector_vmax(v_th)], |_| false)?;
    let times: Vec<f64> = run
        .events
        .iter()
        .filter(|e| e.kind == EventKind::VMaxAbove)
        .map(|e| e.t)
        .collect();
    Ok((times.windows(2).map(|w| w[1] - w[0]).collect(), run.final_state))
}

/// Number of groups after sorting `values` and splitting at gaps wider than `gap`.
pub fn cluster_count(values: &[f64], gap: f64) -> usize {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0;
    }
    v.sort_by(f64::total_cmp);
    1 + v.windows(2).filter(|w| w[1] - w[0] > gap).count()
}

/// CSV `dCa,isi` with one row per interval.
pub fn write_isi_csv<W: Write>(mut w: W, cols: &[IsiColumn]) -> Result<()> {
    writeln!(w, "dCa,isi")?;
    for c in cols {
        for isi in &c.isis {
            writeln!(w, "{},{}", fmt_f64(c.dca), fmt_f64(*isi))?;
        }
    }
    w.flush()?;
    Ok(())
}

// ------------------------------------------------------------------ images

/// Binary PGM (P5), rows top to bottom.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    if gray.len() != width * height {
        return Err(Error::InvalidArgument("pixel count does not match size".into()));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(gray)?;
    w.flush()?;
    Ok(())
}

/// Binary PPM (P6), rows top to bottom.
pub fn write_ppm<W: Write>(mut w: W, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    if rgb.len() != width * height {
        return Err(Error::InvalidArgument("pixel count does not match size".into()));
    }
    write!(w, "P6\n{width} {height}\n255\n")?;
    for px in rgb {
        w.write_all(px)?;
    }
    w.flush()?;
    Ok(())
}

/// Reorder a row-major grid so the last axis-2 row comes first (image rows
/// run top to bottom with axis 2 increasing upward).
pub fn flip_rows<T: Clone>(values: &[T], n1: usize) -> Vec<T> {
    values.chunks(n1).rev().flatten().cloned().collect()
}

/// Linear gray ramp: `lo` maps to 0, `hi` to 255; NaN maps to 255.
pub fn gray_level(v: f64, lo: f64, hi: f64) -> u8 {
    if !v.is_finite() || hi <= lo {
        return 255;
    }
    (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Full-scale constants of the Lyapunov color table (1/ms).
pub const LYAP_RED_FULL: f64 = 5e-4;
pub const LYAP_GREEN_FULL: f64 = 1e-3;
pub const LYAP_BLUE_FULL: f64 = 1e-2;

/// Lyapunov color table.
///
/// Red is `l1 / LYAP_RED_FULL` for `l1 > 0`. For `l2 < 0`, green is
/// `1 - |l2| / LYAP_GREEN_FULL` and blue is `|l2| / LYAP_BLUE_FULL`; both are
/// clamped to `[0, 1]` and scaled to 255. Missing cells are white.
pub fn lyapunov_rgb(exps: Option<&[f64; 5]>) -> [u8; 3] {
    let Some(l) = exps else {
        return [255, 255, 255];
    };
    let ch = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    let r = if l[0] > 0.0 { ch(l[0] / LYAP_RED_FULL) } else { 0 };
    let (g, b) = if l[1] < 0.0 {
        (ch(1.0 - l[1].abs() / LYAP_GREEN_FULL), ch(l[1].abs() / LYAP_BLUE_FULL))
    } else {
        (0, 0)
    };
    [r, g, b]
}

/// Gray heatmap of one field, scaled over its finite range.
pub fn write_field_pgm<T: CellRecord>(path: &Path, g: &SweepGrid<T>, field: &str) -> Result<()> {
    let vals = g.field_values(field)?;
    let finite = vals.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let px: Vec<u8> = vals.iter().map(|&v| gray_level(v, lo, hi)).collect();
    let px = flip_rows(&px, g.spec.n1());
    write_pgm(BufWriter::new(File::create(path)?), g.spec.n1(), g.spec.n2(), &px)
}

pub fn write_lyapunov_ppm(path: &Path, g: &SweepGrid<LyapunovCell>) -> Result<()> {
    let px: Vec<[u8; 3]> = g
        .cells
        .iter()
        .map(|c| lyapunov_rgb(c.ok().map(|v| &v.exponents)))
        .collect();
    let px = flip_rows(&px, g.spec.n1());
    write_ppm(BufWriter::new(File::create(path)?), g.spec.n1(), g.spec.n2(), &px)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq)]
    struct Probe(f64);

    impl CellRecord for Probe {
        const FIELDS: &'static [&'static str] = &["v"];
        fn to_fields(&self) -> Vec<String> {
            vec![fmt_f64(self.0)]
        }
        fn from_fields(f: &[&str]) -> Result<Self> {
            Ok(Probe(parse_f64(f[0])?))
        }
        fn field(&self, _k: usize) -> f64 {
            self.0
        }
    }

    fn probe(k: usize) -> CellOutcome<Probe> {
        match k % 7 {
            3 => CellOutcome::Failed("odd".into()),
            5 => CellOutcome::Skipped("none".into()),
            _ => CellOutcome::Ok(Probe((k as f64).sqrt() / 3.0)),
        }
    }

    #[test]
    fn axis_endpoints_are_exact() {
        let a = Axis::new("a", -45.0, 15.0, 7);
        assert_eq!(a.value(0), -45.0);
        assert_eq!(a.value(6), 15.0);
        assert_eq!(Axis::new("b", 2.0, 3.0, 1).value(0), 2.0);
    }

    #[test]
    fn row_major_coordinates() {
        let g = GridSpec::new((0.0, 4.0, 5), (10.0, 12.0, 3));
        assert_eq!(g.coords(0), (0.0, 10.0));
        assert_eq!(g.coords(4), (4.0, 10.0));
        assert_eq!(g.coords(5), (0.0, 11.0));
        assert_eq!(g.coords(14), (4.0, 12.0));
    }

    #[test]
    fn tallies_cover_grid() {
        let spec = GridSpec::new((0.0, 1.0, 6), (0.0, 1.0, 4));
        let g = run_grid("probe", &spec, BTreeMap::new(), &SweepOptions::default(), probe).unwrap();
        let p = g.progress();
        assert_eq!(p.succeeded + p.failed + p.skipped, 24);
        assert!(p.failed > 0 && p.skipped > 0);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new((0.0, 1.0, 9), (0.0, 1.0, 5));
        let full = run_grid("probe", &spec, BTreeMap::new(), &SweepOptions::default(), probe).unwrap();
        let ck = dir.path().join("ck.txt");
        let opts = SweepOptions {
            checkpoint: Some(ck.clone()),
            stop_after: Some(10),
            chunk: 4,
            ..Default::default()
        };
        let err = run_grid("probe", &spec, BTreeMap::new(), &opts, probe).unwrap_err();
        assert_eq!(err, Error::Interrupted { completed: 12 });
        let opts = SweepOptions {
            stop_after: None,
            ..opts
        };
        let resumed = run_grid("probe", &spec, BTreeMap::new(), &opts, probe).unwrap();
        assert_eq!(resumed.cells, full.cells);
    }

    #[test]
    fn checkpoint_from_other_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ck = dir.path().join("ck.txt");
        let spec = GridSpec::new((0.0, 1.0, 3), (0.0, 1.0, 3));
        let opts = SweepOptions {
            checkpoint: Some(ck),
            ..Default::default()
        };
        run_grid("probe", &spec, BTreeMap::new(), &opts, probe).unwrap();
        let mut other = BTreeMap::new();
        other.insert("x".to_string(), "1".to_string());
        assert!(run_grid("probe", &spec, other, &opts, probe).is_err());
    }

    #[test]
    fn isi_statistics() {
        let (m, v) = isi_stats(&[0.0, 1.0, 3.0, 6.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((v - 1.0).abs() < 1e-15);
        assert!(isi_stats(&[1.0]).0.is_nan());
    }

    #[test]
    fn lyapunov_colors() {
        assert_eq!(lyapunov_rgb(None), [255, 255, 255]);
        assert_eq!(lyapunov_rgb(Some(&[1.0, -1.0, -2.0, -3.0, -4.0])), [255, 0, 255]);
        assert_eq!(lyapunov_rgb(Some(&[-1e-5, -1e-9, -1.0, -2.0, -3.0])), [0, 255, 0]);
    }

    #[test]
    fn pgm_layout() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 1, &[0, 255]).unwrap();
        assert_eq!(buf, b"P5\n2 1\n255\n\x00\xff");
        assert_eq!(flip_rows(&[1, 2, 3, 4, 5, 6], 2), vec![5, 6, 3, 4, 1, 2]);
    }

    #[test]
    fn clusters_split_on_gaps() {
        assert_eq!(cluster_count(&[1.0, 1.1, 5.0, 5.05, 9.0], 0.5), 3);
        assert_eq!(cluster_count(&[], 0.5), 0);
    }
}
