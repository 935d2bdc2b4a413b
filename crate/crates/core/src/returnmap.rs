//! One-dimensional return maps on the quiescent slow manifold.
//!
//! The section is the segment from the origin of the `(Ca, x)` plane to the
//! lower (saddle-focus) equilibrium. Each sample starts on the fast
//! equilibrium over a point of the segment, runs through one global
//! excursion and is projected back onto the fast equilibrium at its first
//! low-to-high crossing of the section ray.

use std::io::Write;

use rayon::prelude::*;

use crate::equilibria::{
    find_equilibria, lower_equilibrium, unstable_directions, upper_saddle, Classification,
    Equilibrium, UnstableDirections, SEED_EPSILON,
};
use crate::error::{Error, Result};
use crate::integrator::{
    detector_section, detector_vmax, integrate, EventKind, IntegratorConfig,
};
use crate::io::fmt_f64;
use crate::model::{fast_equilibrium, ModelParams, State5};

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMapConfig {
    pub n_samples: usize,
    /// Minimum flight time before a section crossing is accepted (ms).
    pub min_time: f64,
    /// Flight time after which a sample is flagged (ms).
    pub timeout: f64,
    pub integrator: IntegratorConfig,
    /// Separatrix seed radius in scaled units.
    pub seed_epsilon: f64,
}

impl Default for ReturnMapConfig {
    fn default() -> Self {
        Self {
            n_samples: 500,
            min_time: 50.0,
            timeout: 1e5,
            integrator: IntegratorConfig::adaptive(1e-8, 1e5),
            seed_epsilon: SEED_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFlag {
    Ok,
    /// No accepted section crossing within the timeout.
    Timeout,
    /// Integration or projection failed.
    Failed,
}

impl SampleFlag {
    pub fn label(self) -> &'static str {
        match self {
            SampleFlag::Ok => "ok",
            SampleFlag::Timeout => "timeout",
            SampleFlag::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSample {
    /// Sample number along the section, counted from the origin.
    pub index: usize,
    /// Position along the section, 0 at the origin and 1 at the saddle-focus.
    pub frac: f64,
    pub ca0: f64,
    pub x0: f64,
    pub v_n: f64,
    /// NaN unless `flag` is `Ok`.
    pub v_next: f64,
    /// Spikes during the excursion.
    pub spikes: u32,
    pub flight_time: f64,
    pub flag: SampleFlag,
}

impl MapSample {
    pub fn is_ok(&self) -> bool {
        self.flag == SampleFlag::Ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMap {
    pub params: ModelParams,
    pub config: ReturnMapConfig,
    /// Sorted by `v_n` ascending.
    pub samples: Vec<MapSample>,
    pub sf: Equilibrium,
    pub sd: Equilibrium,
    pub sf_v: f64,
    pub sd_v: f64,
    /// Return values of the two unstable separatrices of the upper saddle
    /// (beneath, above); NaN when the separatrix did not return.
    pub separatrix_returns: [f64; 2],
    /// Indices into `samples` where the spike count differs from the
    /// previous valid sample.
    pub discontinuities: Vec<usize>,
}

/// Outcome of one excursion from the section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursion {
    pub v_next: f64,
    pub spikes: u32,
    pub flight_time: f64,
    pub flag: SampleFlag,
    /// Slow pair at the crossing.
    pub ca: f64,
    pub x: f64,
}

/// Fly from `s0` to the first accepted section crossing.
pub fn excursion(
    s0: &State5,
    p: &ModelParams,
    sf: &State5,
    v_sd: f64,
    cfg: &ReturnMapConfig,
) -> Excursion {
    let failed = Excursion {
        v_next: f64::NAN,
        spikes: 0,
        flight_time: f64::NAN,
        flag: SampleFlag::Failed,
        ca: f64::NAN,
        x: f64::NAN,
    };
    let Ok(section) = detector_section(sf.ca, sf.x) else {
        return failed;
    };
    let detectors = [section, detector_vmax(v_sd)];
    let icfg = IntegratorConfig {
        t_max: cfg.timeout,
        ..cfg.integrator
    };
    let mut maxima = 0usize;
    let mut spikes = 0u32;
    let mut spikes_at_cross = 0u32;
    let run = integrate(s0, p, &icfg, &detectors, |ev| match ev.kind {
        EventKind::VMaxAbove => {
            maxima += 1;
            spikes += 1;
            false
        }
        EventKind::VMaxBelow => {
            maxima += 1;
            false
        }
        EventKind::SectionCross if maxima >= 1 && ev.t >= cfg.min_time => {
            spikes_at_cross = spikes;
            true
        }
        _ => false,
    });
    let Ok(run) = run else {
        return failed;
    };
    if !run.stopped {
        return Excursion {
            flag: SampleFlag::Timeout,
            flight_time: run.t_final,
            spikes,
            ..failed
        };
    }
    let end = run.final_state;
    match fast_equilibrium(end.x, end.ca, p, Some(end.v)) {
        Ok(f) => Excursion {
            v_next: f.v,
            spikes: spikes_at_cross,
            flight_time: run.t_final,
            flag: SampleFlag::Ok,
            ca: end.ca,
            x: end.x,
        },
        Err(_) => failed,
    }
}

/// Initial state on the fast equilibrium over the section point at `frac`.
pub fn section_state(p: &ModelParams, sf: &State5, frac: f64) -> Result<State5> {
    let ca = frac * sf.ca;
    let x = frac * sf.x;
    Ok(fast_equilibrium(x, ca, p, None)?.with_slow(x, ca))
}

fn map_sample(
    p: &ModelParams,
    sf: &State5,
    v_sd: f64,
    cfg: &ReturnMapConfig,
    index: usize,
    frac: f64,
) -> MapSample {
    let (ca0, x0) = (frac * sf.ca, frac * sf.x);
    let Ok(s0) = section_state(p, sf, frac) else {
        return MapSample {
            index,
            frac,
            ca0,
            x0,
            v_n: f64::NAN,
            v_next: f64::NAN,
            spikes: 0,
            flight_time: f64::NAN,
            flag: SampleFlag::Failed,
        };
    };
    let e = excursion(&s0, p, sf, v_sd, cfg);
    MapSample {
        index,
        frac,
        ca0,
        x0,
        v_n: s0.v,
        v_next: e.v_next,
        spikes: e.spikes,
        flight_time: e.flight_time,
        flag: e.flag,
    }
}

/// Saddle-focus and upper saddle at `p`.
pub fn landmarks(p: &ModelParams) -> Result<(Equilibrium, Equilibrium)> {
    let eqs = find_equilibria(p)?;
    let sf = lower_equilibrium(&eqs)
        .filter(|e| {
            matches!(
                e.classification,
                Classification::SaddleFocus32 | Classification::Saddle32
            )
        })
        .ok_or(Error::NoSaddleFocus {
            dca: p.dca,
            dvx: p.dvx,
        })?
        .clone();
    let sd = upper_saddle(&eqs)
        .ok_or(Error::MissingSaddle {
            dca: p.dca,
            dvx: p.dvx,
        })?
        .clone();
    Ok((sf, sd))
}

/// Sample the return map with `cfg.n_samples` points strictly inside the section.
pub fn build_map(p: &ModelParams, cfg: &ReturnMapConfig) -> Result<ReturnMap> {
    p.validate()?;
    cfg.integrator.validate()?;
    if cfg.n_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let (sf, sd) = landmarks(p)?;
    let (sfs, v_sd) = (sf.state, sd.state.v);
    let n = cfg.n_samples;
    let mut samples: Vec<MapSample> = (1..=n)
        .into_par_iter()
        .map(|i| map_sample(p, &sfs, v_sd, cfg, i - 1, i as f64 / (n + 1) as f64))
        .collect();
    samples.sort_by(|a, b| a.v_n.total_cmp(&b.v_n));

    let mut separatrix_returns = [f64::NAN; 2];
    if let Ok(UnstableDirections::Separatrix { beneath, above, .. }) =
        unstable_directions(&sd, cfg.seed_epsilon)
    {
        for (k, seed) in [beneath, above].iter().enumerate() {
            let e = excursion(seed, p, &sfs, v_sd, cfg);
            separatrix_returns[k] = e.v_next;
        }
    }
    let discontinuities = find_discontinuities(&samples);
    Ok(ReturnMap {
        params: *p,
        config: cfg.clone(),
        samples,
        sf_v: sf.state.v,
        sd_v: v_sd,
        sf,
        sd,
        separatrix_returns,
        discontinuities,
    })
}

fn find_discontinuities(samples: &[MapSample]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last: Option<u32> = None;
    for (i, s) in samples.iter().enumerate() {
        if !s.is_ok() {
            continue;
        }
        if last.is_some_and(|k| k != s.spikes) {
            out.push(i);
        }
        last = Some(s.spikes);
    }
    out
}

/// Maximal run of valid samples with one spike count.
#[derive(Debug, Clone, PartialEq)]
pub struct Arch {
    pub spikes: u32,
    /// Indices into `ReturnMap::samples`, valid samples only.
    pub indices: Vec<usize>,
    pub max_v_next: f64,
    /// Index of the sample attaining the maximum.
    pub argmax: usize,
    pub min_v_next: f64,
}

impl ReturnMap {
    pub fn valid(&self) -> impl Iterator<Item = (usize, &MapSample)> {
        self.samples.iter().enumerate().filter(|(_, s)| s.is_ok())
    }

    /// Runs of equal spike count in order of increasing `V_n`.
    pub fn arches(&self) -> Vec<Arch> {
        let idx: Vec<usize> = self.valid().map(|(i, _)| i).collect();
        group_arches(&self.samples, idx)
    }

    /// Fresh sample at section position `frac`, outside the regular grid.
    pub fn sample_at(&self, frac: f64) -> MapSample {
        map_sample(
            &self.params,
            &self.sf.state,
            self.sd_v,
            &self.config,
            usize::MAX,
            frac,
        )
    }

    /// Interval bounded below by the lowest separatrix return and above by
    /// the saddle-focus; `None` when no separatrix returned.
    pub fn invariant_interval(&self) -> Option<(f64, f64)> {
        let lo = self
            .separatrix_returns
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .min_by(f64::total_cmp)?;
        Some((lo, self.sf_v))
    }

    /// Section indices of the stretch next to the saddle-focus on which
    /// `V_n` decreases monotonically toward the origin.
    pub fn principal_branch(&self) -> Vec<usize> {
        let mut along: Vec<(usize, usize)> = self
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_ok())
            .map(|(i, s)| (s.index, i))
            .collect();
        along.sort_unstable();
        let mut out: Vec<usize> = Vec::new();
        for &(_, i) in along.iter().rev() {
            if let Some(&prev) = out.last() {
                if self.samples[i].v_n >= self.samples[prev].v_n {
                    break;
                }
            }
            out.push(i);
        }
        out.reverse();
        out
    }

    /// Arches of the principal branch inside the invariant interval, in order
    /// of increasing `V_n`.
    pub fn principal_arches(&self) -> Vec<Arch> {
        let Some((lo, hi)) = self.invariant_interval() else {
            return Vec::new();
        };
        let idx: Vec<usize> = self
            .principal_branch()
            .into_iter()
            .filter(|&i| (lo..=hi).contains(&self.samples[i].v_n))
            .collect();
        group_arches(&self.samples, idx)
    }

    /// Pairs of section neighbors whose spike counts differ, ordered along
    /// the section.
    pub fn jumps(&self) -> Vec<(MapSample, MapSample)> {
        let mut along: Vec<MapSample> = self.samples.iter().copied().filter(|s| s.is_ok()).collect();
        along.sort_by_key(|s| s.index);
        along
            .windows(2)
            .filter(|w| w[1].index == w[0].index + 1 && w[0].spikes != w[1].spikes)
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Shrink a spike-count jump by bisection in the section coordinate.
    /// The first element keeps the spike count of `a`.
    pub fn refine_jump(&self, a: MapSample, b: MapSample, iterations: usize) -> (MapSample, MapSample) {
        let (mut a, mut b) = (a, b);
        for _ in 0..iterations {
            let mid = self.sample_at(0.5 * (a.frac + b.frac));
            if !mid.is_ok() {
                break;
            }
            if mid.spikes == a.spikes {
                a = mid;
            } else if mid.spikes == b.spikes {
                b = mid;
            } else {
                // A third count inside the bracket; keep the side facing `a`.
                b = mid;
            }
        }
        (a, b)
    }

    /// Refine an arch maximum by golden-section search in the section
    /// coordinate between the neighbors of its best sample.
    pub fn refine_arch_max(&self, arch: &Arch, iterations: usize) -> (f64, f64) {
        let pos = arch.indices.iter().position(|&i| i == arch.argmax).unwrap_or(0);
        let lo_i = arch.indices[pos.saturating_sub(1)];
        let hi_i = arch.indices[(pos + 1).min(arch.indices.len() - 1)];
        let (mut a, mut b) = {
            let (fa, fb) = (self.samples[lo_i].frac, self.samples[hi_i].frac);
            (fa.min(fb), fa.max(fb))
        };
        let best = self.samples[arch.argmax];
        let eval = |f: f64| -> (f64, f64) {
            let s = self.sample_at(f);
            if s.is_ok() && s.spikes == arch.spikes {
                (s.v_n, s.v_next)
            } else {
                (s.v_n, f64::NEG_INFINITY)
            }
        };
        let mut top = (best.v_n, best.v_next);
        if b <= a {
            return top;
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = eval(c);
        let mut fd = eval(d);
        for _ in 0..iterations {
            if fc.1 > top.1 {
                top = fc;
            }
            if fd.1 > top.1 {
                top = fd;
            }
            if fc.1 >= fd.1 {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = eval(d);
            }
        }
        for f in [fc, fd] {
            if f.1 > top.1 {
                top = f;
            }
        }
        top
    }
}

fn group_arches(samples: &[MapSample], indices: Vec<usize>) -> Vec<Arch> {
    let mut out: Vec<Arch> = Vec::new();
    for i in indices {
        let s = &samples[i];
        match out.last_mut() {
            Some(a) if a.spikes == s.spikes => {
                a.indices.push(i);
                if s.v_next > a.max_v_next {
                    a.max_v_next = s.v_next;
                    a.argmax = i;
                }
                a.min_v_next = a.min_v_next.min(s.v_next);
            }
            _ => out.push(Arch {
                spikes: s.spikes,
                indices: vec![i],
                max_v_next: s.v_next,
                argmax: i,
                min_v_next: s.v_next,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub v: f64,
    pub slope: f64,
    pub stable: bool,
}

/// Crossings of the diagonal by the piecewise-linear map. Only pieces joining
/// neighbors along the section with equal spike counts are used.
pub fn fixed_points(samples: &[MapSample]) -> Vec<FixedPoint> {
    let pts: Vec<&MapSample> = samples.iter().filter(|s| s.is_ok()).collect();
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.spikes != b.spikes || a.index.abs_diff(b.index) != 1 || b.v_n == a.v_n {
            continue;
        }
        let ga = a.v_next - a.v_n;
        let gb = b.v_next - b.v_n;
        let slope = (b.v_next - a.v_next) / (b.v_n - a.v_n);
        let root = if ga == 0.0 {
            Some(a.v_n)
        } else if ga * gb < 0.0 {
            Some(a.v_n + (b.v_n - a.v_n) * ga / (ga - gb))
        } else {
            None
        };
        if let Some(v) = root {
            if out.last().is_some_and(|f: &FixedPoint| f.v == v) {
                continue;
            }
            out.push(FixedPoint {
                v,
                slope,
                stable: slope.abs() < 1.0,
            });
        }
    }
    if let Some(last) = pts.last() {
        if last.v_next == last.v_n && out.last().is_none_or(|f| f.v != last.v_n) {
            let slope = pts
                .get(pts.len().wrapping_sub(2))
                .map_or(f64::NAN, |p| (last.v_next - p.v_next) / (last.v_n - p.v_n));
            out.push(FixedPoint {
                v: last.v_n,
                slope,
                stable: slope.abs() < 1.0,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub values: Vec<f64>,
    /// An iterate left the sampled range and iteration stopped.
    pub out_of_range: bool,
}

/// Linear interpolation of the valid samples at `v`; `None` outside the hull.
pub fn interpolate(samples: &[MapSample], v: f64) -> Option<f64> {
    let pts: Vec<&MapSample> = samples.iter().filter(|s| s.is_ok()).collect();
    let first = pts.first()?;
    let last = pts.last()?;
    if !(v >= first.v_n && v <= last.v_n) {
        return None;
    }
    let k = pts.partition_point(|s| s.v_n < v);
    if k < pts.len() && pts[k].v_n == v {
        return Some(pts[k].v_next);
    }
    let (a, b) = (pts[k - 1], pts[k]);
    let w = (v - a.v_n) / (b.v_n - a.v_n);
    Some(a.v_next + w * (b.v_next - a.v_next))
}

/// Iterate the interpolated map from `v0`.
pub fn iterate_map(samples: &[MapSample], v0: f64, steps: usize) -> Orbit {
    let mut values = vec![v0];
    let mut v = v0;
    for _ in 0..steps {
        match interpolate(samples, v) {
            Some(next) => {
                values.push(next);
                v = next;
            }
            None => {
                return Orbit {
                    values,
                    out_of_range: true,
                }
            }
        }
    }
    Orbit {
        values,
        out_of_range: interpolate(samples, v).is_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchGap {
    pub spikes: u32,
    pub peak: f64,
    /// `peak - V*`; positive when the arch reaches the pre-image level.
    pub gap: f64,
    /// Crossings of the level `V*` by the arch polyline.
    pub crossings: usize,
}

/// Per-arch distance of the arch peak above the level of the fixed point
/// `v_star`, over the principal arches.
pub fn tangency_metrics(m: &ReturnMap, v_star: f64, tol: f64) -> Result<Vec<ArchGap>> {
    let fps = fixed_points(&m.samples);
    if !fps.iter().any(|f| (f.v - v_star).abs() <= tol) {
        return Err(Error::MissingFixedPoint(v_star));
    }
    Ok(m.principal_arches()
        .iter()
        .map(|a| {
            let vals: Vec<f64> = a.indices.iter().map(|&i| m.samples[i].v_next - v_star).collect();
            let crossings = vals.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
            ArchGap {
                spikes: a.spikes,
                peak: a.max_v_next,
                gap: a.max_v_next - v_star,
                crossings,
            }
        })
        .collect())
}

/// CSV `Vn,Vnext,Ca0,x0,spikes,flag`.
pub fn write_map_csv<W: Write>(mut w: W, m: &ReturnMap) -> Result<()> {
    writeln!(w, "Vn,Vnext,Ca0,x0,spikes,flag")?;
    for s in &m.samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(s.v_n),
            fmt_f64(s.v_next),
            fmt_f64(s.ca0),
            fmt_f64(s.x0),
            s.spikes,
            s.flag.label()
        )?;
    }
    Ok(())
}

/// CSV `name,value` with the landmark voltages.
pub fn write_landmarks_csv<W: Write>(mut w: W, m: &ReturnMap) -> Result<()> {
    writeln!(w, "name,value")?;
    writeln!(w, "sf_V,{}", fmt_f64(m.sf_v))?;
    writeln!(w, "sd_V,{}", fmt_f64(m.sd_v))?;
    writeln!(w, "separatrix_return_beneath,{}", fmt_f64(m.separatrix_returns[0]))?;
    writeln!(w, "separatrix_return_above,{}", fmt_f64(m.separatrix_returns[1]))?;
    Ok(())
}
