//! Explicit Runge-Kutta integration with event localization.
//!
//! [`Solver`] is a generic single-trajectory stepper over fixed-size arrays;
//! [`integrate`] drives it on the 5D model and reports events. Events are
//! bracketed by a sign change of the detector function over an accepted
//! step and then bisected by re-stepping from the start of that step, so no
//! interpolant is needed.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{jacobian_array, rhs_array, FastState, ModelParams, State5, IV};

/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE_BOUND: f64 = 1e6;
/// Smallest step the adaptive controller may propose.
pub const MIN_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AdaptiveRk45,
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Fixed step, or initial step for the adaptive method (ms).
    pub dt: f64,
    /// Upper bound on adaptive steps (ms).
    pub max_step: f64,
    pub t_max: f64,
    /// Width of the time bracket around a localized event (ms).
    pub event_refine_tol: f64,
    /// Keep every accepted step in the result.
    pub store_trajectory: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveRk45,
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            dt: 0.1,
            max_step: 1.0,
            t_max: 1e4,
            event_refine_tol: 1e-6,
            store_trajectory: false,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_rk4(dt: f64, t_max: f64) -> Self {
        Self {
            method: Method::FixedRk4,
            dt,
            t_max,
            ..Self::default()
        }
    }

    pub fn adaptive(tol: f64, t_max: f64) -> Self {
        Self {
            method: Method::AdaptiveRk45,
            abs_tol: tol,
            rel_tol: tol,
            t_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.abs_tol,
            self.rel_tol,
            self.dt,
            self.max_step,
            self.t_max,
            self.event_refine_tol,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(
                "integrator tolerances, steps and horizon must be finite and > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * c;
        for i in 0..N {
            out[i] += hc * k[i];
        }
    }
    out
}

/// Single-trajectory explicit stepper.
///
/// Error control and the divergence guard act on the first `controlled`
/// components only, so auxiliary variables (tangent vectors) can ride along.
pub struct Solver<const N: usize, F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    f: F,
    method: Method,
    abs_tol: f64,
    rel_tol: f64,
    dt: f64,
    max_step: f64,
    controlled: usize,
    h: f64,
    pub t: f64,
    pub y: [f64; N],
    pub t_prev: f64,
    pub y_prev: [f64; N],
    fsal: Option<[f64; N]>,
    pub stats: StepStats,
}

impl<const N: usize, F> Solver<N, F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(f: F, t0: f64, y0: [f64; N], cfg: &IntegratorConfig, controlled: usize) -> Self {
        Self {
            f,
            method: cfg.method,
            abs_tol: cfg.abs_tol,
            rel_tol: cfg.rel_tol,
            dt: cfg.dt,
            max_step: cfg.max_step.max(cfg.dt),
            controlled: controlled.min(N),
            h: cfg.dt.min(cfg.max_step),
            t: t0,
            y: y0,
            t_prev: t0,
            y_prev: y0,
            fsal: None,
            stats: StepStats::default(),
        }
    }

    pub fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (self.f)(t, y)
    }

    /// Replace the current state, e.g. after renormalizing auxiliary components.
    pub fn reset_state(&mut self, y: [f64; N]) {
        self.y = y;
        self.fsal = None;
    }

    fn rk4(&self, t: f64, y: &[f64; N], h: f64) -> [f64; N] {
        let k1 = (self.f)(t, y);
        let k2 = (self.f)(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]));
        let k3 = (self.f)(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]));
        let k4 = (self.f)(t + h, &axpy(y, h, &[(1.0, &k3)]));
        axpy(
            y,
            h,
            &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
        )
    }

    /// One Dormand-Prince step; returns the 5th-order solution, the scaled
    /// error norm and the derivative at the new point.
    fn dp45(&self, t: f64, y: &[f64; N], h: f64, k1: &[f64; N]) -> ([f64; N], f64, [f64; N]) {
        let f = &self.f;
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(
            y,
            h,
            &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = f(t + h, &y1);
        let mut acc = 0.0;
        for i in 0..self.controlled {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.abs_tol + self.rel_tol * y[i].abs().max(y1[i].abs());
            acc += (e / sc) * (e / sc);
        }
        let err = (acc / self.controlled.max(1) as f64).sqrt();
        (y1, err, k7)
    }

    /// State reached by one step of size `tau` from `(t, y)`, without error control.
    pub fn restep(&self, t: f64, y: &[f64; N], tau: f64) -> [f64; N] {
        if tau == 0.0 {
            return *y;
        }
        match self.method {
            Method::FixedRk4 => self.rk4(t, y, tau),
            Method::AdaptiveRk45 => {
                let k1 = (self.f)(t, y);
                self.dp45(t, y, tau, &k1).0
            }
        }
    }

    fn check(&self, t: f64, y: &[f64; N]) -> Result<()> {
        for v in &y[..self.controlled] {
            if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
                return Err(Error::Divergence { t });
            }
        }
        Ok(())
    }

    /// Advance by one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let remaining = t_limit - self.t;
        if remaining <= 0.0 {
            return Ok(());
        }
        self.t_prev = self.t;
        self.y_prev = self.y;
        match self.method {
            Method::FixedRk4 => {
                // absorb floating-point slivers into the last step
                let h = if remaining <= self.dt * (1.0 + 1e-9) {
                    remaining
                } else {
                    self.dt
                };
                let y1 = self.rk4(self.t, &self.y, h);
                self.check(self.t + h, &y1)?;
                self.t = if h == remaining { t_limit } else { self.t + h };
                self.y = y1;
                self.stats.accepted += 1;
            }
            Method::AdaptiveRk45 => {
                let k1 = match self.fsal {
                    Some(k) => k,
                    None => (self.f)(self.t, &self.y),
                };
                let mut h = self.h.min(self.max_step);
                loop {
                    let clipped = h >= remaining;
                    let h_try = if clipped { remaining } else { h };
                    let (y1, err, k7) = self.dp45(self.t, &self.y, h_try, &k1);
                    let finite = err.is_finite() && y1.iter().all(|v| v.is_finite());
                    if finite && err <= 1.0 {
                        self.check(self.t + h_try, &y1)?;
                        self.t = if clipped { t_limit } else { self.t + h_try };
                        self.y = y1;
                        self.fsal = Some(k7);
                        self.stats.accepted += 1;
                        let grow = if err == 0.0 {
                            5.0
                        } else {
                            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        // a clipped step says nothing about the natural step size
                        let base = if clipped { h.max(h_try) } else { h_try };
                        self.h = (base * grow).min(self.max_step);
                        return Ok(());
                    }
                    self.stats.rejected += 1;
                    let shrink = if finite {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
                    } else {
                        0.2
                    };
                    h = h_try * shrink;
                    if h < MIN_STEP {
                        return Err(Error::StepFailure { t: self.t, h });
                    }
                }
            }
        }
        Ok(())
    }

    /// Step until `t_target` is reached exactly.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            self.step(t_target)?;
        }
        Ok(())
    }
}

/// Direction of a zero crossing that counts as an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

impl Crossing {
    fn matches(self, g0: f64, g1: f64) -> bool {
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        match self {
            Crossing::Rising => rising,
            Crossing::Falling => falling,
            Crossing::Either => rising || falling,
        }
    }
}

pub type CustomFn = Arc<dyn Fn(f64, &State5) -> f64 + Send + Sync>;

/// Event detector; each one owns a scalar test function of `(t, state)`.
#[derive(Clone)]
pub enum Detector {
    /// Local maxima of `V` (falling zero of `V'`), split at `threshold`.
    VMax { threshold: f64 },
    /// Local maxima of `V'` (falling zero of `V''`).
    DVMax,
    /// Low-to-high crossings of the angle `atan2(x, Ca) - atan2(sf_x, sf_ca)`.
    Section { sf_ca: f64, sf_x: f64 },
    Custom { g: CustomFn, crossing: Crossing },
}

impl std::fmt::Debug for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Detector::VMax { threshold } => write!(f, "VMax({threshold})"),
            Detector::DVMax => write!(f, "DVMax"),
            Detector::Section { sf_ca, sf_x } => write!(f, "Section({sf_ca}, {sf_x})"),
            Detector::Custom { crossing, .. } => write!(f, "Custom({crossing:?})"),
        }
    }
}

/// Voltage maxima classified against `threshold` (mV).
pub fn detector_vmax(threshold: f64) -> Detector {
    Detector::VMax { threshold }
}

pub fn detector_dvmax() -> Detector {
    Detector::DVMax
}

/// Crossings of the ray through `(sf_ca, sf_x)` in the `(Ca, x)` plane.
pub fn detector_section(sf_ca: f64, sf_x: f64) -> Result<Detector> {
    if sf_ca == 0.0 && sf_x == 0.0 || !sf_ca.is_finite() || !sf_x.is_finite() {
        return Err(Error::InvalidArgument(
            "section direction must be finite and nonzero".into(),
        ));
    }
    Ok(Detector::Section { sf_ca, sf_x })
}

pub fn detector_custom(
    g: impl Fn(f64, &State5) -> f64 + Send + Sync + 'static,
    crossing: Crossing,
) -> Detector {
    Detector::Custom {
        g: Arc::new(g),
        crossing,
    }
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

impl Detector {
    fn value(&self, t: f64, y: &[f64; 5], p: &ModelParams) -> f64 {
        match self {
            Detector::VMax { .. } => rhs_array(y, p)[IV],
            Detector::DVMax => {
                let f = rhs_array(y, p);
                let j = jacobian_array(y, p);
                (0..5).map(|k| j[IV][k] * f[k]).sum()
            }
            Detector::Section { sf_ca, sf_x } => {
                wrap_angle(y[3].atan2(y[4]) - sf_x.atan2(*sf_ca))
            }
            Detector::Custom { g, .. } => g(t, &State5::from_array(*y)),
        }
    }

    fn fires(&self, g0: f64, g1: f64) -> bool {
        match self {
            Detector::VMax { .. } | Detector::DVMax => Crossing::Falling.matches(g0, g1),
            Detector::Section { .. } => {
                // the branch cut of the angle is not a crossing
                Crossing::Rising.matches(g0, g1) && (g1 - g0).abs() < std::f64::consts::PI
            }
            Detector::Custom { crossing, .. } => crossing.matches(g0, g1),
        }
    }

    fn kind(&self, y: &[f64; 5]) -> EventKind {
        match self {
            Detector::VMax { threshold } => {
                if y[IV] > *threshold {
                    EventKind::VMaxAbove
                } else {
                    EventKind::VMaxBelow
                }
            }
            Detector::DVMax => EventKind::DVMax,
            Detector::Section { .. } => EventKind::SectionCross,
            Detector::Custom { .. } => EventKind::Custom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    VMaxAbove,
    VMaxBelow,
    DVMax,
    SectionCross,
    Custom,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::VMaxAbove => "vmax_above",
            EventKind::VMaxBelow => "vmax_below",
            EventKind::DVMax => "dvmax",
            EventKind::SectionCross => "section",
            EventKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub t: f64,
    pub state: State5,
    /// Index of the detector that fired.
    pub detector: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub events: Vec<Event>,
    pub t_final: f64,
    pub final_state: State5,
    /// True when the stop rule ended the run before `t_max`.
    pub stopped: bool,
    pub stats: StepStats,
    pub trajectory: Option<Vec<(f64, State5)>>,
}

/// Integrate the model from `s0` at `t = 0` up to `cfg.t_max`, reporting events.
///
/// `stop` sees each event in time order; returning `true` ends the run at
/// that event, which becomes the final state.
pub fn integrate(
    s0: &State5,
    p: &ModelParams,
    cfg: &IntegratorConfig,
    detectors: &[Detector],
    mut stop: impl FnMut(&Event) -> bool,
) -> Result<Integration> {
    cfg.validate()?;
    if !s0.is_finite() {
        return Err(Error::Domain(format!("initial state {s0:?}")));
    }
    let pp = *p;
    let mut solver = Solver::new(move |_t, y: &[f64; 5]| rhs_array(y, &pp), 0.0, s0.to_array(), cfg, 5);
    let mut trajectory = cfg.store_trajectory.then(|| vec![(0.0, *s0)]);
    let mut events = Vec::new();
    let mut g_prev: Vec<f64> = detectors.iter().map(|d| d.value(0.0, &solver.y, p)).collect();
    let mut pending: Vec<Event> = Vec::new();

    while solver.t < cfg.t_max {
        solver.step(cfg.t_max)?;
        let (t0, y0, t1, y1) = (solver.t_prev, solver.y_prev, solver.t, solver.y);
        pending.clear();
        for (idx, d) in detectors.iter().enumerate() {
            let g1 = d.value(t1, &y1, p);
            let g0 = g_prev[idx];
            g_prev[idx] = g1;
            if !d.fires(g0, g1) {
                continue;
            }
            let (te, ye) = locate(&solver, d, p, t0, &y0, t1 - t0, g0, cfg.event_refine_tol);
            pending.push(Event {
                kind: d.kind(&ye),
                t: te,
                state: State5::from_array(ye),
                detector: idx,
            });
        }
        pending.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.detector.cmp(&b.detector)));
        for ev in pending.drain(..) {
            events.push(ev);
            if stop(&ev) {
                if let Some(tr) = trajectory.as_mut() {
                    tr.push((ev.t, ev.state));
                }
                return Ok(Integration {
                    events,
                    t_final: ev.t,
                    final_state: ev.state,
                    stopped: true,
                    stats: solver.stats,
                    trajectory,
                });
            }
        }
        if let Some(tr) = trajectory.as_mut() {
            tr.push((t1, State5::from_array(y1)));
        }
    }
    Ok(Integration {
        events,
        t_final: solver.t,
        final_state: State5::from_array(solver.y),
        stopped: false,
        stats: solver.stats,
        trajectory,
    })
}

/// Bisect the detector over one accepted step by re-stepping from its start.
#[allow(clippy::too_many_arguments)]
fn locate<F>(
    solver: &Solver<5, F>,
    d: &Detector,
    p: &ModelParams,
    t0: f64,
    y0: &[f64; 5],
    h: f64,
    g0: f64,
    tol: f64,
) -> (f64, [f64; 5])
where
    F: Fn(f64, &[f64; 5]) -> [f64; 5],
{
    let (mut lo, mut hi) = (0.0, h);
    let mut g_lo = g0;
    let mut y_hi = solver.restep(t0, y0, h);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let ym = solver.restep(t0, y0, mid);
        let gm = d.value(t0 + mid, &ym, p);
        if d.fires(g_lo, gm) {
            hi = mid;
            y_hi = ym;
        } else {
            lo = mid;
            g_lo = gm;
        }
    }
    (t0 + hi, y_hi)
}

/// Integrate the fast subsystem with `(x, Ca)` frozen; returns the final fast state.
pub fn integrate_fast(
    f0: &FastState,
    x: f64,
    ca: f64,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<FastState> {
    cfg.validate()?;
    let pp = *p;
    let rhs3 = move |_t: f64, y: &[f64; 3]| {
        let d = rhs_array(&[y[0], y[1], y[2], x, ca], &pp);
        [d[0], d[1], d[2]]
    };
    let mut solver = Solver::new(rhs3, 0.0, [f0.v, f0.h, f0.n], cfg, 3);
    solver.advance_to(cfg.t_max)?;
    Ok(FastState {
        v: solver.y[0],
        h: solver.y[1],
        n: solver.y[2],
    })
}

/// CSV `t,V,h,n,x,Ca`.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &[(f64, State5)]) -> Result<()> {
    writeln!(w, "t,V,h,n,x,Ca")?;
    for (t, s) in traj {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(s.v),
            fmt_f64(s.h),
            fmt_f64(s.n),
            fmt_f64(s.x),
            fmt_f64(s.ca)
        )?;
    }
    Ok(())
}

/// CSV `t,kind,V,h,n,x,Ca`.
pub fn write_events_csv<W: Write>(mut w: W, events: &[Event]) -> Result<()> {
    writeln!(w, "t,kind,V,h,n,x,Ca")?;
    for e in events {
        let s = e.state;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_f64(e.t),
            e.kind.label(),
            fmt_f64(s.v),
            fmt_f64(s.h),
            fmt_f64(s.n),
            fmt_f64(s.x),
            fmt_f64(s.ca)
        )?;
    }
    Ok(())
}
