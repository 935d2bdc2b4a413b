//! The SiN vector field.
//!
//! Five state variables: membrane voltage `V`, the fast gates `h` and `n`,
//! the slow TTX-resistant gate `x` and the intracellular calcium
//! concentration `Ca`. The fast subsystem is `(V, h, n)` with `(x, Ca)`
//! frozen; its equilibria form the quiescent slow manifold ("dune").
//!
//! Units: mV, ms, nS. Calcium is treated as a dimensionless concentration.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Magnitude of the argument below which `u / (exp(u/10) - 1)` is replaced
/// by its Taylor expansion.
pub const SINGULARITY_GUARD: f64 = 1e-6;

/// Voltage window scanned for roots of the reduced voltage balance.
pub const FAST_SCAN_RANGE: (f64, f64) = (-90.0, 40.0);
const FAST_SCAN_INTERVALS: usize = 400;

/// Voltage window used for the slow nullclines.
pub const NULLCLINE_RANGE: (f64, f64) = (-70.0, 20.0);
pub const NULLCLINE_POINTS: usize = 2000;

/// Alternative slow-gate time constant (ms).
pub const TAU_X_SLOW: f64 = 235.0;

const VS_SLOPE: f64 = 127.0 / 105.0;

/// Component indices into the `[f64; 5]` state layout.
pub const IV: usize = 0;
pub const IH: usize = 1;
pub const IN: usize = 2;
pub const IX: usize = 3;
pub const ICA: usize = 4;

/// Model constants and the two bifurcation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub c_m: f64,
    pub g_i: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub g_t: f64,
    pub g_kca: f64,
    pub e_i: f64,
    pub e_k: f64,
    pub e_l: f64,
    pub e_ca: f64,
    /// Calcium relaxation rate (1/ms).
    pub rho: f64,
    /// Calcium gain (1/mV).
    pub k_c: f64,
    /// Slow gate time constant (ms).
    pub tau_x: f64,
    /// Shift of the calcium reversal potential, Δ[Ca] (mV).
    pub dca: f64,
    /// Shift of the x half-activation voltage, ΔV_x (mV).
    pub dvx: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            c_m: 1.0,
            g_i: 4.0,
            g_k: 0.3,
            g_l: 0.003,
            g_t: 0.01,
            g_kca: 0.03,
            e_i: 30.0,
            e_k: -75.0,
            e_l: -40.0,
            e_ca: 140.0,
            rho: 0.0003,
            k_c: 0.0085,
            tau_x: 100.0,
            dca: 0.0,
            dvx: 0.0,
        }
    }
}

impl ModelParams {
    /// Default constants at the given bifurcation parameters.
    pub fn new(dca: f64, dvx: f64) -> Self {
        Self {
            dca,
            dvx,
            ..Self::default()
        }
    }

    pub fn with_tau_x(mut self, tau_x: f64) -> Self {
        self.tau_x = tau_x;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c_m, self.g_i, self.g_k, self.g_l, self.g_t, self.g_kca, self.e_i, self.e_k,
            self.e_l, self.e_ca, self.rho, self.k_c, self.tau_x, self.dca, self.dvx,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("model parameter is not finite".into()));
        }
        if [self.g_i, self.g_k, self.g_l, self.g_t, self.g_kca]
            .iter()
            .any(|&g| g < 0.0)
        {
            return Err(Error::InvalidArgument("conductances must be >= 0".into()));
        }
        if self.c_m <= 0.0 || self.tau_x <= 0.0 || self.rho <= 0.0 || self.k_c <= 0.0 {
            return Err(Error::InvalidArgument(
                "c_m, tau_x, rho and k_c must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Voltage at which `x_inf` equals one half.
    pub fn x_half_activation(&self) -> f64 {
        self.dvx - 50.0
    }
}

/// Full phase point `(V, h, n, x, Ca)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State5 {
    pub v: f64,
    pub h: f64,
    pub n: f64,
    pub x: f64,
    pub ca: f64,
}

impl State5 {
    pub const fn new(v: f64, h: f64, n: f64, x: f64, ca: f64) -> Self {
        Self { v, h, n, x, ca }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.v, self.h, self.n, self.x, self.ca]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[IV], a[IH], a[IN], a[IX], a[ICA])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Fast coordinates with `(x, Ca)` dropped.
    pub fn fast(&self) -> FastState {
        FastState {
            v: self.v,
            h: self.h,
            n: self.n,
        }
    }
}

impl From<[f64; 5]> for State5 {
    fn from(a: [f64; 5]) -> Self {
        Self::from_array(a)
    }
}

impl From<State5> for [f64; 5] {
    fn from(s: State5) -> Self {
        s.to_array()
    }
}

/// Fast coordinates `(V, h, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FastState {
    pub v: f64,
    pub h: f64,
    pub n: f64,
}

impl FastState {
    pub fn with_slow(self, x: f64, ca: f64) -> State5 {
        State5::new(self.v, self.h, self.n, x, ca)
    }
}

/// Steady states, time constants and raw rates at one voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gating {
    pub m_inf: f64,
    pub h_inf: f64,
    pub tau_h: f64,
    pub n_inf: f64,
    pub tau_n: f64,
    pub x_inf: f64,
    pub alpha_m: f64,
    pub beta_m: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
}

/// Voltage derivatives of the gating functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GatingSlopes {
    pub m_inf: f64,
    pub h_inf: f64,
    pub tau_h: f64,
    pub n_inf: f64,
    pub tau_n: f64,
    pub x_inf: f64,
}

/// Ionic currents at one phase point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Currents {
    pub i_i: f64,
    pub i_k: f64,
    pub i_t: f64,
    pub i_kca: f64,
    pub i_leak: f64,
}

impl Currents {
    pub fn total(&self) -> f64 {
        self.i_i + self.i_k + self.i_t + self.i_kca + self.i_leak
    }
}

#[inline]
fn shifted_voltage(v: f64) -> f64 {
    (127.0 * v + 8265.0) / 105.0
}

/// `u / (exp(u/10) - 1)` with the removable singularity at `u = 0` filled in.
#[inline]
fn exprel10(u: f64) -> f64 {
    if u.abs() < SINGULARITY_GUARD {
        10.0 - 0.5 * u + u * u / 120.0
    } else {
        u / (0.1 * u).exp_m1()
    }
}

/// d/du of [`exprel10`].
#[inline]
fn exprel10_slope(u: f64) -> f64 {
    let x = 0.1 * u;
    if x.abs() < 1e-2 {
        let x2 = x * x;
        -0.5 + x / 6.0 - x * x2 / 180.0 + x * x2 * x2 / 5040.0
    } else {
        let em1 = x.exp_m1();
        (em1 - x * x.exp()) / (em1 * em1)
    }
}

#[inline]
fn x_inf_at(v: f64, p: &ModelParams) -> f64 {
    1.0 / (1.0 + (-0.15 * (v - p.x_half_activation())).exp())
}

/// Evaluate every gating function at voltage `v`.
pub fn gating(v: f64, p: &ModelParams) -> Gating {
    let vs = shifted_voltage(v);
    let alpha_m = 0.1 * exprel10(50.0 - vs);
    let beta_m = 4.0 * ((25.0 - vs) / 18.0).exp();
    let alpha_h = 0.07 * ((25.0 - vs) / 20.0).exp();
    let beta_h = 1.0 / (1.0 + ((55.0 - vs) / 10.0).exp());
    let alpha_n = 0.01 * exprel10(55.0 - vs);
    let beta_n = 0.125 * ((45.0 - vs) / 80.0).exp();
    Gating {
        m_inf: alpha_m / (alpha_m + beta_m),
        h_inf: alpha_h / (alpha_h + beta_h),
        tau_h: 12.5 / (alpha_h + beta_h),
        n_inf: alpha_n / (alpha_n + beta_n),
        tau_n: 12.5 / (alpha_n + beta_n),
        x_inf: x_inf_at(v, p),
        alpha_m,
        beta_m,
        alpha_h,
        beta_h,
        alpha_n,
        beta_n,
    }
}

pub(crate) fn gating_slopes(v: f64, g: &Gating, p: &ModelParams) -> GatingSlopes {
    let vs = shifted_voltage(v);
    let d_alpha_m = -0.1 * exprel10_slope(50.0 - vs) * VS_SLOPE;
    let d_beta_m = -g.beta_m / 18.0 * VS_SLOPE;
    let d_alpha_h = -g.alpha_h / 20.0 * VS_SLOPE;
    let e_h = ((55.0 - vs) / 10.0).exp();
    let d_beta_h = e_h / (10.0 * (1.0 + e_h) * (1.0 + e_h)) * VS_SLOPE;
    let d_alpha_n = -0.01 * exprel10_slope(55.0 - vs) * VS_SLOPE;
    let d_beta_n = -g.beta_n / 80.0 * VS_SLOPE;

    let ratio = |a: f64, b: f64, da: f64, db: f64| (da * b - a * db) / ((a + b) * (a + b));
    let tau = |a: f64, b: f64, da: f64, db: f64| -12.5 * (da + db) / ((a + b) * (a + b));

    let e_x = (-0.15 * (v - p.x_half_activation())).exp();
    GatingSlopes {
        m_inf: ratio(g.alpha_m, g.beta_m, d_alpha_m, d_beta_m),
        h_inf: ratio(g.alpha_h, g.beta_h, d_alpha_h, d_beta_h),
        tau_h: tau(g.alpha_h, g.beta_h, d_alpha_h, d_beta_h),
        n_inf: ratio(g.alpha_n, g.beta_n, d_alpha_n, d_beta_n),
        tau_n: tau(g.alpha_n, g.beta_n, d_alpha_n, d_beta_n),
        x_inf: 0.15 * e_x / ((1.0 + e_x) * (1.0 + e_x)),
    }
}

#[inline]
fn currents_with(s: &[f64; 5], m_inf: f64, p: &ModelParams) -> Currents {
    let v = s[IV];
    let ca = s[ICA];
    Currents {
        i_i: p.g_i * s[IH] * m_inf * m_inf * m_inf * (v - p.e_i),
        i_k: p.g_k * s[IN].powi(4) * (v - p.e_k),
        i_t: p.g_t * s[IX] * (v - p.e_i),
        i_kca: p.g_kca * ca / (0.5 + ca) * (v - p.e_k),
        i_leak: p.g_l * (v - p.e_l),
    }
}

/// Ionic currents at phase point `s`.
pub fn currents(s: &State5, p: &ModelParams) -> Currents {
    let g = gating(s.v, p);
    currents_with(&s.to_array(), g.m_inf, p)
}

/// Vector field on the raw array layout. No input validation.
#[inline]
pub fn rhs_array(s: &[f64; 5], p: &ModelParams) -> [f64; 5] {
    let v = s[IV];
    let g = gating(v, p);
    let i = currents_with(s, g.m_inf, p);
    [
        -i.total() / p.c_m,
        (g.h_inf - s[IH]) / g.tau_h,
        (g.n_inf - s[IN]) / g.tau_n,
        (g.x_inf - s[IX]) / p.tau_x,
        p.rho * (p.k_c * s[IX] * (p.e_ca - v + p.dca) - s[ICA]),
    ]
}

/// Time derivative of the full state.
pub fn rhs(s: &State5, p: &ModelParams) -> Result<State5> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("state {s:?}")));
    }
    Ok(State5::from_array(rhs_array(&s.to_array(), p)))
}

/// Derivative of the fast subsystem with `(x, Ca)` frozen.
pub fn fast_rhs(f: &FastState, x: f64, ca: f64, p: &ModelParams) -> FastState {
    let d = rhs_array(&[f.v, f.h, f.n, x, ca], p);
    FastState {
        v: d[IV],
        h: d[IH],
        n: d[IN],
    }
}

/// Jacobian of the full vector field, analytic.
pub fn jacobian_array(s: &[f64; 5], p: &ModelParams) -> [[f64; 5]; 5] {
    let v = s[IV];
    let (h, n, x, ca) = (s[IH], s[IN], s[IX], s[ICA]);
    let g = gating(v, p);
    let d = gating_slopes(v, &g, p);
    let m3 = g.m_inf * g.m_inf * g.m_inf;
    let sat = ca / (0.5 + ca);
    let cm = p.c_m;

    let mut j = [[0.0; 5]; 5];
    j[IV][IV] = -(p.g_i * h * (3.0 * g.m_inf * g.m_inf * d.m_inf * (v - p.e_i) + m3)
        + p.g_k * n.powi(4)
        + p.g_t * x
        + p.g_kca * sat
        + p.g_l)
        / cm;
    j[IV][IH] = -p.g_i * m3 * (v - p.e_i) / cm;
    j[IV][IN] = -4.0 * p.g_k * n.powi(3) * (v - p.e_k) / cm;
    j[IV][IX] = -p.g_t * (v - p.e_i) / cm;
    j[IV][ICA] = -p.g_kca * 0.5 / ((0.5 + ca) * (0.5 + ca)) * (v - p.e_k) / cm;

    j[IH][IV] = (d.h_inf * g.tau_h - (g.h_inf - h) * d.tau_h) / (g.tau_h * g.tau_h);
    j[IH][IH] = -1.0 / g.tau_h;

    j[IN][IV] = (d.n_inf * g.tau_n - (g.n_inf - n) * d.tau_n) / (g.tau_n * g.tau_n);
    j[IN][IN] = -1.0 / g.tau_n;

    j[IX][IV] = d.x_inf / p.tau_x;
    j[IX][IX] = -1.0 / p.tau_x;

    j[ICA][IV] = -p.rho * p.k_c * x;
    j[ICA][IX] = p.rho * p.k_c * (p.e_ca - v + p.dca);
    j[ICA][ICA] = -p.rho;
    j
}

/// Second time derivative of V along the flow, `grad(V') . f`.
pub fn voltage_acceleration(s: &[f64; 5], p: &ModelParams) -> f64 {
    let f = rhs_array(s, p);
    let j = jacobian_array(s, p);
    (0..5).map(|k| j[IV][k] * f[k]).sum()
}

/// Voltage balance of the fast subsystem with `h`, `n` at steady state.
fn fast_balance(v: f64, x: f64, ca: f64, p: &ModelParams) -> f64 {
    let g = gating(v, p);
    let s = [v, g.h_inf, g.n_inf, x, ca];
    -currents_with(&s, g.m_inf, p).total() / p.c_m
}

fn fast_balance_slope(v: f64, x: f64, ca: f64, p: &ModelParams) -> f64 {
    let g = gating(v, p);
    let d = gating_slopes(v, &g, p);
    let j = jacobian_array(&[v, g.h_inf, g.n_inf, x, ca], p);
    j[IV][IV] + j[IV][IH] * d.h_inf + j[IV][IN] * d.n_inf
}

/// Roots of a scalar function on `[lo, hi]` by a uniform sign-change scan,
/// bisection and a guarded Newton polish.
pub(crate) fn scan_roots(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    intervals: usize,
) -> Vec<f64> {
    let step = (hi - lo) / intervals as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for i in 1..=intervals {
        let b = if i == intervals { hi } else { lo + step * i as f64 };
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.is_finite() && fb.is_finite() && fa * fb < 0.0 {
            roots.push(refine_root(&f, &df, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(a);
    }
    roots
}

fn refine_root(
    f: &impl Fn(f64) -> f64,
    df: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) < 1e-12 {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let mut r = 0.5 * (a + b);
    for _ in 0..4 {
        let slope = df(r);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = r - f(r) / slope;
        // keep the polish inside a slightly widened bracket
        if !(next > a - 1e-9 && next < b + 1e-9) {
            break;
        }
        if next == r {
            break;
        }
        r = next;
    }
    r
}

/// All equilibria of the fast subsystem at frozen `(x, Ca)`, ordered by voltage.
pub fn fast_equilibria(x: f64, ca: f64, p: &ModelParams) -> Vec<FastState> {
    scan_roots(
        |v| fast_balance(v, x, ca, p),
        |v| fast_balance_slope(v, x, ca, p),
        FAST_SCAN_RANGE.0,
        FAST_SCAN_RANGE.1,
        FAST_SCAN_INTERVALS,
    )
    .into_iter()
    .map(|v| {
        let g = gating(v, p);
        FastState {
            v,
            h: g.h_inf,
            n: g.n_inf,
        }
    })
    .collect()
}

/// Equilibrium of the fast subsystem at frozen `(x, Ca)`.
///
/// With several roots, the one nearest `v_hint` is returned; without a hint,
/// the most hyperpolarized one.
pub fn fast_equilibrium(
    x: f64,
    ca: f64,
    p: &ModelParams,
    v_hint: Option<f64>,
) -> Result<FastState> {
    if !x.is_finite() || !ca.is_finite() {
        return Err(Error::Domain(format!("slow pair ({x}, {ca})")));
    }
    let roots = fast_equilibria(x, ca, p);
    let pick = match v_hint {
        Some(hint) => roots.iter().copied().min_by(|a, b| {
            (a.v - hint)
                .abs()
                .partial_cmp(&(b.v - hint).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        }),
        None => roots.first().copied(),
    };
    pick.ok_or(Error::NoRoot {
        x,
        ca,
        lo: FAST_SCAN_RANGE.0,
        hi: FAST_SCAN_RANGE.1,
    })
}

/// 3x3 Jacobian of the fast subsystem.
pub fn fast_jacobian(f: &FastState, x: f64, ca: f64, p: &ModelParams) -> [[f64; 3]; 3] {
    let j = jacobian_array(&[f.v, f.h, f.n, x, ca], p);
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        row.copy_from_slice(&j[r][..3]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullclineKind {
    /// `x' = 0`
    X,
    /// `Ca' = 0`
    Ca,
}

impl NullclineKind {
    pub fn label(self) -> &'static str {
        match self {
            NullclineKind::X => "x",
            NullclineKind::Ca => "ca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullclineFlag {
    Ok,
    /// The required calcium concentration is negative.
    NegativeCalcium,
    /// The required KCa activation is >= 1, no finite calcium satisfies it.
    SaturatedKCa,
    /// No gate value in `[0, 1]` solves the balance at this voltage.
    NoRoot,
}

impl NullclineFlag {
    pub fn label(self) -> &'static str {
        match self {
            NullclineFlag::Ok => "ok",
            NullclineFlag::NegativeCalcium => "negative_ca",
            NullclineFlag::SaturatedKCa => "saturated_kca",
            NullclineFlag::NoRoot => "no_root",
        }
    }

    pub fn is_ok(self) -> bool {
        self == NullclineFlag::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullclinePoint {
    pub v: f64,
    pub ca: f64,
    pub x: f64,
    pub flag: NullclineFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullclineCurve {
    pub kind: NullclineKind,
    pub points: Vec<NullclinePoint>,
}

impl NullclineCurve {
    pub fn valid_points(&self) -> impl Iterator<Item = &NullclinePoint> {
        self.points.iter().filter(|q| q.flag.is_ok())
    }
}

/// Uniform voltage grid over the nullcline window.
pub fn default_v_grid() -> Vec<f64> {
    let (lo, hi) = NULLCLINE_RANGE;
    let n = NULLCLINE_POINTS;
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Fast-subsystem currents other than the two slow ones, with `h`, `n` at steady state.
fn fast_current_sum(v: f64, p: &ModelParams) -> f64 {
    let g = gating(v, p);
    p.g_i * g.h_inf * g.m_inf.powi(3) * (v - p.e_i)
        + p.g_k * g.n_inf.powi(4) * (v - p.e_k)
        + p.g_l * (v - p.e_l)
}

/// Slow nullclines parameterized by the fast-equilibrium voltage.
///
/// The x-nullcline sets `x = x_inf(V)` and solves the voltage balance for the
/// calcium concentration. The Ca-nullcline substitutes
/// `Ca = K_c x (E_Ca - V + dCa)` into the balance, which is quadratic in `x`;
/// where two admissible roots exist, the lower root is traced with `V`
/// increasing and the upper root on the way back, so the points form one
/// ordered curve.
pub fn nullclines(p: &ModelParams, v_grid: &[f64]) -> (NullclineCurve, NullclineCurve) {
    let mut xs = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        let x = x_inf_at(v, p);
        let i_t = p.g_t * x * (v - p.e_i);
        let i_kca = -fast_current_sum(v, p) - i_t;
        let full = p.g_kca * (v - p.e_k);
        let ca = 0.5 * i_kca / (full - i_kca);
        let activation = i_kca / full;
        let flag = if !ca.is_finite() || !(activation < 1.0) {
            NullclineFlag::SaturatedKCa
        } else if activation < 0.0 {
            NullclineFlag::NegativeCalcium
        } else {
            NullclineFlag::Ok
        };
        xs.push(NullclinePoint { v, ca, x, flag });
    }

    let mut lower = Vec::with_capacity(v_grid.len());
    let mut upper = Vec::new();
    for &v in v_grid {
        let fast = fast_current_sum(v, p);
        let a = p.g_t * (v - p.e_i);
        let b = p.g_kca * (v - p.e_k);
        let c = p.k_c * (p.e_ca - v + p.dca);
        // a c x^2 + (A c + a/2 + b c) x + A/2 = 0
        let qa = a * c;
        let qb = fast * c + 0.5 * a + b * c;
        let qc = 0.5 * fast;
        let mut roots: Vec<f64> = quadratic_roots(qa, qb, qc)
            .into_iter()
            .filter(|x| (0.0..=1.0).contains(x))
            .collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let point = |x: f64| NullclinePoint {
            v,
            ca: c * x,
            x,
            flag: if c * x < 0.0 {
                NullclineFlag::NegativeCalcium
            } else {
                NullclineFlag::Ok
            },
        };
        match roots.as_slice() {
            [] => lower.push(NullclinePoint {
                v,
                ca: f64::NAN,
                x: f64::NAN,
                flag: NullclineFlag::NoRoot,
            }),
            [x] => lower.push(point(*x)),
            [x0, x1, ..] => {
                lower.push(point(*x0));
                upper.push(point(*x1));
            }
        }
    }
    upper.reverse();
    lower.extend(upper);

    (
        NullclineCurve {
            kind: NullclineKind::X,
            points: xs,
        },
        NullclineCurve {
            kind: NullclineKind::Ca,
            points: lower,
        },
    )
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // cancellation-free form
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut r = Vec::with_capacity(2);
    if q != 0.0 {
        r.push(q / a);
        r.push(c / q);
    } else {
        r.push(0.0);
    }
    r
}

/// CSV with header `kind,V,Ca,x,flag`.
pub fn write_nullclines_csv<W: Write>(mut w: W, curves: &[&NullclineCurve]) -> Result<()> {
    writeln!(w, "kind,V,Ca,x,flag")?;
    for curve in curves {
        for q in &curve.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                curve.kind.label(),
                fmt_f64(q.v),
                fmt_f64(q.ca),
                fmt_f64(q.x),
                q.flag.label()
            )?;
        }
    }
    Ok(())
}
