//! Lyapunov spectrum by co-integration of the variational equations with
//! periodic QR re-orthonormalization, and the Kaplan-Yorke dimension.

use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Solver};
use crate::model::{jacobian_array, rhs_array, ModelParams, State5};

const D: usize = 5;
/// Base state, 5 tangent vectors, then the running integral of trace(J).
const AUG: usize = D + D * D + 1;
const TAN: usize = D;
const TRACE: usize = D + D * D;

/// A flow with a Jacobian, the only input the variational integration needs.
pub trait VariationalSystem {
    fn flow(&self, y: &[f64; 5]) -> [f64; 5];
    fn jacobian(&self, y: &[f64; 5]) -> [[f64; 5]; 5];
}

impl VariationalSystem for ModelParams {
    fn flow(&self, y: &[f64; 5]) -> [f64; 5] {
        rhs_array(y, self)
    }

    fn jacobian(&self, y: &[f64; 5]) -> [[f64; 5]; 5] {
        jacobian_array(y, self)
    }
}

/// Linear flow `y' = A y`; its exponents are the real parts of the spectrum of `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSystem(pub [[f64; 5]; 5]);

impl VariationalSystem for LinearSystem {
    fn flow(&self, y: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|i| (0..D).map(|k| self.0[i][k] * y[k]).sum())
    }

    fn jacobian(&self, _y: &[f64; 5]) -> [[f64; 5]; 5] {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovConfig {
    /// Discarded before accumulation starts (ms).
    pub t_transient: f64,
    /// Averaging horizon after the transient (ms).
    pub t_total: f64,
    /// Time between QR re-orthonormalizations (ms).
    pub renorm_interval: f64,
    /// Number of running estimates recorded over the horizon.
    pub checkpoints: usize,
    pub integrator: IntegratorConfig,
    /// Columns of the initial tangent frame; identity when absent.
    pub initial_frame: Option<[[f64; 5]; 5]>,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            t_transient: 1e4,
            t_total: 1e5,
            renorm_interval: 1.0,
            checkpoints: 20,
            integrator: IntegratorConfig::default(),
            initial_frame: None,
        }
    }
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_transient >= 0.0 && self.t_total > self.t_transient) {
            return Err(Error::InvalidArgument(
                "require t_total > t_transient >= 0".into(),
            ));
        }
        if !(self.renorm_interval > 0.0 && self.renorm_interval.is_finite()) {
            return Err(Error::InvalidArgument("renorm_interval must be > 0".into()));
        }
        self.integrator.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Averaging time elapsed (ms).
    pub t: f64,
    pub exponents: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovResult {
    /// Sorted descending (1/ms).
    pub exponents: [f64; 5],
    /// `None` when the dimension is undefined.
    pub dim_l: Option<f64>,
    pub t_total: f64,
    pub t_transient: f64,
    pub convergence_trace: Vec<Checkpoint>,
    /// False when the last two checkpoint estimates of the leading exponent
    /// differ by more than 20%.
    pub converged: bool,
    /// Time average of trace(J) over the averaging window.
    pub mean_trace: f64,
    /// Largest |G - I| entry over all re-orthonormalized frames.
    pub max_frame_error: f64,
    pub final_state: State5,
}

/// Orthonormalize the columns of `w` in place by modified Gram-Schmidt with
/// one re-orthogonalization pass; returns the diagonal of R.
pub fn mgs_qr(w: &mut [[f64; 5]; 5]) -> [f64; 5] {
    let mut r = [0.0; 5];
    for j in 0..D {
        for _pass in 0..2 {
            for i in 0..j {
                let dot: f64 = (0..D).map(|k| w[i][k] * w[j][k]).sum();
                for k in 0..D {
                    w[j][k] -= dot * w[i][k];
                }
            }
        }
        let n = w[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        r[j] = n;
        if n > 0.0 {
            for k in 0..D {
                w[j][k] /= n;
            }
        }
    }
    r
}

/// Largest entry of `|Q^T Q - I|` for column vectors `q`.
pub fn frame_error(q: &[[f64; 5]; 5]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..D {
        for j in 0..D {
            let g: f64 = (0..D).map(|k| q[i][k] * q[j][k]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

fn augmented<S: VariationalSystem>(sys: &S) -> impl Fn(f64, &[f64; AUG]) -> [f64; AUG] + '_ {
    move |_t, y| {
        let base: [f64; 5] = std::array::from_fn(|i| y[i]);
        let f = sys.flow(&base);
        let j = sys.jacobian(&base);
        let mut out = [0.0; AUG];
        out[..D].copy_from_slice(&f);
        out[TRACE] = (0..D).map(|i| j[i][i]).sum();
        for v in 0..D {
            let off = TAN + D * v;
            for i in 0..D {
                let mut acc = 0.0;
                for k in 0..D {
                    acc += j[i][k] * y[off + k];
                }
                out[off + i] = acc;
            }
        }
        out
    }
}

fn sort_desc(mut v: [f64; 5]) -> [f64; 5] {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Lyapunov spectrum of `sys` along the orbit of `s0`.
///
/// The base flow first runs for `t_transient`; exponents are then averaged
/// over the following `t_total` ms. Base and tangent components share one
/// step controller; the trace integral is excluded from error control.
pub fn lyapunov_spectrum<S: VariationalSystem>(
    s0: &State5,
    sys: &S,
    cfg: &LyapunovConfig,
) -> Result<LyapunovResult> {
    cfg.validate()?;
    if !s0.is_finite() {
        return Err(Error::Domain(format!("initial state {s0:?}")));
    }
    let mut base = s0.to_array();
    if cfg.t_transient > 0.0 {
        let mut solver = Solver::new(|_t, y: &[f64; 5]| sys.flow(y), 0.0, base, &cfg.integrator, D);
        solver.advance_to(cfg.t_transient)?;
        base = solver.y;
    }

    let mut frame = cfg.initial_frame.unwrap_or_else(|| {
        std::array::from_fn(|i| std::array::from_fn(|k| if i == k { 1.0 } else { 0.0 }))
    });
    let mut max_frame_error = 0.0f64;
    if cfg.initial_frame.is_some() {
        mgs_qr(&mut frame);
    }
    let mut y0 = [0.0; AUG];
    y0[..D].copy_from_slice(&base);
    for v in 0..D {
        y0[TAN + D * v..TAN + D * (v + 1)].copy_from_slice(&frame[v]);
    }

    let rhs = augmented(sys);
    let mut solver = Solver::new(rhs, 0.0, y0, &cfg.integrator, TRACE);
    let mut log_sum = [0.0; 5];
    let horizon = cfg.t_total;
    let n_renorm = (horizon / cfg.renorm_interval).ceil().max(1.0) as usize;
    let n_check = cfg.checkpoints.max(1);
    let mut next_check = 1usize;
    let mut trace = Vec::with_capacity(n_check);

    for step in 1..=n_renorm {
        let t_target = (step as f64 * cfg.renorm_interval).min(horizon);
        solver.advance_to(t_target)?;
        let mut y = solver.y;
        let mut w: [[f64; 5]; 5] =
            std::array::from_fn(|v| std::array::from_fn(|k| y[TAN + D * v + k]));
        let r = mgs_qr(&mut w);
        for i in 0..D {
            log_sum[i] += r[i].ln();
        }
        max_frame_error = max_frame_error.max(frame_error(&w));
        for v in 0..D {
            y[TAN + D * v..TAN + D * (v + 1)].copy_from_slice(&w[v]);
        }
        solver.reset_state(y);

        while next_check <= n_check
            && (step == n_renorm || t_target >= horizon * next_check as f64 / n_check as f64)
        {
            trace.push(Checkpoint {
                t: t_target,
                exponents: sort_desc(std::array::from_fn(|i| log_sum[i] / t_target)),
            });
            next_check += 1;
        }
    }

    let exponents = sort_desc(std::array::from_fn(|i| log_sum[i] / horizon));
    let converged = match trace.as_slice() {
        [.., a, b] => {
            let (x, y) = (a.exponents[0], b.exponents[0]);
            (x - y).abs() <= 0.2 * x.abs().max(y.abs())
        }
        _ => true,
    };
    Ok(LyapunovResult {
        exponents,
        dim_l: lyapunov_dimension(&exponents).ok(),
        t_total: cfg.t_total,
        t_transient: cfg.t_transient,
        convergence_trace: trace,
        converged,
        mean_trace: solver.y[TRACE] / horizon,
        max_frame_error,
        final_state: State5::from_array(std::array::from_fn(|i| solver.y[i])),
    })
}

/// Kaplan-Yorke dimension by the partial-sum staircase.
///
/// `k` is the largest index with a non-negative partial sum and the result is
/// `k + S_k / |lambda_{k+1}|`; zero when the leading exponent is negative.
pub fn kaplan_yorke(exponents: &[f64]) -> Result<f64> {
    if exponents.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("exponents must be sorted descending".into()));
    }
    match exponents.first() {
        None => return Err(Error::InvalidArgument("empty spectrum".into())),
        Some(&l1) if l1 < 0.0 => return Ok(0.0),
        _ => {}
    }
    let mut sum = 0.0;
    let mut k = 0;
    let mut s_k = 0.0;
    for (i, l) in exponents.iter().enumerate() {
        sum += l;
        if sum >= 0.0 {
            k = i + 1;
            s_k = sum;
        }
    }
    if k == exponents.len() {
        return Err(Error::Undefined);
    }
    Ok(k as f64 + s_k / exponents[k].abs())
}

/// Dimension reported with a spectrum: `2 + lambda_1 / |lambda_3|` for a
/// chaotic flow whose first three exponents sum to a negative number, the
/// general staircase otherwise.
pub fn lyapunov_dimension(exponents: &[f64; 5]) -> Result<f64> {
    let [l1, l2, l3, ..] = *exponents;
    if l1 > 0.0 && l1 + l2 + l3 < 0.0 {
        return Ok(2.0 + l1 / l3.abs());
    }
    kaplan_yorke(exponents)
}
