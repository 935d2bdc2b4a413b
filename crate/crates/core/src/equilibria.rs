//! Equilibria of the full model and their linear classification.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Eigen};
use crate::model::{gating, jacobian_array, rhs_array, scan_roots, ModelParams, State5, IV, IX};

/// Scan window of the scalar equilibrium reduction.
pub const EQ_SCAN_RANGE: (f64, f64) = (-90.0, 40.0);
/// Bracketing cells over [`EQ_SCAN_RANGE`].
pub const EQ_SCAN_INTERVALS: usize = 2000;
/// Roots closer than this in voltage are merged.
pub const DEDUP_TOL: f64 = 1e-6;
/// Real parts with smaller magnitude count as zero.
pub const ZERO_REAL_TOL: f64 = 1e-9;

/// Typical component ranges `(V, h, n, x, Ca)`; perturbation sizes are
/// measured after dividing by these.
pub const STATE_SCALE: [f64; 5] = [100.0, 1.0, 1.0, 1.0, 2.0];
/// Default separatrix / focus-circle radius in scaled units.
pub const SEED_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// All real parts negative.
    StableFocusNode,
    /// One positive real eigenvalue.
    Saddle41,
    /// Two positive real eigenvalues.
    Saddle32,
    /// A complex pair with positive real part.
    SaddleFocus32,
    /// Any other pattern, or a real part within `ZERO_REAL_TOL` of zero.
    Degenerate,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::StableFocusNode => "stable",
            Classification::Saddle41 => "saddle41",
            Classification::Saddle32 => "saddle32",
            Classification::SaddleFocus32 => "saddle_focus32",
            Classification::Degenerate => "degenerate",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub state: State5,
    /// Sorted by real part ascending.
    pub eigenvalues: Vec<Complex64>,
    /// Unit eigenvectors matching `eigenvalues`.
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub classification: Classification,
}

impl Equilibrium {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Real part closest to zero.
    pub fn min_abs_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Analytic Jacobian of the vector field.
pub fn jacobian(s: &State5, p: &ModelParams) -> [[f64; 5]; 5] {
    jacobian_array(&s.to_array(), p)
}

/// Eigenvalues and unit eigenvectors of a 5x5 matrix.
pub fn eigen5(j: &[[f64; 5]; 5]) -> Result<Eigen> {
    linalg::eigen5(j)
}

/// Topological type from the sign pattern of the real parts.
pub fn classify(values: &[Complex64]) -> Classification {
    if values.iter().any(|l| l.re.abs() < ZERO_REAL_TOL) {
        return Classification::Degenerate;
    }
    let unstable: Vec<&Complex64> = values.iter().filter(|l| l.re > 0.0).collect();
    match unstable.as_slice() {
        [] => Classification::StableFocusNode,
        [a] if a.im == 0.0 => Classification::Saddle41,
        [a, b] if a.im == 0.0 && b.im == 0.0 => Classification::Saddle32,
        [a, b] if a.im != 0.0 && (a.conj() - **b).norm() <= 1e-9 * a.norm().max(1.0) => {
            Classification::SaddleFocus32
        }
        _ => Classification::Degenerate,
    }
}

/// Equilibrium candidate on the curve `(V, h_inf, n_inf, x_inf, Ca(V))`.
fn reduced_state(v: f64, p: &ModelParams) -> [f64; 5] {
    let g = gating(v, p);
    let ca = p.k_c * g.x_inf * (p.e_ca - v + p.dca);
    [v, g.h_inf, g.n_inf, g.x_inf, ca]
}

fn reduced_balance(v: f64, p: &ModelParams) -> f64 {
    rhs_array(&reduced_state(v, p), p)[IV]
}

fn newton_polish(y: [f64; 5], p: &ModelParams) -> [f64; 5] {
    let mut y = y;
    let norm = |f: &[f64; 5]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best = (norm(&rhs_array(&y, p)), y);
    for _ in 0..20 {
        let f = rhs_array(&y, p);
        if norm(&f) < 1e-14 {
            break;
        }
        let j = jacobian_array(&y, p);
        let a: Vec<Vec<f64>> = j.iter().map(|r| r.to_vec()).collect();
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let Ok(dy) = linalg::solve(&a, &neg) else {
            break;
        };
        for i in 0..5 {
            y[i] += dy[i];
        }
        let r = norm(&rhs_array(&y, p));
        if r < best.0 {
            best = (r, y);
        }
    }
    best.1
}

/// Build an [`Equilibrium`] record with spectrum and classification.
pub fn equilibrium_at(state: State5, p: &ModelParams) -> Result<Equilibrium> {
    let e = eigen5(&jacobian(&state, p))?;
    let classification = classify(&e.values);
    Ok(Equilibrium {
        state,
        eigenvalues: e.values,
        eigenvectors: e.vectors,
        classification,
    })
}

/// All equilibria, ordered by voltage ascending.
pub fn find_equilibria(p: &ModelParams) -> Result<Vec<Equilibrium>> {
    find_equilibria_with(p, EQ_SCAN_INTERVALS)
}

/// [`find_equilibria`] with `intervals` bracketing cells over the voltage scan.
pub fn find_equilibria_with(p: &ModelParams, intervals: usize) -> Result<Vec<Equilibrium>> {
    p.validate()?;
    if intervals == 0 {
        return Err(Error::InvalidArgument("scan needs at least one interval".into()));
    }
    let h = 1e-6;
    let roots = scan_roots(
        |v| reduced_balance(v, p),
        |v| (reduced_balance(v + h, p) - reduced_balance(v - h, p)) / (2.0 * h),
        EQ_SCAN_RANGE.0,
        EQ_SCAN_RANGE.1,
        intervals,
    );
    let mut states: Vec<[f64; 5]> = Vec::new();
    for v in roots {
        let y = newton_polish(reduced_state(v, p), p);
        if states.iter().all(|s| (s[IV] - y[IV]).abs() > DEDUP_TOL) {
            states.push(y);
        }
    }
    states.sort_by(|a, b| a[IV].total_cmp(&b[IV]));
    states
        .into_iter()
        .map(|y| equilibrium_at(State5::from_array(y), p))
        .collect()
}

/// The most hyperpolarized equilibrium.
pub fn lower_equilibrium(eqs: &[Equilibrium]) -> Option<&Equilibrium> {
    eqs.iter().min_by(|a, b| a.state.v.total_cmp(&b.state.v))
}

/// The highest-voltage one-dimensionally unstable saddle.
pub fn upper_saddle(eqs: &[Equilibrium]) -> Option<&Equilibrium> {
    eqs.iter()
        .filter(|e| e.classification == Classification::Saddle41)
        .max_by(|a, b| a.state.v.total_cmp(&b.state.v))
}

/// Unstable directions of a saddle, in raw state units.
#[derive(Debug, Clone, PartialEq)]
pub enum UnstableDirections {
    /// Both branches of the one-dimensional unstable manifold.
    Separatrix {
        /// Seed with negative `V` offset.
        beneath: State5,
        above: State5,
        /// Raw-unit offset of `above` from the saddle.
        offset: [f64; 5],
    },
    /// Real plane of the unstable complex eigenvector, orthonormal in the
    /// `STATE_SCALE` metric.
    FocusPlane {
        center: State5,
        u1: [f64; 5],
        u2: [f64; 5],
    },
}

fn scaled_dot(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    (0..5).map(|i| a[i] * b[i] / (STATE_SCALE[i] * STATE_SCALE[i])).sum()
}

/// Inner product in the `STATE_SCALE` metric.
pub fn scaled_inner(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    scaled_dot(a, b)
}

fn unstable_index(eq: &Equilibrium) -> Option<usize> {
    eq.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| l.re > 0.0 && l.im >= 0.0)
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(i, _)| i)
}

/// Seeds on the unstable manifold at radius `eps` (scaled units).
pub fn unstable_directions(eq: &Equilibrium, eps: f64) -> Result<UnstableDirections> {
    let wrong = |expected: &str| Error::WrongClass {
        found: eq.classification.to_string(),
        expected: expected.to_string(),
    };
    let c = eq.state.to_array();
    match eq.classification {
        Classification::Saddle41 => {
            let k = unstable_index(eq).ok_or_else(|| wrong("saddle41"))?;
            let mut d: [f64; 5] = std::array::from_fn(|i| eq.eigenvectors[k][i].re);
            let n = scaled_dot(&d, &d).sqrt();
            let flip = if d[IV] != 0.0 { d[IV] > 0.0 } else { d[IX] > 0.0 };
            let sgn = if flip { 1.0 } else { -1.0 };
            for v in d.iter_mut() {
                *v *= sgn * eps / n;
            }
            Ok(UnstableDirections::Separatrix {
                beneath: State5::from_array(std::array::from_fn(|i| c[i] - d[i])),
                above: State5::from_array(std::array::from_fn(|i| c[i] + d[i])),
                offset: d,
            })
        }
        Classification::SaddleFocus32 => {
            let k = unstable_index(eq).ok_or_else(|| wrong("saddle_focus32"))?;
            let w = &eq.eigenvectors[k];
            let mut u1: [f64; 5] = std::array::from_fn(|i| w[i].re);
            let mut u2: [f64; 5] = std::array::from_fn(|i| w[i].im);
            let n1 = scaled_dot(&u1, &u1).sqrt();
            u1.iter_mut().for_each(|v| *v /= n1);
            let proj = scaled_dot(&u1, &u2);
            for i in 0..5 {
                u2[i] -= proj * u1[i];
            }
            let n2 = scaled_dot(&u2, &u2).sqrt();
            u2.iter_mut().for_each(|v| *v /= n2);
            Ok(UnstableDirections::FocusPlane {
                center: eq.state,
                u1,
                u2,
            })
        }
        _ => Err(wrong("saddle41 or saddle_focus32")),
    }
}

/// Point `center + eps (u1 cos(theta) + u2 sin(theta))` on the focus circle.
pub fn focus_circle_point(dirs: &UnstableDirections, eps: f64, theta: f64) -> Result<State5> {
    match dirs {
        UnstableDirections::FocusPlane { center, u1, u2 } => {
            let c = center.to_array();
            let (s, co) = theta.sin_cos();
            Ok(State5::from_array(std::array::from_fn(|i| {
                c[i] + eps * (u1[i] * co + u2[i] * s)
            })))
        }
        UnstableDirections::Separatrix { .. } => Err(Error::WrongClass {
            found: "saddle41".into(),
            expected: "saddle_focus32".into(),
        }),
    }
}
