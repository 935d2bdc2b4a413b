use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinchaos::equilibria::{find_equilibria, Classification};
use sinchaos::integrator::IntegratorConfig;
use sinchaos::lyapunov::{lyapunov_spectrum, mgs_qr, LinearSystem, LyapunovConfig, LyapunovResult};
use sinchaos::{ModelParams, State5};

fn chaotic_config() -> LyapunovConfig {
    LyapunovConfig {
        t_transient: 1e4,
        t_total: 1e5,
        renorm_interval: 10.0,
        checkpoints: 20,
        integrator: IntegratorConfig {
            max_step: 10.0,
            ..IntegratorConfig::adaptive(1e-8, 1e5)
        },
        initial_frame: None,
    }
}

fn seed() -> State5 {
    State5::new(-55.0, 0.8, 0.05, 0.6, 0.7)
}

fn chaotic_run(frame: Option<[[f64; 5]; 5]>) -> LyapunovResult {
    let p = ModelParams::new(-38.285, -0.9);
    let cfg = LyapunovConfig {
        initial_frame: frame,
        ..chaotic_config()
    };
    lyapunov_spectrum(&seed(), &p, &cfg).unwrap()
}

/// Spread of the running estimate of `f` over the second half of the checkpoints.
fn confidence_width(r: &LyapunovResult, f: impl Fn(&[f64; 5]) -> f64) -> f64 {
    let tail = &r.convergence_trace[r.convergence_trace.len() / 2..];
    let vals: Vec<f64> = tail.iter().map(|c| f(&c.exponents)).collect();
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

#[test]
fn exponent_sum_matches_mean_divergence_on_a_chaotic_orbit() {
    let r = chaotic_run(None);
    let sum: f64 = r.exponents.iter().sum();
    assert!(sum < 0.0);
    assert!(
        (sum - r.mean_trace).abs() <= 0.05 * r.mean_trace.abs(),
        "sum {sum} vs mean trace {}",
        r.mean_trace
    );
    assert!(r.max_frame_error < 1e-10, "frame error {}", r.max_frame_error);
    assert!(r.exponents[0] > 5e-5, "{:?}", r.exponents);
    // the flow direction carries an exponent negligible on the contraction scale
    assert!(r.exponents[1].abs() < 0.01 * r.exponents[2].abs(), "{:?}", r.exponents);
    let d = r.dim_l.unwrap();
    assert!(d > 2.0 && d < 3.0, "dimension {d}");
}

#[test]
fn initial_frame_does_not_change_the_spectrum_beyond_its_confidence() {
    let reference = chaotic_run(None);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut frame: [[f64; 5]; 5] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
    mgs_qr(&mut frame);
    let rotated = chaotic_run(Some(frame));
    let w1 = confidence_width(&reference, |e| e[0]).max(confidence_width(&rotated, |e| e[0]));
    assert!(
        (reference.exponents[0] - rotated.exponents[0]).abs() <= w1,
        "{} vs {} (width {w1})",
        reference.exponents[0],
        rotated.exponents[0]
    );
    let sum = |e: &[f64; 5]| e.iter().sum::<f64>();
    let ws = confidence_width(&reference, sum).max(confidence_width(&rotated, sum));
    assert!((sum(&reference.exponents) - sum(&rotated.exponents)).abs() <= ws);
}

#[test]
fn exponents_at_a_stable_equilibrium_are_the_eigenvalue_real_parts() {
    let p = ModelParams::new(10.0, -2.7);
    let eqs = find_equilibria(&p).unwrap();
    let stable = eqs
        .iter()
        .find(|e| e.classification == Classification::StableFocusNode)
        .expect("stable equilibrium");
    let mut re: Vec<f64> = stable.eigenvalues.iter().map(|l| l.re).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    // start on the equilibrium's basin side, close to it
    let s = stable.state;
    let s0 = State5::new(s.v + 0.5, s.h, s.n, s.x, s.ca + 0.01);
    let cfg = LyapunovConfig {
        t_transient: 2e4,
        t_total: 1e5,
        renorm_interval: 1.0,
        checkpoints: 10,
        integrator: IntegratorConfig {
            max_step: 1.0,
            ..IntegratorConfig::adaptive(1e-9, 1e5)
        },
        initial_frame: None,
    };
    let r = lyapunov_spectrum(&s0, &p, &cfg).unwrap();
    for (got, want) in r.exponents.iter().zip(&re) {
        assert!((got - want).abs() < 1e-3, "{:?} vs {re:?}", r.exponents);
    }
    assert_eq!(r.dim_l, Some(0.0));
}

#[test]
fn rerun_is_bitwise_identical() {
    let p = ModelParams::new(-38.285, -0.9);
    let cfg = LyapunovConfig {
        t_transient: 1e3,
        t_total: 1e4,
        ..chaotic_config()
    };
    let a = lyapunov_spectrum(&seed(), &p, &cfg).unwrap();
    let b = lyapunov_spectrum(&seed(), &p, &cfg).unwrap();
    assert_eq!(a, b);
}

fn triangular(diag: &[f64; 5], upper: &[f64; 10]) -> [[f64; 5]; 5] {
    let mut a = [[0.0; 5]; 5];
    let mut k = 0;
    for i in 0..5 {
        a[i][i] = diag[i];
        for j in i + 1..5 {
            a[i][j] = upper[k];
            k += 1;
        }
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn linear_flows_recover_their_diagonal(
        diag in prop::array::uniform5(-0.5f64..0.5),
        upper in prop::array::uniform10(-1.0f64..1.0),
    ) {
        let sys = LinearSystem(triangular(&diag, &upper));
        let cfg = LyapunovConfig {
            t_transient: 0.0,
            t_total: 4000.0,
            renorm_interval: 1.0,
            checkpoints: 4,
            integrator: IntegratorConfig::adaptive(1e-10, 4000.0),
            initial_frame: None,
        };
        // the zero state is fixed, so only the tangent frame evolves
        let r = lyapunov_spectrum(&State5::new(0.0, 0.0, 0.0, 0.0, 0.0), &sys, &cfg).unwrap();
        let mut want = diag;
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in r.exponents.iter().zip(&want) {
            prop_assert!((g - w).abs() < 5e-3, "{:?} vs {:?}", r.exponents, want);
        }
        let tr: f64 = diag.iter().sum();
        prop_assert!((r.exponents.iter().sum::<f64>() - tr).abs() < 1e-6);
        prop_assert!((r.mean_trace - tr).abs() < 1e-9);
    }
}
