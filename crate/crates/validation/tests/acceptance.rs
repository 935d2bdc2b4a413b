//! Acceptance checks, one PASS/FAIL line per check.
//!
//! Environment:
//! - `SINCHAOS_ACCEPTANCE_ONLY=1,2,6` runs a subset of criteria.
//! - `SINCHAOS_ACCEPTANCE_CACHE=<dir>` keeps sweep checkpoints in `<dir>` and
//!   resumes from them; without it every sweep is computed fresh.
//!
//! The process exits nonzero when a check fails that is not listed as a known
//! failure, or when a known failure passes.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinchaos::equilibria::{find_equilibria, jacobian, lower_equilibrium, Classification};
use sinchaos::lyapunov::{lyapunov_spectrum, LyapunovConfig, LyapunovResult};
use sinchaos::model::{gating, jacobian_array, rhs_array};
use sinchaos::returnmap::{build_map, ReturnMapConfig};
use sinchaos::sweeps::{
    scan_theta, sweep_homsd, sweep_isi_lz, sweep_lyapunov, theta_minima, GridSpec, HomsdConfig,
    IsiLzConfig, LyapunovSweepConfig, Regime, SweepOptions, ThetaScanConfig, SWEEP_SEED,
};
use sinchaos::symbolic::{
    address, encode_sscs, itinerary_from_sscs, lz76, sscs_from_itinerary,
    strip_leading_partial_burst, Itinerary, SymbolEvent,
};
use sinchaos::{Error, ModelParams};
use sinchaos_validation::{
    agreement, bisect, components, labels_near, nearest_index, sign_changes, stacked_columns,
    upward_monotone_fraction, Check,
};

const CHAOTIC: (f64, f64) = (-38.285, -0.9);
const STABLE: (f64, f64) = (10.0, -2.7);
const TONIC: (f64, f64) = (-44.0, -2.7);
const MAP_POINT: (f64, f64) = (-36.3, -1.08);
const FOCUS_POINT: (f64, f64) = (-35.98, -1.1);

const CHAOS_THRESHOLD: f64 = 5e-5;
const SS_EXPECTED: f64 = -40.4;
const SS_TOL: f64 = 0.5;
const AH_WINDOW: (f64, f64) = (-40.4, -36.95);
const APEX_EXPECTED: f64 = -35.98;
const APEX_TOL: f64 = 0.2;
const APEX_NEIGHBORHOOD: f64 = 0.1;
const MIN_ARCHES: usize = 10;
const FIXED_SAMPLE_TOL: f64 = 0.5;
const ARCH_MIN_TOL: f64 = 0.1;
const MONOTONE_FRACTION: f64 = 0.9;
const MIN_CHAOS_COMPONENT: usize = 10;
const MIN_AGREEMENT: f64 = 0.85;

struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn push(&mut self, c: Check) {
        println!("{}", c.line());
        self.checks.push(c);
    }

    fn check(&mut self, id: &str, pass: bool, detail: impl Into<String>) {
        self.push(Check::new(id, pass, detail));
    }

    fn runtime(&mut self, id: &str, took: Duration, budget: Duration) {
        self.check(
            id,
            took <= budget,
            format!(
                "runtime {:.1} s (budget {:.0} s)",
                took.as_secs_f64(),
                budget.as_secs_f64()
            ),
        );
    }
}

fn params(p: (f64, f64)) -> ModelParams {
    ModelParams::new(p.0, p.1)
}

fn cache_path(name: &str) -> Option<PathBuf> {
    std::env::var_os("SINCHAOS_ACCEPTANCE_CACHE").map(|d| {
        let dir = PathBuf::from(d);
        std::fs::create_dir_all(&dir).expect("cache directory");
        dir.join(format!("{name}.ckpt"))
    })
}

fn sweep_options(name: &str) -> SweepOptions {
    SweepOptions {
        checkpoint: cache_path(name),
        ..SweepOptions::default()
    }
}

// ------------------------------------------------------------------ model

/// Vector field written directly from the current and gating formulas, with
/// the per-component magnitude of the summed terms.
fn model_oracle(s: [f64; 5], dca: f64, dvx: f64) -> ([f64; 5], [f64; 5]) {
    let [v, h, n, x, ca] = s;
    let vs = (127.0 * v + 8265.0) / 105.0;
    let am = 0.1 * (50.0 - vs) / (-1.0 + ((50.0 - vs) / 10.0).exp());
    let bm = 4.0 * ((25.0 - vs) / 18.0).exp();
    let m_inf = am / (am + bm);
    let ah = 0.07 * ((25.0 - vs) / 20.0).exp();
    let bh = 1.0 / (1.0 + ((55.0 - vs) / 10.0).exp());
    let an = 0.01 * (55.0 - vs) / (((55.0 - vs) / 10.0).exp() - 1.0);
    let bn = 0.125 * ((45.0 - vs) / 80.0).exp();
    let x_inf = 1.0 / (1.0 + (-0.15 * (v + 50.0 - dvx)).exp());

    let i_i = 4.0 * h * m_inf.powi(3) * (v - 30.0);
    let i_k = 0.3 * n.powi(4) * (v + 75.0);
    let i_leak = 0.003 * (v + 40.0);
    let i_t = 0.01 * x * (v - 30.0);
    let i_kca = 0.03 * ca / (0.5 + ca) * (v + 75.0);
    let drive = 0.0085 * x * (140.0 - v + dca);
    let (h_inf, tau_h) = (ah / (ah + bh), 12.5 / (ah + bh));
    let (n_inf, tau_n) = (an / (an + bn), 12.5 / (an + bn));

    let f = [
        -(i_i + i_k + i_t + i_kca + i_leak),
        (h_inf - h) / tau_h,
        (n_inf - n) / tau_n,
        (x_inf - x) / 100.0,
        0.0003 * (drive - ca),
    ];
    let mag = [
        i_i.abs() + i_k.abs() + i_t.abs() + i_kca.abs() + i_leak.abs(),
        (h_inf.abs() + h.abs()) / tau_h,
        (n_inf.abs() + n.abs()) / tau_n,
        (x_inf.abs() + x.abs()) / 100.0,
        0.0003 * (drive.abs() + ca.abs()),
    ];
    (f, mag)
}

fn random_state(rng: &mut ChaCha8Rng) -> [f64; 5] {
    [
        rng.gen_range(-90.0..40.0),
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..3.0),
    ]
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let (dca, dvx) = (rng.gen_range(-45.0..30.0), rng.gen_range(-4.0..1.0));
        let got = rhs_array(&s, &ModelParams::new(dca, dvx));
        let (want, mag) = model_oracle(s, dca, dvx);
        for i in 0..5 {
            worst = worst.max((got[i] - want[i]).abs() / mag[i].max(f64::MIN_POSITIVE));
        }
    }
    r.check(
        "1a",
        worst <= 1e-12,
        format!("rhs vs oracle, worst relative error {worst:.2e} (tol 1e-12)"),
    );
    let half = [-4.0, -2.7, -1.1, 0.0, 1.0]
        .iter()
        .all(|&dvx| gating(-50.0 + dvx, &ModelParams::new(0.0, dvx)).x_inf == 0.5);
    r.check("1b", half, "x_inf(-50 + dVx) == 0.5 exactly");
    r.runtime("1t", start.elapsed(), Duration::from_secs(1));
}

// -------------------------------------------------------------- equilibria

/// Largest real part of the lower equilibrium's complex pair.
fn lower_pair_real_part(dca: f64, dvx: f64) -> Option<f64> {
    let eqs = find_equilibria(&ModelParams::new(dca, dvx)).ok()?;
    let low = lower_equilibrium(&eqs)?;
    low.eigenvalues
        .iter()
        .filter(|l| l.im.abs() > 1e-12)
        .map(|l| l.re)
        .max_by(f64::total_cmp)
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let dvx = -2.7;
    let count = |dca: f64| find_equilibria(&ModelParams::new(dca, dvx)).map_or(0, |e| e.len());
    let ss = bisect(-44.0, -30.0, 50, |d| count(d) >= 2).map(|(a, b)| 0.5 * (a + b));
    r.check(
        "2a",
        ss.is_some_and(|s| (s - SS_EXPECTED).abs() <= SS_TOL),
        format!("equilibrium count changes at dCa = {ss:?} (expected {SS_EXPECTED} +- {SS_TOL})"),
    );
    let crossings = sign_changes(-44.0, -30.0, 140, 50, |d| lower_pair_real_part(d, dvx));
    // a jump between eigenvalue pairs also changes sign; a crossing is continuous
    let (hopf, jumps): (Vec<f64>, Vec<f64>) = crossings
        .iter()
        .partition(|&&c| lower_pair_real_part(c, dvx).is_some_and(|re| re.abs() < 1e-9));
    let inside = hopf.iter().any(|c| *c > AH_WINDOW.0 && *c < AH_WINDOW.1);
    r.check(
        "2b",
        inside,
        format!("lower complex pair crosses the imaginary axis at {hopf:?}, need one in {AH_WINDOW:?} (pair switches at {jumps:?})"),
    );
    let eqs = find_equilibria(&params(FOCUS_POINT)).unwrap_or_default();
    let cls = lower_equilibrium(&eqs).map(|e| e.classification);
    r.check(
        "2c",
        cls == Some(Classification::SaddleFocus32),
        format!("lower equilibrium at {FOCUS_POINT:?} is {cls:?}"),
    );
    r.runtime("2t", start.elapsed(), Duration::from_secs(30));
}

// --------------------------------------------------------------- Lyapunov

fn spectrum_at(p: (f64, f64)) -> Option<LyapunovResult> {
    let cfg: LyapunovConfig = LyapunovSweepConfig::desk().lyapunov;
    lyapunov_spectrum(&SWEEP_SEED, &params(p), &cfg).ok()
}

fn criterion_3(r: &mut Report) -> Option<LyapunovResult> {
    let start = Instant::now();
    let chaotic = spectrum_at(CHAOTIC);
    let l = chaotic.as_ref().map(|c| c.exponents);
    r.check(
        "3a",
        l.is_some_and(|e| e[0] > CHAOS_THRESHOLD),
        format!("lambda at {CHAOTIC:?}: {l:?} (lambda1 > {CHAOS_THRESHOLD:e})"),
    );
    let l = spectrum_at(STABLE).map(|c| c.exponents);
    r.check(
        "3b",
        l.is_some_and(|e| e[0] < -1e-4),
        format!("lambda at {STABLE:?}: {l:?} (lambda1 < -1e-4)"),
    );
    let l = spectrum_at(TONIC).map(|c| c.exponents);
    r.check(
        "3c",
        l.is_some_and(|e| e[0].abs() < 2e-4 && e[1] < -1e-4),
        format!("lambda at {TONIC:?}: {l:?} (|lambda1| < 2e-4, lambda2 < -1e-4)"),
    );
    let d = chaotic.as_ref().and_then(|c| c.dim_l);
    r.check(
        "3d",
        d.is_some_and(|d| d > 2.0 && d < 3.0),
        format!("Lyapunov dimension at {CHAOTIC:?}: {d:?} (in (2, 3))"),
    );
    r.runtime("3t", start.elapsed(), Duration::from_secs(600));
    chaotic
}

// -------------------------------------------------------------- theta scan

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn criterion_4(r: &mut Report) {
    let start = Instant::now();
    let g = match scan_theta(
        (-37.0, -35.0, 200),
        100,
        &ThetaScanConfig::default(),
        &sweep_options("theta"),
    ) {
        Ok(g) => g,
        Err(e) => {
            r.check("4a", false, format!("scan failed: {e}"));
            return;
        }
    };
    let (mins, apex) = theta_minima(&g);
    r.check(
        "4a",
        apex.is_some_and(|a| (a - APEX_EXPECTED).abs() <= APEX_TOL),
        format!("distance apex at dCa = {apex:?} (expected {APEX_EXPECTED} +- {APEX_TOL})"),
    );
    let dca = g.spec.axis1.values();
    let k = apex.map_or(0, |a| nearest_index(a, -37.0, -35.0, 200));
    let finite = |range: std::ops::Range<usize>| -> (Vec<f64>, Vec<f64>) {
        range
            .filter(|&i| mins[i].is_finite())
            .map(|i| (dca[i], mins[i]))
            .unzip()
    };
    let (lx, ly) = finite(0..k + 1);
    let (rx, ry) = finite(k..mins.len());
    let (sl, sr) = if lx.len() >= 3 && rx.len() >= 3 {
        (slope(&lx, &ly), slope(&rx, &ry))
    } else {
        (f64::NAN, f64::NAN)
    };
    r.check(
        "4b",
        sl < 0.0 && sr > 0.0,
        format!("minimum distance falls toward the apex (slope {sl:.2e}) and rises after it (slope {sr:.2e})"),
    );
    let mut counts: Vec<u32> = g
        .cells
        .iter()
        .filter_map(|c| c.ok())
        .filter(|c| apex.is_some_and(|a| (c.dca - a).abs() <= APEX_NEIGHBORHOOD))
        .map(|c| c.spikes)
        .collect();
    counts.sort_unstable();
    counts.dedup();
    r.check(
        "4c",
        counts.len() >= 3,
        format!("spike counts within {APEX_NEIGHBORHOOD} of the apex: {counts:?} (need >= 3)"),
    );
    r.runtime("4t", start.elapsed(), Duration::from_secs(1200));
}

// -------------------------------------------------------------- return map

fn criterion_5(r: &mut Report) {
    let start = Instant::now();
    let m = match build_map(&params(MAP_POINT), &ReturnMapConfig::default()) {
        Ok(m) => m,
        Err(e) => {
            r.check("5a", false, format!("build_map failed: {e}"));
            return;
        }
    };
    let arches = m.principal_arches();
    let spikes: Vec<u32> = arches.iter().map(|a| a.spikes).collect();
    r.check(
        "5a",
        arches.len() >= MIN_ARCHES,
        format!(
            "{} arches with spike counts {spikes:?} (need >= {MIN_ARCHES})",
            arches.len()
        ),
    );
    let branch = m.principal_branch();
    let right = branch
        .iter()
        .map(|&i| m.samples[i])
        .max_by(|a, b| a.v_n.total_cmp(&b.v_n));
    let (drift, gap) = right.map_or((f64::NAN, f64::NAN), |s| {
        ((s.v_next - s.v_n).abs(), (s.v_n - m.sf_v).abs())
    });
    r.check(
        "5b",
        drift < FIXED_SAMPLE_TOL && gap < FIXED_SAMPLE_TOL,
        format!("rightmost sample moves {drift:.3} mV and sits {gap:.3} mV from the saddle-focus (tol {FIXED_SAMPLE_TOL})"),
    );
    let level = m
        .separatrix_returns
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let on_branch: Vec<usize> = branch.iter().map(|&i| m.samples[i].index).collect();
    let (lo, hi) = m.invariant_interval().unwrap_or((f64::NAN, f64::NAN));
    let mut worst = 0.0f64;
    let mut n = 0;
    for (a, b) in m.jumps() {
        if !on_branch.contains(&a.index) || !on_branch.contains(&b.index) {
            continue;
        }
        if !(lo..=hi).contains(&a.v_n) || !(lo..=hi).contains(&b.v_n) {
            continue;
        }
        let (a, b) = m.refine_jump(a, b, 40);
        worst = worst.max((a.v_next.min(b.v_next) - level).abs());
        n += 1;
    }
    r.check(
        "5c",
        n + 1 >= arches.len() && n > 0 && worst <= ARCH_MIN_TOL,
        format!("{n} minima between arches within {worst:.3} mV of the separatrix return {level:.3} (tol {ARCH_MIN_TOL})"),
    );
    r.runtime("5t", start.elapsed(), Duration::from_secs(600));
}

// ---------------------------------------------------------------- symbolic

fn criterion_6(r: &mut Report) {
    use SymbolEvent::*;
    let start = Instant::now();
    let traced = [
        (vec![I, VMinus, Done], vec![0]),
        (vec![VPlus, VPlus, I, I, VMinus, Done], vec![2]),
        (vec![VPlus, I, VMinus, Done], vec![-1]),
    ];
    let got: Vec<Vec<i64>> = traced.iter().map(|(ev, _)| encode_sscs(ev)).collect();
    r.check(
        "6a",
        traced.iter().zip(&got).all(|((_, want), g)| g == want),
        format!("traced event streams encode to {got:?}"),
    );
    let a = "ABDCE"
        .parse::<Itinerary>()
        .ok()
        .and_then(|it| address(&it).ok());
    let want = (9u32, 32u32, 5u32, 16u32);
    let pass = a.as_ref().is_some_and(|a| {
        a.lo() == (want.0.into(), want.1.into()) && a.hi() == (want.2.into(), want.3.into())
    });
    r.push(
        Check::new(
            "6b",
            pass,
            format!(
                "ABDCE addresses to {} (expected ({}/{}, {}/{}))",
                a.map_or("error".into(), |a| a.to_string()),
                want.0,
                want.1,
                want.2,
                want.3
            ),
        )
        .known("the reference interval is not nested in the address of its prefix ABDC"),
    );
    let raw = "DDDDCFABDCEBDDCEBDCEBDCFBDDD".parse::<Itinerary>();
    let stripped = raw.map(|it| strip_leading_partial_burst(&it.0));
    let a = stripped.as_ref().ok().and_then(|it| address(it).ok());
    let pass = a.as_ref().is_some_and(|a| {
        a.depth == 22 && a.lo_num == 1_826_240u32.into() && a.hi_num == 1_826_241u32.into()
    });
    r.check(
        "6c",
        pass,
        format!(
            "{} addresses to {}",
            stripped.map_or("error".into(), |s| s.to_string()),
            a.map_or("error".into(), |a| format!(
                "[{}, {}] / 2^{}",
                a.lo_num, a.hi_num, a.depth
            ))
        ),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(0..=40);
        let s: Vec<i64> = (0..n).map(|_| rng.gen_range(-9i64..=9)).collect();
        if sscs_from_itinerary(&itinerary_from_sscs(&s)).ok() != Some(s) {
            bad += 1;
        }
    }
    r.check(
        "6d",
        bad == 0,
        format!("{bad} of 10000 random sequences fail the round trip"),
    );
    r.runtime("6t", start.elapsed(), Duration::from_secs(5));
}

// ------------------------------------------------------------------ sweeps

fn criterion_7(r: &mut Report) {
    let start = Instant::now();
    let spec = GridSpec::new((-45.0, 15.0, 100), (-4.0, 1.0, 100));
    let (n1, n2) = (spec.n1(), spec.n2());
    let lyap = sweep_lyapunov(
        &spec,
        &LyapunovSweepConfig::desk(),
        &sweep_options("lyapunov"),
    );
    let isi = sweep_isi_lz(&spec, &IsiLzConfig::default(), &sweep_options("isi_lz"));
    let homsd = sweep_homsd(&spec, &HomsdConfig::default(), &sweep_options("homsd"));
    let (lyap, isi, homsd) = match (lyap, isi, homsd) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (a, b, c) => {
            let errs: Vec<String> = [a.err(), b.err(), c.err()]
                .into_iter()
                .flatten()
                .map(|e| e.to_string())
                .collect();
            r.check("7", false, format!("sweep failed: {errs:?}"));
            return;
        }
    };

    let chaotic: Vec<Option<bool>> = lyap
        .cells
        .iter()
        .map(|c| c.ok().map(|l| l.exponents[0] > CHAOS_THRESHOLD))
        .collect();
    let mask: Vec<bool> = chaotic.iter().map(|c| *c == Some(true)).collect();
    let labels = components(&mask, n1);
    let near = |p: (f64, f64)| {
        let i = nearest_index(p.0, -45.0, 15.0, n1);
        let j = nearest_index(p.1, -4.0, 1.0, n2);
        labels_near(&labels, n1, i, j, 1)
    };
    let (a, b) = (near(CHAOTIC), near(MAP_POINT));
    let shared: Vec<usize> = a.iter().copied().filter(|l| b.contains(l)).collect();
    let size = shared
        .iter()
        .map(|&l| labels.iter().filter(|x| **x == Some(l)).count())
        .max()
        .unwrap_or(0);
    r.check(
        "7a",
        size >= MIN_CHAOS_COMPONENT,
        format!(
            "connected lambda1 > {CHAOS_THRESHOLD:e} region of {size} cells spans {CHAOTIC:?} and {MAP_POINT:?} ({} chaotic cells)",
            mask.iter().filter(|m| **m).count()
        ),
    );

    let counts: Vec<Option<u32>> = homsd
        .cells
        .iter()
        .map(|c| c.ok().map(|h| h.spikes))
        .collect();
    let frac = upward_monotone_fraction(&counts, n1);
    let (stacked, columns) = stacked_columns(&counts, n1, &[1, 2, 3]);
    let stacked_frac = stacked as f64 / columns.max(1) as f64;
    r.check(
        "7b",
        columns > 0
            && stacked_frac >= MONOTONE_FRACTION
            && frac.is_some_and(|f| f >= MONOTONE_FRACTION),
        format!(
            "plateaus 1, 2, 3 stacked upward in {stacked} of {columns} columns holding all three; \
             upward non-decreasing fraction {frac:?} (need >= {MONOTONE_FRACTION} for both)"
        ),
    );

    let lz_chaotic: Vec<Option<bool>> = isi
        .cells
        .iter()
        .map(|c| c.ok().map(|x| x.regime == Regime::Chaotic))
        .collect();
    let (agree, n) = agreement(&lz_chaotic, &chaotic);
    r.check(
        "7c",
        agree >= MIN_AGREEMENT,
        format!("chaotic tags agree with lambda1 > {CHAOS_THRESHOLD:e} on {:.1}% of {n} cells (need >= {:.0}%)", 100.0 * agree, 100.0 * MIN_AGREEMENT),
    );
    let cores = std::thread::available_parallelism()
        .map_or(1, |c| c.get())
        .min(8);
    let budget = Duration::from_secs(2 * 3600 * 8 / cores as u64);
    r.runtime("7t", start.elapsed(), budget);
}

// -------------------------------------------------------------- properties

fn fd_jacobian(s: &[f64; 5], p: &ModelParams) -> [[f64; 5]; 5] {
    let scale = [1.0, 1e-3, 1e-3, 1e-3, 1e-3];
    let mut j = [[0.0; 5]; 5];
    for k in 0..5 {
        let h = 1e-4 * scale[k];
        let at = |d: f64| {
            let mut a = *s;
            a[k] += d;
            rhs_array(&a, p)
        };
        let (fa, fb, fa2, fb2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
        for i in 0..5 {
            j[i][k] = (8.0 * (fa[i] - fb[i]) - (fa2[i] - fb2[i])) / (12.0 * h);
        }
    }
    j
}

fn criterion_8(r: &mut Report, chaotic: Option<&LyapunovResult>) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let s = [
            rng.gen_range(-85.0..35.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..3.0),
        ];
        let p = ModelParams::new(rng.gen_range(-45.0..30.0), rng.gen_range(-4.0..1.0));
        let (j, fd) = (jacobian_array(&s, &p), fd_jacobian(&s, &p));
        for i in 0..5 {
            let row = j[i].iter().fold(1.0f64, |m, e| m.max(e.abs()));
            for k in 0..5 {
                worst = worst.max((j[i][k] - fd[i][k]).abs() / row);
            }
        }
    }
    r.check(
        "8a",
        worst <= 1e-5,
        format!("Jacobian vs finite differences, worst {worst:.2e} (tol 1e-5)"),
    );

    let mut worst = 0.0f64;
    for _ in 0..40 {
        let p = ModelParams::new(rng.gen_range(-45.0..30.0), rng.gen_range(-4.0..1.0));
        for e in find_equilibria(&p).unwrap_or_default() {
            let j = jacobian(&e.state, &p);
            let nj = j.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            for (l, v) in e.eigenvalues.iter().zip(&e.eigenvectors) {
                let res: f64 = (0..5)
                    .map(|i| {
                        let jv = (0..5).fold(*l * 0.0, |acc, k| acc + v[k] * j[i][k]);
                        (jv - *l * v[i]).norm_sqr()
                    })
                    .sum();
                let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                worst = worst.max(res.sqrt() / (nj * vn));
            }
        }
    }
    r.check(
        "8b",
        worst <= 1e-8,
        format!("eigenpair residual, worst {worst:.2e} (tol 1e-8)"),
    );

    let (sum_err, frame) = chaotic.map_or((f64::NAN, f64::NAN), |c| {
        let sum: f64 = c.exponents.iter().sum();
        (
            (sum - c.mean_trace).abs() / c.mean_trace.abs(),
            c.max_frame_error,
        )
    });
    r.check(
        "8c",
        sum_err <= 0.05,
        format!("exponent sum vs mean trace at {CHAOTIC:?}, relative {sum_err:.2e} (tol 5%)"),
    );
    r.check(
        "8d",
        frame <= 1e-10,
        format!("QR frame orthonormality error {frame:.2e} (tol 1e-10)"),
    );

    let mut ok = true;
    for _ in 0..500 {
        let n = rng.gen_range(2..200);
        let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        ok &= (1..n).all(|k| {
            let (a, b) = (lz76(&s[..k]), lz76(&s[..k + 1]));
            a <= b && b <= a + 1
        });
        let p = rng.gen_range(1..10);
        let word: Vec<u8> = (0..p).map(|_| rng.gen_range(0..4)).collect();
        let periodic: Vec<u8> = word.iter().cycle().take(p * 20).copied().collect();
        ok &= lz76(&periodic) <= p + 1;
    }
    r.check(
        "8e",
        ok,
        "LZ76 grows by at most one per symbol and stays <= p + 1 on period-p sequences",
    );

    let spec = GridSpec::new((-40.0, -30.0, 6), (-2.0, -0.5, 4));
    let cfg = HomsdConfig::default();
    let with = |workers: usize, checkpoint: Option<PathBuf>, stop: Option<usize>| SweepOptions {
        workers: Some(workers),
        checkpoint,
        stop_after: stop,
        chunk: 5,
    };
    let one = sweep_homsd(&spec, &cfg, &with(1, None, None));
    let many = sweep_homsd(&spec, &cfg, &with(4, None, None));
    let same =
        matches!((&one, &many), (Ok(a), Ok(b)) if a.cells == b.cells && a.meta() == b.meta());
    r.check("8f", same, "homoclinic sweep identical on 1 and 4 workers");
    let dir = tempfile::tempdir().expect("temporary directory");
    let ck = dir.path().join("homsd.ckpt");
    let interrupted = matches!(
        sweep_homsd(&spec, &cfg, &with(2, Some(ck.clone()), Some(10))),
        Err(Error::Interrupted { .. })
    );
    let resumed = sweep_homsd(&spec, &cfg, &with(3, Some(ck), None));
    let identical =
        matches!((&one, &resumed), (Ok(a), Ok(b)) if a.cells == b.cells && a.meta() == b.meta());
    r.check(
        "8g",
        interrupted && identical,
        "interrupted and resumed sweep is bit-identical to a fresh one",
    );
    r.runtime("8t", start.elapsed(), Duration::from_secs(300));
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("SINCHAOS_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let run = |c: u32| only.as_ref().map_or(true, |o| o.contains(&c));
    let mut r = Report { checks: Vec::new() };
    let start = Instant::now();

    let mut chaotic = None;
    for c in [1, 2, 6, 3, 8, 5, 4, 7] {
        if !run(c) {
            println!("SKIP {c}");
            continue;
        }
        match c {
            1 => criterion_1(&mut r),
            2 => criterion_2(&mut r),
            3 => chaotic = criterion_3(&mut r),
            4 => criterion_4(&mut r),
            5 => criterion_5(&mut r),
            6 => criterion_6(&mut r),
            7 => criterion_7(&mut r),
            _ => {
                if chaotic.is_none() {
                    chaotic = spectrum_at(CHAOTIC);
                }
                criterion_8(&mut r, chaotic.as_ref())
            }
        }
    }

    let surprises: Vec<&Check> = r.checks.iter().filter(|c| c.is_surprise()).collect();
    let known = r
        .checks
        .iter()
        .filter(|c| c.known_failure.is_some() && !c.pass)
        .count();
    println!(
        "{} checks, {} passed, {} known failures, {} unexpected results, {:.0} s",
        r.checks.len(),
        r.checks.iter().filter(|c| c.pass).count(),
        known,
        surprises.len(),
        start.elapsed().as_secs_f64()
    );
    if !surprises.is_empty() {
        std::process::exit(1);
    }
}
