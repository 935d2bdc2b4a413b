//! Subcommand execution. Every command writes `meta.txt` into its output
//! directory; the file is loadable again with `--config`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sinchaos::equilibria::{find_equilibria, unstable_directions, upper_saddle, UnstableDirections};
use sinchaos::integrator::{write_events_csv, write_trajectory_csv, IntegratorConfig, Method};
use sinchaos::io::{fmt_f64, write_meta};
use sinchaos::lyapunov::{lyapunov_spectrum, LyapunovConfig};
use sinchaos::model::{nullclines, write_nullclines_csv};
use sinchaos::returnmap::{build_map, fixed_points, iterate_map, write_landmarks_csv, write_map_csv, ReturnMapConfig};
use sinchaos::sweeps::{
    scan_theta, sweep_homsd, sweep_isi_1d, sweep_isi_lz, sweep_lyapunov, theta_minima, write_field_pgm,
    write_isi_csv, write_lyapunov_ppm, CellOutcome, CellRecord, GridSpec, HomsdConfig, IsiLzConfig,
    IsiSweepConfig, LyapunovSweepConfig, SweepGrid, SweepOptions, ThetaScanConfig, FALLBACK_SPIKE_THRESHOLD,
    SWEEP_SEED,
};
use sinchaos::symbolic::{
    address, encode_sscs, format_sscs, itinerary_from_sscs, parse_sscs, sscs_from_itinerary,
    sscs_from_trajectory, Itinerary, SymbolEvent,
};
use sinchaos::{ModelParams, State5};

use crate::job::{derived_key, Job, SeedSpec};
use crate::Failure;

pub struct Context {
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

pub fn run(job: &Job, ctx: &Context) -> Result<(), Failure> {
    std::fs::create_dir_all(&ctx.out)?;
    match job.command.as_str() {
        "trace" => trace(job, ctx),
        "equilibria" => equilibria(job, ctx),
        "nullclines" => nullcline_curves(job, ctx),
        "lyapunov" => lyapunov(job, ctx),
        "returnmap" => returnmap(job, ctx),
        "encode" => encode(job, ctx),
        "sweep-lyapunov" => grid_lyapunov(job, ctx),
        "sweep-isi-lz" => grid_isi_lz(job, ctx),
        "sweep-homsd" => grid_homsd(job, ctx),
        "scan-theta" => theta(job, ctx),
        "sweep-isi-1d" => isi_1d(job, ctx),
        other => Err(Failure::Usage(format!("unknown command {other}"))),
    }
}

// ----------------------------------------------------------------- helpers

fn params(job: &Job, dca: f64, dvx: f64) -> Result<ModelParams, Failure> {
    let p = ModelParams::new(dca, dvx).with_tau_x(job.f64("tau_x")?);
    p.validate()
        .map_err(|e| Failure::Usage(format!("--tau_x: {e}")))?;
    Ok(p)
}

fn point_params(job: &Job) -> Result<ModelParams, Failure> {
    params(job, job.f64("dCa")?, job.f64("dVx")?)
}

/// Attach the parameter point to a numerical failure.
fn at(p: &ModelParams) -> impl Fn(sinchaos::Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Numerical(m) => {
            Failure::Numerical(format!("at (dCa, dVx) = ({}, {}): {m}", p.dca, p.dvx))
        }
        u => u,
    }
}

fn integrator(job: &Job, t_max: f64) -> Result<IntegratorConfig, Failure> {
    let method = match job.str("method") {
        "rk45" => Method::AdaptiveRk45,
        "rk4" => Method::FixedRk4,
        v => {
            return Err(Failure::Usage(format!(
                "--method: expected rk45 or rk4, got {v:?}"
            )))
        }
    };
    let tol = job.f64("tol")?;
    let c = IntegratorConfig {
        method,
        abs_tol: tol,
        rel_tol: tol,
        dt: job.f64("dt")?,
        max_step: job.f64("max_step")?,
        t_max,
        ..IntegratorConfig::default()
    };
    c.validate()
        .map_err(|e| Failure::Usage(format!("integrator settings (--tol, --dt, --max_step): {e}")))?;
    Ok(c)
}

fn seed_state(job: &Job) -> Result<State5, Failure> {
    match job.seed()? {
        SeedSpec::Sweep => Ok(SWEEP_SEED),
        SeedSpec::State(s) => Ok(s),
        SeedSpec::Separatrix => Err(Failure::Usage(format!(
            "--seed: sd is only available for trace in {}",
            job.command
        ))),
    }
}

fn grid_spec(job: &Job) -> Result<GridSpec, Failure> {
    let spec = GridSpec::new(
        (job.f64("dCa_lo")?, job.f64("dCa_hi")?, job.usize("dCa_n")?),
        (job.f64("dVx_lo")?, job.f64("dVx_hi")?, job.usize("dVx_n")?),
    );
    spec.validate().map_err(|e| Failure::Usage(format!("grid: {e}")))?;
    Ok(spec)
}

fn sweep_options(ctx: &Context) -> SweepOptions {
    SweepOptions {
        checkpoint: ctx.checkpoint.clone(),
        ..SweepOptions::default()
    }
}

fn write_job_meta(ctx: &Context, job: &Job, derived: &BTreeMap<String, String>) -> Result<(), Failure> {
    let mut m = job.meta();
    for (k, v) in derived {
        m.insert(derived_key(k), v.clone());
    }
    write_meta(&ctx.out.join("meta.txt"), &m)?;
    Ok(())
}

fn create(ctx: &Context, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(ctx.out.join(name))?))
}

fn state_entries(prefix: &str, s: &State5, m: &mut BTreeMap<String, String>) {
    for (name, v) in ["V", "h", "n", "x", "Ca"].iter().zip(s.to_array()) {
        m.insert(format!("{prefix}.{name}"), fmt_f64(v));
    }
}

/// Standard sweep outputs with the job sidecar replacing the sweep's own.
fn finish_grid<T: CellRecord>(ctx: &Context, job: &Job, g: &SweepGrid<T>) -> Result<(), Failure> {
    g.write_outputs(&ctx.out)?;
    write_job_meta(ctx, job, &g.meta())?;
    let pr = g.progress();
    println!(
        "{} cells: {} ok, {} failed, {} skipped ({:.1} s)",
        g.cells.len(),
        pr.succeeded,
        pr.failed,
        pr.skipped,
        g.wall_time
    );
    let failures: Vec<(usize, &String)> = g
        .cells
        .iter()
        .enumerate()
        .filter_map(|(k, c)| match c {
            CellOutcome::Failed(r) => Some((k, r)),
            _ => None,
        })
        .collect();
    for (k, r) in failures.iter().take(5) {
        let (a, b) = g.spec.coords(*k);
        eprintln!("cell {k} at ({a}, {b}) failed: {r}");
    }
    if failures.len() > 5 {
        eprintln!("... {} more failed cells in status.csv", failures.len() - 5);
    }
    Ok(())
}

// ----------------------------------------------------------- single point

fn trace(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let p = point_params(job)?;
    let eqs = find_equilibria(&p).map_err(at(&p))?;
    let sd = upper_saddle(&eqs);
    let v_sd = sd.map_or(FALLBACK_SPIKE_THRESHOLD, |e| e.state.v);
    let s0 = match job.seed()? {
        SeedSpec::Sweep => SWEEP_SEED,
        SeedSpec::State(s) => s,
        SeedSpec::Separatrix => {
            let sd = sd.ok_or_else(|| {
                at(&p)(sinchaos::Error::MissingSaddle {
                    dca: p.dca,
                    dvx: p.dvx,
                })
            })?;
            match unstable_directions(sd, job.f64("eps")?).map_err(at(&p))? {
                UnstableDirections::Separatrix { beneath, .. } => beneath,
                UnstableDirections::FocusPlane { .. } => unreachable!("upper saddle has one unstable direction"),
            }
        }
    };
    let mut cfg = integrator(job, job.f64("t")?)?;
    cfg.store_trajectory = true;
    let max = job.usize("max_entries")?;
    let (sscs, run) = sscs_from_trajectory(&s0, &p, &cfg, v_sd, (max > 0).then_some(max)).map_err(at(&p))?;
    write_trajectory_csv(create(ctx, "trajectory.csv")?, run.trajectory.as_deref().unwrap_or(&[]))?;
    write_events_csv(create(ctx, "events.csv")?, &run.events)?;
    let line = format_sscs(&sscs);
    std::fs::write(ctx.out.join("sscs.txt"), format!("{line}\n"))?;
    let mut d = BTreeMap::new();
    d.insert("spike_threshold".into(), fmt_f64(v_sd));
    d.insert("t_final".into(), fmt_f64(run.t_final));
    state_entries("initial", &s0, &mut d);
    write_job_meta(ctx, job, &d)?;
    println!("sscs: {line}");
    Ok(())
}

fn equilibria(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let n = job.usize("n")?;
    let start = job.f64("dCa")?;
    let values: Vec<f64> = match (n, job.opt_f64("dCa_end")?) {
        (0, _) => return Err(Failure::Usage("--n: must be at least 1".into())),
        (1, _) => vec![start],
        (_, Some(end)) => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
        (_, None) => return Err(Failure::Usage("--dCa_end: required when --n > 1".into())),
    };
    let dvx = job.f64("dVx")?;
    let mut w = create(ctx, "equilibria.csv")?;
    let eig: Vec<String> = (1..=5).map(|i| format!("re{i},im{i}")).collect();
    writeln!(w, "dCa,dVx,V,h,n,x,Ca,class,{}", eig.join(","))?;
    let mut total = 0;
    for dca in values {
        let p = params(job, dca, dvx)?;
        for e in find_equilibria(&p).map_err(at(&p))? {
            let s: Vec<String> = e.state.to_array().iter().map(|&v| fmt_f64(v)).collect();
            let l: Vec<String> = e
                .eigenvalues
                .iter()
                .flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)])
                .collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(dca),
                fmt_f64(dvx),
                s.join(","),
                e.classification.label(),
                l.join(",")
            )?;
            if total < 20 {
                println!("dCa={dca} V={:.6} {}", e.state.v, e.classification.label());
            }
            total += 1;
        }
    }
    w.flush()?;
    write_job_meta(ctx, job, &BTreeMap::new())
}

fn nullcline_curves(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let p = point_params(job)?;
    let (lo, hi, n) = (job.f64("v_lo")?, job.f64("v_hi")?, job.usize("points")?);
    if n < 2 || lo >= hi {
        return Err(Failure::Usage("--points must be >= 2 and --v_lo < --v_hi".into()));
    }
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let (x, ca) = nullclines(&p, &grid);
    let mut w = create(ctx, "nullclines.csv")?;
    write_nullclines_csv(&mut w, &[&x, &ca])?;
    w.flush()?;
    write_job_meta(ctx, job, &BTreeMap::new())
}

fn lyapunov(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let p = point_params(job)?;
    let cfg = LyapunovConfig {
        t_transient: job.f64("t_transient")?,
        t_total: job.f64("t_total")?,
        renorm_interval: job.f64("renorm")?,
        checkpoints: job.usize("checkpoints")?,
        integrator: integrator(job, 1e4)?,
        initial_frame: None,
    };
    cfg.validate()?;
    let r = lyapunov_spectrum(&seed_state(job)?, &p, &cfg).map_err(at(&p))?;
    let l: Vec<String> = r.exponents.iter().map(|&v| fmt_f64(v)).collect();
    let dim = r.dim_l.map_or("NaN".to_string(), fmt_f64);
    let mut w = create(ctx, "lyapunov.csv")?;
    writeln!(w, "dCa,dVx,l1,l2,l3,l4,l5,dimL,converged")?;
    writeln!(
        w,
        "{},{},{},{},{}",
        fmt_f64(p.dca),
        fmt_f64(p.dvx),
        l.join(","),
        dim,
        r.converged
    )?;
    w.flush()?;
    let mut w = create(ctx, "convergence.csv")?;
    writeln!(w, "t,l1,l2,l3,l4,l5")?;
    for c in &r.convergence_trace {
        let l: Vec<String> = c.exponents.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{},{}", fmt_f64(c.t), l.join(","))?;
    }
    w.flush()?;
    let mut d = BTreeMap::new();
    d.insert("mean_trace".into(), fmt_f64(r.mean_trace));
    d.insert("max_frame_error".into(), fmt_f64(r.max_frame_error));
    write_job_meta(ctx, job, &d)?;
    println!(
        "exponents: {}\ndimL: {}\nconverged: {}",
        r.exponents.map(|v| format!("{v:.6e}")).join(" "),
        dim,
        r.converged
    );
    Ok(())
}

fn returnmap(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let p = point_params(job)?;
    let timeout = job.f64("timeout")?;
    let cfg = ReturnMapConfig {
        n_samples: job.usize("samples")?,
        min_time: job.f64("min_time")?,
        timeout,
        integrator: integrator(job, timeout)?,
        seed_epsilon: job.f64("eps")?,
    };
    let m = build_map(&p, &cfg).map_err(at(&p))?;
    let mut w = create(ctx, "map.csv")?;
    write_map_csv(&mut w, &m)?;
    w.flush()?;
    let mut w = create(ctx, "landmarks.csv")?;
    write_landmarks_csv(&mut w, &m)?;
    w.flush()?;
    let mut w = create(ctx, "fixed_points.csv")?;
    writeln!(w, "V,slope,stable")?;
    for f in fixed_points(&m.samples) {
        writeln!(w, "{},{},{}", fmt_f64(f.v), fmt_f64(f.slope), f.stable)?;
    }
    w.flush()?;
    let arches = m.principal_arches();
    let mut w = create(ctx, "arches.csv")?;
    writeln!(w, "spikes,samples,max_Vnext,min_Vnext")?;
    for a in &arches {
        writeln!(
            w,
            "{},{},{},{}",
            a.spikes,
            a.indices.len(),
            fmt_f64(a.max_v_next),
            fmt_f64(a.min_v_next)
        )?;
    }
    w.flush()?;
    if let Some(v0) = job.opt_f64("iterate_from")? {
        let orbit = iterate_map(&m.samples, v0, job.usize("iterate_steps")?);
        let mut w = create(ctx, "orbit.csv")?;
        writeln!(w, "step,V")?;
        for (i, v) in orbit.values.iter().enumerate() {
            writeln!(w, "{i},{}", fmt_f64(*v))?;
        }
        w.flush()?;
        if orbit.out_of_range {
            eprintln!("orbit left the sampled range after {} steps", orbit.values.len() - 1);
        }
    }
    for s in m.samples.iter().filter(|s| !s.is_ok()) {
        eprintln!("sample {} (Ca0 = {}) flagged {}", s.index, s.ca0, s.flag.label());
    }
    let mut d = BTreeMap::new();
    d.insert("sf_V".into(), fmt_f64(m.sf_v));
    d.insert("sd_V".into(), fmt_f64(m.sd_v));
    write_job_meta(ctx, job, &d)?;
    println!(
        "samples: {} valid of {}\nprincipal arches: {}\nsf_V: {:.6}",
        m.valid().count(),
        m.samples.len(),
        arches.len(),
        m.sf_v
    );
    Ok(())
}

fn parse_symbols(text: &str) -> Result<Vec<SymbolEvent>, Failure> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            'i' | 'I' => Ok(SymbolEvent::I),
            '+' => Ok(SymbolEvent::VPlus),
            '-' => Ok(SymbolEvent::VMinus),
            '.' => Ok(SymbolEvent::Done),
            _ => Err(Failure::Usage(format!("--symbols: unknown event {c:?}"))),
        })
        .collect()
}

fn events_from_csv(path: &Path) -> Result<Vec<SymbolEvent>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("--events: cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = header
        .iter()
        .position(|h| h.trim() == "kind")
        .ok_or_else(|| Failure::Usage("--events: no kind column".into()))?;
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        match line.split(',').nth(col).map(str::trim) {
            Some("dvmax") => out.push(SymbolEvent::I),
            Some("vmax_above") => out.push(SymbolEvent::VPlus),
            Some("vmax_below") => out.push(SymbolEvent::VMinus),
            Some(_) => {}
            None => return Err(Failure::Usage(format!("--events: short row {line:?}"))),
        }
    }
    out.push(SymbolEvent::Done);
    Ok(out)
}

fn encode(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let given: Vec<&str> = ["events", "symbols", "sscs", "itinerary"]
        .into_iter()
        .filter(|k| job.text(k).is_some())
        .collect();
    if given.len() != 1 {
        return Err(Failure::Usage(
            "exactly one of --events, --symbols, --sscs, --itinerary is required".into(),
        ));
    }
    let mut report = BTreeMap::new();
    let itinerary = match given[0] {
        "itinerary" => {
            let it: Itinerary = job.text("itinerary").unwrap_or("").parse()?;
            match sscs_from_itinerary(&it) {
                Ok(s) => report.insert("sscs".to_string(), format_sscs(&s)),
                Err(e) => report.insert("sscs".to_string(), format!("undefined ({e})")),
            };
            it
        }
        k => {
            let sscs = match k {
                "events" => encode_sscs(&events_from_csv(Path::new(job.text("events").unwrap_or("")))?),
                "symbols" => encode_sscs(&parse_symbols(job.text("symbols").unwrap_or(""))?),
                _ => parse_sscs(job.text("sscs").unwrap_or(""))
                    .map_err(|e| Failure::Usage(format!("--sscs: {e}")))?,
            };
            report.insert("sscs".to_string(), format_sscs(&sscs));
            itinerary_from_sscs(&sscs)
        }
    };
    report.insert("itinerary".into(), itinerary.to_string());
    let a = address(&itinerary)?;
    report.insert("address".into(), a.to_string());
    report.insert("address_lo".into(), fmt_f64(a.lo_f64()));
    report.insert("address_hi".into(), fmt_f64(a.hi_f64()));
    write_meta(&ctx.out.join("encode.txt"), &report)?;
    write_job_meta(ctx, job, &BTreeMap::new())?;
    for (k, v) in &report {
        println!("{k}={v}");
    }
    Ok(())
}

// ------------------------------------------------------------------ sweeps

fn grid_lyapunov(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let spec = grid_spec(job)?;
    let cfg = LyapunovSweepConfig {
        params: params(job, 0.0, 0.0)?,
        seed: seed_state(job)?,
        lyapunov: LyapunovConfig {
            t_transient: job.f64("t_transient")?,
            t_total: job.f64("t_total")?,
            renorm_interval: job.f64("renorm")?,
            checkpoints: job.usize("checkpoints")?,
            integrator: integrator(job, 1e4)?,
            initial_frame: None,
        },
    };
    let g = sweep_lyapunov(&spec, &cfg, &sweep_options(ctx))?;
    finish_grid(ctx, job, &g)?;
    let mut w = create(ctx, "lyapunov.csv")?;
    writeln!(w, "dCa,dVx,l1,l2,l3,l4,l5,dimL,converged")?;
    for (k, c) in g.cells.iter().enumerate() {
        let (a, b) = spec.coords(k);
        let body = match c.ok() {
            Some(v) => format!(
                "{},{},{}",
                v.exponents.map(fmt_f64).join(","),
                fmt_f64(v.dim_l),
                v.converged
            ),
            None => "NaN,NaN,NaN,NaN,NaN,NaN,false".to_string(),
        };
        writeln!(w, "{},{},{body}", fmt_f64(a), fmt_f64(b))?;
    }
    w.flush()?;
    write_lyapunov_ppm(&ctx.out.join("lyapunov.ppm"), &g)?;
    Ok(())
}

fn grid_isi_lz(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let spec = grid_spec(job)?;
    let cfg = IsiLzConfig {
        params: params(job, 0.0, 0.0)?,
        seed: seed_state(job)?,
        t_transient: job.f64("t_transient")?,
        t_record: job.f64("t_record")?,
        max_entries: job.usize("max_entries")?,
        max_period: job.usize("max_period")?,
        period_window: job.usize("period_window")?,
        integrator: integrator(job, 1e4)?,
    };
    let g = sweep_isi_lz(&spec, &cfg, &sweep_options(ctx))?;
    finish_grid(ctx, job, &g)?;
    for f in ["lz76", "isi_variance", "regime"] {
        write_field_pgm(&ctx.out.join(format!("{f}.pgm")), &g, f)?;
    }
    Ok(())
}

fn grid_homsd(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let spec = grid_spec(job)?;
    let cfg = HomsdConfig {
        params: params(job, 0.0, 0.0)?,
        eps: job.f64("eps")?,
        timeout: job.f64("timeout")?,
        integrator: integrator(job, 1e4)?,
    };
    let g = sweep_homsd(&spec, &cfg, &sweep_options(ctx))?;
    finish_grid(ctx, job, &g)?;
    write_field_pgm(&ctx.out.join("spikes.pgm"), &g, "spikes")?;
    Ok(())
}

fn theta(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let cfg = ThetaScanConfig {
        params: params(job, 0.0, job.f64("dVx")?)?,
        eps: job.f64("eps")?,
        clip: job.f64("clip")?,
        timeout: job.f64("timeout")?,
        integrator: integrator(job, 1e4)?,
    };
    let dca = (job.f64("dCa_lo")?, job.f64("dCa_hi")?, job.usize("dCa_n")?);
    let g = scan_theta(dca, job.usize("theta_n")?, &cfg, &sweep_options(ctx))?;
    finish_grid(ctx, job, &g)?;
    write_field_pgm(&ctx.out.join("distance.pgm"), &g, "distance")?;
    write_field_pgm(&ctx.out.join("spikes.pgm"), &g, "spikes")?;
    let (mins, apex) = theta_minima(&g);
    let mut w = create(ctx, "minima.csv")?;
    writeln!(w, "dCa,min_distance")?;
    for (i, m) in mins.iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(g.spec.axis1.value(i)), fmt_f64(*m))?;
    }
    w.flush()?;
    match apex {
        Some(a) => println!("distance minimum at dCa = {a}"),
        None => println!("no successful cells"),
    }
    Ok(())
}

fn isi_1d(job: &Job, ctx: &Context) -> Result<(), Failure> {
    let cfg = IsiSweepConfig {
        params: params(job, 0.0, job.f64("dVx")?)?,
        seed: seed_state(job)?,
        t_warmup: job.f64("t_warmup")?,
        t_transient: job.f64("t_transient")?,
        t_record: job.f64("t_record")?,
        integrator: integrator(job, 1e4)?,
    };
    let (lo, hi, n) = (job.f64("dCa_lo")?, job.f64("dCa_hi")?, job.usize("dCa_n")?);
    if n == 0 {
        return Err(Failure::Usage("--dCa_n: must be at least 1".into()));
    }
    let values: Vec<f64> = (0..n)
        .map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect();
    let cols = sweep_isi_1d(&values, &cfg).map_err(|e| match Failure::from(e) {
        Failure::Numerical(m) => Failure::Numerical(format!("dCa sweep at dVx = {}: {m}", cfg.params.dvx)),
        u => u,
    })?;
    let mut w = create(ctx, "isi.csv")?;
    write_isi_csv(&mut w, &cols)?;
    let total: usize = cols.iter().map(|c| c.isis.len()).sum();
    write_job_meta(ctx, job, &cfg.meta())?;
    println!("{} values, {total} intervals", cols.len());
    Ok(())
}
