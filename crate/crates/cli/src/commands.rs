use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nicholson_core::attractor::{compute_mesh, parameter_study, AttractorMesh, PullbackConfig, StudyAxis};
use nicholson_core::conditions::{check_assumptions, check_invariant_zone, compute_bounds, Sampling, TimeGrid};
use nicholson_core::dde::{integrate, write_csv_header, History, SolverConfig, Trajectory};
use nicholson_core::modelfile::{format_list, KeyValues};
use nicholson_core::spectral::{linearize_at_zero, persistence_verdict, LyapunovConfig, Verdict};
use nicholson_core::svg::heatmap;
use nicholson_core::{AttractorError, SolverError, SpectralError};

use crate::settings::{solver_keys, theta_value, Settings};
use crate::CliError;

fn attractor_err(e: AttractorError) -> CliError {
    match e {
        AttractorError::InvalidConfig(m) => CliError::Input(m),
        other => CliError::Domain(other.to_string()),
    }
}

fn spectral_err(e: SpectralError) -> CliError {
    match e {
        SpectralError::InvalidConfig(m) => CliError::Input(m),
        other => CliError::Domain(other.to_string()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.txt")
}

pub fn check(s: &Settings) -> Result<(), CliError> {
    let sampling = match s.kv.get("sampling").unwrap_or("closed-form") {
        "closed-form" => Sampling::ClosedForm,
        "grid" => {
            let step = s.f64_or("grid_step", TimeGrid::default().step)?;
            if !(step > 0.0) {
                return Err(CliError::Input(format!("grid_step must be > 0, got {step}")));
            }
            Sampling::Grid(TimeGrid::with_step(step))
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown sampling `{other}` (expected closed-form or grid)"
            )))
        }
    };
    let report = check_assumptions(&s.spec, &sampling);
    print!("{report}");
    let mut failed: Vec<String> = report.failed().map(|c| c.hypothesis.to_string()).collect();

    let bounds = compute_bounds(&s.spec, &sampling);
    println!("invariant box upper corner: [{}]", format_list(&bounds.phi_bar));
    match check_invariant_zone(&s.spec, &bounds, &sampling) {
        Ok(zone) => {
            print!("{zone}");
            for p in zone.patches.iter().filter(|p| !p.holds) {
                if p.min_middle > 0.0 {
                    failed.push(format!("(zone) patch {} margin {}", p.patch + 1, p.margin));
                } else {
                    failed.push(format!("(zone) patch {} lower bound, min {}", p.patch + 1, p.min_middle));
                }
            }
        }
        Err(e) => {
            println!("invariant zone: {e}");
            failed.push(format!("(zone) {e}"));
        }
    }
    if failed.is_empty() {
        println!("result: PASS");
        Ok(())
    } else {
        println!("result: FAIL");
        for f in &failed {
            println!("violated: {f}");
        }
        Err(CliError::Domain(format!("violated {}", failed.join("; "))))
    }
}

struct Summary {
    nodes: usize,
    sup: f64,
    /// fraction of steps on which some component changes sign
    sign_changes: f64,
    growth: f64,
}

fn summarize(traj: &Trajectory) -> Summary {
    let n = traj.len();
    let norm = |k: usize| traj.state(k).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let sup = (0..n).map(norm).fold(0.0, f64::max);
    let flips = (1..n)
        .filter(|&k| {
            traj.state(k)
                .iter()
                .zip(traj.state(k - 1))
                .any(|(a, b)| a * b < 0.0)
        })
        .count();
    let start = norm(0);
    Summary {
        nodes: n,
        sup,
        sign_changes: if n > 1 { flips as f64 / (n - 1) as f64 } else { 0.0 },
        growth: if start > 0.0 { norm(n - 1) / start } else { f64::NAN },
    }
}

pub fn simulate(s: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let started = Instant::now();
    let theta = s.theta()?;
    let t_start = s.f64_or("t_start", 0.0)?;
    let t_end = s.f64_or("t_end", 10.0)?;
    if !(t_end >= t_start) || !t_end.is_finite() || !t_start.is_finite() {
        return Err(CliError::Input(format!("need t_end >= t_start, got [{t_start}, {t_end}]")));
    }
    let solver = s.solver()?;
    let linearized = s.bool_or("linearized", false)?;
    let h0 = s.f64_or("history", 1.0)?;
    let m = s.spec.dim();
    let base = theta.advance(t_start);
    let duration = t_end - t_start;

    let result: Result<Option<Trajectory>, SolverError> = if duration == 0.0 {
        Ok(None)
    } else if linearized {
        let lin = linearize_at_zero(&s.spec);
        integrate(&lin.at(base), History::constant(h0, m), duration, &solver).map(Some)
    } else {
        integrate(&s.spec.at(base), History::constant(h0, m), duration, &solver).map(Some)
    };
    let traj = match result {
        Ok(t) => t,
        Err(e @ SolverError::NonfiniteState { .. }) => {
            eprintln!("summary: unstable, growing amplitude ({e})");
            return Err(CliError::Domain(e.to_string()));
        }
        Err(SolverError::InvalidConfig(m)) => return Err(CliError::Input(m)),
        Err(e) => return Err(CliError::Domain(e.to_string())),
    };

    let write = |w: &mut dyn Write| -> io::Result<()> {
        match &traj {
            Some(t) => t.write_csv(w, t_start),
            None => write_csv_header(w, m),
        }
    };
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
        }
    }

    let mut lines = vec![format!(
        "system: {}, method {}, h {}, base point {} at t = {t_start}",
        if linearized { "linearized at 0" } else { "nonlinear" },
        solver.method,
        solver.h,
        theta
    )];
    if let Some(t) = &traj {
        let sm = summarize(t);
        lines.push(format!(
            "nodes {}, final state [{}], max |y| {:e}, growth factor {:e}, sign changes on {:.0}% of steps",
            sm.nodes,
            t.last_state().iter().map(|v| format!("{v:.9e}")).collect::<Vec<_>>().join(", "),
            sm.sup,
            sm.growth,
            100.0 * sm.sign_changes
        ));
        if sm.sign_changes > 0.25 && sm.growth > 1.0 {
            lines.push("WARNING: growing amplitude with step-to-step oscillation (numerical instability)".into());
        }
    } else {
        lines.push("empty interval: header only".into());
    }
    for l in &lines {
        if out.is_some() {
            println!("{l}");
        } else {
            eprintln!("{l}");
        }
    }

    if let Some(path) = out {
        let mut run = KeyValues::default();
        solver_keys(&solver, &mut run);
        run.set("theta", theta_value(theta));
        run.set("t_start", t_start);
        run.set("t_end", t_end);
        run.set("linearized", linearized);
        run.set("history", h0);
        let name = path.display().to_string();
        let text = s.manifest("simulate", &run, &[name], started.elapsed().as_secs_f64());
        fs::write(manifest_path(path), text)?;
    }
    Ok(())
}

pub fn persistence(s: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let started = Instant::now();
    let theta = s.theta()?;
    let d = LyapunovConfig::default();
    let cfg = LyapunovConfig {
        horizon: s.f64_or("horizon", d.horizon)?,
        solver: s.solver()?,
        renorm_threshold: s.f64_or("renorm_threshold", d.renorm_threshold)?,
        checkpoints: s.usize_or("checkpoints", d.checkpoints)?,
        convergence_gap: d.convergence_gap,
    };
    let hyp = check_assumptions(&s.spec, &Sampling::ClosedForm);
    if !hyp.all_hold() {
        let names: Vec<String> = hyp.failed().map(|c| c.hypothesis.to_string()).collect();
        println!("warning: hypotheses {} fail; the criterion assumes them", names.join(", "));
    }
    let report = persistence_verdict(&s.spec, theta, &cfg).map_err(spectral_err)?;
    print!("{report}");

    if let Some(path) = out {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
        let mut run = KeyValues::default();
        solver_keys(&cfg.solver, &mut run);
        run.set("theta", theta_value(theta));
        run.set("horizon", cfg.horizon);
        run.set("renorm_threshold", cfg.renorm_threshold);
        run.set("checkpoints", cfg.checkpoints);
        let text = s.manifest(
            "persistence",
            &run,
            &[path.display().to_string()],
            started.elapsed().as_secs_f64(),
        );
        fs::write(manifest_path(path), text)?;
    }
    match report.verdict {
        Verdict::Persistent => Ok(()),
        v => Err(CliError::Domain(v.to_string())),
    }
}

fn pullback_config(s: &Settings) -> Result<PullbackConfig, CliError> {
    let d = PullbackConfig::default();
    let cfg = PullbackConfig {
        tol: s.f64_or("tol", d.tol)?,
        lag: s.f64_or("lag", d.lag)?,
        t_step: s.f64_or("t_step", d.t_step)?,
        t_max: s.f64_or("t_max", d.t_max)?,
        history: None,
    };
    cfg.validate().map_err(attractor_err)?;
    Ok(cfg)
}

fn mesh_run_keys(n: usize, cfg: &PullbackConfig, solver: &SolverConfig) -> KeyValues {
    let mut run = KeyValues::default();
    solver_keys(solver, &mut run);
    run.set("n", n);
    run.set("tol", cfg.tol);
    run.set("lag", cfg.lag);
    run.set("t_step", cfg.t_step);
    run.set("t_max", cfg.t_max);
    run
}

/// CSV plus one heatmap per component; returns the file names.
fn write_mesh(mesh: &AttractorMesh, dir: &Path, stem: &str, title: &str) -> Result<Vec<String>, CliError> {
    let csv = format!("{stem}.csv");
    let mut w = create(&dir.join(&csv))?;
    mesh.write_csv(&mut w)?;
    w.flush()?;
    let mut files = vec![csv];
    for c in 0..mesh.dim {
        let name = format!("{stem}_y{}.svg", c + 1);
        let svg = heatmap(&format!("{title}: y{}", c + 1), mesh.n, &mesh.component(c));
        fs::write(dir.join(&name), svg)?;
        files.push(name);
    }
    Ok(files)
}

fn describe_mesh(s: &Settings, mesh: &AttractorMesh, tol: f64) -> Vec<String> {
    let phi = compute_bounds(&s.spec, &Sampling::ClosedForm).phi_bar;
    let inv = mesh.invariants(&phi, 10.0 * tol);
    let total = mesh.nodes.len();
    let failed = mesh.failures().count();
    let trivial = mesh.nodes.iter().filter(|r| matches!(r, Ok(p) if p.trivial)).count();
    let mut out = vec![format!(
        "nodes converged: {}/{total}, max T_final {}, trivial nodes {trivial}",
        total - failed,
        mesh.max_t_final()
    )];
    for c in 0..mesh.dim {
        out.push(format!(
            "y{}: min {:.9}, max {:.9}, upper corner {:.9}",
            c + 1,
            inv.min[c],
            inv.max[c],
            phi[c]
        ));
    }
    out.push(format!(
        "invariants: positive {}, within upper corner + {:e} {}",
        inv.positive, inv.slack, inv.bounded
    ));
    if !mesh.conditions_hold {
        out.push("warning: hypotheses or invariant zone fail; the mesh need not be a copy of the base".into());
    }
    for ((i, j), e) in mesh.failures() {
        out.push(format!("node ({i},{j}) failed: {e}"));
    }
    out
}

fn mesh_ok(s: &Settings, mesh: &AttractorMesh, tol: f64) -> Result<(), CliError> {
    if mesh.is_partial() {
        return Err(CliError::Domain(format!(
            "{} mesh nodes did not converge",
            mesh.failures().count()
        )));
    }
    let phi = compute_bounds(&s.spec, &Sampling::ClosedForm).phi_bar;
    if !mesh.invariants(&phi, 10.0 * tol).hold() {
        return Err(CliError::Domain("mesh leaves the invariant box".into()));
    }
    Ok(())
}

pub fn mesh(s: &Settings, dir: &Path, jobs: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let n = s.usize_or("n", 16)?;
    let cfg = pullback_config(s)?;
    let solver = s.solver()?;
    fs::create_dir_all(dir)?;
    let mesh = compute_mesh(&s.spec, n, &cfg, &solver, jobs).map_err(attractor_err)?;
    let files = write_mesh(&mesh, dir, "mesh", &format!("pullback mesh n={n}"))?;
    for line in describe_mesh(s, &mesh, cfg.tol) {
        println!("{line}");
    }
    let mut outputs = files;
    outputs.push("manifest.txt".into());
    let text = s.manifest(
        "mesh",
        &mesh_run_keys(n, &cfg, &solver),
        &outputs,
        started.elapsed().as_secs_f64(),
    );
    fs::write(dir.join("manifest.txt"), text)?;
    println!("wrote {} files to {}", outputs.len(), dir.display());
    mesh_ok(s, &mesh, cfg.tol)
}

pub fn study(s: &Settings, dir: &Path, jobs: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let axis: StudyAxis = s
        .kv
        .parsed("axis")
        .map_err(crate::settings::input)?
        .ok_or_else(|| CliError::Input("study needs --axis".into()))?;
    let values = s
        .list("values")?
        .ok_or_else(|| CliError::Input("study needs --values".into()))?;
    let n = s.usize_or("n", 16)?;
    let cfg = pullback_config(s)?;
    let solver = s.solver()?;
    fs::create_dir_all(dir)?;
    let report = parameter_study(&s.spec, axis, &values, n, &cfg, &solver, jobs).map_err(attractor_err)?;

    let mut outputs = Vec::new();
    for e in &report.entries {
        let stem = format!("{}_{}", axis.symbol().replace('=', "_"), e.value);
        let title = format!("{} = {}", axis.symbol(), e.value);
        outputs.extend(write_mesh(&e.mesh, dir, &stem, &title)?);
        println!("{title}:");
        for line in describe_mesh(s, &e.mesh, cfg.tol) {
            println!("  {line}");
        }
    }
    let text = report.to_string();
    fs::write(dir.join("monotonicity.txt"), &text)?;
    print!("{text}");
    outputs.push("monotonicity.txt".into());
    outputs.push("manifest.txt".into());
    let mut run = mesh_run_keys(n, &cfg, &solver);
    run.set("axis", axis);
    run.set("values", format_list(&values));
    let manifest = s.manifest("study", &run, &outputs, started.elapsed().as_secs_f64());
    fs::write(dir.join("manifest.txt"), manifest)?;
    println!("wrote {} files to {}", outputs.len(), dir.display());

    for e in &report.entries {
        if e.mesh.is_partial() {
            return Err(CliError::Domain(format!(
                "{} nodes failed at {} = {}",
                e.mesh.failures().count(),
                axis.symbol(),
                e.value
            )));
        }
    }
    Ok(())
}
