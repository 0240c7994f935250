//! Batch driver for the hyperboloidal wave/Klein-Gordon laboratory.
//!
//! Subcommands: `solve` (evolution plus diagnostics), `kernel-sweep` (wave
//! sup-norm bound sweep), `ode-batch` (randomized oscillator bound),
//! `commutator-suite`, `inequality-suite`, and `report` (aggregate a run
//! directory). Exit codes: 0 pass, 1 check failure, 2 usage error,
//! 3 numerical abort.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavekg::fields::Level;
use wavekg::harness;
use wavekg::norms::energy_csv_header;
use wavekg::solver::{self, RunConfig, SolverError};
use wavekg::suites;
use wavekg::wave_kernel;

#[derive(Parser)]
#[command(name = "wavekg", version, about = "hyperboloidal wave/Klein-Gordon laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the coupled system and write energy/decay/bootstrap tables.
    Solve(SolveArgs),
    /// Sweep the wave sup-norm bound over (t, r, mu, nu).
    KernelSweep(KernelArgs),
    /// Randomized perturbed-oscillator bound batch.
    OdeBatch(OdeArgs),
    /// Commutator tables, Killing identities, and scale-invariance checks.
    CommutatorSuite(SeedArgs),
    /// Sobolev and Hardy inequality checks on evolved and synthetic fields.
    InequalitySuite(SeedArgs),
    /// Aggregate the CSV artifacts of a run directory into a summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// key=value configuration file (flags below override it)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    outdir: Option<PathBuf>,
    /// zero/scale the wave data (the smallness study uses 0)
    #[arg(long)]
    wave_data_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// decouple the system (free wave + free Klein-Gordon)
    #[arg(long, default_value_t = false)]
    decoupled: bool,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = vec![0.25])]
    mu: Vec<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = vec![0.25])]
    nu: Vec<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = vec![5.0, 10.0, 20.0, 50.0])]
    t: Vec<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = vec![0.0, 0.3, 0.6, 0.9])]
    r_frac: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    outdir: Option<PathBuf>,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    outdir: Option<PathBuf>,
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// run directory holding the CSV artifacts
    #[arg(long, default_value = ".")]
    dir: PathBuf,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_NUMERICAL_ABORT: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::KernelSweep(args) => cmd_kernel_sweep(args),
        Command::OdeBatch(args) => cmd_ode_batch(args),
        Command::CommutatorSuite(args) => cmd_commutator(args),
        Command::InequalitySuite(args) => cmd_inequality(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wavekg: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn check(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CHECK_FAILED,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::check(format!("i/o: {e}"))
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = match e {
            SolverError::CoefficientDegeneracy { .. }
            | SolverError::CflViolation { .. }
            | SolverError::BoundaryContamination { .. } => EXIT_NUMERICAL_ABORT,
            _ => EXIT_CHECK_FAILED,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn ensure_outdir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(mode) = &args.mode {
        let merged = format!("mode={mode}");
        let base = RunConfig::parse(&merged)?;
        cfg.mode = base.mode;
        if args.config.is_none() {
            // mode switch implies the mode's defaults unless overridden below
            cfg = base;
        }
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(l) = args.l {
        cfg.extent = l;
    }
    if let Some(c) = args.cfl {
        cfg.cfl = c;
    }
    if let Some(e) = args.eps {
        cfg.eps = e;
    }
    if let Some(c) = args.c {
        cfg.mass = c;
    }
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    if let Some(t) = args.t_end {
        cfg.t_end = t;
    }
    if let Some(o) = &args.outdir {
        cfg.outdir = o.display().to_string();
    }
    if let Some(w) = args.wave_data_scale {
        cfg.wave_data_scale = w;
    }
    cfg.seed = args.seed;

    let grid = cfg.grid().map_err(|e| Failure::check(e.to_string()))?;
    let mut params = cfg.model();
    if args.decoupled {
        params = solver::ModelParams::decoupled(cfg.mass, cfg.eps);
    }
    let data = cfg.data(grid);
    let out = solver::evolve(&params, grid, &data, cfg.t_end, false)?;

    let outdir = PathBuf::from(&cfg.outdir);
    ensure_outdir(&outdir)?;

    // diagnostic hyperbolic times: from 2.5 up to the fitted window end
    let s_top = wavekg::norms::fully_covered_s(out.u.t_final(), grid)
        .max(4.0)
        .min(cfg.t_end);
    let mut s_values = Vec::new();
    let mut s = 2.5;
    while s <= s_top {
        s_values.push(s);
        s += 0.5;
    }
    // extend with truncated-hyperboloid samples up to min(t_end, 30)
    let mut s_long = s_top + 1.0;
    while s_long <= cfg.t_end.min(30.0) {
        s_values.push(s_long);
        s_long += 1.5;
    }
    let diag = harness::analyze_run(&out, &params, &s_values, 4.0)
        .map_err(|e| Failure::check(e.to_string()))?;

    // energies.csv
    let mut energies = String::from(energy_csv_header());
    energies.push('\n');
    for rec in &diag.records {
        energies.push_str(&rec.csv_rows());
    }
    fs::write(outdir.join("energies.csv"), energies)?;

    // bootstrap.csv
    fs::write(outdir.join("bootstrap.csv"), diag.bootstrap.csv())?;

    // decay.csv
    let refined = harness::refined_decay_suite(&out, &params, 5.0, s_top.min(8.0));
    let mut decay = String::from(harness::decay_csv_header());
    decay.push('\n');
    for fit in [
        &refined.central_wave,
        &refined.central_kg,
        &refined.central_kg_perp,
    ]
    .into_iter()
    .flatten()
    {
        decay.push_str(&harness::decay_csv_row_drift(fit));
        decay.push('\n');
    }
    if let Ok(fit) = &refined.weighted_sup_growth {
        decay.push_str(&harness::decay_csv_row(fit));
        decay.push('\n');
    }
    fs::write(outdir.join("decay.csv"), decay)?;

    // ray diagnostics across the cone at two hyperbolic times
    if cfg.eps > 0.0 {
        use wavekg::calculus::Sampler;
        use wavekg::geometry::SpacetimePoint;
        struct HistField<'a>(wavekg::fields::HistorySampler<'a>);
        impl Sampler for HistField<'_> {
            fn eval(&self, t: f64, x: [f64; 3]) -> f64 {
                self.0.eval(t, x)
            }
        }
        let st2 = wavekg::fields::hyper_stack(&out.v, 2.0, true)
            .map_err(|e| Failure::check(e.to_string()))?;
        let (sup_v, sup_perp, _) = wavekg::norms::sup_norms(&st2);
        let v = HistField(out.v.sampler(6));
        let u = HistField(out.u.sampler(6));
        let fields = wavekg::kg_ode::KgFields {
            v: &v,
            wave: if args.decoupled { None } else { Some(&u) },
            coupling: params.h_coupling,
            source: None,
            mass: params.mass,
        };
        let mut rays = String::from(wavekg::kg_ode::ray_csv_header());
        rays.push('\n');
        for s in [0.6 * s_top, 0.9 * s_top] {
            for frac in [0.0f64, 0.5, 0.8] {
                let t = s / (1.0 - frac * frac).sqrt();
                let anchor = SpacetimePoint::new(t, [frac * t, 0.0, 0.0]);
                if t > out.v.t_final() {
                    continue;
                }
                let rep = wavekg::kg_ode::v_majorant(
                    &fields,
                    anchor,
                    sup_v + sup_perp,
                    48,
                    2.0 * grid.dx(),
                )
                .map_err(|e| Failure::check(e.to_string()))?;
                rays.push_str(&wavekg::kg_ode::ray_csv_row(anchor, &rep));
                rays.push('\n');
            }
        }
        fs::write(outdir.join("rays.csv"), rays)?;
    }

    // final-time checkpoints in the flat binary layout
    let dump = |h: &wavekg::fields::History, name: &str| -> Result<(), Failure> {
        let j = h.levels.len() - 1;
        let slice = wavekg::fields::FieldSlice {
            grid,
            level: Level::Time(h.time(j)),
            values: h.levels[j].clone(),
            which: h.which.clone(),
        };
        let mut f = fs::File::create(outdir.join(name))?;
        slice
            .write_binary(&mut f)
            .map_err(|e| Failure::check(e.to_string()))?;
        Ok(())
    };
    dump(&out.u, "u_final.fsl")?;
    dump(&out.v, "v_final.fsl")?;

    fs::write(outdir.join("plots.py"), harness::plot_script())?;

    let mut summary = String::new();
    summary.push_str(&format!(
        "run: mode={:?} n={} L={} eps={:e} c={} t_end={}\n",
        cfg.mode, cfg.n, cfg.extent, cfg.eps, cfg.mass, cfg.t_end
    ));
    summary.push_str(&format!(
        "steps={} sup|hbar00|={:.3e} energy-form spread={:.2e} coercivity violations={}\n",
        out.steps, out.hbar00_max, diag.energy_form_spread_max, diag.coercivity_violations
    ));
    summary.push_str(&format!(
        "bootstrap: C1*eps={:.3e} pass={}\n",
        diag.bootstrap.c1_eps,
        diag.bootstrap.all_pass()
    ));
    for f in &diag.bootstrap.families {
        summary.push_str(&format!(
            "  {}: max ratio {:.3} ({} at s={:.1})\n",
            f.family.name(),
            f.max_ratio,
            f.worst_member,
            f.worst_s
        ));
    }
    for fit in [
        &refined.central_wave,
        &refined.central_kg,
        &refined.central_kg_perp,
    ]
    .into_iter()
    .flatten()
    {
        summary.push_str(&format!(
            "decay {}: exponent {:.3} drift {:.2} (residual {:.2e}, {} pts)\n",
            fit.label, fit.exponent, fit.drift, fit.residual, fit.n_used
        ));
    }
    if let Ok(fit) = &refined.weighted_sup_growth {
        summary.push_str(&format!(
            "decay {}: exponent {:.3} (residual {:.2e}, {} pts)\n",
            fit.label, fit.exponent, fit.residual, fit.n_used
        ));
    }
    fs::write(outdir.join("summary.txt"), &summary)?;
    print!("{summary}");

    // a solve "passes" when nothing aborted, the triple energy forms agree,
    // and (for nonzero data) the bootstrap families hold
    if diag.coercivity_violations > 0 {
        return Err(Failure::check("coercivity sandwich violated"));
    }
    if cfg.eps > 0.0 && !diag.bootstrap.all_pass() {
        return Err(Failure::check("bootstrap families failed"));
    }
    Ok(())
}

fn cmd_kernel_sweep(args: KernelArgs) -> Result<(), Failure> {
    for &mu in &args.mu {
        if !(mu > 0.0 && mu <= 0.5) {
            return Err(Failure::check(format!("mu out of range: {mu}")));
        }
    }
    let rows = wave_kernel::supnorm_sweep(&args.t, &args.r_frac, &args.mu, &args.nu, 1.0, args.tol)
        .map_err(|e| Failure::check(e.to_string()))?;
    let mut csv = String::from(wave_kernel::sweep_csv_header());
    csv.push('\n');
    let mut max_ratio: f64 = 0.0;
    for row in &rows {
        csv.push_str(&wave_kernel::sweep_csv_row(row));
        csv.push('\n');
        if !row.ratio.is_finite() {
            return Err(Failure::check(format!(
                "non-finite bound ratio at t={} r={} mu={} nu={}",
                row.t, row.r, row.mu, row.nu
            )));
        }
        max_ratio = max_ratio.max(row.ratio);
    }
    if let Some(dir) = &args.outdir {
        ensure_outdir(dir)?;
        fs::write(dir.join("sweep.csv"), &csv)?;
    }
    println!("kernel sweep: {} points, max |u|/bound = {max_ratio:.4}", rows.len());
    if max_ratio == 0.0 && args.mu.iter().any(|&m| m > 0.0) {
        return Err(Failure::check("sweep produced no nonzero ratios"));
    }
    Ok(())
}

fn cmd_ode_batch(args: OdeArgs) -> Result<(), Failure> {
    let rep = suites::ode_batch(args.seed, args.count, args.c);
    println!(
        "ode batch: count={} fitted C={:.3} calibration max={:.3} verification max={:.3} violations={}",
        rep.count, rep.fitted_constant, rep.calibration_max, rep.verification_max, rep.violations
    );
    if let Some(dir) = &args.outdir {
        ensure_outdir(dir)?;
        fs::write(
            dir.join("ode_batch.csv"),
            format!(
                "count,fitted,calibration_max,verification_max,violations,stable\n{},{},{},{},{},{}\n",
                rep.count,
                rep.fitted_constant,
                rep.calibration_max,
                rep.verification_max,
                rep.violations,
                rep.stable as u8
            ),
        )?;
    }
    if !rep.pass() {
        return Err(Failure::check("ode bound violated or unstable"));
    }
    Ok(())
}

fn cmd_commutator(args: SeedArgs) -> Result<(), Failure> {
    let rep = suites::commutator_suite(args.seed, 10);
    for c in &rep.checks {
        println!(
            "{:<22} residuals {:.2e} {:.2e} {:.2e}  order {}",
            c.label,
            c.residuals[0],
            c.residuals[1],
            c.residuals[2],
            c.order.map_or("exact".into(), |o| format!("{o:.2}")),
        );
    }
    println!(
        "estimate constants: {:.3} -> {:.3}; xi max degree {:.3}",
        rep.estimate_constants.0, rep.estimate_constants.1, rep.xi_max_degree
    );
    let boxes = suites::box_agreement_suite(args.seed, 20);
    let box_pass = boxes.iter().all(|c| c.pass);
    println!(
        "box decomposition agreement: {}/{} fields at second order",
        boxes.iter().filter(|c| c.pass).count(),
        boxes.len()
    );
    if !rep.all_pass() || !box_pass {
        return Err(Failure::check("commutator suite failed"));
    }
    Ok(())
}

fn cmd_inequality(_args: SeedArgs) -> Result<(), Failure> {
    let rep = suites::inequality_suite(0.2);
    println!(
        "sobolev constants {:.3} -> {:.3}; hardy {:.3} -> {:.3}; static hardy {:.3}; synthetic ratio {:.3}",
        rep.sobolev_constants.0,
        rep.sobolev_constants.1,
        rep.hardy_constants.0,
        rep.hardy_constants.1,
        rep.static_hardy_max,
        rep.synthetic_sobolev.ratio
    );
    if !rep.pass() {
        return Err(Failure::check("inequality constants unstable"));
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let dir = &args.dir;
    let known = [
        "energies.csv",
        "bootstrap.csv",
        "decay.csv",
        "sweep.csv",
        "ode_batch.csv",
    ];
    let mut found = Vec::new();
    for name in known {
        if dir.join(name).exists() {
            found.push(name);
        }
    }
    if found.is_empty() {
        return Err(Failure::check(format!(
            "no runs found in {} (expected any of {:?})",
            dir.display(),
            known
        )));
    }
    let mut summary = String::from("aggregated artifacts:\n");
    for name in &found {
        let text = fs::read_to_string(dir.join(name))?;
        let rows = text.lines().count().saturating_sub(1);
        summary.push_str(&format!("  {name}: {rows} data rows\n"));
        if *name == "bootstrap.csv" {
            for line in text.lines().skip(1) {
                summary.push_str(&format!("    {line}\n"));
            }
        }
    }
    fs::write(dir.join("report.txt"), &summary)?;
    fs::write(dir.join("plots.py"), harness::plot_script())?;
    print!("{summary}");
    Ok(())
}
