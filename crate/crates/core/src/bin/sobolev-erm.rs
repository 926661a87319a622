use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use sobolev_erm::config::Config;
use sobolev_erm::data_process::{dependence_matrix_finite, simulate};
use sobolev_erm::estimator::{empirical_moc_linear, excess_risk};
use sobolev_erm::harness::{emit_outputs, rate_sweep, RateReport, SystemSource};
use sobolev_erm::pde_operator::regularizer_value;
use sobolev_erm::seeding::{derive_seed, stream};
use sobolev_erm::theory_bounds::{
    lower_isometry_prob, moc_bound_exp, moc_bound_prob, noreg_rate, rate_bound_exp, rate_bound_prob, BoundKind,
    NamedConstant, ProblemParams,
};
use sobolev_erm::{io, Error, Result};

/// Physics-regularized least squares for learning dynamical systems.
#[derive(Debug, Parser)]
#[command(name = "sobolev-erm", version)]
struct Cli {
    /// TOML configuration file; missing keys take their documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed` from the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate trajectories of the configured system into dataset.csv.
    Simulate,
    /// Fit the estimator on a dataset and write coeffs.csv and fit.txt.
    Fit {
        /// Dataset CSV (overrides `fit.data`); otherwise one is simulated.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Drop the physics penalty.
        #[arg(long)]
        unregularized: bool,
    },
    /// Excess-risk rate sweep with and without the physics penalty.
    Sweep,
    /// Tabulate every theoretical bound over the configured grid.
    Bounds,
    /// Empirical martingale offset complexity of the basis span against its bounds.
    Moc,
    /// Rate sweep on the unicycle with the non-slip penalty.
    Unicycle,
}

const TAG_MOC: u64 = 4;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(cli.out.display().to_string(), e))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg, out),
        Command::Fit { data, unregularized } => cmd_fit(&cfg, out, data, unregularized),
        Command::Sweep => cmd_sweep(&cfg, out),
        Command::Bounds => cmd_bounds(&cfg, out),
        Command::Moc => cmd_moc(&cfg, out),
        Command::Unicycle => cmd_unicycle(&cfg, out),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn cmd_simulate(cfg: &Config, out: &Path) -> Result<()> {
    let sys = cfg.system()?;
    let data = simulate(&sys, cfg.simulate.length, cfg.simulate.trajectories, cfg.seed)?;
    let path = out.join("dataset.csv");
    io::write_dataset(&data, &path)?;
    log::info!("wrote {} samples to {}", data.total_len(), path.display());
    Ok(())
}

fn cmd_fit(cfg: &Config, out: &Path, data: Option<PathBuf>, unregularized: bool) -> Result<()> {
    let sys = cfg.system()?;
    let data = match data.or_else(|| cfg.fit.data.clone()) {
        Some(path) => io::read_dataset(&path)?,
        None => simulate(&sys, cfg.simulate.length, cfg.simulate.trajectories, cfg.seed)?,
    };
    let t = data.total_len();
    let ridge = cfg.estimator.ridge * (t as f64).powf(-cfg.estimator.ridge_power);
    let weight = if unregularized { 0.0 } else { cfg.estimator.physics_weight };
    let est = cfg.estimator()?.with_weights(ridge, weight)?;
    let fit = est.fit(&data)?;
    io::write_coeffs(&fit.coeffs, &out.join("coeffs.csv"))?;

    let op = cfg.operator()?;
    let physics = regularizer_value(&op, &fit.coeffs, &cfg.measure()?)?;
    let risk = excess_risk(
        &fit.coeffs,
        sys.fstar().as_ref(),
        &sys,
        cfg.sweep.eval_len,
        cfg.sweep.eval_trajectories.max(2),
        derive_seed(cfg.seed, &[2]),
    )?;
    let mut s = String::new();
    let _ = writeln!(s, "samples = {t}");
    let _ = writeln!(s, "ridge = {ridge:e}");
    let _ = writeln!(s, "physics_weight = {weight:e}");
    let _ = writeln!(s, "objective = {:e}", fit.objective);
    let _ = writeln!(s, "train_mse = {:e}", fit.train_mse);
    let _ = writeln!(s, "physics_residual = {physics:e}");
    let _ = writeln!(s, "excess_risk = {:e}", risk.mean);
    let _ = writeln!(s, "excess_risk_std_err = {:e}", risk.std_err);
    let _ = writeln!(s, "condition_estimate = {:e}", fit.condition_estimate);
    let _ = writeln!(s, "jitter = {:e}", fit.jitter);
    let _ = writeln!(s, "gradient_norm = {:e}", fit.gradient_norm);
    let _ = writeln!(s, "\n# effective configuration\n{}", cfg.echo());
    write_text(&out.join("fit.txt"), &s)?;
    log::info!("excess risk {:.3e} +- {:.1e}", risk.mean, risk.std_err);
    Ok(())
}

fn finish_sweep(mut report: RateReport, cfg: &Config, out: &Path) -> Result<()> {
    report.config_echo = cfg.echo();
    emit_outputs(&report, out)?;
    for arm in &report.arms {
        println!(
            "{}: slope {:.3} (95% CI {:.3} .. {:.3})",
            arm.name, arm.slope.slope, arm.slope.ci_lo, arm.slope.ci_hi
        );
    }
    Ok(())
}

fn cmd_sweep(cfg: &Config, out: &Path) -> Result<()> {
    let source = SystemSource(cfg.system()?);
    let arms = cfg.sweep_arms()?;
    let report = rate_sweep("synthetic", &cfg.sweep_config(), &source, &arms)?;
    finish_sweep(report, cfg, out)
}

fn cmd_unicycle(cfg: &Config, out: &Path) -> Result<()> {
    let model = cfg.unicycle_model()?;
    let arms = cfg.unicycle_arms(&model)?;
    let report = rate_sweep("unicycle", &cfg.unicycle_sweep_config(), &model, &arms)?;
    finish_sweep(report, cfg, out)
}

fn audit_block(s: &mut String, title: &str, constants: &[NamedConstant]) {
    let _ = writeln!(s, "[{title}]");
    for c in constants {
        let _ = writeln!(s, "{} = {:e}    # {}", c.name, c.value, c.formula);
    }
    let _ = writeln!(s);
}

fn cmd_bounds(cfg: &Config, out: &Path) -> Result<()> {
    let base = cfg.system_params()?;
    let sigmas = cfg.bounds.sigma_w.clone().unwrap_or_else(|| vec![base.sigma_w]);
    let mut table = csv::Writer::from_path(out.join("bounds.csv")).map_err(|e| Error::Config(e.to_string()))?;
    table
        .write_record([
            "T",
            "R_fstar",
            "sigma_w",
            "moc_prob",
            "moc_exp",
            "rate_prob",
            "rate_exp",
            "lambda_min_prob",
            "lambda_min_exp",
            "burn_in_prob",
            "burn_in_exp",
            "noreg_prob",
            "noreg_exp",
            "noreg_burn_in_prob",
            "lower_isometry_fail_prob",
            "overflow",
        ])
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut audit = String::new();
    for &sigma_w in &sigmas {
        let params = ProblemParams { sigma_w, ..base.clone() };
        for (ri, &r) in cfg.bounds.r_fstar.iter().enumerate() {
            for (ti, &t) in cfg.bounds.t_grid.iter().enumerate() {
                let prob = rate_bound_prob(t, r, &params)?;
                let exp = rate_bound_exp(t, r, &params)?;
                let moc_p = moc_bound_prob(t, prob.rho, &params)?;
                let moc_e = moc_bound_exp(t, exp.rho, &params)?;
                let np = noreg_rate(t, BoundKind::Probability, &params)?;
                let ne = noreg_rate(t, BoundKind::Expectation, &params)?;
                let iso = lower_isometry_prob(prob.r_sq.sqrt(), t, &params)?;
                let overflow = prob.overflow || exp.overflow || moc_p.overflow || moc_e.overflow || np.overflow || ne.overflow;
                let row = [
                    t,
                    r,
                    sigma_w,
                    moc_p.bound,
                    moc_e.bound,
                    prob.bound,
                    exp.bound,
                    prob.lambda_min,
                    exp.lambda_min,
                    prob.burn_in,
                    exp.burn_in,
                    np.bound,
                    ne.bound,
                    np.burn_in,
                    iso.probability,
                ]
                .iter()
                .map(|v| format!("{v:.16e}"))
                .chain(std::iter::once(u8::from(overflow).to_string()))
                .collect::<Vec<_>>();
                table.write_record(&row).map_err(|e| Error::Config(e.to_string()))?;
                if ri == 0 && ti == 0 {
                    let tag = format!("sigma_w = {sigma_w:e}");
                    audit_block(&mut audit, &format!("rate_prob, {tag}"), &prob.audit());
                    audit_block(&mut audit, &format!("rate_exp, {tag}"), &exp.audit());
                    audit_block(&mut audit, &format!("noreg_prob, {tag}"), &np.audit());
                    audit_block(&mut audit, &format!("noreg_exp, {tag}"), &ne.audit());
                }
            }
        }
    }
    table.flush().map_err(|e| Error::io("bounds.csv".to_string(), e))?;

    if let Some((chain, horizon)) = cfg.chain()? {
        let dep = dependence_matrix_finite(&chain, horizon)?;
        let mut s = String::new();
        for row in dep.gamma.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        write_text(&out.join("dependence.csv"), &s)?;
        let _ = writeln!(audit, "[dependence]\nhorizon = {horizon}\nnorm2 = {:e}\n", dep.norm2);
    }
    let _ = writeln!(audit, "# effective configuration\n{}", cfg.echo());
    write_text(&out.join("constants.txt"), &audit)?;
    log::info!("wrote bounds for {} grid points", sigmas.len() * cfg.bounds.r_fstar.len() * cfg.bounds.t_grid.len());
    Ok(())
}

fn cmd_moc(cfg: &Config, out: &Path) -> Result<()> {
    let sys = cfg.system()?;
    let basis = cfg.basis()?;
    let params = cfg.system_params()?;
    let dim = cfg.system.dim;
    if cfg.moc.reps < 2 {
        return Err(Error::Config("moc.reps must be at least 2".into()));
    }
    let mut s = String::from("T,mean,ci_lo,ci_hi,moc_bound_exp,moc_bound_prob\n");
    for &t in &cfg.moc.t_grid {
        let values = (0..cfg.moc.reps)
            .map(|rep| {
                let mut rng = stream(cfg.seed, &[TAG_MOC, t as u64, rep as u64]);
                let tr = sys.trajectory(t, &mut rng);
                let phi = basis.design_matrix(tr.raw_inputs());
                let noise = tr
                    .noise()
                    .ok_or_else(|| Error::Numerical("simulated trajectory carries no noise record".into()))?;
                empirical_moc_linear(&phi, &DMatrix::from_row_slice(t, dim, noise))
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let half = 1.96 * sd / n.sqrt();
        let be = moc_bound_exp(t as f64, cfg.moc.rho, &params)?.bound;
        let bp = moc_bound_prob(t as f64, cfg.moc.rho, &params)?.bound;
        let _ = writeln!(s, "{t},{mean:e},{:e},{:e},{be:e},{bp:e}", mean - half, mean + half);
        log::info!("T = {t}: empirical MOC {mean:.3e}, expectation bound {be:.3e}");
    }
    write_text(&out.join("moc.csv"), &s)
}
