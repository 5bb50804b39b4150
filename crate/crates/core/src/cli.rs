//! Command-line experiment runner.
//!
//! Every command writes `manifest.json`, `results.csv`, `checks.csv` and
//! `summary.json` into the output directory. The process exits with 0 when all
//! checks pass, 1 on invalid input or a failed check, and 2 on a numerical
//! failure.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    run_ensemble, simulate_pair_coupled, simulate_path, girsanov_weight_stats, zeta_energy_bound, Equation, Scheme,
    SimConfig,
};
use crate::ergodic::{
    estimate_decay, lyapunov_curve, ou_exact, sample_invariant, InvariantPlan, TestFunctional,
};
use crate::rates::{
    fast_diffusion_admissible, p_laplace_rates, porous_medium_rates, FastDiffusionSpec, GeneralRateParams,
    PLaplaceSpec, PorousMediumSpec,
};
use crate::spectral::{eigenvalue, DiagonalNoise, DriftModel, QuadratureGrid, SpectralField};
use crate::verify::{check_coupling_bounds, margin, p_laplace_sharp_constants, run_suite, CheckReport, Suite};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "monotone-spde", version, about = "Rate bounds, couplings and ergodicity checks for monotone SPDEs on an interval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explicit rate constants for a model
    Rates(CommonArgs),
    /// Sample paths
    Simulate(CommonArgs),
    /// Coupling by change of measure
    Couple(CommonArgs),
    /// Invariant sampling and decay or Lyapunov estimates
    Ergodic(CommonArgs),
    /// Inequality and envelope checks
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        suite: Option<SuiteArg>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Porous,
    Plaplace,
    Fastdiff,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteArg {
    Default,
    LooseConstants,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(short = 'l')]
    pub l: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(short = 'r')]
    pub r: Option<f64>,
    #[arg(short = 'p')]
    pub p: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(short = 'N')]
    pub n_modes: Option<usize>,
    #[arg(short = 'M')]
    pub points: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(short = 'T')]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Full description of a run, echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub command: String,
    pub model: ModelKind,
    pub l: f64,
    pub sigma: f64,
    pub r: f64,
    pub p: f64,
    pub theta: Option<f64>,
    pub kappa: f64,
    pub gamma: f64,
    pub n_modes: usize,
    pub points: Option<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub out: PathBuf,
    pub suite: SuiteArg,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            model: ModelKind::Porous,
            l: PI,
            sigma: 1.0,
            r: 2.0,
            p: 4.0,
            theta: None,
            kappa: 0.3,
            gamma: 1.0,
            n_modes: 16,
            points: None,
            dt: 1e-3,
            t_end: 1.0,
            paths: 100,
            seed: 0,
            scheme: Scheme::Implicit,
            out: PathBuf::from("out"),
            suite: SuiteArg::Default,
        }
    }
}

impl ExperimentConfig {
    /// Defaults, then the JSON file, then flags.
    pub fn resolve(command: &str, args: &CommonArgs, suite: Option<SuiteArg>) -> Result<Self> {
        let mut cfg: ExperimentConfig = match &args.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        cfg.command = command.to_string();
        macro_rules! over {
            ($($field:ident),*) => { $( if let Some(v) = args.$field.clone() { cfg.$field = v; } )* };
        }
        over!(model, l, sigma, r, p, kappa, gamma, n_modes, dt, t_end, paths, seed, out);
        if args.theta.is_some() {
            cfg.theta = args.theta;
        }
        if args.points.is_some() {
            cfg.points = args.points;
        }
        if let Some(s) = suite {
            cfg.suite = s;
        }
        Ok(cfg)
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut sim = SimConfig::new(self.n_modes, self.dt, self.t_end, self.seed);
        if let Some(m) = self.points {
            sim.points = m;
        }
        sim.scheme = self.scheme;
        sim
    }

    fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::domain("--paths must be at least 1"));
        }
        match self.model {
            ModelKind::Porous => self.porous().validate()?,
            ModelKind::Plaplace => self.plaplace().validate()?,
            ModelKind::Fastdiff => {
                let adm = fast_diffusion_admissible(&self.fastdiff());
                if !adm.admissible {
                    return Err(Error::domain(adm.reasons.join("; ")));
                }
            }
            ModelKind::Linear => {
                if !(self.l > 0.0) || !(self.sigma > 0.0) {
                    return Err(Error::domain("linear model needs l > 0 and sigma > 0"));
                }
            }
        }
        if self.command != "rates" && self.command != "verify" {
            self.sim_config().validate()?;
        }
        Ok(())
    }

    fn porous(&self) -> PorousMediumSpec {
        PorousMediumSpec {
            theta: self.theta,
            ..PorousMediumSpec::new(self.l, self.sigma, self.r)
        }
    }

    fn plaplace(&self) -> PLaplaceSpec {
        PLaplaceSpec::new(self.l, self.sigma, self.p)
    }

    fn fastdiff(&self) -> FastDiffusionSpec {
        FastDiffusionSpec::new(self.l, self.r, self.kappa, self.gamma)
    }

    fn drift(&self) -> DriftModel {
        match self.model {
            ModelKind::Porous => DriftModel::Porous { r: self.r },
            ModelKind::Plaplace => DriftModel::PLaplace { p: self.p },
            ModelKind::Fastdiff => DriftModel::FastDiffusion { r: self.r },
            ModelKind::Linear => DriftModel::Linear,
        }
    }

    fn equation(&self) -> Result<Equation> {
        let n = self.n_modes;
        let noise = match self.model {
            ModelKind::Porous | ModelKind::Linear => DiagonalNoise::scalar(self.sigma, n)?,
            ModelKind::Plaplace => DiagonalNoise::from_law(self.plaplace().q, n)?,
            ModelKind::Fastdiff => DiagonalNoise::from_law(self.fastdiff().noise_law(), n)?,
        };
        let grid = QuadratureGrid::new(self.l, self.sim_config().points)?;
        Equation::new(self.drift(), noise, grid)
    }

    /// `(r, θ, η, δ)` valid for the truncated drift of a model with `r > 1`.
    fn coupling_params(&self) -> Result<GeneralRateParams> {
        match self.model {
            ModelKind::Porous => {
                let spec = self.porous();
                spec.validate()?;
                spec.params(spec.theta())
            }
            ModelKind::Plaplace => {
                let (eta, delta) = p_laplace_sharp_constants(self.l, self.sigma, self.p);
                GeneralRateParams::new(self.p - 1.0, self.p, eta, delta)
            }
            _ => Err(Error::domain("coupling needs the porous or p-Laplace model")),
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    seed: u64,
    rng: &'static str,
    created_unix: u64,
}

#[derive(Debug, Serialize)]
struct QuantityRow<'a> {
    quantity: &'a str,
    value: f64,
}

#[derive(Debug, Serialize)]
struct CheckRow<'a> {
    name: &'a str,
    n_trials: usize,
    n_violations: usize,
    worst_margin: f64,
    tolerance: f64,
    passed: bool,
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.out)?;
        let out = Self { dir: cfg.out.clone() };
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            seed: cfg.seed,
            rng: "ChaCha8, seeded from the master seed; run i uses stream i",
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        out.json("manifest.json", &manifest)?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        fs::write(self.path(name), serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn quantities(&self, rows: &[(&str, f64)]) -> Result<()> {
        let rows: Vec<QuantityRow> = rows.iter().map(|(q, v)| QuantityRow { quantity: q, value: *v }).collect();
        self.csv("results.csv", &rows)
    }

    fn checks(&self, reports: &[CheckReport]) -> Result<()> {
        let rows: Vec<CheckRow> = reports
            .iter()
            .map(|r| CheckRow {
                name: &r.name,
                n_trials: r.n_trials,
                n_violations: r.n_violations,
                worst_margin: r.worst_margin,
                tolerance: r.tolerance,
                passed: r.passed(),
            })
            .collect();
        if rows.is_empty() {
            // header only
            fs::write(self.path("checks.csv"), "name,n_trials,n_violations,worst_margin,tolerance,passed\n")?;
            return Ok(());
        }
        self.csv("checks.csv", &rows)
    }
}

fn print_table(rows: &[(&str, f64)]) {
    for (q, v) in rows {
        println!("{q:<14} {v:.10e}");
    }
}

fn print_checks(reports: &[CheckReport]) {
    for r in reports {
        println!(
            "{:<40} {:>8} trials {:>6} violations  worst margin {:+.3e}  {}",
            r.name,
            r.n_trials,
            r.n_violations,
            r.worst_margin,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
}

fn status(reports: &[CheckReport]) -> i32 {
    if reports.iter().all(CheckReport::passed) {
        0
    } else {
        1
    }
}

/// Parse `argv`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(command: &Command) -> Result<i32> {
    let (name, common, suite) = match command {
        Command::Rates(c) => ("rates", c, None),
        Command::Simulate(c) => ("simulate", c, None),
        Command::Couple(c) => ("couple", c, None),
        Command::Ergodic(c) => ("ergodic", c, None),
        Command::Verify { common, suite } => ("verify", common, *suite),
    };
    let cfg = ExperimentConfig::resolve(name, common, suite)?;
    cfg.validate()?;
    let out = Output::new(&cfg)?;
    match name {
        "rates" => cmd_rates(&cfg, &out),
        "simulate" => cmd_simulate(&cfg, &out),
        "couple" => cmd_couple(&cfg, &out),
        "ergodic" => cmd_ergodic(&cfg, &out),
        _ => cmd_verify(&cfg, &out),
    }
}

fn cmd_rates(cfg: &ExperimentConfig, out: &Output) -> Result<i32> {
    let rows: Vec<(&str, f64)> = match cfg.model {
        ModelKind::Porous => {
            let pm = porous_medium_rates(&cfg.porous())?;
            let rep = pm.report;
            vec![
                ("r", cfg.r),
                ("theta", pm.theta),
                ("eta", pm.eta),
                ("delta", pm.delta),
                ("alpha_theta", pm.alpha_theta),
                ("alpha", rep.alpha),
                ("lambda", rep.lambda),
                ("t_opt", rep.t_opt),
                ("lb_primary", rep.lb_primary),
                ("lb_secondary", rep.lb_secondary),
                ("c0", rep.c0),
            ]
        }
        ModelKind::Plaplace => {
            let pl = p_laplace_rates(&cfg.plaplace())?;
            let (p, rep) = (pl.params, pl.report);
            vec![
                ("r", p.r),
                ("theta", p.theta),
                ("eta", p.eta),
                ("delta", p.delta),
                ("alpha", rep.alpha),
                ("lambda", rep.lambda),
                ("t_opt", rep.t_opt),
                ("lb_primary", rep.lb_primary),
                ("lb_secondary", rep.lb_secondary),
                ("c0", rep.c0),
            ]
        }
        ModelKind::Fastdiff => {
            let adm = fast_diffusion_admissible(&cfg.fastdiff());
            let flag = |b: bool| if b { 1.0 } else { 0.0 };
            vec![
                ("r", cfg.r),
                ("kappa", cfg.kappa),
                ("theta", adm.theta),
                ("eps", adm.eps),
                ("hilbert_schmidt", flag(adm.hilbert_schmidt)),
                ("inf_positive", flag(adm.inf_positive)),
                ("admissible", flag(adm.admissible)),
            ]
        }
        ModelKind::Linear => vec![("lambda_1", eigenvalue(1, cfg.l)?)],
    };
    print_table(&rows);
    out.quantities(&rows)?;
    out.checks(&[])?;
    out.json("summary.json", &rows.iter().map(|(k, v)| (k.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>())?;
    Ok(0)
}

/// `±½ a e₁` with `a` chosen so that the pair is at unit distance in the
/// model's state norm.
fn unit_pair(cfg: &ExperimentConfig, eq: &Equation) -> (SpectralField, SpectralField) {
    let e1 = SpectralField::mode(cfg.l, cfg.n_modes, 1, 1.0);
    let a = 1.0 / eq.norm(&e1);
    (
        SpectralField::mode(cfg.l, cfg.n_modes, 1, 0.5 * a),
        SpectralField::mode(cfg.l, cfg.n_modes, 1, -0.5 * a),
    )
}

#[derive(Debug, Serialize)]
struct PathRow {
    run: u64,
    t: f64,
    norm_h: f64,
    norm_l2: f64,
    mode1_h: f64,
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &Output) -> Result<i32> {
    let eq = cfg.equation()?;
    let mut sim = cfg.sim_config();
    sim.save_every = (sim.steps() / 100).max(1);
    let (x0, _) = unit_pair(cfg, &eq);
    let paths = run_ensemble(cfg.paths as u64, |i| simulate_path(&x0, &eq, &sim, i))?;
    let mut rows = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        for (t, x) in p.times.iter().zip(&p.states) {
            rows.push(PathRow {
                run: i as u64,
                t: *t,
                norm_h: x.norm_h(),
                norm_l2: x.norm_l2(),
                mode1_h: TestFunctional::ModeH { k: 1 }.eval(x),
            });
        }
    }
    out.csv("results.csv", &rows)?;
    out.checks(&[])?;
    out.json("summary.json", &serde_json::json!({ "paths": paths.len(), "saved_times": paths[0].times.len() }))?;
    println!("{} paths written to {}", paths.len(), out.path("results.csv").display());
    Ok(0)
}

#[derive(Debug, Serialize)]
struct CoupleRow {
    run: u64,
    tau: Option<f64>,
    coupled: bool,
    zeta_energy: f64,
    log_weight: f64,
    weight: f64,
    max_eps_slope: Option<f64>,
    substeps: usize,
}

fn cmd_couple(cfg: &ExperimentConfig, out: &Output) -> Result<i32> {
    let params = cfg.coupling_params()?;
    let theta = params.theta;
    let eq = cfg.equation()?;
    let sim = cfg.sim_config();
    let (x0, y0) = unit_pair(cfg, &eq);
    let traces = run_ensemble(cfg.paths as u64, |i| simulate_pair_coupled(&x0, &y0, &eq, &sim, theta, i))?;
    let rows: Vec<CoupleRow> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| CoupleRow {
            run: i as u64,
            tau: t.tau,
            coupled: t.coupled(),
            zeta_energy: t.zeta_energy,
            log_weight: t.log_weight,
            weight: t.weight(),
            max_eps_slope: t.max_eps_slope(),
            substeps: t.substeps,
        })
        .collect();
    out.csv("results.csv", &rows)?;
    let checks = check_coupling_bounds(&traces, &params, 1.0);
    let zeta_bound = zeta_energy_bound(1.0, cfg.t_end, theta, params.r, params.eta);
    let mut reports = vec![checks.zeta_energy.clone(), checks.coupled.clone(), checks.eps_slope.clone()];
    let girsanov = if traces.len() >= crate::dynamics::MIN_GIRSANOV_TRACES {
        let g = girsanov_weight_stats(&traces, Some(zeta_bound.exp()))?;
        let mut r1 = CheckReport::new("girsanov.mean_r", 0.0);
        r1.record(if g.r_consistent { 0.0 } else { -1.0 });
        let mut r2 = CheckReport::new("girsanov.mean_r2", 0.0);
        r2.record(if g.r2_consistent { 0.0 } else { -1.0 });
        reports.push(r1);
        reports.push(r2);
        Some(g)
    } else {
        None
    };
    out.checks(&reports)?;
    out.json(
        "summary.json",
        &serde_json::json!({
            "params": params,
            "eps": traces.first().map(|t| t.eps),
            "beta": traces.first().map(|t| t.beta),
            "zeta_energy_bound": zeta_bound,
            "coupled_runs": traces.iter().filter(|t| t.coupled()).count(),
            "runs": traces.len(),
            "girsanov": girsanov,
        }),
    )?;
    print_checks(&reports);
    Ok(status(&reports))
}

#[derive(Debug, Serialize)]
struct CurveRow {
    t: f64,
    mean: f64,
    se: f64,
}

fn cmd_ergodic(cfg: &ExperimentConfig, out: &Output) -> Result<i32> {
    let mut sim = cfg.sim_config();
    sim.save_every = (sim.steps() / 200).max(1);
    if cfg.model == ModelKind::Fastdiff {
        let x0 = SpectralField::mode(cfg.l, cfg.n_modes, 1, 10.0 * PI / cfg.l);
        let curve = lyapunov_curve(&cfg.fastdiff(), &sim, &x0, cfg.paths, 0)?;
        let rows: Vec<CurveRow> = (0..curve.times.len())
            .map(|i| CurveRow {
                t: curve.times[i],
                mean: curve.means[i],
                se: curve.ses[i],
            })
            .collect();
        out.csv("results.csv", &rows)?;
        let mut rep = CheckReport::new("lyapunov.bound_3se", 0.0);
        rep.record(3.0 - curve.worst_excess);
        let mut pos = CheckReport::new("lyapunov.positive_fit", 0.0);
        pos.record(curve.beta.min(curve.c));
        let reports = vec![rep, pos];
        out.checks(&reports)?;
        out.json("summary.json", &serde_json::json!({ "v0": curve.v0, "k": curve.k, "beta": curve.beta, "c": curve.c, "worst_excess": curve.worst_excess }))?;
        print_checks(&reports);
        return Ok(status(&reports));
    }

    let eq = cfg.equation()?;
    let f = TestFunctional::ModeH { k: 1 };
    let (prior, expected) = match cfg.model {
        ModelKind::Linear => (eigenvalue(1, cfg.l)?, eigenvalue(1, cfg.l)?),
        ModelKind::Porous => {
            let lam = porous_medium_rates(&cfg.porous())?.report.lambda;
            (lam, lam)
        }
        _ => {
            let lam = p_laplace_rates(&cfg.plaplace())?.report.lambda;
            (lam, lam)
        }
    };
    let mut inv_cfg = sim.clone();
    inv_cfg.seed = cfg.seed.wrapping_add(1);
    let zero = SpectralField::zeros(cfg.l, cfg.n_modes);
    let plan = InvariantPlan {
        burn_in: 5.0 / prior,
        n_samples: cfg.paths.max(200),
        thinning: (1.0 / prior).max(sim.dt),
        chains: 20,
        prior_rate: Some(prior),
    };
    let inv = sample_invariant(&zero, &eq, &inv_cfg, &plan, 0)?;
    let mu = inv.estimate(&f);
    let x0 = SpectralField::mode(cfg.l, cfg.n_modes, 1, 5.0);
    let est = estimate_decay(&f, &x0, &eq, &sim, cfg.paths, mu, 0)?;
    let c = &est.curve;
    let rows: Vec<CurveRow> = (0..c.times.len())
        .map(|i| CurveRow {
            t: c.times[i],
            mean: c.means[i],
            se: c.ses[i],
        })
        .collect();
    out.csv("results.csv", &rows)?;
    let mut rep = CheckReport::new(
        if cfg.model == ModelKind::Linear {
            "decay.within_15pct_of_lambda1"
        } else {
            "decay.at_least_0.9_lambda"
        },
        0.0,
    );
    if cfg.model == ModelKind::Linear {
        rep.record(margin(0.15, (est.fitted_rate / expected - 1.0).abs()));
    } else {
        rep.record(margin(est.fitted_rate, 0.9 * expected));
    }
    let reports = vec![rep];
    out.checks(&reports)?;
    let ou = if cfg.model == ModelKind::Linear {
        Some(ou_exact(cfg.l, cfg.sigma, 1, f64::INFINITY, 0.0)?.1)
    } else {
        None
    };
    out.json(
        "summary.json",
        &serde_json::json!({
            "mu_hat": mu,
            "norm_h_sq": inv.norm_h_sq,
            "fitted_rate": est.fitted_rate,
            "rate_se": est.rate_se,
            "window": est.window,
            "reference_rate": expected,
            "ou_stationary_variance_mode1": ou,
        }),
    )?;
    println!("fitted rate {:.4} ± {:.4} (reference {:.4})", est.fitted_rate, est.rate_se, expected);
    print_checks(&reports);
    Ok(status(&reports))
}

fn cmd_verify(cfg: &ExperimentConfig, out: &Output) -> Result<i32> {
    let suite = match cfg.suite {
        SuiteArg::Default => Suite::Default,
        SuiteArg::LooseConstants => Suite::LooseConstants,
    };
    let reports = run_suite(suite, cfg.seed)?;
    out.checks(&reports)?;
    out.quantities(&reports.iter().map(|r| (r.name.as_str(), r.worst_margin)).collect::<Vec<_>>())?;
    out.json("summary.json", &reports)?;
    print_checks(&reports);
    Ok(status(&reports))
}

/// Read a results table back, for tests and scripts.
pub fn read_results(dir: &Path) -> Result<String> {
    Ok(fs::read_to_string(dir.join("results.csv"))?)
}
