use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polydec_core::ddp::{build_bundles, NnPolicy};
use polydec_core::gps::{eval_composed_into, solve_decomposition};
use polydec_core::lqr::LqrAnalysis;
use polydec_core::pipeline::{configure_threads, run_pipeline, Estimator, Prune, RunConfig};
use polydec_core::report::RankingReport;
use polydec_core::sim::{rollout, Policy, RolloutConfig};
use polydec_core::Decomposition;

#[derive(Parser)]
#[command(name = "polydec", version, about = "Policy decomposition for optimal control")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Benchmark id (cartpole, biped, manip2, manip3) or system definition file.
    #[arg(long, global = true)]
    system: Option<String>,
    /// Run configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    estimator: Option<Estimator>,
    /// none, pareto or top:<N>.
    #[arg(long, global = true)]
    prune: Option<Prune>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplies the number of grid intervals per axis.
    #[arg(long, global = true)]
    grid_scale: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Decomposition files to use instead of enumerating.
    #[arg(long = "decomposition", global = true)]
    decompositions: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List every pure decomposition as one JSON document per line.
    Enumerate,
    /// Compute estimates and write the report.
    Estimate,
    /// Estimate, then solve the surviving decompositions.
    Solve {
        /// Solve these ids instead of the pruning survivors.
        #[arg(long, value_delimiter = ',')]
        select: Option<Vec<usize>>,
    },
    /// Solve and measure the true value error against the undecomposed policy.
    Verify {
        #[arg(long, value_delimiter = ',')]
        select: Option<Vec<usize>>,
    },
    /// Recompute ranks of an existing report and print it.
    Rank {
        /// report.json, or the directory holding it (defaults to --out).
        report: Option<PathBuf>,
    },
    /// Roll out one decomposition's policy from a start state and print CSV.
    Simulate {
        #[arg(long, value_enum, default_value = "lqr")]
        policy: PolicyKind,
        /// Comma-separated start state; defaults to the first S_eval corner.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Lqr,
    Ddp,
    Gps,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.system {
            cfg.system = s.clone();
        }
        if let Some(e) = self.estimator {
            cfg.estimator = e;
        }
        if let Some(p) = self.prune {
            cfg.prune = p;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.grid_scale.is_some() {
            cfg.grid_scale = self.grid_scale;
        }
        if self.horizon.is_some() {
            cfg.horizon = self.horizon;
        }
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        if !self.decompositions.is_empty() {
            cfg.decompositions = Some(self.decompositions.clone());
        }
        Ok(cfg)
    }
}

fn finish(report: &RankingReport) -> ExitCode {
    print!("{}", report.to_table());
    if report.has_errors() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn enumerate(cfg: &RunConfig) -> Result<ExitCode> {
    cfg.validate()?;
    let sys = cfg.load_system()?;
    let decomps = cfg.load_decompositions(&sys)?;
    let mut text = String::new();
    for d in &decomps {
        text += &d.to_json();
        text.push('\n');
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        let path = dir.join("decompositions.jsonl");
        fs::write(&path, &text).with_context(|| path.display().to_string())?;
    }
    io::stdout().write_all(text.as_bytes())?;
    eprintln!("{}: {} decompositions", sys.name, decomps.len());
    Ok(ExitCode::SUCCESS)
}

fn rank(path: Option<PathBuf>, cfg: &RunConfig) -> Result<ExitCode> {
    let Some(mut path) = path.or_else(|| cfg.out.clone()) else {
        bail!("rank needs a report path or --out");
    };
    if path.is_dir() {
        path = path.join("report.json");
    }
    let text = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
    let mut report = RankingReport::from_json(&text).with_context(|| path.display().to_string())?;
    report.rerank();
    let dir = path.parent().map(PathBuf::from).unwrap_or_default();
    report.write(&dir)?;
    Ok(finish(&report))
}

fn simulate(cfg: &RunConfig, kind: PolicyKind, x0: Option<Vec<f64>>) -> Result<ExitCode> {
    cfg.validate()?;
    let sys = cfg.load_system()?;
    let d = match cfg.decompositions.as_deref() {
        None | Some([]) => Decomposition::undecomposed(&sys),
        Some([_]) => cfg.load_decompositions(&sys)?.remove(0),
        Some(_) => bail!("simulate takes at most one --decomposition"),
    };
    let x0 = x0.unwrap_or_else(|| sys.s_eval.corners().remove(0));
    if x0.len() != sys.n() {
        bail!("x0 has {} entries, the system has {} states", x0.len(), sys.n());
    }
    let rc = RolloutConfig::for_system(&sys);
    let run = |p: &dyn Policy| rollout(&sys, p, &x0, &rc);
    let r = match kind {
        PolicyKind::Lqr => {
            let est = LqrAnalysis::new(&sys)?.estimate(&sys, &d)?;
            let Some(gain) = est.gain else { bail!("a subsystem of this decomposition is not stabilizable") };
            run(&|x: &[f64], u: &mut [f64]| gain.control(&sys, x, u))?
        }
        PolicyKind::Ddp => {
            let bundles = build_bundles(&sys, &d, &cfg.ddp)?;
            run(&NnPolicy { sys: &sys, bundles: &bundles })?
        }
        PolicyKind::Gps => {
            let p = solve_decomposition(&sys, &d, &cfg.gps)?;
            run(&|x: &[f64], u: &mut [f64]| eval_composed_into(&sys, &p, x, u))?
        }
    };
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
            let path = dir.join("rollout.csv");
            r.write_csv(io::BufWriter::new(fs::File::create(&path).with_context(|| path.display().to_string())?))?;
        }
        None => r.write_csv(io::stdout().lock())?,
    }
    eprintln!("discounted cost {:.6e}", r.discounted_cost);
    if let Some(t) = r.terminated_early {
        eprintln!("terminated early: {t:?}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_threads();
    let cli = Cli::parse();
    let result = cli.common.run_config().and_then(|mut cfg| match cli.command {
        Command::Enumerate => enumerate(&cfg),
        Command::Estimate => Ok(finish(&run_pipeline(&cfg)?)),
        Command::Solve { select } => {
            cfg.solve = true;
            cfg.select = select.or(cfg.select);
            Ok(finish(&run_pipeline(&cfg)?))
        }
        Command::Verify { select } => {
            cfg.solve = true;
            cfg.verify = true;
            cfg.select = select.or(cfg.select);
            Ok(finish(&run_pipeline(&cfg)?))
        }
        Command::Rank { report } => rank(report, &cfg),
        Command::Simulate { policy, x0 } => simulate(&cfg, policy, x0),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
