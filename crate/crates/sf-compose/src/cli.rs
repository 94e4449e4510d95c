//! The `sfc` command line: `train | eval | oracle | plot`.
//!
//! Flags mirror config keys and win over the file; the `SF_COMPOSE_RUNDIR`
//! environment variable overrides the output root between the two. Exit
//! codes: 0 success, 1 runtime failure (including violated oracle bounds),
//! 2 configuration/usage errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::agent::{EvalDumps, TrainedAgent};
use crate::config::{self, ConfigFile};
use crate::envs::{MixtureTaskSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::{KappaWriter, MetricsRow, TrajectoryWriter};
use crate::oracle;

pub const RUNDIR_ENV: &str = "SF_COMPOSE_RUNDIR";

#[derive(Parser, Debug)]
#[command(
    name = "sfc",
    about = "Train successor-feature primitives and compose them online for new tasks",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Train an agent and write metrics + checkpoints into a run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a task.
    Eval(EvalArgs),
    /// Verify the value-composition bounds on the exact tabular testbed.
    Oracle(OracleArgs),
    /// Render SVG plots from run directories and diagnostic CSVs.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// TOML config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// sac|sfgpi|msf|dac|dacgpi (mirrors run.method).
    #[arg(long)]
    pub method: Option<String>,
    /// pointmass2d|pointmass3d|pointer (mirrors env.kind).
    #[arg(long)]
    pub env: Option<String>,
    /// regular|simple|augment (mirrors env.feature_set).
    #[arg(long)]
    pub feature_set: Option<String>,
    /// Total environment transitions (mirrors run.steps).
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run several seeds sequentially, e.g. --seeds 1,2,3.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Training task weights, e.g. --w-train 1,1,0,1 (mirrors agent.w_train).
    #[arg(long)]
    pub w_train: Option<String>,
    /// train|mixture|fixed (mirrors agent.eval_task).
    #[arg(long)]
    pub eval_task: Option<String>,
    /// Output root; beats SF_COMPOSE_RUNDIR and run.out_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Arbitrary config override, repeatable: --set section.key=value.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub sets: Vec<String>,
    /// Print the commented config reference with every default and exit.
    #[arg(long)]
    pub print_defaults: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint archive to evaluate.
    pub checkpoint: PathBuf,
    /// Config describing the agent; defaults to config.toml next to the
    /// checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Evaluate on the environment's default mixture task.
    #[arg(long)]
    pub mixture: bool,
    /// Evaluate on fixed weights, e.g. --w 1,1,0,10.
    #[arg(long)]
    pub w: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the acting rule stored in the config.
    #[arg(long)]
    pub method: Option<String>,
    /// Write a per-step trajectory CSV.
    #[arg(long)]
    pub dump_trajectory: Option<PathBuf>,
    /// Write a per-step kappa diagnostics CSV (dac/dacgpi).
    #[arg(long)]
    pub dump_kappa: Option<PathBuf>,
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gridworld side length (mirrors oracle.grid).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Transfer task, e.g. --w 0.5,0.5 (mirrors oracle.w).
    #[arg(long)]
    pub w: Option<String>,
    /// Temperatures to check; repeatable (mirrors oracle.alphas).
    #[arg(long)]
    pub alpha: Vec<f64>,
    /// Write per-alpha report CSVs next to this stem.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Run directories (containing metrics.csv) or diagnostic CSV files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory for the SVGs.
    #[arg(long, default_value = "plots")]
    pub out: PathBuf,
}

/// Entry point used by the `sfc` binary.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point; parses the given argv.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Oracle(args) => cmd_oracle(args),
        Cmd::Plot(args) => cmd_plot(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse_weights(s: &str) -> Result<Vec<f32>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f32>()
                .map_err(|_| Error::config(format!("bad weight '{tok}' in '{s}'")))
        })
        .collect()
}

fn parse_weights_f64(s: &str) -> Result<Vec<f64>> {
    Ok(parse_weights(s)?.into_iter().map(|v| v as f64).collect())
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn apply_sets(cfg: &mut ConfigFile, sets: &[String]) -> Result<()> {
    for pair in sets {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set '{pair}' must look like key=value")))?;
        cfg.apply_override(key.trim(), value.trim())?;
    }
    Ok(())
}

fn out_root(flag: Option<&Path>, cfg: &ConfigFile) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(dir) = std::env::var(RUNDIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(&cfg.run.out_dir)
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    if args.print_defaults {
        print!("{}", config::reference());
        return Ok(0);
    }
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(v) = &args.method {
        cfg.apply_override("run.method", v)?;
    }
    if let Some(v) = &args.env {
        cfg.apply_override("env.kind", v)?;
    }
    if let Some(v) = &args.feature_set {
        cfg.apply_override("env.feature_set", v)?;
    }
    if let Some(v) = args.steps {
        cfg.run.steps = v;
    }
    if let Some(v) = args.seed {
        cfg.run.seed = v;
    }
    if let Some(v) = &args.w_train {
        cfg.agent.w_train = Some(parse_weights(v)?);
    }
    if let Some(v) = &args.eval_task {
        cfg.agent.eval_task = v.clone();
    }
    apply_sets(&mut cfg, &args.sets)?;

    let root = out_root(args.out.as_deref(), &cfg);
    let seeds = args.seeds.clone().unwrap_or_else(|| vec![cfg.run.seed]);
    for seed in seeds {
        cfg.run.seed = seed;
        let run_cfg = cfg.resolve_run()?;
        let out = crate::agent::train(&run_cfg, Some(&root))?;
        let dir = out.run_dir.expect("run dir exists when out_root given");
        cfg.save(&dir.join("config.toml"))?;
        println!(
            "run dir: {} ({} metrics rows)",
            dir.display(),
            out.rows.len()
        );
    }
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<i32> {
    let config_path = match &args.config {
        Some(p) => p.clone(),
        None => args
            .checkpoint
            .parent()
            .map(|d| d.join("config.toml"))
            .filter(|p| p.exists())
            .ok_or_else(|| {
                Error::config("no --config given and no config.toml next to the checkpoint")
            })?,
    };
    let mut cfg = ConfigFile::load(&config_path)?;
    if let Some(v) = &args.method {
        cfg.apply_override("run.method", v)?;
    }
    apply_sets(&mut cfg, &args.sets)?;
    let run_cfg = cfg.resolve_run()?;

    let mut agent = TrainedAgent::init(&run_cfg)?;
    agent.load_checkpoint(&args.checkpoint)?;

    let task = if args.mixture {
        TaskSpec::Mixture(MixtureTaskSpec::defaults(run_cfg.env.feature_spec()?)?)
    } else if let Some(w) = &args.w {
        let w = parse_weights(w)?;
        let d = run_cfg.env.feature_spec()?.dim();
        if w.len() != d {
            return Err(Error::config(format!(
                "--w has {} entries but the feature set has {d}",
                w.len()
            )));
        }
        TaskSpec::Fixed(w)
    } else {
        run_cfg.eval_task.clone()
    };

    let episodes = args.episodes.unwrap_or(run_cfg.eval_episodes);
    let seed = args.seed.unwrap_or(run_cfg.seed);
    let mut traj_writer = match &args.dump_trajectory {
        Some(p) => Some(TrajectoryWriter::create(p)?),
        None => None,
    };
    let mut kappa_writer = match &args.dump_kappa {
        Some(p) => Some(KappaWriter::create(p)?),
        None => None,
    };
    let metrics = agent.evaluate(
        &task,
        episodes,
        seed,
        EvalDumps {
            trajectory: traj_writer.as_mut(),
            kappa: kappa_writer.as_mut(),
        },
    )?;

    let row = MetricsRow {
        step: run_cfg.total_steps,
        wall_ms: 0,
        method: run_cfg.method,
        train_return: 0.0,
        eval_return: metrics.mean_return,
        eval_final_dist: metrics.mean_final_distance,
        eval_success: metrics.success_rate,
        sf_loss_mean: 0.0,
        pi_obj_mean: 0.0,
        alpha: run_cfg.hp.alpha,
    };
    println!("{}", MetricsRow::HEADER);
    println!("{}", row.to_csv());
    if let Some(dir) = args.checkpoint.parent() {
        let eval_csv = dir.join("eval.csv");
        let mut text = if eval_csv.exists() {
            std::fs::read_to_string(&eval_csv)?
        } else {
            format!("{}\n", MetricsRow::HEADER)
        };
        text.push_str(&row.to_csv());
        text.push('\n');
        std::fs::write(&eval_csv, text)?;
    }
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<i32> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(v) = args.grid {
        cfg.oracle.grid = v;
    }
    if let Some(v) = &args.w {
        cfg.oracle.w = parse_weights_f64(v)?;
    }
    if !args.alpha.is_empty() {
        cfg.oracle.alphas = args.alpha.clone();
    }
    apply_sets(&mut cfg, &args.sets)?;

    let goals = cfg.oracle_goals();
    if cfg.oracle.w.len() != goals.len() {
        return Err(Error::config(format!(
            "oracle.w has {} entries but there are {} goals",
            cfg.oracle.w.len(),
            goals.len()
        )));
    }
    let mdp = oracle::gridworld(cfg.oracle.grid, &goals, cfg.oracle.gamma);
    mdp.validate()?;
    let base = oracle::identity_base_tasks(goals.len());

    let mut all_ok = true;
    for alpha in &cfg.oracle.alphas {
        let report = oracle::composition_bounds_check(&mdp, &base, &cfg.oracle.w, *alpha)?;
        print!("{}", report.summary());
        if let Some(stem) = &args.csv {
            let path = stem.with_file_name(format!(
                "{}_alpha{}.csv",
                stem.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "oracle".into()),
                alpha
            ));
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, report.to_csv())?;
            println!("  csv: {}", path.display());
        }
        all_ok &= report.hard_ok();
    }
    Ok(if all_ok { 0 } else { 1 })
}

fn cmd_plot(args: PlotArgs) -> Result<i32> {
    let mut run_dirs = Vec::new();
    let mut written = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            run_dirs.push(input.clone());
            continue;
        }
        let name = input
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        std::fs::create_dir_all(&args.out)?;
        if name.contains("kappa") {
            let (rows, act_dim, n_prims) = crate::plot::read_kappa_csv(input)?;
            let svg = crate::plot::render_kappa_heatmap(&rows, act_dim, n_prims, 20.0, 20);
            let path = args.out.join(format!("{name}.svg"));
            std::fs::write(&path, svg)?;
            written.push(path);
        } else {
            let paths = crate::plot::read_trajectory_csv(input)?;
            let svg = crate::plot::render_trajectories(&paths, 20.0);
            let path = args.out.join(format!("{name}.svg"));
            std::fs::write(&path, svg)?;
            written.push(path);
        }
    }
    if !run_dirs.is_empty() {
        written.extend(crate::plot::plot_run_dirs(&run_dirs, &args.out)?);
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(0)
}
