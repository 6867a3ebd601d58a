//! Command-line runner for structured filtering trials.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 for runtime
//! failures. Outputs written before a runtime failure are left in place.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use structfilt::harness::output::{read_snapshot, write_ensemble, write_steps, write_sweep, write_trial};
use structfilt::harness::{
    run_ensemble, run_sweep, run_trial, summarize, DesignRule, LossScope, ModelConfig, SweepParameter, TrialConfig,
    TruthSource,
};
use structfilt::HedgeForm;

#[derive(Parser)]
#[command(name = "structfilt", version, about = "Structured particle filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its per-step table and tree artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        /// Trial index; selects the random stream within the seed.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run independent trials and write per-trial and aggregate losses.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Run one ensemble per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// k_champ, pgh_constant or w_floor.
        #[arg(long)]
        parameter: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Convert a tree snapshot (JSON) to Graphviz DOT.
    ExportTree {
        snapshot: PathBuf,
        /// Output file; standard output when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Rge,
    Cfpe,
    Rabi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Rabi,
    Rge,
    Cfpe,
}

#[derive(Clone, Copy, ValueEnum)]
enum HedgeArg {
    Uniform,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    ModelAveraged,
    Champion,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Pgh,
    Geometric,
}

#[derive(Args)]
struct Common {
    /// JSON file mirroring the trial configuration; missing fields take the
    /// rge preset's values.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Base configuration when no file is given.
    #[arg(long, value_enum, default_value = "rge")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    n_levels: Option<usize>,
    #[arg(long)]
    n_meas: Option<usize>,
    #[arg(long)]
    hedge: Option<f64>,
    #[arg(long, value_enum)]
    hedge_form: Option<HedgeArg>,
    #[arg(long, value_delimiter = ',')]
    populations: Option<Vec<f64>>,
    /// Explicit true parameters; otherwise drawn per trial.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    truth: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "truth")]
    truth_from_prior: bool,

    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_clusters: Option<Vec<usize>>,
    #[arg(long)]
    n_part: Option<usize>,
    #[arg(long)]
    n_min_part: Option<usize>,
    #[arg(long)]
    resample_threshold: Option<f64>,
    /// Liu-West shrinkage `a`.
    #[arg(long)]
    lw_a: Option<f64>,
    #[arg(long)]
    kmeans_max_iters: Option<usize>,
    #[arg(long)]
    kmeans_restarts: Option<usize>,

    #[arg(long)]
    prune: Option<bool>,
    #[arg(long)]
    mixture_floor: Option<f64>,
    #[arg(long)]
    decision_floor: Option<f64>,
    #[arg(long)]
    k_champ: Option<f64>,
    #[arg(long)]
    region_champions: Option<usize>,

    #[arg(long, value_enum)]
    design: Option<DesignArg>,
    /// Ratio of the geometric schedule `t_k = ratio^k`.
    #[arg(long)]
    geometric_ratio: Option<f64>,
    #[arg(long)]
    pgh_constant: Option<f64>,
    #[arg(long)]
    pgh_exponent: Option<u32>,
    #[arg(long)]
    t_max: Option<f64>,

    #[arg(long)]
    n_experiments: Option<usize>,
    /// Plain Liu-West on a single filter that never splits.
    #[arg(long)]
    baseline: bool,
    #[arg(long, value_enum)]
    loss_scope: Option<ScopeArg>,
    #[arg(long)]
    region_alpha: Option<f64>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

/// A configuration problem (exit 1) as opposed to a runtime failure (exit 2).
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl Common {
    fn resolve(&self) -> Result<TrialConfig, ConfigError> {
        self.build().map_err(ConfigError)
    }

    fn build(&self) -> anyhow::Result<TrialConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => match self.preset {
                Preset::Rge => TrialConfig::rge_desk(),
                Preset::Cfpe => TrialConfig::cfpe_desk(),
                Preset::Rabi => TrialConfig::rabi_desk(),
            },
        };
        self.apply_model(&mut cfg)?;

        if let Some(v) = &self.truth {
            cfg.truth = TruthSource::Explicit { values: v.clone() };
        }
        if self.truth_from_prior {
            cfg.truth = TruthSource::Prior;
        }
        let tree = &mut cfg.tree;
        set(&mut tree.d_max, self.d_max);
        set(&mut tree.n_cluster_set, self.n_clusters.clone());
        set(&mut tree.n_part, self.n_part);
        set(&mut tree.n_min_part, self.n_min_part);
        set(&mut tree.resample_threshold, self.resample_threshold);
        set(&mut tree.liu_west.a, self.lw_a);
        set(&mut tree.kmeans_max_iters, self.kmeans_max_iters);
        set(&mut tree.kmeans_restarts, self.kmeans_restarts);

        let ctx = &mut cfg.root_context;
        ctx.prune = self.prune.or(ctx.prune);
        ctx.mixture_floor = self.mixture_floor.or(ctx.mixture_floor);
        ctx.decision_floor = self.decision_floor.or(ctx.decision_floor);
        ctx.champion_threshold = self.k_champ.or(ctx.champion_threshold);
        ctx.region_champions = self.region_champions.or(ctx.region_champions);

        match (self.design, self.geometric_ratio) {
            (Some(DesignArg::Pgh), None) => cfg.design = DesignRule::Pgh,
            (Some(DesignArg::Pgh), Some(_)) => bail!("--geometric-ratio needs --design geometric"),
            (Some(DesignArg::Geometric), r) => {
                cfg.design = DesignRule::Geometric {
                    ratio: r.unwrap_or(9.0 / 8.0),
                }
            }
            (None, Some(ratio)) => match &mut cfg.design {
                DesignRule::Geometric { ratio: r } => *r = ratio,
                DesignRule::Pgh => bail!("--geometric-ratio needs --design geometric"),
            },
            (None, None) => {}
        }
        set(&mut cfg.pgh.constant, self.pgh_constant);
        set(&mut cfg.pgh.exponent, self.pgh_exponent);
        set(&mut cfg.pgh.t_max, self.t_max);

        set(&mut cfg.n_experiments, self.n_experiments);
        set(&mut cfg.seed, self.seed);
        cfg.baseline |= self.baseline;
        if let Some(s) = self.loss_scope {
            cfg.loss_scope = match s {
                ScopeArg::ModelAveraged => LossScope::ModelAveraged,
                ScopeArg::Champion => LossScope::Champion,
            };
        }
        set(&mut cfg.region_alpha, self.region_alpha);
        if self.snapshot_every.is_some() {
            cfg.snapshot_every = self.snapshot_every;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_model(&self, cfg: &mut TrialConfig) -> anyhow::Result<()> {
        if let Some(kind) = self.model {
            let current = match cfg.model {
                ModelConfig::Rabi => ModelKind::Rabi,
                ModelConfig::Rge { .. } => ModelKind::Rge,
                ModelConfig::Cfpe { .. } => ModelKind::Cfpe,
            };
            if kind != current {
                cfg.model = match kind {
                    ModelKind::Rabi => ModelConfig::Rabi,
                    ModelKind::Rge => TrialConfig::rge_desk().model,
                    ModelKind::Cfpe => TrialConfig::cfpe_desk().model,
                };
            }
        }
        match &mut cfg.model {
            ModelConfig::Rge { n_levels, n_meas } => {
                set(n_levels, self.n_levels);
                set(n_meas, self.n_meas);
                if self.hedge.is_some() || self.hedge_form.is_some() || self.populations.is_some() {
                    bail!("--hedge, --hedge-form and --populations apply to the cfpe model only");
                }
            }
            ModelConfig::Cfpe {
                hedge,
                hedge_form,
                populations,
            } => {
                set(hedge, self.hedge);
                set(populations, self.populations.clone());
                if let Some(f) = self.hedge_form {
                    *hedge_form = match f {
                        HedgeArg::Uniform => HedgeForm::Uniform,
                        HedgeArg::Literal => HedgeForm::Literal,
                    };
                }
                if self.n_levels.is_some() || self.n_meas.is_some() {
                    bail!("--n-levels and --n-meas apply to the rge model only");
                }
            }
            ModelConfig::Rabi => {
                if self.n_levels.is_some()
                    || self.n_meas.is_some()
                    || self.hedge.is_some()
                    || self.hedge_form.is_some()
                    || self.populations.is_some()
                {
                    bail!("the rabi model takes no model flags");
                }
            }
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn save_config(dir: &Path, cfg: &TrialConfig) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

enum Outcome {
    Done,
    Failed,
}

fn execute(command: Command) -> Result<Outcome, ConfigError> {
    let runtime = |r: anyhow::Result<Outcome>| {
        r.or_else(|e| {
            eprintln!("error: {e:#}");
            Ok(Outcome::Failed)
        })
    };
    match command {
        Command::Run { common, trial } => {
            let cfg = common.resolve()?;
            let dir = common.out_dir;
            runtime((|| {
                save_config(&dir, &cfg)?;
                match run_trial(&cfg, trial) {
                    Ok(rec) => {
                        write_trial(&dir, &rec)?;
                        println!(
                            "trial {trial}: {} experiments, final loss {:.6e}, {} leaves",
                            rec.rows.len(),
                            rec.final_loss(),
                            rec.tree.n_leaves()
                        );
                        Ok(Outcome::Done)
                    }
                    Err(err) => {
                        write_steps(&dir, &err.rows)?;
                        eprintln!("error: {err}");
                        Ok(Outcome::Failed)
                    }
                }
            })())
        }
        Command::Ensemble { common, trials } => {
            let cfg = common.resolve()?;
            if trials == 0 {
                return Err(ConfigError(anyhow::anyhow!("--trials must be at least 1")));
            }
            let dir = common.out_dir;
            runtime((|| {
                save_config(&dir, &cfg)?;
                let res = run_ensemble(&cfg, trials, common.jobs)?;
                write_ensemble(&dir, &res)?;
                if let Some(last) = res.final_aggregate() {
                    println!(
                        "{trials} trials: final mean loss {:.6e}, median {:.6e}, {} failed",
                        last.mean_loss,
                        last.median_loss,
                        res.n_failed()
                    );
                }
                for f in res.failures() {
                    eprintln!("error: {f}");
                }
                Ok(if res.n_failed() == 0 {
                    Outcome::Done
                } else {
                    Outcome::Failed
                })
            })())
        }
        Command::Sweep {
            common,
            trials,
            parameter,
            values,
        } => {
            let cfg = common.resolve()?;
            let param: SweepParameter = parameter.parse().map_err(|e| ConfigError(anyhow::Error::new(e)))?;
            if trials == 0 {
                return Err(ConfigError(anyhow::anyhow!("--trials must be at least 1")));
            }
            for &v in &values {
                let mut probe = cfg.clone();
                param.apply(&mut probe, v);
                probe.validate().map_err(|e| ConfigError(e.into()))?;
            }
            let dir = common.out_dir;
            runtime((|| {
                save_config(&dir, &cfg)?;
                let points = run_sweep(&cfg, param, &values, trials, common.jobs)?;
                let summary = summarize(param, &points);
                write_sweep(&dir, param, &points, &summary)?;
                for row in &summary {
                    println!(
                        "{}={}: final mean loss {:.6e}, median {:.6e}, {} failed",
                        row.parameter, row.value, row.final_mean_loss, row.final_median_loss, row.failed_trials
                    );
                }
                let failed: usize = summary.iter().map(|r| r.failed_trials).sum();
                Ok(if failed == 0 { Outcome::Done } else { Outcome::Failed })
            })())
        }
        Command::ExportTree { snapshot, output } => {
            let snap = read_snapshot(&snapshot)
                .with_context(|| format!("reading {}", snapshot.display()))
                .map_err(ConfigError)?;
            let dot = snap.to_dot();
            runtime((|| {
                match output {
                    Some(path) => {
                        fs::write(&path, dot)?;
                        info!("wrote {}", path.display());
                    }
                    None => print!("{dot}"),
                }
                Ok(Outcome::Done)
            })())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(ConfigError(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(1)
        }
    }
}
