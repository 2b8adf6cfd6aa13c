use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lrmem::harness::suites::{self, DYNAMICS_SAMPLES};
use lrmem::harness::{
    run_experiment, timing_probe, write_report, DataSource, ExperimentPlan, ExperimentReport,
    OptimizerKind, OptimizerSettings, TimingConfig, Transfer,
};
use lrmem::{LearningRateMemory, MemorySnapshot};

#[derive(Parser)]
#[command(name = "lrmem", version, about = "Benchmarks for an online memory of learning rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Consecutive Rosenbrock descents, each run reusing the previous memory
    Rosenbrock {
        #[command(flatten)]
        plan: PlanArgs,
        /// Number of consecutive runs
        #[arg(long, default_value_t = 2)]
        runs: usize,
    },
    /// Sequential binary digit tasks (1 vs 2, 1 vs 3, 1 vs 4)
    Classify {
        #[command(flatten)]
        plan: PlanArgs,
        /// IDX image file (optionally gzip); synthetic digits are used when absent
        #[arg(long, requires = "labels")]
        images: Option<PathBuf>,
        /// IDX label file matching --images
        #[arg(long, requires = "images")]
        labels: Option<PathBuf>,
        /// Compare GD with fresh and transferred memories at rates 0.1, 0.01 and 0.001
        #[arg(long)]
        sweep: bool,
    },
    /// Online regression over the synthetic payload-change stream
    Dynamics {
        #[command(flatten)]
        plan: PlanArgs,
        /// Samples per payload variant
        #[arg(long, default_value_t = DYNAMICS_SAMPLES)]
        samples: usize,
        /// Build the full rate x optimizer x variant x reload table against GD
        #[arg(long)]
        table: bool,
    },
    /// Print a snapshot's local models and its sampled rate landscape as CSV
    InspectMemory {
        /// Memory snapshot JSON
        snapshot: PathBuf,
        /// Number of evenly spaced gradient values across the clip range
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Time optimizer updates on the dynamics regressor
    Timing {
        /// Optimizer to compare against plain GD
        #[arg(long, default_value = "MetaGD")]
        variant: String,
        /// Local models per memory
        #[arg(long, default_value_t = 200)]
        m: usize,
        /// Timed steps
        #[arg(long, default_value_t = 300)]
        steps: usize,
        /// Hidden layer widths
        #[arg(long, value_delimiter = ',', default_value = "100,50,10")]
        hidden: Vec<usize>,
    },
}

/// Overrides applied on top of the built-in plan or the `--config` file.
#[derive(Args, Default)]
struct PlanArgs {
    /// TOML experiment plan used instead of the built-in one
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base rate for GD and Adam, initial memory rate for meta variants (optimizer.eta)
    #[arg(long)]
    eta: Option<f64>,
    /// Memory step size (optimizer.xi)
    #[arg(long)]
    xi: Option<f64>,
    /// Local models per memory (optimizer.memory_size)
    #[arg(long)]
    m: Option<usize>,
    /// Gradient clip bound and memory half-width (optimizer.clip)
    #[arg(long)]
    clip: Option<f64>,
    /// Width of each local model relative to the center spacing (optimizer.overlap)
    #[arg(long)]
    overlap: Option<f64>,
    /// Seed count N for seeds 0..N, or a comma-separated list (seeds)
    #[arg(long)]
    seeds: Option<String>,
    /// GD, MetaGD, MetaGDMemAdam, Adam or MetaAdam (optimizer.kind)
    #[arg(long)]
    variant: Option<String>,
    /// Directory for curve CSVs, summary.json and memory snapshots
    #[arg(long)]
    out: Option<PathBuf>,
    /// fresh or reload, for every task after the first (tasks.memory; dynamics also tasks.network)
    #[arg(long)]
    transfer: Option<String>,
}

impl PlanArgs {
    fn kind(&self) -> Result<OptimizerKind> {
        Ok(match &self.variant {
            Some(v) => v.parse()?,
            None => OptimizerKind::MetaGd,
        })
    }

    fn seeds(&self, default: usize) -> Result<Vec<u64>> {
        parse_seeds(self.seeds.as_deref().unwrap_or(&default.to_string()))
    }

    fn transfer(&self) -> Result<Option<Transfer>> {
        self.transfer.as_deref().map(str::parse).transpose().map_err(Into::into)
    }

    fn tune(&self, s: &mut OptimizerSettings) {
        if let Some(v) = self.eta {
            s.eta = v;
        }
        if let Some(v) = self.xi {
            s.xi = v;
        }
        if let Some(v) = self.m {
            s.memory_size = v;
        }
        if let Some(v) = self.clip {
            s.clip = v;
        }
        if let Some(v) = self.overlap {
            s.overlap = v;
        }
    }

    /// Loads `--config` or builds the default plan, then applies the flags.
    fn plan(
        &self,
        default_seeds: usize,
        network_follows_memory: bool,
        build: impl FnOnce(OptimizerKind, Vec<u64>) -> ExperimentPlan,
    ) -> Result<ExperimentPlan> {
        let mut plan = match &self.config {
            Some(path) => ExperimentPlan::load(path)?,
            None => build(self.kind()?, self.seeds(default_seeds)?),
        };
        if self.config.is_some() {
            if self.variant.is_some() {
                plan.optimizer.kind = self.kind()?;
            }
            if self.seeds.is_some() {
                plan.seeds = self.seeds(default_seeds)?;
            }
        }
        self.tune(&mut plan.optimizer);
        if let Some(t) = self.transfer()? {
            for task in plan.tasks.iter_mut().skip(1) {
                task.memory = t;
                if network_follows_memory {
                    task.network = t;
                }
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    fn reject_config(&self, mode: &str) -> Result<()> {
        if self.config.is_some() {
            bail!("--config cannot be combined with {mode}");
        }
        if self.transfer.is_some() {
            bail!("--transfer cannot be combined with {mode}, which runs both policies");
        }
        Ok(())
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if text.contains(',') {
        return text
            .split(',')
            .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`")))
            .collect();
    }
    let n: u64 = text
        .parse()
        .with_context(|| format!("--seeds expects a count or a comma-separated list, got `{text}`"))?;
    if n == 0 {
        bail!("--seeds count must be at least 1");
    }
    Ok((0..n).collect())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rosenbrock { plan, runs } => {
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let p = plan.plan(1, false, |kind, seeds| {
                let mut p = suites::rosenbrock_plan(suites::rosenbrock_settings(kind), runs);
                p.seeds = seeds;
                p
            })?;
            let report = run_experiment(&p)?;
            for &seed in &p.seeds {
                for (t, steps) in suites::threshold_steps(&report, seed).iter().enumerate() {
                    let steps = steps.map_or("never".to_string(), |s| s.to_string());
                    println!(
                        "seed {seed} {}: {steps} steps to loss < {}",
                        p.tasks[t].name, p.threshold
                    );
                }
            }
            finish(&report, plan.out.as_deref())
        }
        Command::Classify {
            plan,
            images,
            labels,
            sweep,
        } => {
            let data = match (images, labels) {
                (Some(images), Some(labels)) => DataSource::Idx { images, labels },
                _ => DataSource::default(),
            };
            if sweep {
                plan.reject_config("--sweep")?;
                let rates = plan.eta.map_or(suites::CLASSIFICATION_RATES.to_vec(), |e| vec![e]);
                let entries = suites::classification_sweep(
                    plan.kind()?,
                    &rates,
                    &plan.seeds(3)?,
                    &data,
                    |kind, eta| {
                        let mut s = suites::classification_settings(kind, eta);
                        plan.tune(&mut s);
                        s.eta = eta;
                        s
                    },
                )?;
                println!("eta,optimizer,transfer,median_later_tasks,mean_later_capped,task_medians");
                for e in &entries {
                    let medians: Vec<String> = e.task_medians.iter().map(f64::to_string).collect();
                    println!(
                        "{},{},{:?},{},{},{}",
                        e.eta,
                        e.optimizer,
                        e.transfer,
                        e.later_median,
                        e.later_mean_capped,
                        medians.join(" ")
                    );
                }
                return Ok(());
            }
            let p = plan.plan(3, false, |kind, seeds| {
                suites::classification_plan(
                    suites::classification_settings(kind, 0.01),
                    Transfer::Reload,
                    seeds,
                    data,
                )
            })?;
            let report = run_experiment(&p)?;
            finish(&report, plan.out.as_deref())
        }
        Command::Dynamics {
            plan,
            samples,
            table,
        } => {
            if table {
                plan.reject_config("--table")?;
                let rates = plan.eta.map_or(suites::DYNAMICS_RATES.to_vec(), |e| vec![e]);
                let meta = plan.kind()?;
                let kinds: Vec<OptimizerKind> = if meta == OptimizerKind::Gd {
                    vec![meta]
                } else {
                    vec![OptimizerKind::Gd, meta]
                };
                let t = suites::dynamics_table(&rates, &kinds, &plan.seeds(10)?, samples, |kind, eta| {
                    let mut s = suites::dynamics_settings(kind, eta);
                    plan.tune(&mut s);
                    s.eta = eta;
                    s
                })?;
                print!("{}", t.to_csv()?);
                if let Some(dir) = &plan.out {
                    std::fs::create_dir_all(dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                    let path = dir.join("table.csv");
                    t.write_csv(&path)?;
                    println!("wrote {}", path.display());
                }
                return Ok(());
            }
            let p = plan.plan(10, true, |kind, seeds| {
                suites::dynamics_plan(suites::dynamics_settings(kind, 0.001), true, seeds, samples)
            })?;
            let report = run_experiment(&p)?;
            finish(&report, plan.out.as_deref())
        }
        Command::InspectMemory { snapshot, grid } => inspect(&snapshot, grid),
        Command::Timing {
            variant,
            m,
            steps,
            hidden,
        } => {
            let kind: OptimizerKind = variant.parse()?;
            let kinds = if kind == OptimizerKind::Gd {
                vec![kind]
            } else {
                vec![OptimizerKind::Gd, kind]
            };
            println!("optimizer,memory_size,parameters,steps,median_ms,p95_ms,mean_ms");
            for kind in kinds {
                let stats = timing_probe(&TimingConfig {
                    kind,
                    hidden: hidden.clone(),
                    memory_size: m,
                    steps,
                    ..TimingConfig::default()
                })?;
                println!(
                    "{},{},{},{},{:.4},{:.4},{:.4}",
                    kind.label(),
                    stats.memory_size,
                    stats.parameter_count,
                    stats.steps,
                    stats.median_ms,
                    stats.p95_ms,
                    stats.mean_ms
                );
            }
            println!("reference median: 3 ms per step");
            Ok(())
        }
    }
}

fn finish(report: &ExperimentReport, out: Option<&Path>) -> Result<()> {
    let summary = report.summary();
    println!("task,runs,diverged,converged,median_iterations_capped,mean_loss_prefix");
    for a in &summary.aggregates {
        println!(
            "{},{},{},{},{},{}",
            a.task_name,
            a.runs,
            a.diverged_runs,
            a.converged_runs,
            a.median_iterations_capped,
            a.mean_loss_prefix.map_or("nan".into(), |v| v.to_string())
        );
    }
    if let Some(dir) = out {
        let files = write_report(report, dir)?;
        println!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(())
}

fn inspect(path: &Path, grid: usize) -> Result<()> {
    if grid < 2 {
        bail!("--grid must be at least 2");
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let snap = MemorySnapshot::from_json(&text).with_context(|| path.display().to_string())?;
    let memory =
        LearningRateMemory::restore(&snap).with_context(|| path.display().to_string())?;
    println!("model,center,width,rate");
    for (i, m) in memory.models().enumerate() {
        println!("{i},{},{},{}", m.center, m.width, m.rate);
    }
    println!();
    println!("z,rate");
    let g = memory.clip_bound();
    for i in 0..grid {
        let z = -g + 2.0 * g * i as f64 / (grid - 1) as f64;
        println!("{z},{}", memory.predict_rate(z));
    }
    Ok(())
}
