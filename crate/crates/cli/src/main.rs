use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cmgrj::benchgen::{
    generate_to_dir, generate_workload, load_workload, write_workload, GenConfig, ScaleFactor, TableProfile,
    Workload, WorkloadConfig,
};
use cmgrj::cmlero::{ModelKind, ModelWeights};
use cmgrj::datamodel::{load_dataset, Dataset};
use cmgrj::engines::CostMode;
use cmgrj::harness::{
    collect, evaluate, prepare, study_pruning, study_training_size, train_cmlero, train_rlm, HarnessConfig,
    LatencyLog, Optimizer, PreparedQuery,
};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "cmgrj", version, about = "Cross-model graph-relation join optimizer harness")]
struct Cli {
    /// TOML file with `[workload]` and `[harness]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Tiny,
    Ldbc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Cmlero,
    Rlm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Measured,
    Synthetic,
}

#[derive(clap::Args)]
struct Inputs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Workload directory.
    #[arg(long)]
    workload: PathBuf,
}

#[derive(clap::Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a semi-synthetic dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "tiny")]
        preset: Preset,
        /// Scale factor of the ldbc preset: 1 or 10.
        #[arg(long, default_value_t = 1)]
        sf: u32,
        /// Table profile of the ldbc preset: 1 or 2.
        #[arg(long, default_value_t = 1)]
        profile: u32,
        /// Divide every node, edge and row count of the ldbc preset.
        #[arg(long, default_value_t = 1.0)]
        divisor: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Full generator config as TOML, overriding the preset.
        #[arg(long)]
        gen_config: Option<PathBuf>,
    },
    /// Generate a query workload with a train/test split.
    Workload {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time every candidate plan of every workload query.
    Collect {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        rtt: Option<f64>,
    },
    /// Fit a learned optimizer on the training split.
    Train {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum, default_value = "cmlero")]
        model: Model,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hyper: TrainFlags,
    },
    /// Pick a plan for one query file.
    Select {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        weights: PathBuf,
    },
    /// Score every optimizer on the test split.
    Eval {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        cmlero: PathBuf,
        #[arg(long)]
        rlm: PathBuf,
        /// Also write the metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Retrain both learned optimizers on growing training subsets.
    StudySize {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare retained plans with their pruned vertex-movement variants.
    StudyPruning {
        #[command(flatten)]
        inputs: Inputs,
    },
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    workload: WorkloadConfig,
    harness: HarnessConfig,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_inputs(inputs: &Inputs) -> Result<(Dataset, Workload)> {
    let ds = load_dataset(&inputs.data).with_context(|| format!("loading {}", inputs.data.display()))?;
    let w = load_workload(&inputs.workload).with_context(|| format!("loading {}", inputs.workload.display()))?;
    Ok((ds, w))
}

fn prepared(w: &Workload, ids: &[String], ds: &Dataset) -> Result<Vec<PreparedQuery>> {
    ids.iter()
        .map(|id| {
            let q = w.query(id).with_context(|| format!("split names unknown query {id}"))?;
            prepare(&q.id, &q.text, ds).with_context(|| format!("preparing {id}"))
        })
        .collect()
}

fn gen_config(preset: Preset, sf: u32, profile: u32, divisor: f64, seed: u64) -> Result<GenConfig> {
    Ok(match preset {
        Preset::Tiny => GenConfig::tiny(seed),
        Preset::Ldbc => {
            let sf = match sf {
                1 => ScaleFactor::Sf1,
                10 => ScaleFactor::Sf10,
                other => bail!("scale factor {other} is not 1 or 10"),
            };
            let profile = match profile {
                1 => TableProfile::T1,
                2 => TableProfile::T2,
                other => bail!("table profile {other} is not 1 or 2"),
            };
            GenConfig::cm_ldbc(sf, profile, divisor, seed)
        }
    })
}

fn load_weights(path: &Path) -> Result<ModelWeights> {
    ModelWeights::load(path, None).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg: FileConfig = match &cli.config {
        Some(p) => read_toml(p)?,
        None => FileConfig::default(),
    };
    match cli.cmd {
        Cmd::Gen {
            out,
            preset,
            sf,
            profile,
            divisor,
            seed,
            gen_config: file,
        } => {
            let gc = match file {
                Some(p) => read_toml(&p)?,
                None => gen_config(preset, sf, profile, divisor, seed)?,
            };
            let ds = generate_to_dir(&gc, &out)?;
            println!(
                "{}: {} vertices, {} edges, {} tables -> {}",
                gc.name,
                ds.graph.vertex_count(),
                ds.graph.edge_count(),
                ds.tables.len(),
                out.display()
            );
        }
        Cmd::Workload { data, out, count, seed } => {
            if let Some(c) = count {
                cfg.workload.count = c;
            }
            if let Some(s) = seed {
                cfg.workload.seed = s;
            }
            let ds = load_dataset(&data)?;
            let w = generate_workload(&ds, &cfg.workload)?;
            write_workload(&out, &w)?;
            println!(
                "{} queries ({} train, {} test) -> {}",
                w.queries.len(),
                w.split.train.len(),
                w.split.test.len(),
                out.display()
            );
        }
        Cmd::Collect {
            inputs,
            out,
            mode,
            bandwidth,
            rtt,
        } => {
            let h = &mut cfg.harness;
            if let Some(m) = mode {
                h.cost.mode = match m {
                    Mode::Measured => CostMode::Measured,
                    Mode::Synthetic => CostMode::Synthetic,
                };
            }
            if let Some(b) = bandwidth {
                h.cost.bandwidth_bits_per_sec = b;
            }
            if let Some(r) = rtt {
                h.cost.rtt = r;
            }
            let (ds, w) = load_inputs(&inputs)?;
            let ids: Vec<String> = w.queries.iter().map(|q| q.id.clone()).collect();
            let queries = prepared(&w, &ids, &ds)?;
            let log = collect(&queries, &ds, h)?;
            log.save(&out)?;
            let sentinels = log.records.iter().filter(|r| r.sentinel.is_some()).count();
            let failed = log.records.iter().filter(|r| !r.usable()).count();
            println!(
                "{} plans of {} queries ({sentinels} sentinel, {failed} failed) -> {}",
                log.records.len(),
                queries.len(),
                out.display()
            );
        }
        Cmd::Train {
            inputs,
            log,
            model,
            out,
            hyper,
        } => {
            let (ds, w) = load_inputs(&inputs)?;
            let train = prepared(&w, &w.split.train, &ds)?;
            let log = LatencyLog::load(&log)?;
            let base = match model {
                Model::Cmlero => &mut cfg.harness.cmlero,
                Model::Rlm => &mut cfg.harness.rlm,
            };
            base.epochs = hyper.epochs.unwrap_or(base.epochs);
            base.lr = hyper.lr.unwrap_or(base.lr);
            base.batch = hyper.batch.unwrap_or(base.batch);
            base.seed = hyper.seed.unwrap_or(base.seed);
            let (weights, report) = match model {
                Model::Cmlero => train_cmlero(&train, &log, &ds.catalog, &cfg.harness.cmlero)?,
                Model::Rlm => train_rlm(&train, &log, &ds.catalog, &cfg.harness.rlm)?,
            };
            weights.save(&out)?;
            let last = report.epoch_loss.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained on {} queries, {} epochs, final loss {last:.5} -> {}",
                train.len(),
                report.epoch_loss.len(),
                out.display()
            );
        }
        Cmd::Select { data, query, weights } => {
            let ds = load_dataset(&data)?;
            let text = fs::read_to_string(&query).with_context(|| format!("reading {}", query.display()))?;
            let id = query.file_stem().and_then(|s| s.to_str()).unwrap_or("query");
            let pq = prepare(id, &text, &ds)?;
            let w = load_weights(&weights)?;
            let opt = match w.kind {
                ModelKind::Pairwise => Optimizer::Cmlero(w),
                ModelKind::Regression => Optimizer::Rlm(w),
            };
            let i = opt.select(&pq, &ds.catalog)?;
            let plan = &pq.space.candidates[i];
            let moved: Vec<&str> = plan.movement.iter().map(String::as_str).collect();
            println!("plan {i} of {}: move [{}]", pq.space.len(), moved.join(", "));
        }
        Cmd::Eval {
            inputs,
            log,
            cmlero,
            rlm,
            csv,
        } => {
            let (ds, w) = load_inputs(&inputs)?;
            let test = prepared(&w, &w.split.test, &ds)?;
            let log = LatencyLog::load(&log)?;
            let opts = [
                Optimizer::Cmlero(load_weights(&cmlero)?),
                Optimizer::Rlm(load_weights(&rlm)?),
                Optimizer::Ts(cfg.harness.ts_threshold),
                Optimizer::Fvn,
                Optimizer::Raw,
            ];
            let report = evaluate(&opts, &test, &log, &ds.catalog, &cfg.harness.top_n)?;
            print!("{report}");
            if let Some(p) = csv {
                fs::write(&p, report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::StudySize {
            inputs,
            log,
            sizes,
            seed,
        } => {
            let (ds, w) = load_inputs(&inputs)?;
            let train = prepared(&w, &w.split.train, &ds)?;
            let test = prepared(&w, &w.split.test, &ds)?;
            let log = LatencyLog::load(&log)?;
            let points = study_training_size(&sizes, seed, &train, &test, &log, &ds, &cfg.harness)?;
            println!("size,cmlero_avg_q,cmlero_top1,rlm_avg_q,rlm_top1");
            for p in points {
                println!(
                    "{},{:.4},{:.4},{:.4},{:.4}",
                    p.size,
                    p.cmlero.avg_q,
                    p.cmlero.top(1),
                    p.rlm.avg_q,
                    p.rlm.top(1)
                );
            }
        }
        Cmd::StudyPruning { inputs } => {
            let (ds, w) = load_inputs(&inputs)?;
            let test = prepared(&w, &w.split.test, &ds)?;
            let report = study_pruning(&test, &ds, &cfg.harness)?;
            println!("query,label,retained_s,pruned_s,ok");
            for c in &report.comparisons {
                println!(
                    "{},{},{:.6},{:.6},{}",
                    c.query, c.label, c.retained_latency, c.pruned_latency, c.ok
                );
            }
            println!(
                "{} comparisons, {:.1}% within margin",
                report.comparisons.len(),
                100.0 * report.fraction_ok
            );
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse())
}
