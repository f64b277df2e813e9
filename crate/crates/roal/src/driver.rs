//! Training and evaluation driver: parallel rollouts, logging, checkpoints.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use roal_core::data::{split_classes, Dataset};
use roal_core::metrics::RunMetrics;
use roal_core::model::QNetwork;
use roal_core::trainer::{evaluate_episode, BatchStats, TrainConfig, Trainer};

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::config::RunConfig;
use crate::dataset::{default_train_classes, DataSource};
use crate::report::{self, CurvePoint};
use crate::{Error, Result};

/// Runs the batch's episodes in parallel; the result is identical to
/// [`Trainer::train_batch`] because every episode owns its seed stream and
/// gradients are summed in episode order.
pub fn train_batch(trainer: &mut Trainer<f32>, dataset: &Dataset) -> Result<BatchStats> {
    let n = trainer.config().episodes_per_batch;
    let shared = &*trainer;
    let outcomes = (0..n).into_par_iter().map(|e| shared.run_train_episode(dataset, e)).collect::<Result<Vec<_>, _>>()?;
    Ok(trainer.apply_batch(&outcomes)?)
}

/// Greedy evaluation over `batches` batches of `config.episodes_per_batch` episodes.
pub fn evaluate(net: &QNetwork<f32>, config: &TrainConfig, dataset: &Dataset, batches: u64) -> Result<RunMetrics> {
    let per = config.episodes_per_batch;
    let jobs: Vec<(u64, usize)> = (0..batches).flat_map(|b| (0..per).map(move |e| (b, e))).collect();
    let parts = jobs
        .par_iter()
        .map(|&(b, e)| evaluate_episode(net, config, dataset, b, e))
        .collect::<Result<Vec<_>, _>>()?;
    let mut metrics = RunMetrics::new();
    for p in &parts {
        metrics.merge(p);
    }
    Ok(metrics)
}

/// Rolling means of the last `window` batches.
#[derive(Debug, Clone)]
pub struct RollingCurve {
    window: usize,
    recent: VecDeque<BatchStats>,
}

impl RollingCurve {
    pub fn new(window: usize) -> Self {
        RollingCurve { window: window.max(1), recent: VecDeque::new() }
    }

    pub fn push(&mut self, stats: BatchStats) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(stats);
    }

    pub fn point(&self) -> Option<CurvePoint> {
        let last = self.recent.back()?;
        let n = self.recent.len() as f64;
        let mean_opt = |f: fn(&BatchStats) -> Option<f64>| {
            let vals: Vec<f64> = self.recent.iter().filter_map(f).collect();
            if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 }
        };
        Some(CurvePoint {
            batch: last.batch,
            loss: self.recent.iter().map(|s| s.loss).sum::<f64>() / n,
            accuracy_pct: mean_opt(|s| s.accuracy_pct),
            request_pct: mean_opt(|s| s.request_pct),
            reward: self.recent.iter().map(|s| s.mean_reward).sum::<f64>() / n,
        })
    }
}

/// Train/test split of a loaded dataset.
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_split(data: &str, train_classes: Option<usize>, split_seed: u64) -> Result<Split> {
    let ds = DataSource::parse(data)?.load()?;
    let n = train_classes.unwrap_or_else(|| default_train_classes(ds.num_classes()));
    let (train, test) = split_classes(&ds, n, split_seed)?;
    Ok(Split { train, test })
}

#[derive(Debug)]
pub struct RunOutput {
    pub trainer: Trainer<f32>,
    pub history: Vec<BatchStats>,
    pub curve: Vec<CurvePoint>,
    pub eval: Option<RunMetrics>,
}

/// Paths of everything `run` writes under `out`.
pub struct OutputFiles {
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
    pub metrics: PathBuf,
    pub config: PathBuf,
}

impl OutputFiles {
    pub fn under(out: &Path) -> Self {
        OutputFiles {
            checkpoint: out.join("checkpoint.roal"),
            curve: out.join("curve.csv"),
            metrics: out.join("metrics.csv"),
            config: out.join("config.txt"),
        }
    }
}

fn checkpoint_of(cfg: &RunConfig, trainer: &Trainer<f32>) -> Checkpoint {
    let mut ck = Checkpoint::from_trainer(trainer);
    ck.extra.push(("data".into(), cfg.data.clone()));
    if let Some(n) = cfg.train_classes {
        ck.extra.push(("train_classes".into(), n.to_string()));
    }
    ck.extra.push(("split_seed".into(), cfg.split_seed.to_string()));
    ck
}

/// Trains until `total_batches`, calling `on_batch` after every batch with
/// the rolling curve point on logging batches.
pub fn train_loop(
    trainer: &mut Trainer<f32>,
    train: &Dataset,
    log_every: u64,
    mut on_batch: impl FnMut(&Trainer<f32>, &BatchStats, Option<&CurvePoint>) -> Result<()>,
) -> Result<(Vec<BatchStats>, Vec<CurvePoint>)> {
    let total = trainer.config().total_batches;
    let mut curve = RollingCurve::new(log_every as usize);
    let mut history = Vec::new();
    let mut points = Vec::new();
    while trainer.batches_done() < total {
        let stats = train_batch(trainer, train)?;
        curve.push(stats);
        history.push(stats);
        let point = (stats.batch % log_every == 0 || stats.batch == total).then(|| curve.point().expect("just pushed"));
        if let Some(p) = point {
            points.push(p);
        }
        on_batch(trainer, &stats, point.as_ref())?;
    }
    Ok((history, points))
}

/// Training plus the final evaluation, without file output.
pub fn train_in_memory(config: TrainConfig, split: &Split, log_every: u64) -> Result<RunOutput> {
    let mut trainer = Trainer::new(config)?;
    let (history, curve) = train_loop(&mut trainer, &split.train, log_every, |_, _, _| Ok(()))?;
    let eval = match config.eval_batches {
        0 => None,
        n => Some(evaluate(trainer.network(), &config, &split.test, n)?),
    };
    Ok(RunOutput { trainer, history, curve, eval })
}

/// Full `train` command: trains, logs, checkpoints and evaluates, writing
/// everything under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let files = OutputFiles::under(&cfg.out);
    std::fs::write(&files.config, cfg.to_text()).map_err(|e| Error::io(&files.config, e))?;
    let split = load_split(&cfg.data, cfg.train_classes, cfg.split_seed)?;
    info!(
        "data {}: {} train / {} test classes; model {} with C={}",
        cfg.data,
        split.train.num_classes(),
        split.test.num_classes(),
        cfg.train.model.kind,
        cfg.train.model.num_classes
    );
    let train = cfg.train;
    let mut trainer = Trainer::new(train)?;
    let mut logged = Vec::new();
    let (history, curve) = train_loop(&mut trainer, &split.train, cfg.log_every, |t, stats, point| {
        if let Some(p) = point {
            info!(
                "batch {}: loss {:.4} accuracy {:.1}% requests {:.1}% reward {:.3}",
                p.batch, p.loss, p.accuracy_pct, p.request_pct, p.reward
            );
            logged.push(*p);
            report::write_curve_file(&logged, &files.curve)?;
        }
        if cfg.checkpoint_every > 0 && stats.batch % cfg.checkpoint_every == 0 {
            save_checkpoint(&checkpoint_of(cfg, t), &files.checkpoint)?;
        }
        Ok(())
    })?;
    save_checkpoint(&checkpoint_of(cfg, &trainer), &files.checkpoint)?;
    report::write_curve_file(&curve, &files.curve)?;
    let eval = if train.eval_batches > 0 {
        let m = evaluate(trainer.network(), &train, &split.test, train.eval_batches)?;
        report::write_metrics_file(&m, &files.metrics)?;
        info!(
            "evaluation on {} episodes: accuracy {:.1}% requests {:.1}%",
            m.episodes(),
            m.overall_accuracy_pct().unwrap_or(f64::NAN),
            m.overall_request_pct().unwrap_or(f64::NAN)
        );
        Some(m)
    } else {
        None
    };
    Ok(RunOutput { trainer, history, curve, eval })
}
