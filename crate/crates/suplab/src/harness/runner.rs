//! Experiment execution. Each grid point owns a disjoint block of RNG
//! streams keyed by its position on the axis, runs its trials, and reduces
//! them to mean + bootstrap CI rows; rayon spreads points across cores and a
//! single merge keeps row order equal to axis order. A failing point turns
//! into a recorded failure, never into damage to its neighbors. Provenance
//! (seed, version, timestamp) stays out of the CSV so reruns are
//! byte-identical.

use super::bootstrap::{bootstrap_ci, mean, BOOTSTRAP_LEVEL, BOOTSTRAP_RESAMPLES};
use super::config::{ExperimentConfig, ExperimentKind, WorldSpec};
use super::csv::{write_csv, ResultRow};
use super::idx::{balanced_indices, default_data_dir, load_mnist, Mnist, MnistSplit};
use super::svg::{emit_plot, PlotKind};
use crate::classify::{
    l2_nearest, majority_vote, route_and_predict, train_global_head, train_moe, ttt_finetune,
    HeadTrainConfig, LinearHead, MoeTrainConfig, RandomReluMap, TttConfig,
};
use crate::concepts::{make_nonlearnable_instance, sample_dataset, ConceptWorld, SupportLaw};
use crate::error::{Error, Result};
use crate::estimators::{evaluate_interference, fit_global_minnorm, fit_ttt_sparse, FitMode};
use crate::neighborhood::{knn, Space};
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::SeededRng;
use crate::sae::{learn_concept_mask, train_sae, ConceptMask, MaskHead};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Stream ids per grid point; trials and CI draws both live inside it.
const STREAM_BLOCK: u64 = 1 << 16;
/// Streams at and above this id belong to whole-experiment setup.
const SETUP_STREAM: u64 = 1 << 48;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub timestamp: u64,
}

impl Provenance {
    fn new(seed: u64) -> Self {
        Provenance {
            seed,
            version: format!("suplab-{}", env!("CARGO_PKG_VERSION")),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridFailure {
    pub axis: String,
    pub value: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<GridFailure>,
    pub provenance: Provenance,
}

/// RNG streams of one grid point: ids 1..=trials of the block drive the
/// trials (0 stays reserved), the upper half feeds bootstrap draws row by
/// row.
struct PointStreams {
    seed: u64,
    base: u64,
    next_ci: u64,
}

impl PointStreams {
    fn new(seed: u64, point: usize) -> Self {
        let base = point as u64 * STREAM_BLOCK;
        PointStreams { seed, base, next_ci: base + STREAM_BLOCK / 2 }
    }

    fn trial(&self, t: usize) -> SeededRng {
        SeededRng::with_stream(self.seed, self.base + 1 + t as u64)
    }

    fn ci(&mut self) -> SeededRng {
        let s = self.next_ci;
        self.next_ci += 1;
        SeededRng::with_stream(self.seed, s)
    }
}

fn stat_row(
    experiment: &str,
    axes: Vec<(String, String)>,
    metric: &str,
    samples: &[f64],
    seed: u64,
    streams: &mut PointStreams,
) -> Result<ResultRow> {
    let m = mean(samples);
    let (lo, hi) =
        bootstrap_ci(samples, BOOTSTRAP_RESAMPLES, BOOTSTRAP_LEVEL, &mut streams.ci())?;
    Ok(ResultRow {
        experiment: experiment.into(),
        axes,
        metric: metric.into(),
        mean: m,
        ci_low: lo.min(m),
        ci_high: hi.max(m),
        n: samples.len(),
        seed,
    })
}

/// Constant row (analytic values, single measurements): CI collapses to the
/// value itself.
fn const_row(
    experiment: &str,
    axes: Vec<(String, String)>,
    metric: &str,
    value: f64,
    n: usize,
    seed: u64,
) -> ResultRow {
    ResultRow {
        experiment: experiment.into(),
        axes,
        metric: metric.into(),
        mean: value,
        ci_low: value,
        ci_high: value,
        n,
        seed,
    }
}

/// Runs one closure per axis value in parallel; a point's failure is
/// recorded and skipped while every other point's rows are kept in axis
/// order.
fn grid<T, F>(axis: &str, values: &[T], f: F) -> (Vec<ResultRow>, Vec<GridFailure>)
where
    T: std::fmt::Display + Sync,
    F: Fn(usize, &T) -> Result<Vec<ResultRow>> + Sync,
{
    let outcomes: Vec<(String, Result<Vec<ResultRow>>)> = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| (v.to_string(), f(i, v)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (value, outcome) in outcomes {
        match outcome {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => failures.push(GridFailure {
                axis: axis.into(),
                value,
                message: e.to_string(),
            }),
        }
    }
    (rows, failures)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (rows, failures) = match config.kind {
        ExperimentKind::Interference => run_interference(config)?,
        ExperimentKind::TttRate => run_ttt_rate(config)?,
        ExperimentKind::ModelScaling => run_model_scaling(config)?,
        ExperimentKind::DataScaling => run_data_scaling(config)?,
        ExperimentKind::NeighborhoodSweep => run_neighborhood_sweep(config)?,
        ExperimentKind::SaeTrain => run_sae_train(config)?,
        ExperimentKind::SaeMask => run_sae_mask(config)?,
        ExperimentKind::MoeScaling => run_moe_scaling(config)?,
        ExperimentKind::AssumptionReport => run_assumption_report(config)?,
    };
    Ok(ExperimentResult { rows, failures, provenance: Provenance::new(config.seed) })
}

/// Global readout on freshly drawn one-concept-per-cell instances next to
/// the zero-error local fit and the analytic interference level 1 - d2/d1.
fn run_interference(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let d2s = cfg.d2_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let d1 = cfg.world.d1;
    Ok(grid("d2", &d2s, |i, &d2| {
        let mut streams = PointStreams::new(cfg.seed, i);
        let mut global = Vec::with_capacity(trials);
        let mut local = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut rng = streams.trial(t);
            let inst = make_nonlearnable_instance(d1, d2, &mut rng)?;
            global.push(evaluate_interference(&inst)?.measured);

            // Per-cell fit: each cell's population is its single sample.
            let mut err = 0.0;
            for m in 0..d1 {
                let cell = inst.cell_sample(m);
                let nbhd = knn(&cell.feature, std::slice::from_ref(&cell), 1, Space::Feature)?;
                let fit = fit_ttt_sparse(
                    &nbhd,
                    std::slice::from_ref(&cell),
                    &inst.local_map(m),
                    1,
                    FitMode::Exhaustive,
                )?;
                err += (fit.predict(&cell.feature) - cell.label).powi(2);
            }
            local.push(err / d1 as f64);
        }
        let axes = |est: &str| {
            vec![("d2".to_string(), d2.to_string()), ("estimator".to_string(), est.to_string())]
        };
        Ok(vec![
            stat_row(tag, axes("global"), "population-error", &global, cfg.seed, &mut streams)?,
            stat_row(tag, axes("local"), "population-error", &local, cfg.seed, &mut streams)?,
            const_row(
                tag,
                axes("analytic"),
                "population-error",
                1.0 - d2 as f64 / d1 as f64,
                trials,
                cfg.seed,
            ),
        ])
    }))
}

/// Excess error of the idealized local fit against neighborhood size, next
/// to the sigma^2 s / k prediction. The curve routine owns the per-(k,
/// trial) streams, so the grid here is a single atomic call.
fn run_ttt_rate(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let ks = cfg.k_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let mut setup = SeededRng::with_stream(cfg.seed, SETUP_STREAM);
    let world = clustered_world_spec(&cfg.world).build(&mut setup)?;
    let report = crate::estimators::ttt_rate_curve(
        &world,
        &ks,
        world.s,
        trials,
        &SeededRng::new(cfg.seed),
    )?;
    let mut streams = PointStreams::new(cfg.seed, 0);
    let mut rows = Vec::new();
    for point in &report.per_k {
        let axes = vec![("k".to_string(), point.k.to_string())];
        rows.push(stat_row(tag, axes.clone(), "excess-error", &point.samples, cfg.seed, &mut streams)?);
        rows.push(const_row(
            tag,
            axes,
            "predicted",
            world.sigma2 * world.s as f64 / point.k as f64,
            trials,
            cfg.seed,
        ));
    }
    Ok((rows, Vec::new()))
}

fn mnist_for(cfg: &ExperimentConfig) -> Result<Mnist> {
    let dir = cfg
        .data
        .dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(default_data_dir);
    load_mnist(&dir)
}

fn subsample_split(
    split: &MnistSplit,
    total: usize,
    classes: usize,
    rng: &mut SeededRng,
) -> Result<(Matrix, Vec<usize>)> {
    let per_class = (total / classes).max(1);
    let idx = balanced_indices(&split.labels, classes, per_class, rng);
    Ok((split.features(&idx)?, split.labels_for(&idx)))
}

/// Test-point errors of the global head, the TTT head, and the neighbor
/// vote on one train/test draw.
struct SplitErrors {
    global: f64,
    ttt: f64,
    vote: f64,
}

fn classifier_errors(
    xs: &Matrix,
    ys: &[usize],
    xt: &Matrix,
    yt: &[usize],
    head: &LinearHead,
    ttt: &TttConfig,
) -> Result<SplitErrors> {
    let global = 1.0 - head.accuracy(xt, yt)?;
    let mut ttt_wrong = 0usize;
    let mut vote_wrong = 0usize;
    for (r, &truth) in yt.iter().enumerate() {
        let nb = l2_nearest(xs, xt.row(r), ttt.k.min(xs.rows()));
        let nb_rows: Vec<&[f64]> = nb.iter().map(|&i| xs.row(i)).collect();
        let nb_xs = Matrix::from_row_slices(&nb_rows)?;
        let nb_ys: Vec<usize> = nb.iter().map(|&i| ys[i]).collect();
        if majority_vote(&nb_ys)? != truth {
            vote_wrong += 1;
        }
        let tuned = ttt_finetune(head, &nb_xs, &nb_ys, ttt)?;
        if tuned.predict(xt.row(r))? != truth {
            ttt_wrong += 1;
        }
    }
    Ok(SplitErrors {
        global,
        ttt: ttt_wrong as f64 / yt.len() as f64,
        vote: vote_wrong as f64 / yt.len() as f64,
    })
}

/// Global vs TTT vs vote error across random-feature widths on the image
/// dataset.
fn run_model_scaling(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let widths = cfg.width_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let mnist = mnist_for(cfg)?;
    let train_total = cfg.data.subsample.unwrap_or(mnist.train.count);
    let ttt = TttConfig { k: cfg.ttt.k, steps: cfg.ttt.steps, lr: cfg.ttt.lr };
    Ok(grid("width", &widths, |i, &w| {
        let mut streams = PointStreams::new(cfg.seed, i);
        let mut global = Vec::new();
        let mut ttt_err = Vec::new();
        let mut vote = Vec::new();
        for t in 0..trials {
            let mut rng = streams.trial(t);
            let (xs_raw, ys) =
                subsample_split(&mnist.train, train_total, cfg.data.classes, &mut rng)?;
            let map = RandomReluMap::new(mnist.train.dim, w, &mut rng)?;
            let xs = map.apply_all(&xs_raw)?;
            let head =
                train_global_head(&xs, &ys, cfg.data.classes, &HeadTrainConfig::default(), &mut rng)?;
            let test_idx = rng.distinct_indices(mnist.test.count, cfg.data.test_points);
            let xt = map.apply_all(&mnist.test.features(&test_idx)?)?;
            let yt = mnist.test.labels_for(&test_idx);
            let errs = classifier_errors(&xs, &ys, &xt, &yt, &head, &ttt)?;
            global.push(errs.global);
            ttt_err.push(errs.ttt);
            vote.push(errs.vote);
        }
        let axes = vec![("width".to_string(), w.to_string())];
        Ok(vec![
            stat_row(tag, axes.clone(), "global-error", &global, cfg.seed, &mut streams)?,
            stat_row(tag, axes.clone(), "ttt-error", &ttt_err, cfg.seed, &mut streams)?,
            stat_row(tag, axes, "vote-error", &vote, cfg.seed, &mut streams)?,
        ])
    }))
}

/// Global vs TTT error on raw pixels across class-balanced training
/// fractions.
fn run_data_scaling(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let fractions = cfg.fraction_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let mnist = mnist_for(cfg)?;
    let base_total = cfg.data.subsample.unwrap_or(mnist.train.count);
    let ttt = TttConfig { k: cfg.ttt.k, steps: cfg.ttt.steps, lr: cfg.ttt.lr };
    Ok(grid("fraction", &fractions, |i, &f| {
        let mut streams = PointStreams::new(cfg.seed, i);
        let total = ((f * base_total as f64).round() as usize).max(cfg.data.classes);
        let mut global = Vec::new();
        let mut ttt_err = Vec::new();
        for t in 0..trials {
            let mut rng = streams.trial(t);
            let (xs, ys) = subsample_split(&mnist.train, total, cfg.data.classes, &mut rng)?;
            let head =
                train_global_head(&xs, &ys, cfg.data.classes, &HeadTrainConfig::default(), &mut rng)?;
            let test_idx = rng.distinct_indices(mnist.test.count, cfg.data.test_points);
            let xt = mnist.test.features(&test_idx)?;
            let yt = mnist.test.labels_for(&test_idx);
            let ttt_pt = TttConfig { k: ttt.k.min(xs.rows()), ..ttt };
            let errs = classifier_errors(&xs, &ys, &xt, &yt, &head, &ttt_pt)?;
            global.push(errs.global);
            ttt_err.push(errs.ttt);
        }
        let axes = vec![("fraction".to_string(), f.to_string())];
        Ok(vec![
            stat_row(tag, axes.clone(), "global-error", &global, cfg.seed, &mut streams)?,
            stat_row(tag, axes, "ttt-error", &ttt_err, cfg.seed, &mut streams)?,
        ])
    }))
}

/// Kinds whose default world is clustered when the config names no law
/// (ttt-rate, neighborhood-sweep, sae-mask, assumption-report): their
/// protocols live on pool structure, and a two-line config should see it.
fn clustered_world_spec(spec: &WorldSpec) -> WorldSpec {
    let mut w = spec.clone();
    if w.law.is_none() {
        w.law = Some("clustered".into());
    }
    w
}

fn pool_count(world: &ConceptWorld) -> usize {
    match world.law {
        SupportLaw::Uniform => 1,
        SupportLaw::Clustered { stride, .. } => (world.d1 / stride).max(1),
    }
}

/// Squared prediction error of the local min-norm readout against the
/// noiseless target, swept over neighborhood size: too few members fit the
/// noise, too many mix pools.
fn run_neighborhood_sweep(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let ks = cfg.k_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let mut setup = SeededRng::with_stream(cfg.seed, SETUP_STREAM);
    let world = clustered_world_spec(&cfg.world).build(&mut setup)?;
    Ok(grid("k", &ks, |i, &k| {
        let mut streams = PointStreams::new(cfg.seed, i);
        let mut errs = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut rng = streams.trial(t);
            let dataset = sample_dataset(&world, cfg.world.n, &mut rng);
            let test = world.sample(&mut rng);
            let truth = world.f_star(&test.concept);
            let nbhd = knn(&test.feature, &dataset, k, Space::Feature)?;
            let feats: Vec<&[f64]> =
                nbhd.members.iter().map(|&m| dataset[m].feature.as_slice()).collect();
            let labels: Vec<f64> = nbhd.members.iter().map(|&m| dataset[m].label).collect();
            let fit = fit_global_minnorm(&Matrix::from_row_slices(&feats)?, &labels)?;
            errs.push((fit.predict(&test.feature) - truth).powi(2));
        }
        let axes = vec![("k".to_string(), k.to_string())];
        Ok(vec![stat_row(tag, axes, "excess-error", &errs, cfg.seed, &mut streams)?])
    }))
}

/// Loss trace by training decile plus the final dead-unit fraction, averaged
/// over independently seeded runs.
fn run_sae_train(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let trials = cfg.trials.unwrap_or(1);
    let tag = cfg.kind.tag();
    let mut setup = SeededRng::with_stream(cfg.seed, SETUP_STREAM);
    let world = cfg.world.build(&mut setup)?;
    let sc = cfg.sae.to_train_config(world.d1, world.s)?;
    let mut streams = PointStreams::new(cfg.seed, 0);

    let runs: Vec<Result<(Vec<f64>, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededRng::with_stream(cfg.seed, 1 + t as u64);
            let mut data = Matrix::zeros(cfg.world.n, world.d2);
            for r in 0..cfg.world.n {
                let sample = world.sample(&mut rng);
                data.row_mut(r).copy_from_slice(&sample.feature);
            }
            let trained = train_sae(&sc, &data, &mut rng)?;
            Ok((trained.loss_trace, trained.tracker.dead_fraction()))
        })
        .collect();

    let mut traces = Vec::new();
    let mut dead = Vec::new();
    for run in runs {
        let (trace, d) = run?;
        traces.push(trace);
        dead.push(d);
    }
    let steps = traces[0].len();
    let mut rows = Vec::new();
    for decile in 1..=10usize {
        let lo = (decile - 1) * steps / 10;
        let hi = (decile * steps / 10).max(lo + 1).min(steps);
        let samples: Vec<f64> =
            traces.iter().flat_map(|tr| tr[lo..hi].iter().copied()).collect();
        let axes = vec![("decile".to_string(), decile.to_string())];
        rows.push(stat_row(tag, axes, "train-loss", &samples, cfg.seed, &mut streams)?);
    }
    rows.push(stat_row(
        tag,
        vec![("decile".to_string(), "10".to_string())],
        "dead-fraction",
        &dead,
        cfg.seed,
        &mut streams,
    )?);
    Ok((rows, Vec::new()))
}

/// Sparsity-penalty sweep of the learned concept mask on pool-local
/// classification tasks: how much of the active union survives, and what it
/// costs in accuracy against the unpenalized mask.
fn run_sae_mask(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let lambdas = cfg.lambda_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let tau = cfg.sae.mask_tau.unwrap_or(0.1);
    let steps = cfg.sae.mask_steps.unwrap_or(300);
    let classes = 4usize;
    let mut setup = SeededRng::with_stream(cfg.seed, SETUP_STREAM);
    let world = clustered_world_spec(&cfg.world).build(&mut setup)?;
    let pools = pool_count(&world);
    Ok(grid("lambda", &lambdas, |i, &lambda| {
        let mut streams = PointStreams::new(cfg.seed, i);
        let mut ratios = Vec::with_capacity(trials);
        let mut drops = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut rng = streams.trial(t);
            let g = rng.index(pools);
            let k = cfg.ttt.k;
            let mut concepts = Matrix::zeros(k, world.d1);
            let mut union: Vec<usize> = Vec::new();
            for r in 0..k {
                let sample = world.sample_from_pool(g, &mut rng);
                union.extend(sample.concept.entries().iter().map(|&(m, _)| m));
                concepts.row_mut(r).copy_from_slice(&sample.concept.to_dense());
            }
            union.sort_unstable();
            union.dedup();

            // Hidden labeling rule over a planted subset of the pool.
            let informative: Vec<usize> =
                union.iter().copied().take((3 * world.s).min(union.len())).collect();
            let mut hidden = Matrix::zeros(classes, informative.len());
            for v in hidden.data_mut() {
                *v = rng.normal();
            }
            let labels: Vec<usize> = (0..k)
                .map(|r| {
                    let x: Vec<f64> =
                        informative.iter().map(|&m| concepts.get(r, m)).collect();
                    let scores = hidden.matvec(&x).expect("dims fixed above");
                    scores
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(c, _)| c)
                        .unwrap_or(0)
                })
                .collect();

            let mut free_rng = rng.clone();
            let (_, free_head) =
                learn_concept_mask(&concepts, &labels, classes, 0.0, tau, steps, &mut free_rng)?;
            let (mask, head) =
                learn_concept_mask(&concepts, &labels, classes, lambda, tau, steps, &mut rng)?;

            let acc = |h: &MaskHead, m: Option<&ConceptMask>| -> Result<f64> {
                let mut right = 0usize;
                for r in 0..k {
                    let row = match m {
                        Some(mask) => mask.apply(concepts.row(r)),
                        None => concepts.row(r).to_vec(),
                    };
                    if h.predict(&row)? == labels[r] {
                        right += 1;
                    }
                }
                Ok(right as f64 / k as f64)
            };
            let kept_in_union =
                mask.active_indices().iter().filter(|j| union.binary_search(j).is_ok()).count();
            ratios.push(kept_in_union as f64 / union.len() as f64);
            drops.push(acc(&free_head, None)? - acc(&head, Some(&mask))?);
        }
        let axes = vec![("lambda".to_string(), lambda.to_string())];
        Ok(vec![
            stat_row(tag, axes.clone(), "mask-ratio", &ratios, cfg.seed, &mut streams)?,
            stat_row(tag, axes, "accuracy-drop", &drops, cfg.seed, &mut streams)?,
        ])
    }))
}

/// Expert-count sweep against the TTT reference on the same draws.
fn run_moe_scaling(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let experts = cfg.experts_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let mnist = mnist_for(cfg)?;
    let train_total = cfg.data.subsample.unwrap_or(mnist.train.count);
    let ttt = TttConfig { k: cfg.ttt.k, steps: cfg.ttt.steps, lr: cfg.ttt.lr };
    // Experts get the same fine-tune recipe as the per-point arm, so the
    // two curves differ only in where the adaptation happens. The reference
    // table rows (for_experts) are tuned for full-size training sets and
    // barely move a head at this scale.
    let moe_config = MoeTrainConfig {
        lr: cfg.ttt.lr,
        epochs: cfg.ttt.steps,
        neighbors: cfg.ttt.k,
        kmeans_iters: 100,
    };
    Ok(grid("experts", &experts, |i, &e| {
        let mut streams = PointStreams::new(cfg.seed, i);
        let mut moe_err = Vec::new();
        let mut ttt_err = Vec::new();
        for t in 0..trials {
            let mut rng = streams.trial(t);
            let (xs, ys) =
                subsample_split(&mnist.train, train_total, cfg.data.classes, &mut rng)?;
            let head =
                train_global_head(&xs, &ys, cfg.data.classes, &HeadTrainConfig::default(), &mut rng)?;
            let moe = train_moe(&xs, &ys, e.min(xs.rows()), &head, &moe_config, &mut rng)?;
            let test_idx = rng.distinct_indices(mnist.test.count, cfg.data.test_points);
            let xt = mnist.test.features(&test_idx)?;
            let yt = mnist.test.labels_for(&test_idx);

            let mut moe_wrong = 0usize;
            let mut ttt_wrong = 0usize;
            for (r, &truth) in yt.iter().enumerate() {
                if route_and_predict(&moe, xt.row(r))? != truth {
                    moe_wrong += 1;
                }
                let nb = l2_nearest(&xs, xt.row(r), ttt.k.min(xs.rows()));
                let nb_rows: Vec<&[f64]> = nb.iter().map(|&i| xs.row(i)).collect();
                let nb_ys: Vec<usize> = nb.iter().map(|&i| ys[i]).collect();
                let tuned = ttt_finetune(&head, &Matrix::from_row_slices(&nb_rows)?, &nb_ys, &ttt)?;
                if tuned.predict(xt.row(r))? != truth {
                    ttt_wrong += 1;
                }
            }
            moe_err.push(moe_wrong as f64 / yt.len() as f64);
            ttt_err.push(ttt_wrong as f64 / yt.len() as f64);
        }
        let axes = vec![("experts".to_string(), e.to_string())];
        Ok(vec![
            stat_row(tag, axes.clone(), "moe-error", &moe_err, cfg.seed, &mut streams)?,
            stat_row(tag, axes, "ttt-error", &ttt_err, cfg.seed, &mut streams)?,
        ])
    }))
}

/// Assumption diagnostics as the retrieval radius widens. A radius that
/// retrieves nothing fails its grid point and is reported as such.
fn run_assumption_report(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<GridFailure>)> {
    let radii = cfg.radius_axis()?;
    let trials = cfg.trials();
    let tag = cfg.kind.tag();
    let tolerance = 0.5;
    let mut setup = SeededRng::with_stream(cfg.seed, SETUP_STREAM);
    let world = clustered_world_spec(&cfg.world).build(&mut setup)?;
    Ok(grid("radius", &radii, |i, &r| {
        let mut streams = PointStreams::new(cfg.seed, i);
        let mut eta_ang = Vec::new();
        let mut eta_spa = Vec::new();
        let mut eta_rep = Vec::new();
        let mut kappa = Vec::new();
        let mut satisfied = Vec::new();
        for t in 0..trials {
            let mut rng = streams.trial(t);
            let dataset = sample_dataset(&world, cfg.world.n, &mut rng);
            let test = world.sample(&mut rng);
            let rep =
                crate::assumptions::check_assumptions(&world, &dataset, &test, r, world.s, tolerance)?;
            eta_ang.push(rep.eta_ang);
            eta_spa.push(rep.eta_spa);
            eta_rep.push(rep.eta_rep);
            kappa.push(rep.kappa);
            satisfied.push(rep.satisfied as usize as f64);
        }
        let axes = |_m: &str| vec![("radius".to_string(), r.to_string())];
        Ok(vec![
            stat_row(tag, axes("a"), "eta-ang", &eta_ang, cfg.seed, &mut streams)?,
            stat_row(tag, axes("b"), "eta-spa", &eta_spa, cfg.seed, &mut streams)?,
            stat_row(tag, axes("c"), "eta-rep", &eta_rep, cfg.seed, &mut streams)?,
            stat_row(tag, axes("d"), "kappa", &kappa, cfg.seed, &mut streams)?,
            stat_row(tag, axes("e"), "satisfied", &satisfied, cfg.seed, &mut streams)?,
        ])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Svg,
    Both,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            "both" => Ok(OutputFormat::Both),
            other => Err(Error::Config(format!(
                "unknown format {other:?}, expected csv, svg, or both"
            ))),
        }
    }
}

/// Writes `<tag>.csv` / `<tag>.svg` (band plot), plus `<tag>.failures.txt`
/// when points failed and a provenance sidecar; returns the paths written.
/// Provenance never enters the CSV or SVG, which stay byte-stable across
/// reruns.
pub fn write_outputs(
    result: &ExperimentResult,
    out_dir: &Path,
    format: OutputFormat,
    tag: &str,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if !result.rows.is_empty() {
        if format != OutputFormat::Svg {
            let path = out_dir.join(format!("{tag}.csv"));
            write_csv(&path, &result.rows)?;
            written.push(path);
        }
        if format != OutputFormat::Csv {
            let path = out_dir.join(format!("{tag}.svg"));
            emit_plot(&path, &result.rows, PlotKind::Band)?;
            written.push(path);
        }
    }
    if !result.failures.is_empty() {
        let path = out_dir.join(format!("{tag}.failures.txt"));
        let mut text = String::new();
        for f in &result.failures {
            text.push_str(&format!("{}={}: {}\n", f.axis, f.value, f.message));
        }
        std::fs::write(&path, text)?;
        written.push(path);
    }
    let prov = out_dir.join(format!("{tag}.provenance.txt"));
    std::fs::write(
        &prov,
        format!(
            "seed={}\nversion={}\ntimestamp={}\n",
            result.provenance.seed, result.provenance.version, result.provenance.timestamp
        ),
    )?;
    written.push(prov);
    Ok(written)
}
