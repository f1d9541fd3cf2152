//! Margin-loss discriminator training and the alternating generator /
//! discriminator loop, with the plain random-sampling baseline as a regime of
//! its own.
//!
//! Every pass shuffles the train split with the run RNG and walks it in
//! mini-batches; gradients are averaged over the batch, one Adam step is
//! taken per batch, and norm constraints are re-projected after each
//! discriminator update. The model not being trained in a pass is borrowed
//! immutably, so parameter freezing holds by construction.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::data::{draw_side, CorruptionSide, CorruptionStrategy, KgDataset, Triple};
use crate::error::{Error, Result};
use crate::generator::{
    policy_gradient_step, GenOptimizer, GeneratedNegative, GeneratorModel, PolicySample,
};
use crate::scorer::{DiscriminatorModel, Dissimilarity, ScorerKind};
use crate::tensor::{adam_step, AdamState, DenseMatrix, Rng};

/// Training regime: random-sampling baseline, adversarial from scratch, or
/// adversarial fine-tuning of a pretrained discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    RandomBaseline,
    GanScratch,
    GanPretrain,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::RandomBaseline => "random",
            Regime::GanScratch => "gan-scratch",
            Regime::GanPretrain => "gan-pretrain",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "random" => Some(Regime::RandomBaseline),
            "gan-scratch" => Some(Regime::GanScratch),
            "gan-pretrain" => Some(Regime::GanPretrain),
            _ => None,
        }
    }

    pub fn uses_generator(self) -> bool {
        !matches!(self, Regime::RandomBaseline)
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub kind: ScorerKind,
    pub margin: f64,
    pub dim: usize,
    pub lr: f32,
    pub batch_size: usize,
    pub dissimilarity: Dissimilarity,
    pub strategy: CorruptionStrategy,
    pub regime: Regime,
    pub epochs: usize,
    /// Full train-set generator passes per outer epoch.
    pub g_passes: usize,
    /// Full train-set discriminator passes per outer epoch.
    pub d_passes: usize,
    /// L2 coefficient on all generator parameters.
    pub gen_l2: f32,
    pub seed: u64,
    /// Mask the gold entity out of the generator's sampling distribution.
    pub exclude_gold: bool,
    /// Random-sampling epochs run internally before a gan-pretrain loop when
    /// no pretrained discriminator is supplied.
    pub pretrain_epochs: usize,
    /// Generator embedding width; defaults to `dim`.
    pub gen_dim: Option<usize>,
    /// Generator hidden width; defaults to `dim`.
    pub gen_hidden: Option<usize>,
}

impl TrainConfig {
    pub fn new(kind: ScorerKind, regime: Regime) -> Self {
        TrainConfig {
            kind,
            margin: 1.0,
            dim: 50,
            lr: 0.001,
            batch_size: 1024,
            dissimilarity: Dissimilarity::L1,
            strategy: CorruptionStrategy::Unif,
            regime,
            epochs: 100,
            g_passes: 1,
            d_passes: 1,
            gen_l2: 1e-5,
            seed: 0,
            exclude_gold: false,
            pretrain_epochs: 0,
            gen_dim: None,
            gen_hidden: None,
        }
    }

    pub fn gen_dim(&self) -> usize {
        self.gen_dim.unwrap_or(self.dim)
    }

    pub fn gen_hidden(&self) -> usize {
        self.gen_hidden.unwrap_or(self.dim)
    }

    /// Front-door validation; `train` itself additionally tolerates
    /// `epochs == 0` as an explicit no-op.
    pub fn validate(&self) -> Result<()> {
        if self.margin <= 0.0 {
            return Err(Error::Config(format!(
                "margin must be > 0, got {}",
                self.margin
            )));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimension must be > 0".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.regime.uses_generator() && (self.g_passes == 0 || self.d_passes == 0) {
            return Err(Error::Config("g-passes and d-passes must be >= 1".into()));
        }
        if self.gen_l2 < 0.0 {
            return Err(Error::Config(
                "generator L2 coefficient must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Hinge part of the ranking objective: max(0, f_pos - f_neg + margin).
pub fn margin_loss(f_pos: f64, f_neg: f64, margin: f64) -> f64 {
    (f_pos - f_neg + margin).max(0.0)
}

/// Baseline corruption: replace one side (never both) with an entity drawn
/// uniformly from the whole entity set. The draw may return the original
/// entity.
pub fn random_negative(
    positive: &Triple,
    strategy: CorruptionStrategy,
    dataset: &KgDataset,
    rng: &mut Rng,
) -> Triple {
    let side = draw_side(strategy, dataset, positive.relation, rng);
    let entity = rng.below(dataset.n_entities());
    positive.with_side(side, entity)
}

/// Where a discriminator pass gets its negatives.
pub enum NegativeSource<'a> {
    Random,
    Generator {
        gen: &'a GeneratorModel,
        exclude_gold: bool,
    },
}

/// Adam states and reusable gradient buffers aligned with
/// `DiscriminatorModel::param_order`.
pub struct DiscOptimizer {
    states: Vec<AdamState>,
    grads: Vec<DenseMatrix>,
}

impl DiscOptimizer {
    pub fn new(disc: &DiscriminatorModel) -> Self {
        let slots = disc.param_order();
        DiscOptimizer {
            states: slots
                .iter()
                .map(|&s| AdamState::for_param(disc.param(s)))
                .collect(),
            grads: slots
                .iter()
                .map(|&s| {
                    let p = disc.param(s);
                    DenseMatrix::zeros(p.rows(), p.cols())
                })
                .collect(),
        }
    }
}

/// Stats from one full discriminator pass.
#[derive(Debug, Clone, Copy)]
pub struct DiscPassStats {
    pub mean_loss: f64,
    pub violation_rate: f64,
}

/// Stats from one full generator pass.
#[derive(Debug, Clone, Copy)]
pub struct GenPassStats {
    pub mean_reward: f64,
}

/// One full pass over shuffled train triples updating the discriminator.
/// The generator, when it is the negative source, stays frozen.
pub fn train_discriminator_pass(
    disc: &mut DiscriminatorModel,
    source: &NegativeSource<'_>,
    dataset: &KgDataset,
    cfg: &TrainConfig,
    opt: &mut DiscOptimizer,
    rng: &mut Rng,
) -> Result<DiscPassStats> {
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    rng.shuffle(&mut order);
    let slots = disc.param_order();

    let mut total_loss = 0.0f64;
    let mut violations = 0usize;

    for batch in order.chunks(cfg.batch_size) {
        let negatives = materialize_negatives(batch, source, dataset, cfg, rng)?;

        for g in &mut opt.grads {
            g.fill(0.0);
        }
        let scale = 1.0f32 / batch.len() as f32;
        let mut any_grad = false;
        for (&i, negative) in batch.iter().zip(&negatives) {
            let positive = dataset.train.triples[i];
            let f_pos = disc.score_triple(&positive)?;
            let f_neg = disc.score_triple(negative)?;
            let loss = margin_loss(f_pos, f_neg, cfg.margin);
            total_loss += loss;
            if loss > 0.0 {
                violations += 1;
                any_grad = true;
                accumulate_score_gradient(disc, &slots, &mut opt.grads, &positive, scale)?;
                accumulate_score_gradient(disc, &slots, &mut opt.grads, negative, -scale)?;
            }
        }
        if any_grad {
            for ((&slot, grad), state) in slots.iter().zip(&opt.grads).zip(&mut opt.states) {
                adam_step(disc.param_mut(slot), grad, state, cfg.lr)?;
            }
            disc.project_constraints();
        }
    }

    let n = dataset.train.len().max(1) as f64;
    Ok(DiscPassStats {
        mean_loss: total_loss / n,
        violation_rate: violations as f64 / n,
    })
}

fn accumulate_score_gradient(
    disc: &DiscriminatorModel,
    slots: &[crate::scorer::ParamSlot],
    grads: &mut [DenseMatrix],
    triple: &Triple,
    scale: f32,
) -> Result<()> {
    let sg = disc.score_gradient(triple.head, triple.relation, triple.tail)?;
    for e in &sg.entries {
        let idx = slots
            .iter()
            .position(|&s| s == e.slot)
            .expect("gradient slot present in model");
        grads[idx].add_scaled_row(e.row, &e.values, scale);
    }
    Ok(())
}

/// Draw one negative per batch positive. Random negatives come straight from
/// the RNG; generator negatives pre-draw their randomness sequentially and
/// run the policy forwards in fixed-size parallel chunks.
fn materialize_negatives(
    batch: &[usize],
    source: &NegativeSource<'_>,
    dataset: &KgDataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<Triple>> {
    match source {
        NegativeSource::Random => Ok(batch
            .iter()
            .map(|&i| random_negative(&dataset.train.triples[i], cfg.strategy, dataset, rng))
            .collect()),
        NegativeSource::Generator { gen, exclude_gold } => {
            let drawn: Vec<(usize, CorruptionSide, f64)> = batch
                .iter()
                .map(|&i| {
                    let pos = &dataset.train.triples[i];
                    let side = draw_side(cfg.strategy, dataset, pos.relation, rng);
                    (i, side, rng.uniform_f64())
                })
                .collect();
            let sampled: Vec<Result<Triple>> = drawn
                .par_chunks(GEN_SAMPLE_CHUNK)
                .flat_map_iter(|chunk| {
                    chunk.iter().map(|&(i, side, u)| {
                        gen.sample_negative_with(&dataset.train.triples[i], side, u, *exclude_gold)
                            .map(|n| n.negative)
                    })
                })
                .collect();
            sampled.into_iter().collect()
        }
    }
}

/// Positives per parallel sampling unit; fixed so chunk boundaries never
/// depend on thread count.
const GEN_SAMPLE_CHUNK: usize = 64;

/// One full pass over shuffled train triples updating the generator against
/// a frozen discriminator: sample a side and an entity per positive, score
/// the reward, and take one policy-gradient step per batch.
pub fn train_generator_pass(
    gen: &mut GeneratorModel,
    disc: &DiscriminatorModel,
    dataset: &KgDataset,
    cfg: &TrainConfig,
    opt: &mut GenOptimizer,
    rng: &mut Rng,
) -> Result<GenPassStats> {
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    rng.shuffle(&mut order);

    let mut reward_sum = 0.0f64;
    for batch in order.chunks(cfg.batch_size) {
        let drawn: Vec<(usize, CorruptionSide, f64)> = batch
            .iter()
            .map(|&i| {
                let pos = &dataset.train.triples[i];
                let side = draw_side(cfg.strategy, dataset, pos.relation, rng);
                (i, side, rng.uniform_f64())
            })
            .collect();
        let samples: Vec<Result<PolicySample>> = drawn
            .par_chunks(GEN_SAMPLE_CHUNK)
            .flat_map_iter(|chunk| {
                chunk.iter().map(|&(i, side, u)| {
                    let positive = dataset.train.triples[i];
                    let negative: GeneratedNegative =
                        gen.sample_negative_with(&positive, side, u, cfg.exclude_gold)?;
                    let reward =
                        crate::generator::reward(disc, &positive, &negative.negative, cfg.margin)?;
                    Ok(PolicySample {
                        positive,
                        negative,
                        reward,
                    })
                })
            })
            .collect();
        let samples: Vec<PolicySample> = samples.into_iter().collect::<Result<_>>()?;
        reward_sum += samples.iter().map(|s| s.reward).sum::<f64>();
        policy_gradient_step(gen, &samples, opt, cfg.lr, cfg.gen_l2)?;
    }

    Ok(GenPassStats {
        mean_reward: reward_sum / dataset.train.len().max(1) as f64,
    })
}

/// Which loop a report row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Random-negative warmup inside a gan-pretrain run.
    Pretrain,
    /// Discriminator pass (random-baseline or adversarial).
    Disc,
    /// Generator pass.
    Gen,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Disc => "disc",
            Phase::Gen => "gen",
        }
    }
}

/// One report row: a single full pass.
#[derive(Debug, Clone)]
pub struct EpochRow {
    pub epoch: usize,
    pub phase: Phase,
    pub mean_loss: Option<f64>,
    pub violation_rate: Option<f64>,
    pub mean_reward: Option<f64>,
}

impl EpochRow {
    pub fn to_csv(&self) -> String {
        fn field(x: Option<f64>) -> String {
            x.map(|v| v.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{}",
            self.epoch,
            self.phase.label(),
            field(self.mean_loss),
            field(self.violation_rate),
            field(self.mean_reward)
        )
    }
}

/// Per-pass training log plus total wall-clock time.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    pub wall: Duration,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "epoch,phase,mean_loss,violation_rate,mean_reward";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for row in &self.rows {
            writeln!(w, "{}", row.to_csv())?;
        }
        Ok(())
    }
}

/// Final models and the training log.
pub struct TrainOutcome {
    pub disc: DiscriminatorModel,
    pub gen: Option<GeneratorModel>,
    pub report: TrainReport,
}

/// Row observer: called with each finished pass row.
pub type RowCallback<'a> = &'a mut dyn FnMut(&EpochRow);
/// Epoch observer: called after each outer epoch with the current
/// discriminator.
pub type EpochCallback<'a> = &'a mut dyn FnMut(usize, &DiscriminatorModel);

/// Optional observers for a training run.
#[derive(Default)]
pub struct TrainHooks<'a> {
    /// Receives the CSV header and one line per pass, as they complete.
    pub csv_sink: Option<&'a mut dyn Write>,
    /// Called with each finished row.
    pub on_row: Option<RowCallback<'a>>,
    /// Called after each outer epoch with the current discriminator.
    pub on_epoch: Option<EpochCallback<'a>>,
}

/// Run a full training job per the configured regime. The discriminator's
/// embeddings are the run's output representation; the generator is returned
/// for the adversarial regimes.
pub fn train(
    cfg: &TrainConfig,
    dataset: &KgDataset,
    pretrained: Option<DiscriminatorModel>,
    mut hooks: TrainHooks<'_>,
) -> Result<TrainOutcome> {
    if cfg.regime == Regime::GanPretrain && pretrained.is_none() && cfg.pretrain_epochs == 0 {
        return Err(Error::Config(
            "gan-pretrain requires a pretrained discriminator (--init-from) or --pretrain-epochs > 0"
                .into(),
        ));
    }
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport::default();
    if let Some(sink) = hooks.csv_sink.as_deref_mut() {
        writeln!(sink, "{}", TrainReport::CSV_HEADER)?;
    }

    let push_row =
        |report: &mut TrainReport, hooks: &mut TrainHooks<'_>, row: EpochRow| -> Result<()> {
            if let Some(sink) = hooks.csv_sink.as_deref_mut() {
                writeln!(sink, "{}", row.to_csv())?;
            }
            if let Some(cb) = hooks.on_row.as_deref_mut() {
                cb(&row);
            }
            report.rows.push(row);
            Ok(())
        };

    // Discriminator initialization, running the internal random-sampling
    // warmup for gan-pretrain when no pretrained model was supplied.
    let mut disc = match (cfg.regime, pretrained) {
        (Regime::GanPretrain, Some(p)) => p,
        (regime, _) => {
            let mut d = DiscriminatorModel::init(
                cfg.kind,
                cfg.dissimilarity,
                dataset.n_entities(),
                dataset.n_relations(),
                cfg.dim,
                &mut rng,
            );
            if regime == Regime::GanPretrain {
                let mut opt = DiscOptimizer::new(&d);
                for epoch in 0..cfg.pretrain_epochs {
                    let stats = train_discriminator_pass(
                        &mut d,
                        &NegativeSource::Random,
                        dataset,
                        cfg,
                        &mut opt,
                        &mut rng,
                    )?;
                    push_row(
                        &mut report,
                        &mut hooks,
                        EpochRow {
                            epoch,
                            phase: Phase::Pretrain,
                            mean_loss: Some(stats.mean_loss),
                            violation_rate: Some(stats.violation_rate),
                            mean_reward: None,
                        },
                    )?;
                }
            }
            d
        }
    };

    let mut gen = cfg.regime.uses_generator().then(|| {
        GeneratorModel::init(
            dataset.n_entities(),
            dataset.n_relations(),
            cfg.gen_dim(),
            cfg.gen_hidden(),
            &mut rng,
        )
    });

    let mut disc_opt = DiscOptimizer::new(&disc);
    let mut gen_opt = gen.as_ref().map(GenOptimizer::new);

    for epoch in 0..cfg.epochs {
        match (&mut gen, &mut gen_opt) {
            (Some(gen), Some(gen_opt)) => {
                for _ in 0..cfg.g_passes {
                    let stats = train_generator_pass(gen, &disc, dataset, cfg, gen_opt, &mut rng)?;
                    push_row(
                        &mut report,
                        &mut hooks,
                        EpochRow {
                            epoch,
                            phase: Phase::Gen,
                            mean_loss: None,
                            violation_rate: None,
                            mean_reward: Some(stats.mean_reward),
                        },
                    )?;
                }
                for _ in 0..cfg.d_passes {
                    let source = NegativeSource::Generator {
                        gen,
                        exclude_gold: cfg.exclude_gold,
                    };
                    let stats = train_discriminator_pass(
                        &mut disc,
                        &source,
                        dataset,
                        cfg,
                        &mut disc_opt,
                        &mut rng,
                    )?;
                    push_row(
                        &mut report,
                        &mut hooks,
                        EpochRow {
                            epoch,
                            phase: Phase::Disc,
                            mean_loss: Some(stats.mean_loss),
                            violation_rate: Some(stats.violation_rate),
                            mean_reward: None,
                        },
                    )?;
                }
            }
            _ => {
                for _ in 0..cfg.d_passes {
                    let stats = train_discriminator_pass(
                        &mut disc,
                        &NegativeSource::Random,
                        dataset,
                        cfg,
                        &mut disc_opt,
                        &mut rng,
                    )?;
                    push_row(
                        &mut report,
                        &mut hooks,
                        EpochRow {
                            epoch,
                            phase: Phase::Disc,
                            mean_loss: Some(stats.mean_loss),
                            violation_rate: Some(stats.violation_rate),
                            mean_reward: None,
                        },
                    )?;
                }
            }
        }
        if let Some(cb) = hooks.on_epoch.as_deref_mut() {
            cb(epoch, &disc);
        }
    }

    report.wall = start.elapsed();
    Ok(TrainOutcome { disc, gen, report })
}
