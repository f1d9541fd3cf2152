//! The negative-sampling policy network.
//!
//! Given a positive triple and a corruption side, the generator embeds the
//! remaining (entity, relation) pair — using a reverse-relation embedding
//! when the tail is being replaced — feeds the concatenation through a
//! two-layer ReLU network, and softmaxes over the whole entity set. The
//! sampled entity replaces the chosen side. Training maximizes the expected
//! discriminator reward tanh(f_pos - f_neg + margin) by REINFORCE, with L2
//! regularization on all generator parameters.
//!
//! The generator owns its embeddings; nothing is shared with the
//! discriminator.

use rayon::prelude::*;

use crate::data::{CorruptionSide, CorruptionStrategy, KgDataset, Triple};
use crate::error::{Error, Result};
use crate::scorer::DiscriminatorModel;
use crate::tensor::{adam_step, sample_categorical_with, softmax, AdamState, DenseMatrix, Rng};

/// A sampled corruption, with enough bookkeeping to train on it later.
/// Slots other than `side` always match the source positive; the sampled
/// entity may coincide with the original unless gold exclusion is on.
#[derive(Debug, Clone)]
pub struct GeneratedNegative {
    pub negative: Triple,
    pub sampled_entity: usize,
    pub log_prob: f64,
    pub side: CorruptionSide,
}

/// One policy-gradient training example.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub positive: Triple,
    pub negative: GeneratedNegative,
    pub reward: f64,
}

/// The policy network: its own entity embeddings, forward and reverse
/// relation embeddings, and a two-layer fully-connected net over the
/// concatenated input pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    /// |E| x d_g.
    pub entity_emb: DenseMatrix,
    /// 2|R| x d_g: row r is the forward relation, row |R|+r its reverse.
    pub relation_emb: DenseMatrix,
    /// (2 d_g) x h_g.
    pub w1: DenseMatrix,
    /// 1 x h_g.
    pub b1: DenseMatrix,
    /// h_g x |E|.
    pub w2: DenseMatrix,
    /// 1 x |E|.
    pub b2: DenseMatrix,
}

impl GeneratorModel {
    /// Xavier-uniform layers, zero biases, embeddings uniform in
    /// [-6/sqrt(d_g), 6/sqrt(d_g)].
    pub fn init(
        n_entities: usize,
        n_relations: usize,
        emb_dim: usize,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let bound = 6.0 / (emb_dim as f32).sqrt();
        let mut uniform = |rows: usize, cols: usize, b: f32| {
            let mut m = DenseMatrix::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.uniform_range(-b, b);
            }
            m
        };
        let entity_emb = uniform(n_entities, emb_dim, bound);
        let relation_emb = uniform(2 * n_relations, emb_dim, bound);
        let xavier1 = (6.0 / (2 * emb_dim + hidden_dim) as f32).sqrt();
        let w1 = uniform(2 * emb_dim, hidden_dim, xavier1);
        let xavier2 = (6.0 / (hidden_dim + n_entities) as f32).sqrt();
        let w2 = uniform(hidden_dim, n_entities, xavier2);
        GeneratorModel {
            entity_emb,
            relation_emb,
            w1,
            b1: DenseMatrix::zeros(1, hidden_dim),
            w2,
            b2: DenseMatrix::zeros(1, n_entities),
        }
    }

    /// All-zero parameters: the policy is exactly uniform over entities.
    pub fn zeros(n_entities: usize, n_relations: usize, emb_dim: usize, hidden_dim: usize) -> Self {
        GeneratorModel {
            entity_emb: DenseMatrix::zeros(n_entities, emb_dim),
            relation_emb: DenseMatrix::zeros(2 * n_relations, emb_dim),
            w1: DenseMatrix::zeros(2 * emb_dim, hidden_dim),
            b1: DenseMatrix::zeros(1, hidden_dim),
            w2: DenseMatrix::zeros(hidden_dim, n_entities),
            b2: DenseMatrix::zeros(1, n_entities),
        }
    }

    pub fn n_entities(&self) -> usize {
        self.entity_emb.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_emb.rows() / 2
    }

    pub fn emb_dim(&self) -> usize {
        self.entity_emb.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.cols()
    }

    /// Raw little-endian bytes of every parameter tensor in fixed order
    /// (entity, relation, w1, b1, w2, b2), for checkpointing and bit-identity
    /// checks.
    pub fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in gen_tensors(self) {
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Embedding rows feeding the network: (t, r) when replacing the head,
    /// (h, r^-1) when replacing the tail.
    fn input_rows(&self, positive: &Triple, side: CorruptionSide) -> (usize, usize) {
        match side {
            CorruptionSide::Head => (positive.tail, positive.relation),
            CorruptionSide::Tail => (positive.head, self.n_relations() + positive.relation),
        }
    }

    fn check_triple(&self, t: &Triple) -> Result<()> {
        if t.head >= self.n_entities() || t.tail >= self.n_entities() {
            return Err(Error::contract(format!(
                "entity id out of range: h={}, t={}, |E|={}",
                t.head,
                t.tail,
                self.n_entities()
            )));
        }
        if t.relation >= self.n_relations() {
            return Err(Error::contract(format!(
                "relation id out of range: r={}, |R|={}",
                t.relation,
                self.n_relations()
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, positive: &Triple, side: CorruptionSide) -> Result<ForwardCache> {
        self.check_triple(positive)?;
        let (ent_row, rel_row) = self.input_rows(positive, side);
        let hidden = self.hidden_dim();

        // Layer 1 + ReLU over the concatenated pair [ent; rel].
        let mut a1 = self.b1.row(0).to_vec();
        for (m, &x) in self
            .entity_emb
            .row(ent_row)
            .iter()
            .chain(self.relation_emb.row(rel_row))
            .enumerate()
        {
            if x != 0.0 {
                let w_row = self.w1.row(m);
                for j in 0..hidden {
                    a1[j] += x * w_row[j];
                }
            }
        }
        let h1: Vec<f32> = a1.iter().map(|&v| v.max(0.0)).collect();

        // Layer 2: logits over the whole entity set.
        let mut logits = self.b2.row(0).to_vec();
        for (j, &h) in h1.iter().enumerate() {
            if h != 0.0 {
                let w_row = self.w2.row(j);
                for (l, &w) in logits.iter_mut().zip(w_row) {
                    *l += h * w;
                }
            }
        }
        let probs = softmax(&logits)?;
        Ok(ForwardCache {
            ent_row,
            rel_row,
            a1,
            h1,
            probs,
        })
    }

    /// Probability distribution over all entities for replacing `side` of
    /// `positive`. Sums to 1 within 1e-6.
    pub fn forward(&self, positive: &Triple, side: CorruptionSide) -> Result<Vec<f32>> {
        Ok(self.forward_cached(positive, side)?.probs)
    }

    /// Draw a corruption side per the strategy, then an entity from the
    /// policy.
    pub fn sample_negative(
        &self,
        positive: &Triple,
        strategy: CorruptionStrategy,
        dataset: &KgDataset,
        rng: &mut Rng,
        exclude_gold: bool,
    ) -> Result<GeneratedNegative> {
        let side = crate::data::draw_side(strategy, dataset, positive.relation, rng);
        let u = rng.uniform_f64();
        self.sample_negative_with(positive, side, u, exclude_gold)
    }

    /// Deterministic variant with a pre-drawn side and uniform value, used by
    /// the training passes so mini-batches can be generated in parallel.
    pub fn sample_negative_with(
        &self,
        positive: &Triple,
        side: CorruptionSide,
        u: f64,
        exclude_gold: bool,
    ) -> Result<GeneratedNegative> {
        let cache = self.forward_cached(positive, side)?;
        let gold = positive.entity_on(side);
        let idx = if exclude_gold && cache.probs.len() > 1 {
            sample_excluding(&cache.probs, gold, u)
        } else {
            sample_categorical_with(&cache.probs, u)?
        };
        let p = cache.probs[idx].max(f32::MIN_POSITIVE) as f64;
        Ok(GeneratedNegative {
            negative: positive.with_side(side, idx),
            sampled_entity: idx,
            log_prob: p.ln(),
            side,
        })
    }
}

/// Inverse-CDF draw over `probs` with index `gold` masked out. The log-prob
/// recorded for training still refers to the unmasked policy. Falls back to a
/// uniform draw over the remaining indices if they carry no mass.
fn sample_excluding(probs: &[f32], gold: usize, u: f64) -> usize {
    let total: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != gold)
        .map(|(_, &p)| p as f64)
        .sum();
    if total <= 1e-300 {
        let k = ((u * (probs.len() - 1) as f64) as usize).min(probs.len() - 2);
        return if k >= gold { k + 1 } else { k };
    }
    let target = u * total;
    let mut acc = 0.0f64;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if i == gold {
            continue;
        }
        acc += p as f64;
        if target < acc {
            return i;
        }
        if p > 0.0 {
            last = Some(i);
        }
    }
    last.expect("nonzero total mass implies a nonzero entry")
}

/// Reward the discriminator pays for a generated negative:
/// tanh(f_pos - f_neg + margin), strictly inside (-1, 1).
pub fn reward(
    disc: &DiscriminatorModel,
    positive: &Triple,
    negative: &Triple,
    margin: f64,
) -> Result<f64> {
    let f_pos = disc.score_triple(positive)?;
    let f_neg = disc.score_triple(negative)?;
    let r = (f_pos - f_neg + margin).tanh();
    // tanh rounds to exactly +-1.0 past ~19; keep the documented open bound.
    Ok(r.clamp(-ONE_MINUS_EPS, ONE_MINUS_EPS))
}

const ONE_MINUS_EPS: f64 = 1.0 - f64::EPSILON;

/// Adam states and reusable gradient buffers for every generator tensor, in
/// the fixed order (entity, relation, w1, b1, w2, b2).
pub struct GenOptimizer {
    states: Vec<AdamState>,
    grads: Vec<DenseMatrix>,
}

impl GenOptimizer {
    pub fn new(gen: &GeneratorModel) -> Self {
        let tensors = gen_tensors(gen);
        GenOptimizer {
            states: tensors.iter().map(|t| AdamState::for_param(t)).collect(),
            grads: tensors
                .iter()
                .map(|t| DenseMatrix::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }
}

/// Names for the generator's six parameter tensors, in the fixed
/// optimizer/checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenParam {
    EntityEmb,
    RelationEmb,
    W1,
    B1,
    W2,
    B2,
}

impl GenParam {
    pub const ALL: [GenParam; 6] = [
        GenParam::EntityEmb,
        GenParam::RelationEmb,
        GenParam::W1,
        GenParam::B1,
        GenParam::W2,
        GenParam::B2,
    ];
}

impl GeneratorModel {
    pub fn param(&self, p: GenParam) -> &DenseMatrix {
        match p {
            GenParam::EntityEmb => &self.entity_emb,
            GenParam::RelationEmb => &self.relation_emb,
            GenParam::W1 => &self.w1,
            GenParam::B1 => &self.b1,
            GenParam::W2 => &self.w2,
            GenParam::B2 => &self.b2,
        }
    }

    pub fn param_mut(&mut self, p: GenParam) -> &mut DenseMatrix {
        match p {
            GenParam::EntityEmb => &mut self.entity_emb,
            GenParam::RelationEmb => &mut self.relation_emb,
            GenParam::W1 => &mut self.w1,
            GenParam::B1 => &mut self.b1,
            GenParam::W2 => &mut self.w2,
            GenParam::B2 => &mut self.b2,
        }
    }
}

fn gen_tensors(g: &GeneratorModel) -> [&DenseMatrix; 6] {
    GenParam::ALL.map(|p| g.param(p))
}

/// Gradients of a (weighted sum of) log-probabilities w.r.t. the generator
/// parameters. Embedding gradients stay sparse (two rows per sample, possibly
/// repeated); layer gradients are dense. Also the per-chunk accumulator of
/// the batch backward pass.
#[derive(Debug, Clone)]
pub struct LogProbGradients {
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
    pub entity_rows: Vec<(usize, Vec<f32>)>,
    pub relation_rows: Vec<(usize, Vec<f32>)>,
}

impl LogProbGradients {
    fn new(gen: &GeneratorModel) -> Self {
        LogProbGradients {
            w1: DenseMatrix::zeros(gen.w1.rows(), gen.w1.cols()),
            b1: DenseMatrix::zeros(1, gen.b1.cols()),
            w2: DenseMatrix::zeros(gen.w2.rows(), gen.w2.cols()),
            b2: DenseMatrix::zeros(1, gen.b2.cols()),
            entity_rows: Vec::new(),
            relation_rows: Vec::new(),
        }
    }

    /// Gradient value at one parameter coordinate, summing repeated sparse
    /// embedding entries.
    pub fn coord(&self, p: GenParam, row: usize, col: usize) -> f64 {
        let sparse_sum = |rows: &[(usize, Vec<f32>)]| {
            rows.iter()
                .filter(|(r, _)| *r == row)
                .map(|(_, v)| v[col] as f64)
                .sum()
        };
        match p {
            GenParam::EntityEmb => sparse_sum(&self.entity_rows),
            GenParam::RelationEmb => sparse_sum(&self.relation_rows),
            GenParam::W1 => self.w1.get(row, col) as f64,
            GenParam::B1 => self.b1.get(row, col) as f64,
            GenParam::W2 => self.w2.get(row, col) as f64,
            GenParam::B2 => self.b2.get(row, col) as f64,
        }
    }
}

/// Analytic gradient of `log p(sampled | input pair)` w.r.t. every generator
/// parameter, for one (positive, side, sampled entity) configuration.
pub fn log_prob_gradient(
    gen: &GeneratorModel,
    positive: &Triple,
    side: CorruptionSide,
    sampled_entity: usize,
) -> Result<LogProbGradients> {
    gen.check_triple(positive)?;
    if sampled_entity >= gen.n_entities() {
        return Err(Error::contract("sampled entity out of range"));
    }
    let mut acc = LogProbGradients::new(gen);
    let sample = PolicySample {
        positive: *positive,
        negative: GeneratedNegative {
            negative: positive.with_side(side, sampled_entity),
            sampled_entity,
            log_prob: 0.0,
            side,
        },
        reward: 1.0,
    };
    backward_log_prob(gen, &sample, 1.0, &mut acc);
    Ok(acc)
}

/// Samples per parallel work unit inside one batch. Fixed so that chunk
/// boundaries (and therefore f32 reduction order) never depend on thread
/// count.
const BATCH_CHUNK: usize = 64;

/// One REINFORCE ascent step from a batch of (positive, sampled negative,
/// reward) examples: accumulates grad log-prob times reward, averages over
/// the batch, applies L2 regularization on all parameters, and takes an Adam
/// step in the ascent direction.
pub fn policy_gradient_step(
    gen: &mut GeneratorModel,
    batch: &[PolicySample],
    opt: &mut GenOptimizer,
    lr: f32,
    l2_coeff: f32,
) -> Result<()> {
    if batch.is_empty() {
        return Ok(());
    }
    for s in batch {
        if !s.reward.is_finite() {
            return Err(Error::contract("non-finite reward in policy batch"));
        }
        gen.check_triple(&s.positive)?;
        if s.negative.sampled_entity >= gen.n_entities() {
            return Err(Error::contract("sampled entity out of range"));
        }
    }
    if opt.states[0].m.rows() != gen.entity_emb.rows() {
        return Err(Error::contract("optimizer state shape mismatch"));
    }

    let inv_batch = 1.0 / batch.len() as f32;
    let chunks: Vec<LogProbGradients> = batch
        .par_chunks(BATCH_CHUNK)
        .map(|chunk| {
            let mut acc = LogProbGradients::new(gen);
            for s in chunk {
                let weight = s.reward as f32 * inv_batch;
                backward_log_prob(gen, s, weight, &mut acc);
            }
            acc
        })
        .collect();

    // Fold chunks in index order, then flip sign and add the L2 term so the
    // descent-form Adam maximizes reward: grad = l2*theta - mean(R * dlogp).
    for g in &mut opt.grads {
        g.fill(0.0);
    }
    for c in chunks {
        for (row, vals) in c.entity_rows {
            opt.grads[0].add_scaled_row(row, &vals, 1.0);
        }
        for (row, vals) in c.relation_rows {
            opt.grads[1].add_scaled_row(row, &vals, 1.0);
        }
        opt.grads[2].add_scaled(&c.w1, 1.0);
        opt.grads[3].add_scaled(&c.b1, 1.0);
        opt.grads[4].add_scaled(&c.w2, 1.0);
        opt.grads[5].add_scaled(&c.b2, 1.0);
    }
    for ((p, grad), state) in GenParam::ALL
        .into_iter()
        .zip(&mut opt.grads)
        .zip(&mut opt.states)
    {
        let param = gen.param_mut(p);
        for (g, &v) in grad.data_mut().iter_mut().zip(param.data()) {
            *g = l2_coeff * v - *g;
        }
        adam_step(param, grad, state, lr)?;
    }
    Ok(())
}

/// Accumulate `weight * d log p(sampled) / d theta` into `acc`.
fn backward_log_prob(
    gen: &GeneratorModel,
    s: &PolicySample,
    weight: f32,
    acc: &mut LogProbGradients,
) {
    let cache = gen
        .forward_cached(&s.positive, s.negative.side)
        .expect("ids validated before backward");
    let hidden = gen.hidden_dim();
    let d = gen.emb_dim();

    // d log p_i / d logits = onehot_i - p.
    let mut dlogits: Vec<f32> = cache.probs.iter().map(|&p| -p * weight).collect();
    dlogits[s.negative.sampled_entity] += weight;

    acc.b2.add_scaled_row(0, &dlogits, 1.0);
    let mut dh1 = vec![0.0f32; hidden];
    for (j, dh) in dh1.iter_mut().enumerate() {
        let h = cache.h1[j];
        let w_row = gen.w2.row(j);
        if h != 0.0 {
            acc.w2.add_scaled_row(j, &dlogits, h);
        }
        let mut dot = 0.0f32;
        for (w, dl) in w_row.iter().zip(&dlogits) {
            dot += w * dl;
        }
        *dh = dot;
    }

    let da1: Vec<f32> = dh1
        .iter()
        .zip(&cache.a1)
        .map(|(&dh, &a)| if a > 0.0 { dh } else { 0.0 })
        .collect();
    acc.b1.add_scaled_row(0, &da1, 1.0);

    let ent = gen.entity_emb.row(cache.ent_row);
    let rel = gen.relation_emb.row(cache.rel_row);
    let mut dx = vec![0.0f32; 2 * d];
    for (m, &x) in ent.iter().chain(rel).enumerate() {
        if x != 0.0 {
            acc.w1.add_scaled_row(m, &da1, x);
        }
        let w_row = gen.w1.row(m);
        let mut dot = 0.0f32;
        for (w, da) in w_row.iter().zip(&da1) {
            dot += w * da;
        }
        dx[m] = dot;
    }
    acc.entity_rows.push((cache.ent_row, dx[..d].to_vec()));
    acc.relation_rows.push((cache.rel_row, dx[d..].to_vec()));
}

struct ForwardCache {
    ent_row: usize,
    rel_row: usize,
    a1: Vec<f32>,
    h1: Vec<f32>,
    probs: Vec<f32>,
}
