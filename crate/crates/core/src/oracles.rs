//! Independent reference implementations used by the verification suites.
//!
//! Everything here recomputes results from first principles in f64, by a
//! deliberately different route than the production code (explicit projection
//! matrices instead of dot-product shortcuts, materialized candidate sets
//! instead of incremental counting), so tests can compare the two.

use crate::data::{CorruptionSide, KgDataset, Triple};
use crate::generator::{GenParam, GeneratorModel};
use crate::scorer::{DiscriminatorModel, Dissimilarity, KindParams, ParamSlot, ScorerKind};

fn row64(m: &crate::tensor::DenseMatrix, r: usize) -> Vec<f64> {
    m.row(r).iter().map(|&x| x as f64).collect()
}

/// Score of (h, r, t) recomputed in f64 straight from the model equations.
pub fn score_f64(model: &DiscriminatorModel, h: usize, r: usize, t: usize) -> f64 {
    let residual = residual_f64(model, h, r, t);
    match model.dissimilarity {
        Dissimilarity::L1 => residual.iter().map(|x| x.abs()).sum(),
        Dissimilarity::L2 => residual.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// The translated residual vector of (h, r, t) in f64, materializing the
/// per-kind projection matrices explicitly.
pub fn residual_f64(model: &DiscriminatorModel, h: usize, r: usize, t: usize) -> Vec<f64> {
    let d = model.dim;
    let he = row64(&model.entity_emb, h);
    let te = row64(&model.entity_emb, t);
    let re = row64(&model.relation_emb, r);
    let residual: Vec<f64> = match &model.params {
        KindParams::None => match model.kind {
            ScorerKind::Unstructured => (0..d).map(|i| he[i] - te[i]).collect(),
            _ => (0..d).map(|i| he[i] + re[i] - te[i]).collect(),
        },
        KindParams::TransH { normals } => {
            let w = row64(normals, r);
            let wh: f64 = w.iter().zip(&he).map(|(a, b)| a * b).sum();
            let wt: f64 = w.iter().zip(&te).map(|(a, b)| a * b).sum();
            let h_perp: Vec<f64> = (0..d).map(|i| he[i] - wh * w[i]).collect();
            let t_perp: Vec<f64> = (0..d).map(|i| te[i] - wt * w[i]).collect();
            (0..d).map(|i| h_perp[i] + re[i] - t_perp[i]).collect()
        }
        KindParams::TransR { proj } => {
            let m = row64(proj, r);
            let mh = matvec(&m, &he, d);
            let mt = matvec(&m, &te, d);
            (0..d).map(|i| mh[i] + re[i] - mt[i]).collect()
        }
        KindParams::TransD {
            entity_proj,
            relation_proj,
        } => {
            let hp = row64(entity_proj, h);
            let tp = row64(entity_proj, t);
            let rp = row64(relation_proj, r);
            // Materialize M_rh = r_p h_p^T + I and M_rt = r_p t_p^T + I.
            let m_rh = outer_plus_identity(&rp, &hp, d);
            let m_rt = outer_plus_identity(&rp, &tp, d);
            let mh = matvec(&m_rh, &he, d);
            let mt = matvec(&m_rt, &te, d);
            (0..d).map(|i| mh[i] + re[i] - mt[i]).collect()
        }
        KindParams::Se {
            head_proj,
            tail_proj,
        } => {
            let a = row64(head_proj, r);
            let b = row64(tail_proj, r);
            let ah = matvec(&a, &he, d);
            let bt = matvec(&b, &te, d);
            (0..d).map(|i| ah[i] - bt[i]).collect()
        }
    };
    residual
}

/// Central finite difference of the score w.r.t. one parameter coordinate,
/// evaluated through the f64 score oracle at the actually-achieved f32 step.
#[allow(clippy::too_many_arguments)]
pub fn fd_score_grad(
    model: &DiscriminatorModel,
    h: usize,
    r: usize,
    t: usize,
    slot: ParamSlot,
    row: usize,
    col: usize,
    step: f32,
) -> f64 {
    let mut plus = model.clone();
    let mut minus = model.clone();
    let v = model.param(slot).get(row, col);
    plus.param_mut(slot).set(row, col, v + step);
    minus.param_mut(slot).set(row, col, v - step);
    let hi = plus.param(slot).get(row, col) as f64;
    let lo = minus.param(slot).get(row, col) as f64;
    (score_f64(&plus, h, r, t) - score_f64(&minus, h, r, t)) / (hi - lo)
}

/// Central finite difference of the generator log-probability w.r.t. one
/// parameter coordinate, through the f64 forward oracle.
#[allow(clippy::too_many_arguments)]
pub fn fd_gen_log_prob_grad(
    gen: &GeneratorModel,
    positive: &Triple,
    side: CorruptionSide,
    sampled: usize,
    param: GenParam,
    row: usize,
    col: usize,
    step: f32,
) -> f64 {
    let mut plus = gen.clone();
    let mut minus = gen.clone();
    let v = gen.param(param).get(row, col);
    plus.param_mut(param).set(row, col, v + step);
    minus.param_mut(param).set(row, col, v - step);
    let hi = plus.param(param).get(row, col) as f64;
    let lo = minus.param(param).get(row, col) as f64;
    (gen_log_prob_f64(&plus, positive, side, sampled)
        - gen_log_prob_f64(&minus, positive, side, sampled))
        / (hi - lo)
}

fn matvec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| (0..d).map(|k| m[i * d + k] * v[k]).sum())
        .collect()
}

fn outer_plus_identity(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            m[i * d + k] = a[i] * b[k] + if i == k { 1.0 } else { 0.0 };
        }
    }
    m
}

/// First-layer pre-activations of the generator in f64; used to keep
/// gradient checks away from ReLU kinks.
pub fn gen_preactivations_f64(
    gen: &GeneratorModel,
    positive: &Triple,
    side: CorruptionSide,
) -> Vec<f64> {
    let (ent_row, rel_row) = match side {
        CorruptionSide::Head => (positive.tail, positive.relation),
        CorruptionSide::Tail => (positive.head, gen.n_relations() + positive.relation),
    };
    let hidden = gen.hidden_dim();
    let x: Vec<f64> = gen
        .entity_emb
        .row(ent_row)
        .iter()
        .chain(gen.relation_emb.row(rel_row))
        .map(|&v| v as f64)
        .collect();
    let mut a1: Vec<f64> = gen.b1.row(0).iter().map(|&v| v as f64).collect();
    for (m, &xv) in x.iter().enumerate() {
        let w_row = gen.w1.row(m);
        for j in 0..hidden {
            a1[j] += xv * w_row[j] as f64;
        }
    }
    a1
}

/// Log-probability of the generator picking `sampled`, recomputed in f64.
pub fn gen_log_prob_f64(
    gen: &GeneratorModel,
    positive: &Triple,
    side: CorruptionSide,
    sampled: usize,
) -> f64 {
    let a1 = gen_preactivations_f64(gen, positive, side);
    let h1: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();
    let mut logits: Vec<f64> = gen.b2.row(0).iter().map(|&v| v as f64).collect();
    for (j, &hv) in h1.iter().enumerate() {
        let w_row = gen.w2.row(j);
        for (l, &w) in logits.iter_mut().zip(w_row) {
            *l += hv * w as f64;
        }
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits[sampled] - lse
}

/// Brute-force link-prediction ranks: materialize every candidate triple,
/// check the filter by direct set membership, sort by score, and locate the
/// gold. Scores come from the same public scoring function the evaluator
/// uses; the independence is in the candidate/filter/counting route.
pub fn rank_oracle(
    disc: &DiscriminatorModel,
    dataset: &KgDataset,
    triple: &Triple,
    side: CorruptionSide,
) -> (usize, usize) {
    let gold = triple.entity_on(side);
    let gold_score = disc.score_triple(triple).expect("ids in range");
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(dataset.n_entities());
    for e in 0..dataset.n_entities() {
        if e == gold {
            continue;
        }
        let cand = triple.with_side(side, e);
        let known = dataset.filter_index().contains(&cand);
        scored.push((disc.score_triple(&cand).expect("ids in range"), known));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let raw = 1 + scored.iter().take_while(|&&(s, _)| s < gold_score).count();
    let filtered = 1 + scored
        .iter()
        .take_while(|&&(s, _)| s < gold_score)
        .filter(|&&(_, known)| !known)
        .count();
    (raw, filtered)
}
