//! Discriminator score functions, their analytic parameter gradients, and the
//! norm-constraint projection.
//!
//! Every kind scores a triple as the L1 or L2 norm of a translated residual
//! vector; lower scores mean more plausible triples. The residuals are:
//!
//! - `unstructured`:  h - t
//! - `se`:            A_r h - B_r t          (two per-relation d x d matrices)
//! - `transe`:        h + r - t
//! - `transh`:        (h - (w.h) w) + r - (t - (w.t) w)
//! - `transr`:        M_r h + r - M_r t
//! - `transd`:        (r_p h_p^T + I) h + r - (r_p t_p^T + I) t
//!
//! Gradients are hand-derived; the L1 subgradient uses sign(0) = 0 so that
//! exactly-translated triples are stationary.

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, Rng};

/// The translation-family model computing the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScorerKind {
    Unstructured,
    StructuredEmbedding,
    TransE,
    TransH,
    TransR,
    TransD,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 6] = [
        ScorerKind::Unstructured,
        ScorerKind::StructuredEmbedding,
        ScorerKind::TransE,
        ScorerKind::TransH,
        ScorerKind::TransR,
        ScorerKind::TransD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Unstructured => "unstructured",
            ScorerKind::StructuredEmbedding => "se",
            ScorerKind::TransE => "transe",
            ScorerKind::TransH => "transh",
            ScorerKind::TransR => "transr",
            ScorerKind::TransD => "transd",
        }
    }

    pub fn parse(s: &str) -> Option<ScorerKind> {
        ScorerKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Which norm turns the residual into a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dissimilarity {
    L1,
    L2,
}

impl Dissimilarity {
    pub fn name(self) -> &'static str {
        match self {
            Dissimilarity::L1 => "l1",
            Dissimilarity::L2 => "l2",
        }
    }

    pub fn parse(s: &str) -> Option<Dissimilarity> {
        match s {
            "l1" => Some(Dissimilarity::L1),
            "l2" => Some(Dissimilarity::L2),
            _ => None,
        }
    }

    fn norm(self, v: &[f32]) -> f64 {
        match self {
            Dissimilarity::L1 => v.iter().map(|&x| (x as f64).abs()).sum(),
            Dissimilarity::L2 => v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt(),
        }
    }

    /// d norm / d residual. For L1, sign with sign(0) = 0; for L2, res/|res|
    /// with the all-zero residual mapped to the zero subgradient.
    fn norm_gradient(self, v: &[f32]) -> Vec<f32> {
        match self {
            Dissimilarity::L1 => v
                .iter()
                .map(|&x| {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            Dissimilarity::L2 => {
                let n = self.norm(v);
                if n == 0.0 {
                    vec![0.0; v.len()]
                } else {
                    v.iter().map(|&x| (x as f64 / n) as f32).collect()
                }
            }
        }
    }
}

/// Parameter tensors beyond the shared entity/relation embeddings.
#[derive(Debug, Clone, PartialEq)]
pub enum KindParams {
    /// Unstructured and TransE carry nothing extra.
    None,
    /// Per-relation hyperplane normals, kept unit-norm: |R| x d.
    TransH { normals: DenseMatrix },
    /// Per-relation projection matrices, one flattened d x d per row: |R| x d*d.
    TransR { proj: DenseMatrix },
    /// Per-entity and per-relation projection vectors: |E| x d and |R| x d.
    TransD {
        entity_proj: DenseMatrix,
        relation_proj: DenseMatrix,
    },
    /// Two per-relation projection matrices: each |R| x d*d.
    Se {
        head_proj: DenseMatrix,
        tail_proj: DenseMatrix,
    },
}

/// Which model tensor a gradient block addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamSlot {
    EntityEmb,
    RelationEmb,
    HyperplaneNormal,
    ProjMatrix,
    EntityProj,
    RelationProj,
    SeHeadMatrix,
    SeTailMatrix,
}

/// One gradient block: d values for vector rows, d*d for matrix rows.
#[derive(Debug, Clone)]
pub struct GradientEntry {
    pub slot: ParamSlot,
    pub row: usize,
    pub values: Vec<f32>,
}

/// Sparse analytic gradient of a score w.r.t. every parameter row it touches.
/// Entries for the same (slot, row) may repeat (e.g. self-loop triples) and
/// are summed by consumers.
#[derive(Debug, Clone, Default)]
pub struct ScoreGradient {
    pub entries: Vec<GradientEntry>,
}

impl ScoreGradient {
    fn push(&mut self, slot: ParamSlot, row: usize, values: Vec<f32>) {
        self.entries.push(GradientEntry { slot, row, values });
    }

    /// Gradient value at one parameter coordinate, summing repeated entries
    /// (matrix blocks use the flattened row-major index as `col`).
    pub fn coord(&self, slot: ParamSlot, row: usize, col: usize) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.slot == slot && e.row == row)
            .map(|e| e.values[col] as f64)
            .sum()
    }
}

/// The embedding model trained by the margin loss; its entity embeddings are
/// the artifact's output representation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    pub kind: ScorerKind,
    pub dissimilarity: Dissimilarity,
    pub dim: usize,
    /// |E| x d.
    pub entity_emb: DenseMatrix,
    /// |R| x d. Unused by the unstructured and SE scores but kept so every
    /// kind shares one layout.
    pub relation_emb: DenseMatrix,
    pub params: KindParams,
}

fn identity_rows(n: usize, d: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, d * d);
    for r in 0..n {
        let row = m.row_mut(r);
        for i in 0..d {
            row[i * d + i] = 1.0;
        }
    }
    m
}

impl DiscriminatorModel {
    /// Random initialization: embeddings uniform in [-6/sqrt(d), 6/sqrt(d)]
    /// then projected into the unit ball; projection matrices start as the
    /// identity and projection vectors as zero, so TransR/TransD/SE all start
    /// at their TransE/unstructured reduction.
    pub fn init(
        kind: ScorerKind,
        dissimilarity: Dissimilarity,
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let bound = 6.0 / (dim as f32).sqrt();
        let mut fill_uniform = |rows: usize| {
            let mut m = DenseMatrix::zeros(rows, dim);
            for v in m.data_mut() {
                *v = rng.uniform_range(-bound, bound);
            }
            m
        };
        let entity_emb = fill_uniform(n_entities);
        let relation_emb = fill_uniform(n_relations);
        let params = match kind {
            ScorerKind::Unstructured | ScorerKind::TransE => KindParams::None,
            ScorerKind::TransH => {
                let mut normals = fill_uniform(n_relations);
                for r in 0..n_relations {
                    normalize_row(&mut normals, r);
                }
                KindParams::TransH { normals }
            }
            ScorerKind::TransR => KindParams::TransR {
                proj: identity_rows(n_relations, dim),
            },
            ScorerKind::TransD => KindParams::TransD {
                entity_proj: DenseMatrix::zeros(n_entities, dim),
                relation_proj: DenseMatrix::zeros(n_relations, dim),
            },
            ScorerKind::StructuredEmbedding => KindParams::Se {
                head_proj: identity_rows(n_relations, dim),
                tail_proj: identity_rows(n_relations, dim),
            },
        };
        let mut model = DiscriminatorModel {
            kind,
            dissimilarity,
            dim,
            entity_emb,
            relation_emb,
            params,
        };
        model.project_constraints();
        model
    }

    pub fn n_entities(&self) -> usize {
        self.entity_emb.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_emb.rows()
    }

    fn check_ids(&self, h: usize, r: usize, t: usize) -> Result<()> {
        if h >= self.n_entities() || t >= self.n_entities() {
            return Err(Error::contract(format!(
                "entity id out of range: h={h}, t={t}, |E|={}",
                self.n_entities()
            )));
        }
        if r >= self.n_relations() {
            return Err(Error::contract(format!(
                "relation id out of range: r={r}, |R|={}",
                self.n_relations()
            )));
        }
        Ok(())
    }

    /// Residual vector whose norm is the score.
    fn residual(&self, h: usize, r: usize, t: usize) -> Vec<f32> {
        let d = self.dim;
        let he = self.entity_emb.row(h);
        let te = self.entity_emb.row(t);
        let re = self.relation_emb.row(r);
        match &self.params {
            KindParams::None => match self.kind {
                ScorerKind::Unstructured => (0..d).map(|i| he[i] - te[i]).collect(),
                _ => (0..d).map(|i| he[i] + re[i] - te[i]).collect(),
            },
            KindParams::TransH { normals } => {
                let w = normals.row(r);
                let wh = dot(w, he);
                let wt = dot(w, te);
                (0..d)
                    .map(|i| (he[i] - wh * w[i]) + re[i] - (te[i] - wt * w[i]))
                    .collect()
            }
            KindParams::TransR { proj } => {
                let m = proj.row(r);
                let mut out = vec![0.0f32; d];
                // residual = M (h - t) + r
                for i in 0..d {
                    let mrow = &m[i * d..(i + 1) * d];
                    let mut acc = 0.0f32;
                    for k in 0..d {
                        acc += mrow[k] * (he[k] - te[k]);
                    }
                    out[i] = acc + re[i];
                }
                out
            }
            KindParams::TransD {
                entity_proj,
                relation_proj,
            } => {
                let hp = entity_proj.row(h);
                let tp = entity_proj.row(t);
                let rp = relation_proj.row(r);
                let c = dot(hp, he) - dot(tp, te);
                (0..d).map(|i| he[i] + re[i] - te[i] + c * rp[i]).collect()
            }
            KindParams::Se {
                head_proj,
                tail_proj,
            } => {
                let a = head_proj.row(r);
                let b = tail_proj.row(r);
                let mut out = vec![0.0f32; d];
                for i in 0..d {
                    let arow = &a[i * d..(i + 1) * d];
                    let brow = &b[i * d..(i + 1) * d];
                    let mut acc = 0.0f32;
                    for k in 0..d {
                        acc += arow[k] * he[k] - brow[k] * te[k];
                    }
                    out[i] = acc;
                }
                out
            }
        }
    }

    /// Score f_r(h, t): the configured norm of the residual. Always >= 0,
    /// and 0 exactly when the residual is 0.
    pub fn score(&self, h: usize, r: usize, t: usize) -> Result<f64> {
        self.check_ids(h, r, t)?;
        Ok(self.dissimilarity.norm(&self.residual(h, r, t)))
    }

    /// Score of a triple value.
    pub fn score_triple(&self, t: &crate::data::Triple) -> Result<f64> {
        self.score(t.head, t.relation, t.tail)
    }

    pub(crate) fn score_unchecked(&self, h: usize, r: usize, t: usize) -> f64 {
        self.dissimilarity.norm(&self.residual(h, r, t))
    }

    /// Analytic gradient of the score w.r.t. every parameter row it touches.
    pub fn score_gradient(&self, h: usize, r: usize, t: usize) -> Result<ScoreGradient> {
        self.check_ids(h, r, t)?;
        let d = self.dim;
        let res = self.residual(h, r, t);
        let g = self.dissimilarity.norm_gradient(&res);
        let he = self.entity_emb.row(h);
        let te = self.entity_emb.row(t);
        let mut out = ScoreGradient::default();
        match &self.params {
            KindParams::None => match self.kind {
                ScorerKind::Unstructured => {
                    out.push(ParamSlot::EntityEmb, h, g.clone());
                    out.push(ParamSlot::EntityEmb, t, neg(&g));
                }
                _ => {
                    out.push(ParamSlot::EntityEmb, h, g.clone());
                    out.push(ParamSlot::RelationEmb, r, g.clone());
                    out.push(ParamSlot::EntityEmb, t, neg(&g));
                }
            },
            KindParams::TransH { normals } => {
                let w = normals.row(r);
                let gw = dot(&g, w);
                // d f / d h = g - (g.w) w ; d f / d t is its negation.
                let dh: Vec<f32> = (0..d).map(|i| g[i] - gw * w[i]).collect();
                out.push(ParamSlot::EntityEmb, h, dh.clone());
                out.push(ParamSlot::RelationEmb, r, g.clone());
                out.push(ParamSlot::EntityEmb, t, neg(&dh));
                // d f / d w = -((g.w) u + (w.u) g), u = h - t.
                let u: Vec<f32> = (0..d).map(|i| he[i] - te[i]).collect();
                let wu = dot(w, &u);
                let dw: Vec<f32> = (0..d).map(|i| -(gw * u[i] + wu * g[i])).collect();
                out.push(ParamSlot::HyperplaneNormal, r, dw);
            }
            KindParams::TransR { proj } => {
                let m = proj.row(r);
                // d f / d h = M^T g ; d f / d t = -M^T g.
                let mut mtg = vec![0.0f32; d];
                for i in 0..d {
                    let mrow = &m[i * d..(i + 1) * d];
                    for k in 0..d {
                        mtg[k] += mrow[k] * g[i];
                    }
                }
                out.push(ParamSlot::EntityEmb, h, mtg.clone());
                out.push(ParamSlot::RelationEmb, r, g.clone());
                out.push(ParamSlot::EntityEmb, t, neg(&mtg));
                // d f / d M = g (h - t)^T.
                let mut dm = vec![0.0f32; d * d];
                for i in 0..d {
                    for k in 0..d {
                        dm[i * d + k] = g[i] * (he[k] - te[k]);
                    }
                }
                out.push(ParamSlot::ProjMatrix, r, dm);
            }
            KindParams::TransD {
                entity_proj,
                relation_proj,
            } => {
                let hp = entity_proj.row(h);
                let tp = entity_proj.row(t);
                let rp = relation_proj.row(r);
                let grp = dot(&g, rp);
                let dh: Vec<f32> = (0..d).map(|i| g[i] + grp * hp[i]).collect();
                let dt: Vec<f32> = (0..d).map(|i| -g[i] - grp * tp[i]).collect();
                out.push(ParamSlot::EntityEmb, h, dh);
                out.push(ParamSlot::RelationEmb, r, g.clone());
                out.push(ParamSlot::EntityEmb, t, dt);
                let dhp: Vec<f32> = (0..d).map(|i| grp * he[i]).collect();
                let dtp: Vec<f32> = (0..d).map(|i| -grp * te[i]).collect();
                out.push(ParamSlot::EntityProj, h, dhp);
                out.push(ParamSlot::EntityProj, t, dtp);
                let c = dot(hp, he) - dot(tp, te);
                let drp: Vec<f32> = (0..d).map(|i| c * g[i]).collect();
                out.push(ParamSlot::RelationProj, r, drp);
            }
            KindParams::Se {
                head_proj,
                tail_proj,
            } => {
                let a = head_proj.row(r);
                let b = tail_proj.row(r);
                let mut atg = vec![0.0f32; d];
                let mut btg = vec![0.0f32; d];
                for i in 0..d {
                    let arow = &a[i * d..(i + 1) * d];
                    let brow = &b[i * d..(i + 1) * d];
                    for k in 0..d {
                        atg[k] += arow[k] * g[i];
                        btg[k] += brow[k] * g[i];
                    }
                }
                out.push(ParamSlot::EntityEmb, h, atg);
                out.push(ParamSlot::EntityEmb, t, neg(&btg));
                let mut da = vec![0.0f32; d * d];
                let mut db = vec![0.0f32; d * d];
                for i in 0..d {
                    for k in 0..d {
                        da[i * d + k] = g[i] * he[k];
                        db[i * d + k] = -g[i] * te[k];
                    }
                }
                out.push(ParamSlot::SeHeadMatrix, r, da);
                out.push(ParamSlot::SeTailMatrix, r, db);
            }
        }
        Ok(out)
    }

    /// Rescale every entity/relation row outside the unit L2 ball to norm 1
    /// and renormalize TransH hyperplane normals to unit norm. Rows within
    /// 1e-6 of the ball are left untouched, which makes the projection
    /// exactly idempotent in f32.
    pub fn project_constraints(&mut self) {
        project_rows(&mut self.entity_emb);
        project_rows(&mut self.relation_emb);
        if let KindParams::TransH { normals } = &mut self.params {
            for r in 0..normals.rows() {
                normalize_row(normals, r);
            }
        }
    }

    /// The parameter tensors in canonical order: entity, relation, then the
    /// kind-specific extras. Gradient buffers and optimizer states align with
    /// this order.
    pub fn param_order(&self) -> Vec<ParamSlot> {
        let mut slots = vec![ParamSlot::EntityEmb, ParamSlot::RelationEmb];
        match &self.params {
            KindParams::None => {}
            KindParams::TransH { .. } => slots.push(ParamSlot::HyperplaneNormal),
            KindParams::TransR { .. } => slots.push(ParamSlot::ProjMatrix),
            KindParams::TransD { .. } => {
                slots.push(ParamSlot::EntityProj);
                slots.push(ParamSlot::RelationProj);
            }
            KindParams::Se { .. } => {
                slots.push(ParamSlot::SeHeadMatrix);
                slots.push(ParamSlot::SeTailMatrix);
            }
        }
        slots
    }

    pub fn param(&self, slot: ParamSlot) -> &DenseMatrix {
        match (slot, &self.params) {
            (ParamSlot::EntityEmb, _) => &self.entity_emb,
            (ParamSlot::RelationEmb, _) => &self.relation_emb,
            (ParamSlot::HyperplaneNormal, KindParams::TransH { normals }) => normals,
            (ParamSlot::ProjMatrix, KindParams::TransR { proj }) => proj,
            (ParamSlot::EntityProj, KindParams::TransD { entity_proj, .. }) => entity_proj,
            (ParamSlot::RelationProj, KindParams::TransD { relation_proj, .. }) => relation_proj,
            (ParamSlot::SeHeadMatrix, KindParams::Se { head_proj, .. }) => head_proj,
            (ParamSlot::SeTailMatrix, KindParams::Se { tail_proj, .. }) => tail_proj,
            (slot, _) => panic!("slot {slot:?} not present for kind {:?}", self.kind),
        }
    }

    pub fn param_mut(&mut self, slot: ParamSlot) -> &mut DenseMatrix {
        match (slot, &mut self.params) {
            (ParamSlot::EntityEmb, _) => &mut self.entity_emb,
            (ParamSlot::RelationEmb, _) => &mut self.relation_emb,
            (ParamSlot::HyperplaneNormal, KindParams::TransH { normals }) => normals,
            (ParamSlot::ProjMatrix, KindParams::TransR { proj }) => proj,
            (ParamSlot::EntityProj, KindParams::TransD { entity_proj, .. }) => entity_proj,
            (ParamSlot::RelationProj, KindParams::TransD { relation_proj, .. }) => relation_proj,
            (ParamSlot::SeHeadMatrix, KindParams::Se { head_proj, .. }) => head_proj,
            (ParamSlot::SeTailMatrix, KindParams::Se { tail_proj, .. }) => tail_proj,
            (slot, _) => panic!("slot {slot:?} not present for kind {:?}", self.kind),
        }
    }

    /// Raw little-endian bytes of every parameter tensor in canonical order.
    /// Used for checkpointing and bit-identity checks.
    pub fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for slot in self.param_order() {
            for &x in self.param(slot).data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }
}

const BALL_SLACK: f64 = 1e-6;

fn project_rows(m: &mut DenseMatrix) {
    for r in 0..m.rows() {
        let n = m.row_norm(r);
        if n > 1.0 + BALL_SLACK {
            let inv = (1.0 / n) as f32;
            for x in m.row_mut(r) {
                *x *= inv;
            }
        }
    }
}

fn normalize_row(m: &mut DenseMatrix, r: usize) {
    let n = m.row_norm(r);
    if n > 0.0 && (n - 1.0).abs() > BALL_SLACK {
        let inv = (1.0 / n) as f32;
        for x in m.row_mut(r) {
            *x *= inv;
        }
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn neg(v: &[f32]) -> Vec<f32> {
    v.iter().map(|&x| -x).collect()
}
