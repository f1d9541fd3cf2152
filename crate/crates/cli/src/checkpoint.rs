//! Binary model checkpoints.
//!
//! Fixed layout, little-endian throughout: magic, format version, model kind
//! and dissimilarity tags, dimensions, length-prefixed UTF-8 name tables,
//! raw f32 parameter tensors in canonical order, an optional generator
//! section, and the training-config snapshot (including the RNG seed).
//! Loading a checkpoint reproduces the saved models bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use kge_core::data::CorruptionStrategy;
use kge_core::generator::{GenParam, GeneratorModel};
use kge_core::scorer::{DiscriminatorModel, Dissimilarity, KindParams, ScorerKind};
use kge_core::tensor::DenseMatrix;
use kge_core::trainer::{Regime, TrainConfig};

const MAGIC: &[u8; 8] = b"KGECKPT\0";
const VERSION: u32 = 1;

/// Everything needed to resume evaluation or fine-tuning: both models, the
/// vocabularies they were trained over, and the run configuration.
#[derive(Debug)]
pub struct Checkpoint {
    pub disc: DiscriminatorModel,
    pub gen: Option<GeneratorModel>,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)
            .with_context(|| format!("creating checkpoint {}", path.display()))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file =
            File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r).with_context(|| format!("reading checkpoint {}", path.display()))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        put_u32(w, VERSION)?;
        w.write_all(&[
            kind_code(self.disc.kind),
            dissim_code(self.disc.dissimilarity),
        ])?;
        put_u32(w, self.disc.dim as u32)?;
        put_u32(w, self.entities.len() as u32)?;
        put_u32(w, self.relations.len() as u32)?;
        put_names(w, &self.entities)?;
        put_names(w, &self.relations)?;
        for slot in self.disc.param_order() {
            put_matrix(w, self.disc.param(slot))?;
        }
        match &self.gen {
            None => w.write_all(&[0u8])?,
            Some(gen) => {
                w.write_all(&[1u8])?;
                put_u32(w, gen.emb_dim() as u32)?;
                put_u32(w, gen.hidden_dim() as u32)?;
                for p in GenParam::ALL {
                    put_matrix(w, gen.param(p))?;
                }
            }
        }
        self.put_config(w)?;
        Ok(())
    }

    fn put_config<W: Write>(&self, w: &mut W) -> Result<()> {
        let c = &self.config;
        w.write_all(&c.margin.to_le_bytes())?;
        w.write_all(&c.lr.to_le_bytes())?;
        put_u32(w, c.batch_size as u32)?;
        let strategy = match c.strategy {
            CorruptionStrategy::Unif => 0u8,
            CorruptionStrategy::Bern => 1u8,
        };
        let regime = match c.regime {
            Regime::RandomBaseline => 0u8,
            Regime::GanScratch => 1u8,
            Regime::GanPretrain => 2u8,
        };
        w.write_all(&[strategy, regime, u8::from(c.exclude_gold)])?;
        put_u32(w, c.epochs as u32)?;
        put_u32(w, c.g_passes as u32)?;
        put_u32(w, c.d_passes as u32)?;
        put_u32(w, c.pretrain_epochs as u32)?;
        w.write_all(&c.gen_l2.to_le_bytes())?;
        w.write_all(&c.seed.to_le_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Checkpoint> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            bail!("not a model checkpoint (bad magic)");
        }
        let version = get_u32(r)?;
        if version != VERSION {
            bail!("unsupported checkpoint version {version} (expected {VERSION})");
        }
        let mut tags = [0u8; 2];
        r.read_exact(&mut tags)?;
        let kind = kind_from_code(tags[0])?;
        let dissimilarity = dissim_from_code(tags[1])?;
        let dim = get_u32(r)? as usize;
        let n_entities = get_u32(r)? as usize;
        let n_relations = get_u32(r)? as usize;
        let entities = get_names(r, n_entities)?;
        let relations = get_names(r, n_relations)?;

        let entity_emb = get_matrix(r, n_entities, dim)?;
        let relation_emb = get_matrix(r, n_relations, dim)?;
        let params = match kind {
            ScorerKind::Unstructured | ScorerKind::TransE => KindParams::None,
            ScorerKind::TransH => KindParams::TransH {
                normals: get_matrix(r, n_relations, dim)?,
            },
            ScorerKind::TransR => KindParams::TransR {
                proj: get_matrix(r, n_relations, dim * dim)?,
            },
            ScorerKind::TransD => KindParams::TransD {
                entity_proj: get_matrix(r, n_entities, dim)?,
                relation_proj: get_matrix(r, n_relations, dim)?,
            },
            ScorerKind::StructuredEmbedding => KindParams::Se {
                head_proj: get_matrix(r, n_relations, dim * dim)?,
                tail_proj: get_matrix(r, n_relations, dim * dim)?,
            },
        };
        let disc = DiscriminatorModel {
            kind,
            dissimilarity,
            dim,
            entity_emb,
            relation_emb,
            params,
        };

        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let gen = if flag[0] == 1 {
            let gen_dim = get_u32(r)? as usize;
            let gen_hidden = get_u32(r)? as usize;
            Some(GeneratorModel {
                entity_emb: get_matrix(r, n_entities, gen_dim)?,
                relation_emb: get_matrix(r, 2 * n_relations, gen_dim)?,
                w1: get_matrix(r, 2 * gen_dim, gen_hidden)?,
                b1: get_matrix(r, 1, gen_hidden)?,
                w2: get_matrix(r, gen_hidden, n_entities)?,
                b2: get_matrix(r, 1, n_entities)?,
            })
        } else {
            None
        };

        let config = Self::get_config(r, kind, dissimilarity, dim, &gen)?;
        Ok(Checkpoint {
            disc,
            gen,
            entities,
            relations,
            config,
        })
    }

    fn get_config<R: Read>(
        r: &mut R,
        kind: ScorerKind,
        dissimilarity: Dissimilarity,
        dim: usize,
        gen: &Option<GeneratorModel>,
    ) -> Result<TrainConfig> {
        let margin = get_f64(r)?;
        let lr = get_f32(r)?;
        let batch_size = get_u32(r)? as usize;
        let mut tags = [0u8; 3];
        r.read_exact(&mut tags)?;
        let strategy = match tags[0] {
            0 => CorruptionStrategy::Unif,
            1 => CorruptionStrategy::Bern,
            x => bail!("bad strategy tag {x}"),
        };
        let regime = match tags[1] {
            0 => Regime::RandomBaseline,
            1 => Regime::GanScratch,
            2 => Regime::GanPretrain,
            x => bail!("bad regime tag {x}"),
        };
        let exclude_gold = tags[2] == 1;
        let epochs = get_u32(r)? as usize;
        let g_passes = get_u32(r)? as usize;
        let d_passes = get_u32(r)? as usize;
        let pretrain_epochs = get_u32(r)? as usize;
        let gen_l2 = get_f32(r)?;
        let seed = get_u64(r)?;
        let mut config = TrainConfig::new(kind, regime);
        config.margin = margin;
        config.dim = dim;
        config.lr = lr;
        config.batch_size = batch_size;
        config.dissimilarity = dissimilarity;
        config.strategy = strategy;
        config.epochs = epochs;
        config.g_passes = g_passes;
        config.d_passes = d_passes;
        config.gen_l2 = gen_l2;
        config.seed = seed;
        config.exclude_gold = exclude_gold;
        config.pretrain_epochs = pretrain_epochs;
        config.gen_dim = gen.as_ref().map(|g| g.emb_dim());
        config.gen_hidden = gen.as_ref().map(|g| g.hidden_dim());
        Ok(config)
    }

    /// Verify the checkpoint vocabularies match a loaded dataset exactly,
    /// naming the first symbol that differs.
    pub fn check_vocabulary(&self, dataset: &kge_core::data::KgDataset) -> Result<()> {
        check_names("entity", &self.entities, dataset.entities.names())?;
        check_names("relation", &self.relations, dataset.relations.names())?;
        Ok(())
    }
}

fn check_names(kind: &str, ckpt: &[String], data: &[String]) -> Result<()> {
    let n = ckpt.len().max(data.len());
    for i in 0..n {
        match (ckpt.get(i), data.get(i)) {
            (Some(a), Some(b)) if a == b => continue,
            (Some(a), Some(b)) => bail!(
                "checkpoint/dataset {kind} vocabulary mismatch at id {i}: checkpoint has '{a}', dataset has '{b}'"
            ),
            (Some(a), None) => bail!(
                "checkpoint {kind} '{a}' (id {i}) missing from dataset vocabulary"
            ),
            (None, Some(b)) => bail!(
                "dataset {kind} '{b}' (id {i}) missing from checkpoint vocabulary"
            ),
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}

fn kind_code(k: ScorerKind) -> u8 {
    match k {
        ScorerKind::Unstructured => 0,
        ScorerKind::StructuredEmbedding => 1,
        ScorerKind::TransE => 2,
        ScorerKind::TransH => 3,
        ScorerKind::TransR => 4,
        ScorerKind::TransD => 5,
    }
}

fn kind_from_code(c: u8) -> Result<ScorerKind> {
    Ok(match c {
        0 => ScorerKind::Unstructured,
        1 => ScorerKind::StructuredEmbedding,
        2 => ScorerKind::TransE,
        3 => ScorerKind::TransH,
        4 => ScorerKind::TransR,
        5 => ScorerKind::TransD,
        x => bail!("bad scorer kind tag {x}"),
    })
}

fn dissim_code(d: Dissimilarity) -> u8 {
    match d {
        Dissimilarity::L1 => 0,
        Dissimilarity::L2 => 1,
    }
}

fn dissim_from_code(c: u8) -> Result<Dissimilarity> {
    Ok(match c {
        0 => Dissimilarity::L1,
        1 => Dissimilarity::L2,
        x => bail!("bad dissimilarity tag {x}"),
    })
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_names<W: Write>(w: &mut W, names: &[String]) -> Result<()> {
    for n in names {
        put_u32(w, n.len() as u32)?;
        w.write_all(n.as_bytes())?;
    }
    Ok(())
}

fn put_matrix<W: Write>(w: &mut W, m: &DenseMatrix) -> Result<()> {
    for &x in m.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_names<R: Read>(r: &mut R, n: usize) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let len = get_u32(r)? as usize;
        if len > 1 << 20 {
            bail!("implausible name length {len}");
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        out.push(String::from_utf8(buf).map_err(|_| anyhow!("name is not valid UTF-8"))?);
    }
    Ok(out)
}

fn get_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<DenseMatrix> {
    let mut data = vec![0f32; rows * cols];
    let mut buf = [0u8; 4];
    for v in &mut data {
        r.read_exact(&mut buf)?;
        *v = f32::from_le_bytes(buf);
    }
    DenseMatrix::from_vec(rows, cols, data).map_err(|e| anyhow!("{e}"))
}
