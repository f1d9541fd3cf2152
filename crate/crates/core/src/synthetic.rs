//! Deterministic synthetic knowledge graphs for tests, benchmarks, and
//! smoke runs.

use std::collections::HashSet;

use crate::data::{KgDataset, RawTriple, UnknownPolicy};
use crate::tensor::Rng;

/// Random toy KG: `n_triples` distinct facts over `n_entities` entities and
/// `n_relations` relations, split into train and equal valid/test holdouts.
pub fn toy_kg(
    n_entities: usize,
    n_relations: usize,
    n_triples: usize,
    holdout: f64,
    seed: u64,
) -> KgDataset {
    assert!(n_entities >= 2 && n_relations >= 1);
    let mut rng = Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut triples = Vec::with_capacity(n_triples);
    // Cap attempts so tiny vocabularies cannot loop forever.
    let mut attempts = 0usize;
    while triples.len() < n_triples && attempts < n_triples * 50 {
        attempts += 1;
        let h = rng.below(n_entities);
        let r = rng.below(n_relations);
        let t = rng.below(n_entities);
        if h != t && seen.insert((h, r, t)) {
            triples.push(RawTriple::positive(
                &format!("e{h}"),
                &format!("r{r}"),
                &format!("e{t}"),
            ));
        }
    }
    let n = triples.len();
    let n_hold = ((n as f64 * holdout) as usize).min(n.saturating_sub(1));
    let n_valid = n_hold / 2;
    let n_test = n_hold - n_valid;
    let test = triples.split_off(n - n_test);
    let valid = triples.split_off(n - n_hold);
    KgDataset::from_raw(triples, valid, test, UnknownPolicy::Extend)
        .expect("synthetic KG construction")
}

/// Typed cluster KG: entities fall into `n_clusters` equal type clusters and
/// relation `k` only links cluster `k` to cluster `k+1 (mod n_clusters)`.
/// Each source entity gets `targets_per_entity` distinct targets. Corruptions
/// that stay inside the right target cluster are therefore plausible
/// (hard negatives), while cross-cluster corruptions are structurally wrong.
pub fn clustered_kg(
    n_clusters: usize,
    per_cluster: usize,
    targets_per_entity: usize,
    seed: u64,
) -> KgDataset {
    assert!(n_clusters >= 2 && per_cluster >= 2);
    assert!(targets_per_entity <= per_cluster);
    let mut rng = Rng::seed_from_u64(seed);
    let name = |cluster: usize, idx: usize| format!("c{cluster}_e{idx}");
    let mut train = Vec::new();
    for k in 0..n_clusters {
        let dst = (k + 1) % n_clusters;
        for src_idx in 0..per_cluster {
            let mut picked = HashSet::new();
            while picked.len() < targets_per_entity {
                picked.insert(rng.below(per_cluster));
            }
            let mut picked: Vec<usize> = picked.into_iter().collect();
            picked.sort_unstable();
            for t_idx in picked {
                train.push(RawTriple::positive(
                    &name(k, src_idx),
                    &format!("rel{k}"),
                    &name(dst, t_idx),
                ));
            }
        }
    }
    KgDataset::from_raw(train, vec![], vec![], UnknownPolicy::Extend)
        .expect("clustered KG construction")
}

/// Cluster id of every entity of a [`clustered_kg`], by vocabulary id.
pub fn cluster_of(dataset: &KgDataset) -> Vec<usize> {
    dataset
        .entities
        .names()
        .iter()
        .map(|n| {
            n.trim_start_matches('c')
                .split('_')
                .next()
                .and_then(|c| c.parse().ok())
                .expect("clustered_kg entity name")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_kg_is_deterministic_and_split() {
        let a = toy_kg(30, 4, 150, 0.2, 9);
        let b = toy_kg(30, 4, 150, 0.2, 9);
        assert_eq!(a.train.triples, b.train.triples);
        assert_eq!(a.test.triples, b.test.triples);
        assert!(!a.train.is_empty());
        assert!(!a.valid.is_empty());
        assert!(!a.test.is_empty());
        assert_eq!(
            a.train.len() + a.valid.len() + a.test.len(),
            a.filter_index().len()
        );
    }

    #[test]
    fn clustered_kg_respects_types() {
        let ds = clustered_kg(5, 8, 3, 3);
        let clusters = cluster_of(&ds);
        for t in &ds.train.triples {
            let src = clusters[t.head];
            let dst = clusters[t.tail];
            let rel: usize = ds
                .relations
                .name(t.relation)
                .trim_start_matches("rel")
                .parse()
                .unwrap();
            assert_eq!(src, rel);
            assert_eq!(dst, (rel + 1) % 5);
        }
        assert_eq!(ds.n_entities(), 40);
        assert_eq!(ds.train.len(), 5 * 8 * 3);
    }
}
