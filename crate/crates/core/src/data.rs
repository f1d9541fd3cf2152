//! Triple-file ingestion: vocabularies, splits, the filtered-evaluation
//! index, and Bernoulli corruption statistics.
//!
//! Files are UTF-8 TSV, one `head<TAB>relation<TAB>tail` fact per line, with
//! an optional fourth `1`/`-1` label column in labeled mode (the convention
//! of the labeled classification benchmarks, whose valid/test sets carry one
//! negative per positive). No header row; blank lines are skipped.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One fact, as dense ids into the dataset vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    /// Copy with the entity on `side` replaced.
    pub fn with_side(&self, side: CorruptionSide, entity: usize) -> Triple {
        match side {
            CorruptionSide::Head => Triple::new(entity, self.relation, self.tail),
            CorruptionSide::Tail => Triple::new(self.head, self.relation, entity),
        }
    }

    /// The entity currently occupying `side`.
    pub fn entity_on(&self, side: CorruptionSide) -> usize {
        match side {
            CorruptionSide::Head => self.head,
            CorruptionSide::Tail => self.tail,
        }
    }
}

/// Which slot of a triple a corruption replaces. Never both at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptionSide {
    Head,
    Tail,
}

impl CorruptionSide {
    pub fn label(self) -> &'static str {
        match self {
            CorruptionSide::Head => "head",
            CorruptionSide::Tail => "tail",
        }
    }
}

/// How the corruption side is drawn: a fair coin, or the per-relation
/// Bernoulli probability derived from tails-per-head / heads-per-tail counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionStrategy {
    Unif,
    Bern,
}

/// What to do with valid/test symbols missing from the train vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    /// Extend the vocabulary; the new rows train free (stay at their init).
    #[default]
    Extend,
    /// Reject the file, naming the symbol.
    Error,
    /// Drop the offending triple.
    Skip,
}

/// Dense bijection between symbol strings and ids, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Id of `name`, inserting at the next dense id if unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut v = Vocabulary::default();
        for n in names {
            if v.index.contains_key(&n) {
                return Err(Error::contract(format!("duplicate vocabulary name '{n}'")));
            }
            v.intern(&n);
        }
        Ok(v)
    }
}

/// A string-level triple straight off disk, before interning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    /// `Some(false)` only appears in labeled valid/test files.
    pub label: Option<bool>,
}

impl RawTriple {
    pub fn positive(head: &str, relation: &str, tail: &str) -> Self {
        RawTriple {
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
            label: None,
        }
    }

    pub fn labeled(head: &str, relation: &str, tail: &str, label: bool) -> Self {
        RawTriple {
            label: Some(label),
            ..RawTriple::positive(head, relation, tail)
        }
    }
}

/// One dataset split. `labels`, when present, runs parallel to `triples`.
#[derive(Debug, Clone, Default)]
pub struct Split {
    pub triples: Vec<Triple>,
    pub labels: Option<Vec<bool>>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels.as_ref().is_none_or(|ls| ls[i])
    }

    /// Iterate `(triple, label)`, unlabeled triples counting as positive.
    pub fn iter_labeled(&self) -> impl Iterator<Item = (Triple, bool)> + '_ {
        self.triples
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, self.label(i)))
    }
}

/// Per-relation corruption statistics: mean tails per head and heads per tail
/// over the train split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernStat {
    pub tph: f64,
    pub hpt: f64,
}

/// An immutable knowledge graph: vocabularies, splits, the index of all known
/// true triples, and corruption statistics. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct KgDataset {
    pub entities: Vocabulary,
    pub relations: Vocabulary,
    pub train: Split,
    pub valid: Split,
    pub test: Split,
    filter_index: HashSet<Triple>,
    bern_stats: Vec<Option<BernStat>>,
    /// (relation, tail) -> sorted known heads, over the filter index.
    known_heads: HashMap<(usize, usize), Vec<usize>>,
    /// (head, relation) -> sorted known tails, over the filter index.
    known_tails: HashMap<(usize, usize), Vec<usize>>,
}

impl KgDataset {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn filter_index(&self) -> &HashSet<Triple> {
        &self.filter_index
    }

    pub fn bern_stat(&self, relation: usize) -> Option<BernStat> {
        self.bern_stats.get(relation).copied().flatten()
    }

    /// Probability that corruption replaces the head under the Bernoulli
    /// strategy: tph / (tph + hpt). Relations absent from train fall back to
    /// the fair coin.
    pub fn bern_replace_head_probability(&self, relation: usize) -> f64 {
        match self.bern_stat(relation) {
            Some(BernStat { tph, hpt }) => tph / (tph + hpt),
            None => 0.5,
        }
    }

    /// Known true entities for `side` of this triple's remaining pair, from
    /// the filter index. Sorted ascending; possibly empty.
    pub fn known_entities(&self, triple: &Triple, side: CorruptionSide) -> &[usize] {
        let key = match side {
            CorruptionSide::Head => (triple.relation, triple.tail),
            CorruptionSide::Tail => (triple.head, triple.relation),
        };
        let map = match side {
            CorruptionSide::Head => &self.known_heads,
            CorruptionSide::Tail => &self.known_tails,
        };
        map.get(&key).map_or(&[], |v| v.as_slice())
    }

    /// Every entity that corrupts `side` of `triple` into something not in
    /// the filter index. The original entity is excluded regardless.
    pub fn corrupted_candidates(&self, triple: &Triple, side: CorruptionSide) -> Vec<usize> {
        let gold = triple.entity_on(side);
        let known = self.known_entities(triple, side);
        (0..self.n_entities())
            .filter(|&e| e != gold && known.binary_search(&e).is_err())
            .collect()
    }

    /// In-memory constructor used by loaders, tests, and synthetic data.
    pub fn from_raw(
        train: Vec<RawTriple>,
        valid: Vec<RawTriple>,
        test: Vec<RawTriple>,
        policy: UnknownPolicy,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut entities = Vocabulary::default();
        let mut relations = Vocabulary::default();
        let mut train_split = Split::default();
        for t in &train {
            train_split.triples.push(Triple::new(
                entities.intern(&t.head),
                relations.intern(&t.relation),
                entities.intern(&t.tail),
            ));
        }

        let mut intern_eval = |raw: &[RawTriple], path_hint: &str| -> Result<Split> {
            let mut triples = Vec::new();
            let mut labels = Vec::new();
            let mut any_label = false;
            for (i, t) in raw.iter().enumerate() {
                let ids = match policy {
                    UnknownPolicy::Extend => Some((
                        entities.intern(&t.head),
                        relations.intern(&t.relation),
                        entities.intern(&t.tail),
                    )),
                    UnknownPolicy::Error | UnknownPolicy::Skip => {
                        let h = entities.id(&t.head);
                        let r = relations.id(&t.relation);
                        let tl = entities.id(&t.tail);
                        match (h, r, tl) {
                            (Some(h), Some(r), Some(tl)) => Some((h, r, tl)),
                            _ if policy == UnknownPolicy::Skip => None,
                            _ => {
                                let (kind, symbol) = if h.is_none() {
                                    ("entity", t.head.clone())
                                } else if r.is_none() {
                                    ("relation", t.relation.clone())
                                } else {
                                    ("entity", t.tail.clone())
                                };
                                return Err(Error::UnknownSymbol {
                                    kind,
                                    symbol,
                                    path: PathBuf::from(path_hint),
                                    line: i + 1,
                                });
                            }
                        }
                    }
                };
                if let Some((h, r, tl)) = ids {
                    triples.push(Triple::new(h, r, tl));
                    labels.push(t.label.unwrap_or(true));
                    any_label |= t.label.is_some();
                }
            }
            Ok(Split {
                triples,
                labels: any_label.then_some(labels),
            })
        };

        let valid_split = intern_eval(&valid, "<valid>")?;
        let test_split = intern_eval(&test, "<test>")?;

        // Filter index: all train triples plus positively-labeled valid/test.
        let mut filter_index = HashSet::new();
        filter_index.extend(train_split.triples.iter().copied());
        for split in [&valid_split, &test_split] {
            for (t, positive) in split.iter_labeled() {
                if positive {
                    filter_index.insert(t);
                }
            }
        }

        let bern_stats = compute_bern_stats(&train_split.triples, relations.len());

        let mut known_heads: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut known_tails: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for t in &filter_index {
            known_heads
                .entry((t.relation, t.tail))
                .or_default()
                .push(t.head);
            known_tails
                .entry((t.head, t.relation))
                .or_default()
                .push(t.tail);
        }
        for v in known_heads.values_mut().chain(known_tails.values_mut()) {
            v.sort_unstable();
            v.dedup();
        }

        Ok(KgDataset {
            entities,
            relations,
            train: train_split,
            valid: valid_split,
            test: test_split,
            filter_index,
            bern_stats,
            known_heads,
            known_tails,
        })
    }
}

fn compute_bern_stats(train: &[Triple], n_relations: usize) -> Vec<Option<BernStat>> {
    let mut triples_per_rel = vec![0usize; n_relations];
    let mut heads_per_rel: Vec<HashSet<usize>> = vec![HashSet::new(); n_relations];
    let mut tails_per_rel: Vec<HashSet<usize>> = vec![HashSet::new(); n_relations];
    for t in train {
        triples_per_rel[t.relation] += 1;
        heads_per_rel[t.relation].insert(t.head);
        tails_per_rel[t.relation].insert(t.tail);
    }
    (0..n_relations)
        .map(|r| {
            let n = triples_per_rel[r];
            if n == 0 {
                return None;
            }
            Some(BernStat {
                tph: n as f64 / heads_per_rel[r].len() as f64,
                hpt: n as f64 / tails_per_rel[r].len() as f64,
            })
        })
        .collect()
}

/// Draw the corruption side for a triple of `relation`: a fair coin under
/// `Unif`, the per-relation head-replacement probability under `Bern`.
pub fn draw_side(
    strategy: CorruptionStrategy,
    dataset: &KgDataset,
    relation: usize,
    rng: &mut crate::tensor::Rng,
) -> CorruptionSide {
    let p_head = match strategy {
        CorruptionStrategy::Unif => 0.5,
        CorruptionStrategy::Bern => dataset.bern_replace_head_probability(relation),
    };
    if rng.uniform_f64() < p_head {
        CorruptionSide::Head
    } else {
        CorruptionSide::Tail
    }
}

/// Parse one split file. With `labeled`, every line must carry a fourth
/// `1`/`-1` column; without it, exactly three columns.
pub fn load_split(path: &Path, labeled: bool) -> Result<Vec<RawTriple>> {
    let file = File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let expected = if labeled { 4 } else { 3 };
        if cols.len() != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!(
                    "expected {expected} tab-separated columns, found {}",
                    cols.len()
                ),
            });
        }
        let label = if labeled {
            match cols[3] {
                "1" => Some(true),
                "-1" => Some(false),
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        msg: format!("label column must be 1 or -1, found '{other}'"),
                    })
                }
            }
        } else {
            None
        };
        out.push(RawTriple {
            head: cols[0].to_string(),
            relation: cols[1].to_string(),
            tail: cols[2].to_string(),
            label,
        });
    }
    Ok(out)
}

/// Load train/valid/test TSV files into a dataset. `labeled` applies to the
/// valid and test files; train is always unlabeled positives.
pub fn load_dataset(
    train_path: &Path,
    valid_path: &Path,
    test_path: &Path,
    labeled: bool,
    policy: UnknownPolicy,
) -> Result<KgDataset> {
    let train = load_split(train_path, false)?;
    let valid = load_split(valid_path, labeled)?;
    let test = load_split(test_path, labeled)?;
    KgDataset::from_raw(train, valid, test, policy)
}

/// Write a split back to TSV using the dataset's vocabularies. Labels are
/// emitted as a fourth column when the split carries them.
pub fn write_split(path: &Path, dataset: &KgDataset, split: &Split) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, t) in split.triples.iter().enumerate() {
        write!(
            w,
            "{}\t{}\t{}",
            dataset.entities.name(t.head),
            dataset.relations.name(t.relation),
            dataset.entities.name(t.tail)
        )?;
        if split.labels.is_some() {
            write!(w, "\t{}", if split.label(i) { "1" } else { "-1" })?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    fn three_line_dataset() -> KgDataset {
        KgDataset::from_raw(
            vec![
                RawTriple::positive("a", "r", "b"),
                RawTriple::positive("a", "r", "c"),
                RawTriple::positive("d", "r", "b"),
            ],
            vec![],
            vec![],
            UnknownPolicy::Extend,
        )
        .unwrap()
    }

    #[test]
    fn three_line_counts() {
        let ds = three_line_dataset();
        assert_eq!(ds.n_entities(), 4);
        assert_eq!(ds.n_relations(), 1);
        assert_eq!(ds.filter_index().len(), 3);
        // First-appearance order: a, b, c, d.
        assert_eq!(ds.entities.names(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn empty_train_is_error() {
        let err = KgDataset::from_raw(vec![], vec![], vec![], UnknownPolicy::Extend).unwrap_err();
        assert!(matches!(err, Error::EmptyTrainingSet));
    }

    #[test]
    fn bern_three_line_is_half() {
        // tph = 3 triples / 2 distinct heads = 1.5; hpt = 3 / 2 = 1.5.
        let ds = three_line_dataset();
        let r = ds.relations.id("r").unwrap();
        let st = ds.bern_stat(r).unwrap();
        assert_eq!(st.tph, 1.5);
        assert_eq!(st.hpt, 1.5);
        assert_eq!(ds.bern_replace_head_probability(r), 0.5);
    }

    #[test]
    fn bern_single_triple_symmetry() {
        let ds = KgDataset::from_raw(
            vec![RawTriple::positive("x", "r", "y")],
            vec![],
            vec![],
            UnknownPolicy::Extend,
        )
        .unwrap();
        assert_eq!(ds.bern_replace_head_probability(0), 0.5);
    }

    #[test]
    fn bern_one_to_many_relation() {
        // One head with 10 distinct tails: tph = 10, hpt = 1.
        let train: Vec<RawTriple> = (0..10)
            .map(|i| RawTriple::positive("h", "r", &format!("t{i}")))
            .collect();
        let ds = KgDataset::from_raw(train, vec![], vec![], UnknownPolicy::Extend).unwrap();
        let st = ds.bern_stat(0).unwrap();
        assert_eq!(st.tph, 10.0);
        assert_eq!(st.hpt, 1.0);
        assert!((ds.bern_replace_head_probability(0) - 10.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn bern_unseen_relation_falls_back() {
        // Relation appears only in valid: no train stats, fair coin.
        let ds = KgDataset::from_raw(
            vec![RawTriple::positive("a", "r", "b")],
            vec![RawTriple::positive("a", "s", "b")],
            vec![],
            UnknownPolicy::Extend,
        )
        .unwrap();
        let s = ds.relations.id("s").unwrap();
        assert!(ds.bern_stat(s).is_none());
        assert_eq!(ds.bern_replace_head_probability(s), 0.5);
    }

    #[test]
    fn candidates_exclude_filtered_and_gold() {
        let ds = three_line_dataset();
        let (a, b, c, d) = (0, 1, 2, 3);
        let r = 0;
        // Corrupting the tail of (a, r, b): b is gold, c makes the known
        // (a, r, c), leaving a and d.
        let cands = ds.corrupted_candidates(&Triple::new(a, r, b), CorruptionSide::Tail);
        assert_eq!(cands, vec![a, d]);
        // Corrupting the head of (a, r, b): a gold, d known, leaving b and c.
        let cands = ds.corrupted_candidates(&Triple::new(a, r, b), CorruptionSide::Head);
        assert_eq!(cands, vec![b, c]);
        let _ = (c, d);
    }

    #[test]
    fn candidates_match_brute_force_partition() {
        // candidates + gold + filtered must partition the entity set.
        let ds = KgDataset::from_raw(
            vec![
                RawTriple::positive("a", "r", "b"),
                RawTriple::positive("b", "r", "c"),
                RawTriple::positive("c", "s", "a"),
                RawTriple::positive("d", "r", "b"),
                RawTriple::positive("e", "s", "e"),
            ],
            vec![RawTriple::positive("a", "r", "e")],
            vec![RawTriple::positive("d", "s", "c")],
            UnknownPolicy::Extend,
        )
        .unwrap();
        for &t in ds
            .train
            .triples
            .iter()
            .chain(&ds.valid.triples)
            .chain(&ds.test.triples)
        {
            for side in [CorruptionSide::Head, CorruptionSide::Tail] {
                let gold = t.entity_on(side);
                let cands = ds.corrupted_candidates(&t, side);
                let brute: Vec<usize> = (0..ds.n_entities())
                    .filter(|&e| e != gold && !ds.filter_index().contains(&t.with_side(side, e)))
                    .collect();
                assert_eq!(cands, brute);
                // Disjoint cover check.
                let filtered: Vec<usize> = (0..ds.n_entities())
                    .filter(|&e| e != gold && ds.filter_index().contains(&t.with_side(side, e)))
                    .collect();
                let mut all: Vec<usize> = cands.iter().chain(&filtered).copied().collect();
                all.push(gold);
                all.sort_unstable();
                assert_eq!(all, (0..ds.n_entities()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn toy_filter_gives_all_but_gold() {
        // Four entities, only the one triple known: corrupting either side
        // leaves the other three entities.
        let ds = KgDataset::from_raw(
            vec![RawTriple::positive("a", "r", "b")],
            vec![],
            vec![RawTriple::positive("c", "r", "d")],
            UnknownPolicy::Extend,
        )
        .unwrap();
        let t = ds.test.triples[0];
        assert_eq!(ds.corrupted_candidates(&t, CorruptionSide::Head).len(), 3);
        assert_eq!(ds.corrupted_candidates(&t, CorruptionSide::Tail).len(), 3);
    }

    #[test]
    fn labeled_negatives_stay_out_of_filter() {
        let ds = KgDataset::from_raw(
            vec![RawTriple::positive("a", "r", "b")],
            vec![
                RawTriple::labeled("a", "r", "c", true),
                RawTriple::labeled("a", "r", "d", false),
            ],
            vec![],
            UnknownPolicy::Extend,
        )
        .unwrap();
        let c = ds.entities.id("c").unwrap();
        let d = ds.entities.id("d").unwrap();
        assert!(ds.filter_index().contains(&Triple::new(0, 0, c)));
        assert!(!ds.filter_index().contains(&Triple::new(0, 0, d)));
        assert_eq!(ds.valid.labels.as_deref(), Some(&[true, false][..]));
    }

    #[test]
    fn unknown_policy_error_and_skip() {
        let train = vec![RawTriple::positive("a", "r", "b")];
        let valid = vec![RawTriple::positive("a", "r", "zzz")];
        let err = KgDataset::from_raw(train.clone(), valid.clone(), vec![], UnknownPolicy::Error)
            .unwrap_err();
        match err {
            Error::UnknownSymbol { symbol, .. } => assert_eq!(symbol, "zzz"),
            other => panic!("unexpected error {other:?}"),
        }
        let ds = KgDataset::from_raw(train, valid, vec![], UnknownPolicy::Skip).unwrap();
        assert!(ds.valid.is_empty());
        assert_eq!(ds.n_entities(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tsv");
        std::fs::write(&p, "a\tr\tb\na\tr\n").unwrap();
        let err = load_split(&p, false).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }

        let q = dir.path().join("badlabel.tsv");
        std::fs::write(&q, "a\tr\tb\t2\n").unwrap();
        assert!(load_split(&q, true).is_err());
    }

    #[test]
    fn tsv_round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, content: &str| {
            let p = dir.path().join(name);
            let mut f = File::create(&p).unwrap();
            f.write_all(content.as_bytes()).unwrap();
            p
        };
        let train = write("train.tsv", "a\tr\tb\nc\ts\td\nb\tr\ta\n");
        let valid = write("valid.tsv", "a\ts\tc\t1\nd\tr\tb\t-1\n");
        let test = write("test.tsv", "c\tr\tb\t1\n");
        let ds1 = load_dataset(&train, &valid, &test, true, UnknownPolicy::Extend).unwrap();

        let t2 = dir.path().join("train2.tsv");
        let v2 = dir.path().join("valid2.tsv");
        let s2 = dir.path().join("test2.tsv");
        write_split(&t2, &ds1, &ds1.train).unwrap();
        write_split(&v2, &ds1, &ds1.valid).unwrap();
        write_split(&s2, &ds1, &ds1.test).unwrap();
        let ds2 = load_dataset(&t2, &v2, &s2, true, UnknownPolicy::Extend).unwrap();

        assert_eq!(ds1.train.triples, ds2.train.triples);
        assert_eq!(ds1.valid.triples, ds2.valid.triples);
        assert_eq!(ds1.test.triples, ds2.test.triples);
        assert_eq!(ds1.valid.labels, ds2.valid.labels);
        assert_eq!(ds1.entities.names(), ds2.entities.names());
        assert_eq!(ds1.relations.names(), ds2.relations.names());
    }

    #[test]
    fn bern_matches_independent_two_pass_count() {
        // Independent oracle: recount multiplicities with plain maps.
        let train = vec![
            RawTriple::positive("a", "r", "b"),
            RawTriple::positive("a", "r", "c"),
            RawTriple::positive("d", "r", "b"),
            RawTriple::positive("a", "s", "b"),
            RawTriple::positive("c", "s", "b"),
            RawTriple::positive("d", "s", "d"),
        ];
        let ds = KgDataset::from_raw(train.clone(), vec![], vec![], UnknownPolicy::Extend).unwrap();
        for r in 0..ds.n_relations() {
            let rname = ds.relations.name(r);
            let mut heads = std::collections::BTreeSet::new();
            let mut tails = std::collections::BTreeSet::new();
            let mut n = 0usize;
            for t in &train {
                if t.relation == rname {
                    heads.insert(t.head.clone());
                    tails.insert(t.tail.clone());
                    n += 1;
                }
            }
            let tph = n as f64 / heads.len() as f64;
            let hpt = n as f64 / tails.len() as f64;
            let stat = ds.bern_stat(r).unwrap();
            assert!(stat.tph >= 1.0 && stat.hpt >= 1.0);
            let p = ds.bern_replace_head_probability(r);
            assert!(p > 0.0 && p <= 1.0);
            assert!((p - tph / (tph + hpt)).abs() < 1e-12);
        }
    }
}
