//! The four commands: train, link-prediction eval, classification eval, and
//! generator sample inspection.
//!
//! Every command validates all of its inputs (paths, flags, checkpoint and
//! vocabulary compatibility) before creating or touching any output file;
//! validation problems exit 2, failures during the work itself exit 1.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;

use kge_core::data::{load_dataset, CorruptionSide, KgDataset, Split, UnknownPolicy};
use kge_core::evaluator::{
    aggregate_ranks, classify, evaluate_ranks, fit_thresholds, ClassificationThresholds,
    EvalSetting, LinkPredictionResult, RankRecord,
};
use kge_core::scorer::DiscriminatorModel;
use kge_core::tensor::Rng;
use kge_core::trainer::{train, EpochRow, Regime, TrainHooks};

use crate::cfg::{usage, CliResult, DataPaths, ResolvedTrain};
use crate::checkpoint::Checkpoint;

fn load_data(paths: &DataPaths) -> CliResult<KgDataset> {
    load_dataset(
        &paths.train,
        &paths.valid,
        &paths.test,
        paths.labeled,
        UnknownPolicy::Extend,
    )
    .map_err(|e| usage(e.to_string()))
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Checkpoint::load(path).map_err(|e| usage(format!("{e:#}")))
}

fn runtime_err(e: kge_core::Error) -> crate::cfg::CliError {
    crate::cfg::CliError::Runtime(anyhow::Error::new(e))
}

/// Train a model per the resolved configuration, writing `model.ckpt` and
/// `report.csv` into the output directory.
pub fn cmd_train(resolved: &ResolvedTrain) -> CliResult<()> {
    let dataset = load_data(&resolved.data)?;
    let pretrained = match &resolved.init_from {
        None => None,
        Some(path) => {
            let ck = load_checkpoint(path)?;
            ck.check_vocabulary(&dataset)
                .map_err(|e| usage(format!("{e:#}")))?;
            if ck.disc.kind != resolved.config.kind {
                return Err(usage(format!(
                    "--init-from checkpoint is a {} model but --model is {}",
                    ck.disc.kind.name(),
                    resolved.config.kind.name()
                )));
            }
            if ck.disc.dim != resolved.config.dim {
                return Err(usage(format!(
                    "--init-from checkpoint has dimension {} but --dim is {}",
                    ck.disc.dim, resolved.config.dim
                )));
            }
            Some(ck.disc)
        }
    };
    if resolved.config.regime == Regime::GanPretrain
        && pretrained.is_none()
        && resolved.config.pretrain_epochs == 0
    {
        return Err(usage(
            "gan-pretrain requires --init-from <checkpoint> or --pretrain-epochs > 0".to_string(),
        ));
    }

    std::fs::create_dir_all(&resolved.out_dir)
        .with_context(|| format!("creating {}", resolved.out_dir.display()))?;
    let ckpt_path = resolved.out_dir.join("model.ckpt");
    let report_path = resolved.out_dir.join("report.csv");
    let mut report_file = BufWriter::new(
        File::create(&report_path)
            .with_context(|| format!("creating {}", report_path.display()))?,
    );

    let mut log_row = |row: &EpochRow| {
        let mut line = format!("epoch {:>4} {:<8}", row.epoch, row.phase.label());
        if let Some(l) = row.mean_loss {
            line.push_str(&format!(" loss {l:.5}"));
        }
        if let Some(v) = row.violation_rate {
            line.push_str(&format!(" violations {:5.1}%", v * 100.0));
        }
        if let Some(r) = row.mean_reward {
            line.push_str(&format!(" reward {r:.4}"));
        }
        eprintln!("{line}");
    };
    let valid_every = resolved.valid_every;
    let data_labeled = resolved.data.labeled;
    let ds_ref = &dataset;
    let mut on_epoch = move |epoch: usize, disc: &DiscriminatorModel| {
        if let Some(every) = valid_every {
            if (epoch + 1).is_multiple_of(every) {
                report_validation(disc, ds_ref, data_labeled, epoch);
            }
        }
    };

    let outcome = train(
        &resolved.config,
        &dataset,
        pretrained,
        TrainHooks {
            csv_sink: Some(&mut report_file),
            on_row: Some(&mut log_row),
            on_epoch: Some(&mut on_epoch),
        },
    )
    .map_err(runtime_err)?;
    report_file.flush().map_err(anyhow::Error::from)?;

    let checkpoint = Checkpoint {
        disc: outcome.disc,
        gen: outcome.gen,
        entities: dataset.entities.names().to_vec(),
        relations: dataset.relations.names().to_vec(),
        config: resolved.config.clone(),
    };
    checkpoint.save(&ckpt_path)?;

    eprintln!(
        "trained {} epochs in {:.1}s",
        resolved.config.epochs,
        outcome.report.wall.as_secs_f64()
    );
    if !dataset.valid.is_empty() {
        report_validation(
            &checkpoint.disc,
            &dataset,
            resolved.data.labeled,
            usize::MAX,
        );
    }
    println!("checkpoint={}", ckpt_path.display());
    println!("report={}", report_path.display());
    Ok(())
}

/// Validation metric hook: classification accuracy on labeled benchmarks,
/// filtered link prediction on a capped subsample otherwise.
fn report_validation(disc: &DiscriminatorModel, dataset: &KgDataset, labeled: bool, epoch: usize) {
    let tag = if epoch == usize::MAX {
        "final".to_string()
    } else {
        format!("epoch {epoch}")
    };
    if dataset.valid.is_empty() {
        eprintln!("[{tag}] no validation split");
        return;
    }
    if labeled && dataset.valid.labels.is_some() {
        match fit_thresholds(disc, dataset, &dataset.valid)
            .and_then(|th| classify(disc, &th, dataset, &dataset.valid))
        {
            Ok(res) => eprintln!("[{tag}] valid accuracy {:.4}", res.accuracy),
            Err(e) => eprintln!("[{tag}] validation failed: {e}"),
        }
    } else {
        let cap = dataset.valid.len().min(500);
        let sub = Split {
            triples: dataset.valid.triples[..cap].to_vec(),
            labels: None,
        };
        match evaluate_ranks(disc, dataset, &sub) {
            Ok(records) => {
                let f = aggregate_ranks(&records, EvalSetting::Filtered).unwrap();
                eprintln!(
                    "[{tag}] valid (first {cap}) filtered mean_rank {:.1} hits@10 {:.4}",
                    f.mean_rank, f.hits_at_10
                );
            }
            Err(e) => eprintln!("[{tag}] validation failed: {e}"),
        }
    }
}

/// Which split an eval command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    Valid,
    Test,
}

impl SplitChoice {
    pub fn parse(s: &str) -> Option<SplitChoice> {
        match s {
            "valid" => Some(SplitChoice::Valid),
            "test" => Some(SplitChoice::Test),
            _ => None,
        }
    }

    fn of(self, ds: &KgDataset) -> &Split {
        match self {
            SplitChoice::Valid => &ds.valid,
            SplitChoice::Test => &ds.test,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SplitChoice::Valid => "valid",
            SplitChoice::Test => "test",
        }
    }
}

fn print_lp(result: &LinkPredictionResult) {
    println!(
        "setting={} mean_rank={:.4} hits@10={:.6} head_mean_rank={:.4} head_hits@10={:.6} tail_mean_rank={:.4} tail_hits@10={:.6}",
        result.setting.label(),
        result.mean_rank,
        result.hits_at_10,
        result.head.mean_rank,
        result.head.hits_at_10,
        result.tail.mean_rank,
        result.tail.hits_at_10,
    );
}

/// Link-prediction evaluation: raw and filtered mean rank / hits@10 over the
/// chosen split, with an optional per-triple rank dump.
pub fn cmd_eval_lp(
    ckpt_path: &Path,
    data: &DataPaths,
    split: SplitChoice,
    dump_ranks: Option<&Path>,
) -> CliResult<()> {
    let ck = load_checkpoint(ckpt_path)?;
    let dataset = load_data(data)?;
    ck.check_vocabulary(&dataset)
        .map_err(|e| usage(format!("{e:#}")))?;
    let split_data = split.of(&dataset);
    if split_data.is_empty() {
        return Err(usage(format!("{} split is empty", split.name())));
    }

    let records = evaluate_ranks(&ck.disc, &dataset, split_data).map_err(runtime_err)?;
    for setting in [EvalSetting::Raw, EvalSetting::Filtered] {
        print_lp(&aggregate_ranks(&records, setting).map_err(runtime_err)?);
    }
    if let Some(path) = dump_ranks {
        write_rank_dump(path, &dataset, &records).map_err(crate::cfg::CliError::Runtime)?;
        eprintln!("rank dump written to {}", path.display());
    }
    Ok(())
}

fn write_rank_dump(path: &Path, ds: &KgDataset, records: &[RankRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating rank dump {}", path.display()))?;
    w.write_record([
        "head",
        "relation",
        "tail",
        "side",
        "raw_rank",
        "filtered_rank",
    ])?;
    for r in records {
        w.write_record([
            ds.entities.name(r.triple.head),
            ds.relations.name(r.triple.relation),
            ds.entities.name(r.triple.tail),
            r.side.label(),
            &r.raw_rank.to_string(),
            &r.filtered_rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Triplet classification: fit per-relation thresholds on the labeled valid
/// split, report test accuracy overall and per relation, optionally saving
/// the thresholds for audit.
pub fn cmd_eval_tc(
    ckpt_path: &Path,
    data: &DataPaths,
    thresholds_out: Option<&Path>,
) -> CliResult<()> {
    let ck = load_checkpoint(ckpt_path)?;
    let data = DataPaths {
        labeled: true,
        ..data.clone()
    };
    let dataset = match load_data(&data) {
        Ok(ds) => ds,
        Err(e) => {
            return Err(usage(format!(
                "{e}\nclassification needs labeled valid/test files: head<TAB>relation<TAB>tail<TAB>1|-1"
            )))
        }
    };
    ck.check_vocabulary(&dataset)
        .map_err(|e| usage(format!("{e:#}")))?;
    if dataset.valid.labels.is_none() || dataset.test.labels.is_none() {
        return Err(usage(
            "classification needs labeled valid/test files: head<TAB>relation<TAB>tail<TAB>1|-1"
                .to_string(),
        ));
    }

    let thresholds = fit_thresholds(&ck.disc, &dataset, &dataset.valid).map_err(runtime_err)?;
    let result = classify(&ck.disc, &thresholds, &dataset, &dataset.test).map_err(runtime_err)?;

    println!("test accuracy={:.6} n={}", result.accuracy, result.total);
    for ra in &result.per_relation {
        println!(
            "relation={} accuracy={:.6} n={}",
            dataset.relations.name(ra.relation),
            ra.accuracy(),
            ra.total
        );
    }
    if let Some(path) = thresholds_out {
        write_thresholds(path, &dataset, &thresholds).map_err(crate::cfg::CliError::Runtime)?;
        eprintln!("thresholds written to {}", path.display());
    }
    Ok(())
}

fn write_thresholds(
    path: &Path,
    ds: &KgDataset,
    th: &ClassificationThresholds,
) -> anyhow::Result<()> {
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "# relation\tdelta")?;
    for (rel, delta) in th.fitted_relations() {
        writeln!(w, "{}\t{}", ds.relations.name(rel), delta)?;
    }
    writeln!(w, "<global>\t{}", th.global())?;
    w.flush()?;
    Ok(())
}

/// Print generator samples for `n` random train positives: the positive
/// triple, then the sampled replacement head and tail with their
/// probabilities.
pub fn cmd_sample_negatives(
    ckpt_path: &Path,
    data: &DataPaths,
    n: usize,
    seed: u64,
) -> CliResult<()> {
    let ck = load_checkpoint(ckpt_path)?;
    let gen = ck.gen.as_ref().ok_or_else(|| {
        usage(
            "checkpoint has no generator; train one with --regime gan-scratch or gan-pretrain"
                .to_string(),
        )
    })?;
    let dataset = load_data(data)?;
    ck.check_vocabulary(&dataset)
        .map_err(|e| usage(format!("{e:#}")))?;

    let mut rng = Rng::seed_from_u64(seed);
    for _ in 0..n {
        let pos = dataset.train.triples[rng.below(dataset.train.len())];
        let head_u = rng.uniform_f64();
        let tail_u = rng.uniform_f64();
        let head_neg = gen
            .sample_negative_with(&pos, CorruptionSide::Head, head_u, false)
            .map_err(runtime_err)?;
        let tail_neg = gen
            .sample_negative_with(&pos, CorruptionSide::Tail, tail_u, false)
            .map_err(runtime_err)?;
        println!(
            "({}, {}, {})",
            dataset.entities.name(pos.head),
            dataset.relations.name(pos.relation),
            dataset.entities.name(pos.tail)
        );
        println!(
            "  head-> {} (p={:.6})   tail-> {} (p={:.6})",
            dataset.entities.name(head_neg.sampled_entity),
            head_neg.log_prob.exp(),
            dataset.entities.name(tail_neg.sampled_entity),
            tail_neg.log_prob.exp(),
        );
    }
    Ok(())
}
