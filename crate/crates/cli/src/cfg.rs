//! Flag / config-file / preset resolution.
//!
//! Precedence, lowest to highest: built-in defaults, preset values, config
//! file entries, explicit command-line flags. The optional config file is
//! flat `key = value` text with `#` comments, using the same keys as the
//! long flags.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kge_core::data::CorruptionStrategy;
use kge_core::scorer::{Dissimilarity, ScorerKind};
use kge_core::trainer::{Regime, TrainConfig};

use crate::presets::{self, PresetName};

/// Command outcome classification for process exit codes: usage/config
/// problems exit 2, runtime failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type CliResult<T> = Result<T, CliError>;

/// Parsed flat config file: raw strings by key.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    entries: HashMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "model",
    "regime",
    "strategy",
    "norm",
    "gamma",
    "dim",
    "lr",
    "batch",
    "epochs",
    "g-passes",
    "d-passes",
    "l2-gen",
    "seed",
    "preset",
    "exclude-gold",
    "pretrain-epochs",
    "labeled",
    "gen-dim",
    "gen-hidden",
    "valid-every",
    "train",
    "valid",
    "test",
    "out",
];

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> CliResult<FileConfig> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "config file {}:{}: expected 'key = value'",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(usage(format!(
                    "config file {}:{}: unknown key '{key}'",
                    path.display(),
                    i + 1
                )));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { entries })
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }

    fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(PathBuf::from)
    }

    fn get_bool(&self, key: &str) -> CliResult<Option<bool>> {
        match self.entries.get(key).map(String::as_str) {
            None => Ok(None),
            Some("true" | "1" | "yes") => Ok(Some(true)),
            Some("false" | "0" | "no") => Ok(Some(false)),
            Some(raw) => Err(usage(format!(
                "config key '{key}': expected bool, got '{raw}'"
            ))),
        }
    }
}

/// Dataset file locations plus the labeled-format switch.
#[derive(Debug, Clone)]
pub struct DataPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    pub labeled: bool,
}

/// Everything `train` needs, resolved.
#[derive(Debug, Clone)]
pub struct ResolvedTrain {
    pub config: TrainConfig,
    pub data: DataPaths,
    pub out_dir: PathBuf,
    pub init_from: Option<PathBuf>,
    pub valid_every: Option<usize>,
}

/// Raw train-command inputs before resolution (mirrors the CLI flags).
#[derive(Debug, Default, Clone)]
pub struct TrainInputs {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub labeled: Option<bool>,
    pub model: Option<String>,
    pub regime: Option<String>,
    pub strategy: Option<String>,
    pub norm: Option<String>,
    pub gamma: Option<f64>,
    pub dim: Option<usize>,
    pub lr: Option<f32>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub g_passes: Option<usize>,
    pub d_passes: Option<usize>,
    pub l2_gen: Option<f32>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub init_from: Option<PathBuf>,
    pub pretrain_epochs: Option<usize>,
    pub out: Option<PathBuf>,
    pub exclude_gold: Option<bool>,
    pub valid_every: Option<usize>,
    pub gen_dim: Option<usize>,
    pub gen_hidden: Option<usize>,
}

fn parse_with<T>(
    what: &str,
    raw: Option<&str>,
    parse: impl Fn(&str) -> Option<T>,
    options: &str,
) -> CliResult<Option<T>> {
    match raw {
        None => Ok(None),
        Some(s) => parse(s)
            .map(Some)
            .ok_or_else(|| usage(format!("unknown {what} '{s}' (expected one of: {options})"))),
    }
}

pub fn resolve_train(inputs: &TrainInputs, file: &FileConfig) -> CliResult<ResolvedTrain> {
    let kind = parse_with(
        "model",
        inputs
            .model
            .as_deref()
            .or(file.entries.get("model").map(String::as_str)),
        ScorerKind::parse,
        "unstructured, se, transe, transh, transr, transd",
    )?
    .unwrap_or(ScorerKind::TransE);
    let regime = parse_with(
        "regime",
        inputs
            .regime
            .as_deref()
            .or(file.entries.get("regime").map(String::as_str)),
        Regime::parse,
        "random, gan-scratch, gan-pretrain",
    )?
    .unwrap_or(Regime::RandomBaseline);
    let preset = parse_with(
        "preset",
        inputs
            .preset
            .as_deref()
            .or(file.entries.get("preset").map(String::as_str)),
        PresetName::parse,
        "wn18, fb15k, wn11, fb13",
    )?
    .map(|name| presets::lookup(name, regime));

    let mut config = TrainConfig::new(kind, regime);
    if let Some(p) = preset {
        config.margin = p.margin;
        config.dim = p.dim;
        config.lr = p.lr;
        config.batch_size = p.batch;
        config.dissimilarity = p.dissimilarity;
        config.strategy = p.strategy;
    }

    let strategy = parse_with(
        "strategy",
        inputs
            .strategy
            .as_deref()
            .or(file.entries.get("strategy").map(String::as_str)),
        |s| match s {
            "unif" => Some(CorruptionStrategy::Unif),
            "bern" => Some(CorruptionStrategy::Bern),
            _ => None,
        },
        "unif, bern",
    )?;
    if let Some(s) = strategy {
        config.strategy = s;
    }
    let norm = parse_with(
        "norm",
        inputs
            .norm
            .as_deref()
            .or(file.entries.get("norm").map(String::as_str)),
        Dissimilarity::parse,
        "l1, l2",
    )?;
    if let Some(n) = norm {
        config.dissimilarity = n;
    }

    macro_rules! scalar {
        ($field:ident, $flag:expr, $key:literal) => {
            if let Some(v) = $flag.or(file.get($key)?) {
                config.$field = v;
            }
        };
    }
    scalar!(margin, inputs.gamma, "gamma");
    scalar!(dim, inputs.dim, "dim");
    scalar!(lr, inputs.lr, "lr");
    scalar!(batch_size, inputs.batch, "batch");
    scalar!(epochs, inputs.epochs, "epochs");
    scalar!(g_passes, inputs.g_passes, "g-passes");
    scalar!(d_passes, inputs.d_passes, "d-passes");
    scalar!(gen_l2, inputs.l2_gen, "l2-gen");
    scalar!(seed, inputs.seed, "seed");
    scalar!(pretrain_epochs, inputs.pretrain_epochs, "pretrain-epochs");
    if let Some(v) = inputs.exclude_gold.or(file.get_bool("exclude-gold")?) {
        config.exclude_gold = v;
    }
    if let Some(v) = inputs.gen_dim.or(file.get("gen-dim")?) {
        config.gen_dim = Some(v);
    }
    if let Some(v) = inputs.gen_hidden.or(file.get("gen-hidden")?) {
        config.gen_hidden = Some(v);
    }

    let data = resolve_data_paths(
        inputs.train.clone(),
        inputs.valid.clone(),
        inputs.test.clone(),
        inputs.labeled,
        file,
        preset.map(|p| p.labeled),
    )?;

    let out_dir = inputs
        .out
        .clone()
        .or(file.get_path("out"))
        .unwrap_or_else(|| PathBuf::from("."));
    let valid_every = match inputs.valid_every.or(file.get("valid-every")?) {
        Some(0) => None,
        v => v,
    };

    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(ResolvedTrain {
        config,
        data,
        out_dir,
        init_from: inputs.init_from.clone(),
        valid_every,
    })
}

pub fn resolve_data_paths(
    train: Option<PathBuf>,
    valid: Option<PathBuf>,
    test: Option<PathBuf>,
    labeled: Option<bool>,
    file: &FileConfig,
    preset_labeled: Option<bool>,
) -> CliResult<DataPaths> {
    let need = |name: &str, flag: Option<PathBuf>| -> CliResult<PathBuf> {
        flag.or(file.get_path(name))
            .ok_or_else(|| usage(format!("missing --{name} <path> (or config key '{name}')")))
    };
    Ok(DataPaths {
        train: need("train", train)?,
        valid: need("valid", valid)?,
        test: need("test", test)?,
        labeled: labeled
            .or(file.get_bool("labeled")?)
            .or(preset_labeled)
            .unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> FileConfig {
        FileConfig::parse(text, Path::new("test.conf")).unwrap()
    }

    fn paths() -> TrainInputs {
        TrainInputs {
            train: Some("t.tsv".into()),
            valid: Some("v.tsv".into()),
            test: Some("s.tsv".into()),
            ..Default::default()
        }
    }

    #[test]
    fn preset_applies_regime_specific_values() {
        let mut inputs = paths();
        inputs.preset = Some("wn18".into());
        inputs.regime = Some("gan-scratch".into());
        let r = resolve_train(&inputs, &FileConfig::default()).unwrap();
        assert_eq!(r.config.margin, 2.0);
        assert_eq!(r.config.dim, 100);
        assert_eq!(r.config.lr, 0.001);
        assert_eq!(r.config.batch_size, 1024);
        assert_eq!(r.config.dissimilarity, Dissimilarity::L1);
        assert_eq!(r.config.strategy, CorruptionStrategy::Unif);
        assert!(!r.data.labeled);
    }

    #[test]
    fn flags_override_config_file_which_overrides_preset() {
        let mut inputs = paths();
        inputs.preset = Some("wn11".into());
        inputs.regime = Some("gan-scratch".into());
        inputs.gamma = Some(9.0);
        let f = file("gamma = 7.5\ndim = 64\n");
        let r = resolve_train(&inputs, &f).unwrap();
        // flag wins over file
        assert_eq!(r.config.margin, 9.0);
        // file wins over preset (wn11 dim is 50)
        assert_eq!(r.config.dim, 64);
        // preset survives where nothing overrides
        assert_eq!(r.config.batch_size, 1024);
        assert_eq!(r.config.strategy, CorruptionStrategy::Bern);
        // wn11 is a labeled benchmark
        assert!(r.data.labeled);
    }

    #[test]
    fn unknown_values_are_usage_errors() {
        let mut inputs = paths();
        inputs.model = Some("transz".into());
        assert!(matches!(
            resolve_train(&inputs, &FileConfig::default()),
            Err(CliError::Usage(_))
        ));
        let mut inputs = paths();
        inputs.regime = Some("adversarial".into());
        assert!(matches!(
            resolve_train(&inputs, &FileConfig::default()),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let err = FileConfig::parse("bogus = 3\n", Path::new("c")).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let f = file("# comment\n\nlr = 0.5 # trailing\n");
        let mut inputs = paths();
        inputs.epochs = Some(1);
        let r = resolve_train(&inputs, &f).unwrap();
        assert_eq!(r.config.lr, 0.5);
    }

    #[test]
    fn missing_paths_are_usage_errors() {
        let inputs = TrainInputs::default();
        assert!(matches!(
            resolve_train(&inputs, &FileConfig::default()),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn invalid_hyperparameters_are_usage_errors() {
        let mut inputs = paths();
        inputs.gamma = Some(-1.0);
        assert!(matches!(
            resolve_train(&inputs, &FileConfig::default()),
            Err(CliError::Usage(_))
        ));
    }
}
