//! Experiment configuration: a flat `key = value` text format, overridable
//! key by key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mappers::InputScaling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Permuted,
    EightDsets,
    Cifar100Super,
    /// Gaussian-mixture stand-in for the inter-dataset stream.
    Synthetic,
}

impl Benchmark {
    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Permuted => "permuted",
            Benchmark::EightDsets => "eight_dsets",
            Benchmark::Cifar100Super => "cifar100_super",
            Benchmark::Synthetic => "synthetic",
        }
    }

    pub fn default_tasks(self) -> usize {
        match self {
            Benchmark::Permuted => 25,
            Benchmark::EightDsets | Benchmark::Synthetic => 8,
            Benchmark::Cifar100Super => 10,
        }
    }

    /// Mapper feature width.
    pub fn mapper_dim(self) -> usize {
        match self {
            Benchmark::Permuted => 784,
            Benchmark::EightDsets | Benchmark::Synthetic => 256,
            Benchmark::Cifar100Super => 512,
        }
    }

    /// Classifier input width.
    pub fn classifier_dim(self) -> usize {
        match self {
            Benchmark::Permuted => 784,
            Benchmark::EightDsets => 9216,
            Benchmark::Synthetic => 256,
            Benchmark::Cifar100Super => 512,
        }
    }

    pub fn default_hidden(self) -> Vec<usize> {
        match self {
            Benchmark::Permuted => vec![256, 256],
            Benchmark::EightDsets => vec![4096, 4096],
            Benchmark::Cifar100Super => vec![7680, 4096],
            Benchmark::Synthetic => vec![128],
        }
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "permuted" | "permuted_mnist" => Ok(Benchmark::Permuted),
            "eight_dsets" | "8dsets" | "8-dsets" => Ok(Benchmark::EightDsets),
            "cifar100_super" | "cifar100" => Ok(Benchmark::Cifar100Super),
            "synthetic" | "pseudo_eight_dsets" => Ok(Benchmark::Synthetic),
            _ => Err(Error::config(format!(
                "unknown benchmark {s:?} (permuted, eight_dsets, cifar100_super, synthetic)"
            ))),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const MAPPER_NAMES: &[&str] = &[
    "oracle",
    "random",
    "nmc",
    "gmmc",
    "art",
    "artmap",
    "pcr",
    "pcre",
    "entropy",
    "ae_gates",
    "km_heads",
    "km_heads_ours",
    "vanilla_replay",
];

/// One swept parameter: `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s
            .split_once('=')
            .or_else(|| s.split_once(':'))
            .ok_or_else(|| Error::config(format!("grid {s:?} is not of the form key=v1,v2")))?;
        let values: Vec<String> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        if values.is_empty() {
            return Err(Error::config(format!("grid {s:?} has no values")));
        }
        Ok(GridSpec {
            key: key.trim().to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub mapper: String,
    /// `None` = benchmark default.
    pub tasks: Option<usize>,
    pub train_per_task: Option<usize>,
    pub test_per_task: Option<usize>,
    pub seeds: Vec<u64>,
    pub mnist_dir: PathBuf,
    /// `None` = `data/features/<benchmark>`.
    pub feature_dir: Option<PathBuf>,
    pub out_dir: PathBuf,

    // classifier
    pub hidden: Option<Vec<usize>>,
    pub epochs: usize,
    pub lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub use_keys: bool,
    pub use_bd: bool,
    pub key_head_input: bool,

    // mappers
    pub k: usize,
    pub rho: f64,
    pub art_beta: f32,
    pub art_alpha: f64,
    pub art_epsilon: f64,
    /// `None` = no scaling on permuted pixels, first-task min-max otherwise.
    pub art_scaling: Option<InputScaling>,
    /// `None` = the mapper's own default.
    pub coreset: Option<usize>,
    pub pcre_hidden: usize,
    pub mapper_epochs: usize,
    pub mapper_lr: f32,
    pub mapper_batch_size: usize,
    pub ae_latent: Option<usize>,
    pub ae_lr: f32,
    pub km_n: usize,
    /// KM-heads (ours) on its own keyed multi-head network instead of the
    /// pipeline's classifier.
    pub km_multi_head: bool,
    pub mapper_max_samples: Option<usize>,
    pub vanilla_coreset: usize,
    /// Vanilla-Replay output layout: one shared head instead of one node per class.
    pub vanilla_shared_head: bool,

    pub alpha_mem: f64,
    /// Evaluate all seen tasks after every task (forgetting curves).
    pub curves: bool,
    pub plots: bool,
    pub grid: Option<GridSpec>,
    pub smoke: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            benchmark: Benchmark::Permuted,
            mapper: "oracle".into(),
            tasks: None,
            train_per_task: None,
            test_per_task: None,
            seeds: vec![0, 1, 2],
            mnist_dir: PathBuf::from("data/mnist"),
            feature_dir: None,
            out_dir: PathBuf::from("runs"),
            hidden: None,
            epochs: 20,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 32,
            use_keys: true,
            use_bd: true,
            key_head_input: true,
            k: 1,
            rho: 0.9,
            art_beta: 1.0,
            art_alpha: 0.001,
            art_epsilon: 1e-3,
            art_scaling: None,
            coreset: None,
            pcre_hidden: 64,
            mapper_epochs: 20,
            mapper_lr: 0.01,
            mapper_batch_size: 32,
            ae_latent: None,
            ae_lr: 0.001,
            km_n: 5,
            km_multi_head: true,
            mapper_max_samples: None,
            vanilla_coreset: 6400,
            vanilla_shared_head: false,
            alpha_mem: 1e-6,
            curves: true,
            plots: true,
            grid: None,
            smoke: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("bad value {value:?} for {key}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "none" | "default" | "all" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(format!("bad boolean {value:?} for {key}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

impl ExperimentConfig {
    /// Parse a config file body. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "benchmark" => self.benchmark = v.parse()?,
            "mapper" => {
                if !MAPPER_NAMES.contains(&v) {
                    return Err(Error::config(format!(
                        "unknown mapper {v:?}; choose one of {}",
                        MAPPER_NAMES.join(", ")
                    )));
                }
                self.mapper = v.to_string();
            }
            "tasks" => self.tasks = parse_opt(key, v)?,
            "train_per_task" => self.train_per_task = parse_opt(key, v)?,
            "test_per_task" => self.test_per_task = parse_opt(key, v)?,
            "seed" => self.seeds = vec![parse(key, v)?],
            "seeds" => self.seeds = parse_list(key, v)?,
            "mnist_dir" => self.mnist_dir = PathBuf::from(v),
            "feature_dir" => self.feature_dir = Some(PathBuf::from(v)),
            "out_dir" | "out" => self.out_dir = PathBuf::from(v),
            "hidden" => self.hidden = Some(parse_list(key, v)?),
            "epochs" => self.epochs = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "use_keys" => self.use_keys = parse_bool(key, v)?,
            "use_bd" => self.use_bd = parse_bool(key, v)?,
            "key_head_input" => self.key_head_input = parse_bool(key, v)?,
            "k" => self.k = parse(key, v)?,
            "rho" => self.rho = parse(key, v)?,
            "art_beta" => self.art_beta = parse(key, v)?,
            "art_alpha" => self.art_alpha = parse(key, v)?,
            "art_epsilon" => self.art_epsilon = parse(key, v)?,
            "art_scaling" => {
                self.art_scaling = match v {
                    "default" => None,
                    "none" => Some(InputScaling::None),
                    "min_max_first_task" | "minmax" => Some(InputScaling::MinMaxFirstTask),
                    _ => return Err(Error::config(format!("bad art_scaling {v:?}"))),
                }
            }
            "coreset" => self.coreset = parse_opt(key, v)?,
            "pcre_hidden" => self.pcre_hidden = parse(key, v)?,
            "mapper_epochs" => self.mapper_epochs = parse(key, v)?,
            "mapper_lr" => self.mapper_lr = parse(key, v)?,
            "mapper_batch_size" => self.mapper_batch_size = parse(key, v)?,
            "ae_latent" => self.ae_latent = parse_opt(key, v)?,
            "ae_lr" => self.ae_lr = parse(key, v)?,
            "km_n" => self.km_n = parse(key, v)?,
            "km_multi_head" => self.km_multi_head = parse(key, v)?,
            "mapper_max_samples" => self.mapper_max_samples = parse_opt(key, v)?,
            "vanilla_coreset" => self.vanilla_coreset = parse(key, v)?,
            "vanilla_shared_head" => self.vanilla_shared_head = parse_bool(key, v)?,
            "alpha_mem" => self.alpha_mem = parse(key, v)?,
            "curves" => self.curves = parse_bool(key, v)?,
            "plots" => self.plots = parse_bool(key, v)?,
            "grid" => self.grid = if v.is_empty() { None } else { Some(v.parse()?) },
            "smoke" => {
                if parse_bool(key, v)? {
                    self.make_smoke();
                } else {
                    self.smoke = false;
                }
            }
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Five permuted tasks on small splits with few epochs.
    pub fn make_smoke(&mut self) {
        self.smoke = true;
        self.benchmark = Benchmark::Permuted;
        self.tasks = Some(5);
        self.train_per_task = Some(2000);
        self.test_per_task = Some(500);
        self.epochs = 2;
        self.lr = 0.002;
        self.mapper_epochs = 3;
        self.seeds = vec![self.seeds.first().copied().unwrap_or(0)];
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.unwrap_or_else(|| self.benchmark.default_tasks())
    }

    pub fn hidden_layers(&self) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| self.benchmark.default_hidden())
    }

    pub fn feature_dir(&self) -> PathBuf {
        self.feature_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("data/features").join(self.benchmark.as_str()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tasks() == 0 {
            return Err(Error::config("at least one task is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::config("classifier epochs, batch size and learning rate must be positive"));
        }
        if self.benchmark == Benchmark::Permuted && self.num_tasks() > 10_000 {
            return Err(Error::config("too many permuted tasks"));
        }
        if !MAPPER_NAMES.contains(&self.mapper.as_str()) {
            return Err(Error::config(format!("unknown mapper {:?}", self.mapper)));
        }
        Ok(())
    }

    /// The config as `key = value` lines, readable by [`Self::from_text`].
    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or_else(|| "default".to_string(), |x| x.to_string());
        let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("benchmark = {}", self.benchmark),
            format!("mapper = {}", self.mapper),
            format!("tasks = {}", self.num_tasks()),
            format!("train_per_task = {}", opt(self.train_per_task)),
            format!("test_per_task = {}", opt(self.test_per_task)),
            format!(
                "seeds = {}",
                self.seeds.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
            ),
            format!("mnist_dir = {}", self.mnist_dir.display()),
            format!("feature_dir = {}", self.feature_dir().display()),
            format!("out_dir = {}", self.out_dir.display()),
            format!("hidden = {}", list(&self.hidden_layers())),
            format!("epochs = {}", self.epochs),
            format!("lr = {}", self.lr),
            format!("momentum = {}", self.momentum),
            format!("batch_size = {}", self.batch_size),
            format!("use_keys = {}", self.use_keys),
            format!("use_bd = {}", self.use_bd),
            format!("key_head_input = {}", self.key_head_input),
            format!("k = {}", self.k),
            format!("rho = {}", self.rho),
            format!("art_beta = {}", self.art_beta),
            format!("art_alpha = {}", self.art_alpha),
            format!("art_epsilon = {}", self.art_epsilon),
            format!(
                "art_scaling = {}",
                match self.art_scaling {
                    None => "default",
                    Some(InputScaling::None) => "none",
                    Some(InputScaling::MinMaxFirstTask) => "min_max_first_task",
                }
            ),
            format!("coreset = {}", opt(self.coreset)),
            format!("pcre_hidden = {}", self.pcre_hidden),
            format!("mapper_epochs = {}", self.mapper_epochs),
            format!("mapper_lr = {}", self.mapper_lr),
            format!("mapper_batch_size = {}", self.mapper_batch_size),
            format!("ae_latent = {}", opt(self.ae_latent)),
            format!("ae_lr = {}", self.ae_lr),
            format!("km_n = {}", self.km_n),
            format!("km_multi_head = {}", self.km_multi_head),
            format!("mapper_max_samples = {}", opt(self.mapper_max_samples)),
            format!("vanilla_coreset = {}", self.vanilla_coreset),
            format!("vanilla_shared_head = {}", self.vanilla_shared_head),
            format!("alpha_mem = {}", self.alpha_mem),
            format!("curves = {}", self.curves),
            format!("plots = {}", self.plots),
        ];
        if let Some(g) = &self.grid {
            lines.push(format!("grid = {}={}", g.key, g.values.join(",")));
        }
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file_with_comments() {
        let cfg = ExperimentConfig::from_text(
            "# permuted run\nbenchmark = permuted\nmapper = gmmc  # five comps\nk = 5\nseeds = 1, 2\nhidden = 64,32\n",
        )
        .unwrap();
        assert_eq!(cfg.mapper, "gmmc");
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.hidden_layers(), vec![64, 32]);
        assert_eq!(cfg.num_tasks(), 25);
    }

    #[test]
    fn rejects_unknown_keys_and_mappers() {
        assert!(ExperimentConfig::from_text("colour = blue").is_err());
        assert!(ExperimentConfig::from_text("mapper = psychic").is_err());
        assert!(ExperimentConfig::from_text("just text").is_err());
        assert!(ExperimentConfig::from_text("epochs = many").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_override("mapper=art").unwrap();
        cfg.apply_override("grid=rho=0.5,0.7").unwrap();
        cfg.apply_override("train_per_task=300").unwrap();
        cfg.apply_override("art_scaling=none").unwrap();
        let back = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back.mapper, "art");
        assert_eq!(back.grid, cfg.grid);
        assert_eq!(back.train_per_task, Some(300));
        assert_eq!(back.art_scaling, Some(InputScaling::None));
        assert_eq!(back.to_text(), cfg.to_text());
    }

    #[test]
    fn smoke_mode_is_small() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("smoke", "true").unwrap();
        assert_eq!(cfg.num_tasks(), 5);
        assert_eq!(cfg.seeds.len(), 1);
        assert_eq!(cfg.benchmark, Benchmark::Permuted);
    }

    #[test]
    fn grid_spec_forms() {
        let g: GridSpec = "rho=0.5, 0.9".parse().unwrap();
        assert_eq!(g.key, "rho");
        assert_eq!(g.values, vec!["0.5", "0.9"]);
        let g: GridSpec = "k:1,5".parse().unwrap();
        assert_eq!(g.values.len(), 2);
        assert!("rho".parse::<GridSpec>().is_err());
        assert!("rho=".parse::<GridSpec>().is_err());
    }
}
