//! Builds streams, classifiers and mappers from an [`ExperimentConfig`].

use std::sync::Arc;

use super::config::{Benchmark, ExperimentConfig};
use crate::error::{Error, Result};
use crate::features::{
    generate_permuted_mnist, load_stream_from_dir, pseudo_eight_dsets, MnistSource, PermutedConfig, Split,
    SyntheticConfig, TaskStream,
};
use crate::mappers::{
    AeGatesConfig, AeGatesMapper, ArtConfig, ArtMapper, ArtmapMapper, EntropyMapper, GmmcMapper, InputScaling,
    KmHeadsMapper, KmHeadsSource, NmcMapper, OracleMapper, PcrConfig, PcrMapper, PcreMapper, RandomTaskProvider,
    TaskMapper,
};
use crate::pspbd::{HeadLayout, PspBdConfig, VanillaLayout, VanillaReplayConfig};
use crate::seed;

pub fn classifier_seed(seed: u64) -> u64 {
    seed::derive(seed, "classifier", 0)
}

pub fn mapper_seed(seed: u64) -> u64 {
    seed::derive(seed, "mapper", 0)
}

/// Load or generate the task stream for one seed.
pub fn build_stream(cfg: &ExperimentConfig, seed: u64, mnist: Option<Arc<MnistSource>>) -> Result<TaskStream> {
    let n = cfg.num_tasks();
    let stream = match cfg.benchmark {
        Benchmark::Permuted => {
            let source = match mnist {
                Some(s) => s,
                None => Arc::new(MnistSource::load(&cfg.mnist_dir)?),
            };
            let pc = PermutedConfig {
                n_tasks: n,
                seed,
                train_per_task: cfg.train_per_task,
                test_per_task: cfg.test_per_task,
            };
            generate_permuted_mnist(source, &pc)?
        }
        Benchmark::Synthetic => {
            let sc = SyntheticConfig {
                n_tasks: n,
                seed,
                ..SyntheticConfig::default()
            };
            pseudo_eight_dsets(&sc)?
        }
        Benchmark::EightDsets | Benchmark::Cifar100Super => {
            let dir = cfg.feature_dir();
            let loaded = load_stream_from_dir(
                &dir,
                HeadLayout::per_task(Vec::new()),
                Some(cfg.benchmark.mapper_dim()),
                Some(n),
            )?;
            let head = if cfg.benchmark == Benchmark::Cifar100Super {
                HeadLayout::shared(5)
            } else {
                let widths = (0..loaded.num_tasks())
                    .map(|t| loaded.task(t, Split::Train).map(|d| d.num_classes()))
                    .collect::<Result<Vec<_>>>()?;
                HeadLayout::per_task(widths)
            };
            loaded.with_head(head)
        }
    };
    check_stream(cfg, &stream)?;
    Ok(stream)
}

/// Dimensions must agree with the benchmark's declared widths.
fn check_stream(cfg: &ExperimentConfig, stream: &TaskStream) -> Result<()> {
    let b = cfg.benchmark;
    if stream.dim() != b.mapper_dim() {
        return Err(Error::config(format!(
            "{b} expects {}-dim mapper features, stream has {}",
            b.mapper_dim(),
            stream.dim()
        )));
    }
    if b != Benchmark::Cifar100Super && stream.classifier_dim() != b.classifier_dim() {
        return Err(Error::config(format!(
            "{b} expects {}-dim classifier features, stream has {}",
            b.classifier_dim(),
            stream.classifier_dim()
        )));
    }
    Ok(())
}

pub fn classifier_config(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> PspBdConfig {
    let mut c = PspBdConfig::new(stream.classifier_dim(), cfg.hidden_layers(), stream.head().clone());
    c.use_keys = cfg.use_keys;
    c.use_bd = cfg.use_bd;
    c.key_head_input = cfg.key_head_input;
    c.epochs = cfg.epochs;
    c.lr = cfg.lr;
    c.momentum = cfg.momentum;
    c.batch_size = cfg.batch_size;
    c.seed = classifier_seed(seed);
    c
}

pub fn art_config(cfg: &ExperimentConfig, seed: u64) -> ArtConfig {
    let scaling = cfg.art_scaling.unwrap_or(match cfg.benchmark {
        Benchmark::Permuted => InputScaling::None,
        _ => InputScaling::MinMaxFirstTask,
    });
    ArtConfig {
        rho: cfg.rho,
        beta: cfg.art_beta,
        alpha: cfg.art_alpha,
        epsilon: cfg.art_epsilon,
        scaling,
        max_samples_per_task: cfg.mapper_max_samples,
        seed: mapper_seed(seed),
    }
}

fn replay_config(cfg: &ExperimentConfig, base: PcrConfig, seed: u64) -> PcrConfig {
    PcrConfig {
        coreset: cfg.coreset.unwrap_or(base.coreset),
        epochs: cfg.mapper_epochs,
        lr: cfg.mapper_lr,
        batch_size: cfg.mapper_batch_size,
        max_samples_per_task: cfg.mapper_max_samples,
        seed: mapper_seed(seed),
        ..base
    }
}

/// The original KM-heads network: no keys, no task biases, one head per task.
pub fn km_heads_network(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> PspBdConfig {
    let mut c = classifier_config(cfg, stream, seed).plain();
    let widths = (0..stream.num_tasks()).map(|t| stream.head().width(t)).collect();
    c.head = HeadLayout::per_task(widths);
    c.seed = seed::derive(seed, "km-heads-network", 0);
    c
}

/// The KM-heads network with the pipeline's keys and task biases switched
/// back on.
pub fn km_heads_keyed_network(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> PspBdConfig {
    PspBdConfig {
        use_keys: cfg.use_keys,
        use_bd: cfg.use_bd,
        key_head_input: cfg.key_head_input,
        ..km_heads_network(cfg, stream, seed)
    }
}

/// A fresh task mapper by name.
pub fn build_mapper(name: &str, cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> Result<Box<dyn TaskMapper>> {
    let ms = mapper_seed(seed);
    Ok(match name {
        "oracle" => Box::new(OracleMapper::new()),
        "random" => Box::new(RandomTaskProvider::new(ms)),
        "nmc" => Box::new(NmcMapper::new(cfg.k, ms)?),
        "gmmc" => Box::new(GmmcMapper::new(cfg.k, ms)?),
        "art" => Box::new(ArtMapper::new(art_config(cfg, seed))?),
        "artmap" => Box::new(ArtmapMapper::new(art_config(cfg, seed))?),
        "pcr" => Box::new(PcrMapper::new(replay_config(cfg, PcrConfig::pcr(), seed))?),
        "pcre" => {
            let base = PcrConfig {
                hidden: Some(cfg.pcre_hidden),
                ..PcrConfig::pcre()
            };
            Box::new(PcreMapper::new(replay_config(cfg, base, seed))?)
        }
        "entropy" => Box::new(EntropyMapper::new()),
        "ae_gates" => Box::new(AeGatesMapper::new(AeGatesConfig {
            latent: cfg.ae_latent,
            epochs: cfg.mapper_epochs,
            lr: cfg.ae_lr,
            batch_size: cfg.mapper_batch_size,
            max_samples_per_task: cfg.mapper_max_samples,
            seed: ms,
            ..AeGatesConfig::default()
        })?),
        "km_heads" => Box::new(
            KmHeadsMapper::new(cfg.km_n, KmHeadsSource::Own(km_heads_network(cfg, stream, seed)), ms)?
                .with_sample_cap(cfg.mapper_max_samples),
        ),
        "km_heads_ours" => {
            let source = if cfg.km_multi_head {
                KmHeadsSource::Own(km_heads_keyed_network(cfg, stream, seed))
            } else {
                KmHeadsSource::Pipeline
            };
            Box::new(KmHeadsMapper::new(cfg.km_n, source, ms)?.with_sample_cap(cfg.mapper_max_samples))
        }
        "vanilla_replay" => {
            return Err(Error::config("vanilla_replay is task-independent and has no task mapper"))
        }
        _ => return Err(Error::config(format!("unknown mapper {name:?}"))),
    })
}

/// Task-independent replay baseline on the benchmark's backbone.
pub fn vanilla_config(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> VanillaReplayConfig {
    let classes = stream.head().max_width().unwrap_or(1);
    VanillaReplayConfig {
        input_dim: stream.classifier_dim(),
        hidden: cfg.hidden_layers(),
        classes_per_task: classes,
        max_tasks: stream.num_tasks(),
        layout: if cfg.vanilla_shared_head {
            VanillaLayout::SharedHead
        } else {
            VanillaLayout::PerClass
        },
        coreset: cfg.vanilla_coreset,
        epochs: cfg.epochs,
        lr: cfg.lr,
        momentum: cfg.momentum,
        batch_size: cfg.batch_size,
        seed: seed::derive(seed, "vanilla", 0),
    }
}
