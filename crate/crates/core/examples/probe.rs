//! Runs several mappers next to one classifier on permuted MNIST.
//!
//! usage: probe <tasks> <train/task> <test/task> <epochs> <mapper[:k=v;k=v]>...
//! env: LR (classifier learning rate), MNIST_DIR

use std::sync::Arc;
use std::time::Instant;

use taskmap::features::MnistSource;
use taskmap::harness::factory::{build_mapper, build_stream, classifier_config};
use taskmap::harness::{run_suite, ExperimentConfig, SuiteMember, SuiteOptions};

fn main() -> taskmap::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, d: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let mut cfg = ExperimentConfig::default();
    cfg.tasks = Some(num(0, 25));
    cfg.train_per_task = Some(num(1, 10_000));
    cfg.test_per_task = Some(num(2, 1000));
    cfg.epochs = num(3, 5);
    cfg.lr = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(0.002);
    cfg.mnist_dir = std::env::var("MNIST_DIR").unwrap_or_else(|_| "data/mnist".into()).into();
    let mnist = Arc::new(MnistSource::load(&cfg.mnist_dir)?);
    let stream = build_stream(&cfg, 0, Some(mnist))?;
    let mut members = Vec::new();
    for spec in args.iter().skip(4) {
        let (name, opts) = spec.split_once(':').unwrap_or((spec, ""));
        let mut c = cfg.clone();
        for kv in opts.split(';').filter(|s| !s.is_empty()) {
            c.apply_override(kv)?;
        }
        members.push(SuiteMember::new(spec.clone(), build_mapper(name, &c, &stream, 0)?));
    }
    let start = Instant::now();
    let out = run_suite(&stream, classifier_config(&cfg, &stream, 0), members, SuiteOptions { curves: false })?;
    for m in &out.members {
        let s = m.summary();
        println!(
            "{:<40} task {:6.2}%  main {:6.2}%  mem {:9.1} KB  learn {:6.1}s",
            m.label,
            s.task_pct,
            s.main_pct,
            m.ledger.total_kb(),
            m.learn_seconds
        );
    }
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
