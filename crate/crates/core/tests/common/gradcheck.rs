//! Finite-difference gradient oracle: an independent double-precision
//! forward pass, perturbed one parameter at a time.

use ndarray::{Array1, Array2};
use rand::Rng;
use taskmap::mappers::{LossTerm, ShallowPerceptron};
use taskmap::nn::Dense;
use taskmap::pspbd::{BdBias, HeadLayout, PspBdClassifier, PspBdConfig, PspContextKey};
use taskmap::seed;

macro_rules! ensure {
    ($cond:expr) => {
        if !$cond {
            return Err(format!("check failed: {}", stringify!($cond)));
        }
    };
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub const TOL: f64 = 1e-4;
const H: f64 = 1e-6;

/// f64 copy of one layer plus the optional per-task key and bias.
#[derive(Clone)]
struct RefLayer {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    key: Vec<f64>,
    bd: Vec<f64>,
    relu: bool,
}

impl RefLayer {
    fn from_dense(d: &Dense, relu: bool) -> Self {
        RefLayer {
            w: d.w.outer_iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect(),
            b: d.b.iter().map(|&v| f64::from(v)).collect(),
            key: vec![1.0; d.w.nrows()],
            bd: vec![0.0; d.w.ncols()],
            relu,
        }
    }
}

fn ref_forward(layers: &[RefLayer], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for l in layers {
        let mut z: Vec<f64> = l.b.iter().zip(&l.bd).map(|(b, d)| b + d).collect();
        for (i, hi) in h.iter().enumerate() {
            let v = hi * l.key[i];
            for (zj, wij) in z.iter_mut().zip(&l.w[i]) {
                *zj += v * wij;
            }
        }
        if l.relu {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        h = z;
    }
    h
}

fn ref_ce(layers: &[RefLayer], xs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(labels) {
        let z = ref_forward(layers, x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[y];
    }
    loss / xs.len() as f64
}

/// Which parameter of a layer to perturb.
#[derive(Clone, Copy)]
enum Param {
    W(usize, usize),
    B(usize),
    Bd(usize),
}

fn numeric(loss: impl Fn(&[RefLayer]) -> f64, layers: &[RefLayer], l: usize, p: Param) -> f64 {
    let bump = |delta: f64| {
        let mut ls = layers.to_vec();
        match p {
            Param::W(i, j) => ls[l].w[i][j] += delta,
            Param::B(j) => ls[l].b[j] += delta,
            Param::Bd(j) => ls[l].bd[j] += delta,
        }
        loss(&ls)
    };
    (bump(H) - bump(-H)) / (2.0 * H)
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = analytic
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn check_layer(
    loss: &impl Fn(&[RefLayer]) -> f64,
    layers: &[RefLayer],
    l: usize,
    dw: &Array2<f32>,
    db: &Array1<f32>,
    bd: Option<&Array1<f32>>,
) -> Result<(), String> {
    let (ni, no) = dw.dim();
    let mut a = Vec::new();
    let mut n = Vec::new();
    for i in 0..ni {
        for j in 0..no {
            a.push(f64::from(dw[[i, j]]));
            n.push(numeric(loss, layers, l, Param::W(i, j)));
        }
    }
    let e = rel_err(&a, &n);
    ensure!(e <= TOL, "layer {l} weights: relative error {e:e}");
    let a: Vec<f64> = db.iter().map(|&v| f64::from(v)).collect();
    let n: Vec<f64> = (0..no).map(|j| numeric(loss, layers, l, Param::B(j))).collect();
    let e = rel_err(&a, &n);
    ensure!(e <= TOL, "layer {l} bias: relative error {e:e}");
    if let Some(bd) = bd {
        let a: Vec<f64> = bd.iter().map(|&v| f64::from(v)).collect();
        let n: Vec<f64> = (0..no).map(|j| numeric(loss, layers, l, Param::Bd(j))).collect();
        let e = rel_err(&a, &n);
        ensure!(e <= TOL, "layer {l} task bias: relative error {e:e}");
    }
    Ok(())
}

fn random_batch(rng: &mut impl Rng, n: usize, dim: usize, classes: usize) -> (Array2<f32>, Vec<usize>) {
    let x = Array2::from_shape_simple_fn((n, dim), || rng.gen_range(-1.0f32..1.0));
    let y = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    (x, y)
}

fn rows64(x: &Array2<f32>) -> Vec<Vec<f64>> {
    x.outer_iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
}

/// Replay perceptron loss `CE(new) + λ·CE(memory)` with and without a
/// hidden layer.
pub fn perceptron_case(seed_v: u64, hidden: Option<usize>, lambda: f32) -> Result<(), String> {
    let mut rng = seed::rng(seed_v, "grad-perceptron", 0);
    let (dim, outs) = (7, 4);
    let layers = match hidden {
        Some(h) => vec![Dense::new(dim, h, &mut rng), Dense::new(h, outs, &mut rng)],
        None => vec![Dense::new(dim, outs, &mut rng)],
    };
    let mut layers = layers;
    for l in &mut layers {
        l.b.iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
    }
    let p = ShallowPerceptron::from_layers(layers.clone());
    let (xn, yn) = random_batch(&mut rng, 5, dim, outs);
    let (xm, ym) = random_batch(&mut rng, 3, dim, outs);
    let terms = [
        LossTerm {
            x: xn.view(),
            labels: &yn,
            weight: 1.0,
        },
        LossTerm {
            x: xm.view(),
            labels: &ym,
            weight: lambda,
        },
    ];
    let (loss, grads) = p.loss_and_grads(&terms);
    let refs: Vec<RefLayer> = layers
        .iter()
        .enumerate()
        .map(|(i, d)| RefLayer::from_dense(d, i + 1 < layers.len()))
        .collect();
    let (xn64, xm64) = (rows64(&xn), rows64(&xm));
    let f = |ls: &[RefLayer]| ref_ce(ls, &xn64, &yn) + f64::from(lambda) * ref_ce(ls, &xm64, &ym);
    ensure!((loss - f(&refs)).abs() <= 1e-5 * f(&refs).abs().max(1.0));
    for (l, (dw, db)) in grads.iter().enumerate() {
        check_layer(&f, &refs, l, dw, db, None)?;
    }
    Ok(())
}

/// Keyed, biased network under one task, head keyed too.
pub fn pspbd_case(seed_v: u64, shared: bool) -> Result<(), String> {
    let mut rng = seed::rng(seed_v, "grad-pspbd", 0);
    let (dim, classes) = (6, 3);
    let head = if shared {
        HeadLayout::shared(classes)
    } else {
        HeadLayout::per_task(vec![classes, classes])
    };
    let mut cfg = PspBdConfig::new(dim, vec![5, 4], head);
    cfg.seed = seed_v;
    let mut clf = PspBdClassifier::new(cfg).unwrap();
    clf.add_task().unwrap();
    let t = clf.add_task().unwrap();
    let widths_in = [dim, 5, 4];
    let widths_out = [5, 4, classes];
    let keys: Vec<PspContextKey> = widths_in.iter().map(|&w| PspContextKey::sample(w, &mut rng)).collect();
    let bd: Vec<BdBias> = widths_out
        .iter()
        .map(|&w| BdBias(Array1::from_shape_simple_fn(w, || rng.gen_range(-0.5f32..0.5))))
        .collect();
    clf.set_task_params(t, keys.clone(), bd.clone()).unwrap();
    for l in clf.trunk_mut() {
        l.b.iter_mut().for_each(|b| *b = rng.gen_range(-0.2..0.2));
    }
    let (x, y) = random_batch(&mut rng, 6, dim, classes);
    let (loss, g) = clf.gradients(x.view(), &y, t).unwrap();

    let mut refs: Vec<RefLayer> = clf.trunk().iter().map(|d| RefLayer::from_dense(d, true)).collect();
    refs.push(RefLayer::from_dense(clf.head(t).unwrap(), false));
    for (l, r) in refs.iter_mut().enumerate() {
        r.key = keys[l].as_slice().iter().map(|&v| f64::from(v)).collect();
        r.bd = bd[l].0.iter().map(|&v| f64::from(v)).collect();
    }
    let x64 = rows64(&x);
    let f = |ls: &[RefLayer]| ref_ce(ls, &x64, &y);
    ensure!((loss - f(&refs)).abs() <= 1e-5 * f(&refs).abs().max(1.0));
    for (l, (dw, db)) in g.trunk.iter().enumerate() {
        check_layer(&f, &refs, l, dw, db, Some(&g.bd[l]))?;
    }
    let n = g.trunk.len();
    check_layer(&f, &refs, n, &g.head.0, &g.head.1, Some(&g.bd[n]))?;
    Ok(())
}


/// Logits of `x` under task `t`, recomputed in f64 from the classifier's
/// stored weights, keys and task biases.
#[allow(dead_code)]
pub fn reference_logits(clf: &PspBdClassifier, x: &[f32], t: usize) -> Vec<f64> {
    let n = clf.trunk().len();
    let mut refs: Vec<RefLayer> = clf.trunk().iter().map(|d| RefLayer::from_dense(d, true)).collect();
    refs.push(RefLayer::from_dense(clf.head(t).expect("task head"), false));
    for (l, r) in refs.iter_mut().enumerate() {
        r.key = clf.key(t, l).expect("key").as_slice().iter().map(|&v| f64::from(v)).collect();
        r.bd = clf.bd(t, l).expect("bias").0.iter().map(|&v| f64::from(v)).collect();
    }
    debug_assert_eq!(refs.len(), n + 1);
    let x64: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
    ref_forward(&refs, &x64)
}
