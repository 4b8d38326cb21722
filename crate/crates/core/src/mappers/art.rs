//! Fuzzy ART task mapper with per-task category freezing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{expect_next_task, subsample_indices, InputScaling, MinMaxScaler, PrototypeDictionary, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtConfig {
    /// Vigilance in [0, 1).
    pub rho: f64,
    /// Learning rate in (0, 1].
    pub beta: f32,
    /// Choice-function regularizer.
    pub alpha: f64,
    /// Match-tracking increment (ARTMAP only).
    pub epsilon: f64,
    pub scaling: InputScaling,
    /// Cap on training samples presented per task (`None` = all).
    pub max_samples_per_task: Option<usize>,
    pub seed: u64,
}

impl Default for ArtConfig {
    fn default() -> Self {
        ArtConfig {
            rho: 0.9,
            beta: 1.0,
            alpha: 0.001,
            epsilon: 1e-3,
            scaling: InputScaling::MinMaxFirstTask,
            max_samples_per_task: None,
            seed: 0,
        }
    }
}

impl ArtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::arg(format!("vigilance {} outside [0, 1)", self.rho)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::arg(format!("learning rate {} outside (0, 1]", self.beta)));
        }
        if !(self.alpha > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::arg("alpha and epsilon must be positive"));
        }
        Ok(())
    }
}

const GRID: f64 = (1u32 << 24) as f64;

/// `[x, 1 − x]` for `x` in [0, 1]^D. Inputs are first snapped to multiples
/// of 2⁻²⁴, where `1 − x` is exact in single precision, so every pair sums
/// to exactly 1.
pub fn complement_code(x: &[f32]) -> Result<Vec<f32>> {
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::arg(format!("complement coding needs inputs in [0, 1], got {v}")));
    }
    let snapped: Vec<f32> = x.iter().map(|&v| ((f64::from(v) * GRID).round() / GRID) as f32).collect();
    let mut out = Vec::with_capacity(2 * x.len());
    out.extend_from_slice(&snapped);
    out.extend(snapped.iter().map(|v| 1.0 - v));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtCategory {
    pub w: Vec<f32>,
    pub frozen: bool,
    norm: f64,
}

impl ArtCategory {
    pub fn new(w: Vec<f32>) -> Self {
        let norm = l1(&w);
        ArtCategory { w, frozen: false, norm }
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `w ← β·min(x*, w) + (1 − β)·w`.
    pub(crate) fn update(&mut self, xc: &[f32], beta: f32) {
        for (w, &x) in self.w.iter_mut().zip(xc) {
            *w = beta * x.min(*w) + (1.0 - beta) * *w;
        }
        self.norm = l1(&self.w);
    }
}

fn l1(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x)).sum()
}

/// `‖min(a, b)‖₁`, accumulated in eight lanes.
pub(crate) fn min_overlap(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i].min(y[i]);
        }
    }
    let tail: f32 = ra.iter().zip(rb).map(|(x, y)| x.min(*y)).sum();
    acc.iter().map(|&v| f64::from(v)).sum::<f64>() + f64::from(tail)
}

/// Choice value `‖min(x*, w)‖₁ / (α + ‖w‖₁)` and match ratio
/// `‖min(x*, w)‖₁ / ‖x*‖₁`.
pub(crate) fn choice_and_match(xc: &[f32], xc_norm: f64, cat: &ArtCategory, alpha: f64) -> (f64, f64) {
    let overlap = min_overlap(xc, &cat.w);
    (overlap / (alpha + cat.norm), overlap / xc_norm)
}

pub(crate) fn best_choice(xc: &[f32], cats: &[ArtCategory], alpha: f64) -> Option<usize> {
    let xn = l1(xc);
    let mut best = None::<(usize, f64)>;
    for (i, c) in cats.iter().enumerate() {
        let (t, _) = choice_and_match(xc, xn, c, alpha);
        if best.map_or(true, |(_, bt)| t > bt) {
            best = Some((i, t));
        }
    }
    best.map(|(i, _)| i)
}

/// Scaling and complement coding shared by ART and ARTMAP.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ArtInput {
    scaling: InputScaling,
    scaler: Option<MinMaxScaler>,
}

impl ArtInput {
    pub(crate) fn new(scaling: InputScaling) -> Self {
        ArtInput { scaling, scaler: None }
    }

    pub(crate) fn fit_if_first(&mut self, rows: &[&[f32]]) {
        if self.scaling == InputScaling::MinMaxFirstTask && self.scaler.is_none() {
            self.scaler = MinMaxScaler::fit(rows.iter().copied());
        }
    }

    pub(crate) fn code(&self, x: &[f32]) -> Result<Vec<f32>> {
        match (&self.scaler, self.scaling) {
            (Some(s), _) => complement_code(&s.transform(x)),
            (None, InputScaling::None) => complement_code(x),
            (None, InputScaling::MinMaxFirstTask) => Err(Error::state("input scaler is not fitted")),
        }
    }

    /// Bytes of the frozen scaling statistics.
    pub(crate) fn bytes(&self) -> u64 {
        self.scaler.as_ref().map_or(0, |s| 2 * 4 * s.dim() as u64)
    }
}

pub(crate) fn training_rows<'a>(ctx: &TaskContext<'a>, cap: Option<usize>, seed: u64) -> Vec<&'a [f32]> {
    subsample_indices(ctx.train.len(), cap, seed, "art-subsample", ctx.task_id)
        .into_iter()
        .map(|i| ctx.train.sample(i))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ArtMapper {
    cfg: ArtConfig,
    input: ArtInput,
    dict: PrototypeDictionary<ArtCategory>,
    /// Bit patterns of frozen categories, for the exact-match rule.
    frozen_index: HashMap<Vec<u32>, usize>,
}

impl ArtMapper {
    pub fn new(cfg: ArtConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ArtMapper {
            cfg,
            input: ArtInput::new(cfg.scaling),
            dict: PrototypeDictionary::new(),
            frozen_index: HashMap::new(),
        })
    }

    pub fn config(&self) -> &ArtConfig {
        &self.cfg
    }

    pub fn categories(&self) -> &[ArtCategory] {
        self.dict.entries()
    }

    pub fn dictionary(&self) -> &PrototypeDictionary<ArtCategory> {
        &self.dict
    }

    /// Present one complement-coded sample of the open task.
    fn present(&mut self, xc: Vec<f32>) -> Result<()> {
        let bits: Vec<u32> = xc.iter().map(|v| v.to_bits()).collect();
        if self.frozen_index.contains_key(&bits) {
            // Resonates with a frozen category; nothing may change.
            return Ok(());
        }
        let xn = l1(&xc);
        let mut best = None::<(usize, f64)>;
        let current: Vec<usize> = self.dict.current_indices().collect();
        for i in current {
            let (t, m) = choice_and_match(&xc, xn, &self.dict.entries()[i], self.cfg.alpha);
            if m > self.cfg.rho && best.map_or(true, |(_, bt)| t > bt) {
                best = Some((i, t));
            }
        }
        match best {
            Some((i, _)) => self.dict.get_current_mut(i)?.update(&xc, self.cfg.beta),
            None => {
                self.dict.push(ArtCategory::new(xc))?;
            }
        }
        Ok(())
    }

    fn freeze_current(&mut self) {
        let current: Vec<usize> = self.dict.current_indices().collect();
        for i in current {
            if let Ok(c) = self.dict.get_current_mut(i) {
                c.frozen = true;
                let bits = c.w.iter().map(|v| v.to_bits()).collect();
                self.frozen_index.entry(bits).or_insert(i);
            }
        }
    }
}

impl TaskMapper for ArtMapper {
    fn name(&self) -> String {
        format!("art(rho={})", self.cfg.rho)
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.dict.num_tasks())?;
        let rows = training_rows(ctx, self.cfg.max_samples_per_task, self.cfg.seed);
        self.input.fit_if_first(&rows);
        let coded = rows.iter().map(|r| self.input.code(r)).collect::<Result<Vec<_>>>()?;
        self.dict.begin_task(ctx.task_id)?;
        for xc in coded {
            self.present(xc)?;
        }
        if self.dict.current_indices().next().is_none() {
            // Every sample duplicated a frozen category; keep the task
            // represented by its first sample.
            let xc = self.input.code(rows[0])?;
            self.dict.push(ArtCategory::new(xc))?;
        }
        self.freeze_current();
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        if self.dict.is_empty() {
            return Err(Error::state("ART has no categories"));
        }
        let xc = self.input.code(query.features)?;
        let i = best_choice(&xc, self.dict.entries(), self.cfg.alpha).expect("nonempty");
        Ok(self.dict.label(i) as usize)
    }

    fn num_tasks(&self) -> usize {
        self.dict.num_tasks()
    }

    /// Category weights at 2D floats plus a four-byte task label each, and
    /// the frozen scaling statistics when scaling is on.
    fn memory(&self) -> MemoryLedger {
        let mut m = MemoryLedger::new().with("mapper", self.to_blob().payload_bytes());
        if self.input.bytes() > 0 {
            m.add("mapper-scaler", self.input.bytes());
        }
        m
    }

    fn to_blob(&self) -> Blob {
        categories_blob("art", &self.dict)
    }
}

pub(crate) fn categories_blob(kind: &str, dict: &PrototypeDictionary<ArtCategory>) -> Blob {
    let mut blob = Blob::new(kind);
    let dim = dict.entries().first().map_or(0, |c| c.w.len());
    blob.header = vec![dim as u64, dict.len() as u64, dict.num_tasks() as u64];
    for c in dict.entries() {
        blob.floats.extend_from_slice(&c.w);
    }
    blob.labels = dict.labels().to_vec();
    blob
}
