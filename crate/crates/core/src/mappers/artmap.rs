//! Supervised fuzzy ARTMAP task mapper with match tracking.

use super::art::{best_choice, categories_blob, choice_and_match, training_rows, ArtInput};
use super::{expect_next_task, ArtCategory, ArtConfig, PrototypeDictionary, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;

#[derive(Debug, Clone)]
pub struct ArtmapMapper {
    cfg: ArtConfig,
    input: ArtInput,
    /// Categories keyed by the task whose sample created them. Unlike
    /// `PrototypeDictionary`'s usual append-per-task flow, older categories
    /// are only touched by samples carrying their own label, which never
    /// occur after their task.
    cats: Vec<ArtCategory>,
    labels: Vec<u32>,
    num_tasks: usize,
    discarded: u64,
}

impl ArtmapMapper {
    pub fn new(cfg: ArtConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ArtmapMapper {
            cfg,
            input: ArtInput::new(cfg.scaling),
            cats: Vec::new(),
            labels: Vec::new(),
            num_tasks: 0,
            discarded: 0,
        })
    }

    pub fn categories(&self) -> &[ArtCategory] {
        &self.cats
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Samples dropped because match tracking drove vigilance to 1.
    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    /// Present one complement-coded sample with its task label.
    fn present(&mut self, xc: Vec<f32>, label: u32) {
        let xn: f64 = xc.iter().map(|&v| f64::from(v)).sum();
        let mut cand: Vec<(usize, f64, f64)> = self
            .cats
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (t, m) = choice_and_match(&xc, xn, c, self.cfg.alpha);
                (i, t, m)
            })
            .collect();
        // Highest choice first; lowest index on ties.
        cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut rho = self.cfg.rho;
        for (i, _, m) in cand {
            if m <= rho {
                continue;
            }
            if self.labels[i] == label {
                self.cats[i].update(&xc, self.cfg.beta);
                return;
            }
            rho = m + self.cfg.epsilon;
            if rho >= 1.0 {
                self.discarded += 1;
                return;
            }
        }
        self.cats.push(ArtCategory::new(xc));
        self.labels.push(label);
    }

    fn as_dictionary(&self) -> PrototypeDictionary<ArtCategory> {
        let mut d = PrototypeDictionary::new();
        for t in 0..self.num_tasks {
            d.begin_task(t).expect("sequential");
            for (c, _) in self.cats.iter().zip(&self.labels).filter(|(_, &l)| l as usize == t) {
                d.push(c.clone()).expect("open task");
            }
        }
        d
    }
}

impl TaskMapper for ArtmapMapper {
    fn name(&self) -> String {
        format!("artmap(rho={})", self.cfg.rho)
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.num_tasks)?;
        let rows = training_rows(ctx, self.cfg.max_samples_per_task, self.cfg.seed);
        self.input.fit_if_first(&rows);
        let coded = rows.iter().map(|r| self.input.code(r)).collect::<Result<Vec<_>>>()?;
        let label = ctx.task_id as u32;
        for xc in coded {
            self.present(xc, label);
        }
        if !self.labels.contains(&label) {
            let xc = self.input.code(rows[0])?;
            self.cats.push(ArtCategory::new(xc));
            self.labels.push(label);
        }
        self.num_tasks += 1;
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        if self.cats.is_empty() {
            return Err(Error::state("ARTMAP has no categories"));
        }
        let xc = self.input.code(query.features)?;
        let i = best_choice(&xc, &self.cats, self.cfg.alpha).expect("nonempty");
        Ok(self.labels[i] as usize)
    }

    fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    fn memory(&self) -> MemoryLedger {
        let mut m = MemoryLedger::new().with("mapper", self.to_blob().payload_bytes());
        if self.input.bytes() > 0 {
            m.add("mapper-scaler", self.input.bytes());
        }
        m
    }

    /// Categories grouped by task, in creation order within a task.
    fn to_blob(&self) -> Blob {
        categories_blob("artmap", &self.as_dictionary())
    }
}
