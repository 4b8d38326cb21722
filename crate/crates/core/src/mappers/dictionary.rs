use crate::error::{Error, Result};

/// Ordered prototype → task-label store. Entries of completed tasks are
/// read-only; only the newest task's entries can be modified.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeDictionary<P> {
    entries: Vec<P>,
    labels: Vec<u32>,
    num_tasks: usize,
}

impl<P> Default for PrototypeDictionary<P> {
    fn default() -> Self {
        PrototypeDictionary {
            entries: Vec::new(),
            labels: Vec::new(),
            num_tasks: 0,
        }
    }
}

impl<P> PrototypeDictionary<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tasks with at least one entry, or opened with `begin_task`.
    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    /// Open task `t` for insertion; it must be the next task.
    pub fn begin_task(&mut self, t: usize) -> Result<()> {
        if t != self.num_tasks {
            return Err(Error::arg(format!("dictionary expects task {}, got {t}", self.num_tasks)));
        }
        self.num_tasks += 1;
        Ok(())
    }

    /// Append an entry for the currently open task.
    pub fn push(&mut self, entry: P) -> Result<usize> {
        if self.num_tasks == 0 {
            return Err(Error::state("no task is open"));
        }
        self.entries.push(entry);
        self.labels.push((self.num_tasks - 1) as u32);
        Ok(self.entries.len() - 1)
    }

    pub fn get(&self, i: usize) -> Option<&P> {
        self.entries.get(i)
    }

    /// Mutable access to entry `i`, allowed only for the open task.
    pub fn get_current_mut(&mut self, i: usize) -> Result<&mut P> {
        let current = self.num_tasks.checked_sub(1).ok_or_else(|| Error::state("no task is open"))? as u32;
        match self.labels.get(i) {
            Some(&l) if l == current => Ok(&mut self.entries[i]),
            Some(&l) => Err(Error::state(format!("entry {i} belongs to completed task {l}"))),
            None => Err(Error::arg(format!("entry {i} out of range"))),
        }
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn entries(&self) -> &[P] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, u32)> {
        self.entries.iter().zip(self.labels.iter().copied())
    }

    /// Indices of the open task's entries.
    pub fn current_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let current = self.num_tasks.wrapping_sub(1) as u32;
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == current)
            .map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completed_entries_are_read_only() {
        let mut d = PrototypeDictionary::new();
        assert!(d.push(1).is_err());
        d.begin_task(0).unwrap();
        d.push(10).unwrap();
        d.begin_task(1).unwrap();
        let i = d.push(20).unwrap();
        assert!(d.get_current_mut(0).is_err());
        *d.get_current_mut(i).unwrap() = 21;
        assert_eq!(d.labels(), &[0, 1]);
        assert_eq!(d.current_indices().collect::<Vec<_>>(), vec![1]);
        assert!(d.begin_task(3).is_err());
    }
}
