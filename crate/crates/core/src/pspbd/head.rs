use serde::{Deserialize, Serialize};

/// Output-layer arrangement of a task-dependent classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HeadLayout {
    /// One output layer reused by every task; task `t`'s classes occupy
    /// nodes `[0, C_t)`.
    Shared { width: usize },
    /// One output layer per task.
    PerTask { widths: Vec<usize> },
}

impl HeadLayout {
    pub fn shared(width: usize) -> Self {
        HeadLayout::Shared { width }
    }

    pub fn per_task(widths: Vec<usize>) -> Self {
        HeadLayout::PerTask { widths }
    }

    pub fn is_shared(&self) -> bool {
        matches!(self, HeadLayout::Shared { .. })
    }

    /// Output width seen by task `t`.
    pub fn width(&self, t: usize) -> usize {
        match self {
            HeadLayout::Shared { width } => *width,
            HeadLayout::PerTask { widths } => widths.get(t).copied().unwrap_or(0),
        }
    }

    pub fn max_width(&self) -> Option<usize> {
        match self {
            HeadLayout::Shared { width } => Some(*width),
            HeadLayout::PerTask { widths } => widths.iter().copied().max(),
        }
    }

    /// Number of tasks the layout can address, if bounded.
    pub fn task_capacity(&self) -> Option<usize> {
        match self {
            HeadLayout::Shared { .. } => None,
            HeadLayout::PerTask { widths } => Some(widths.len()),
        }
    }
}
