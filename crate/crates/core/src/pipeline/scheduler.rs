use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::task::{ChainShape, Step, Task, TaskKind};
use crate::gnn::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipelineMode {
    /// Synchronous with intra-layer pipelining: layer barriers at every
    /// Gather and an epoch barrier on the weight update.
    Pipe,
    /// Bounded asynchrony: neighbour values and interval epochs may be up to
    /// `staleness` epochs apart.
    Async { staleness: u32 },
}

impl PipelineMode {
    pub fn staleness(&self) -> u32 {
        match *self {
            Self::Pipe => 0,
            Self::Async { staleness } => staleness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admission {
    Admit,
    Block,
}

/// Admit iff the value is from the consumer's epoch or at most `s` before.
pub fn check_gather_admissible(consumer_epoch: u32, value_epoch: u32, s: u32) -> Admission {
    match consumer_epoch.checked_sub(value_epoch) {
        Some(d) if d <= s => Admission::Admit,
        _ => Admission::Block,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalState {
    /// Epoch the interval is in, or about to start.
    pub epoch: u32,
    /// Next task to run; `None` once every epoch is done.
    pub step: Option<Step>,
    pub running: bool,
}

impl IntervalState {
    fn waiting_to_start(&self) -> bool {
        self.step == Some(Step::START) && !self.running
    }
}

/// Scheduler-side view of every interval plus the epochs of the values
/// each interval has scattered.
#[derive(Debug, Clone)]
pub struct IntervalProgress {
    shape: ChainShape,
    mode: PipelineMode,
    max_epochs: u32,
    intervals: Vec<IntervalState>,
    /// `[layer][interval]`: epochs of published activations `H_layer`.
    fwd: Vec<Vec<BTreeSet<u32>>>,
    /// `[layer][interval]`: epochs of published `δW_layerᵀ` rows.
    bwd: Vec<Vec<BTreeSet<u32>>>,
    fwd_deps: Vec<Vec<usize>>,
    bwd_deps: Vec<Vec<usize>>,
    weights_ready_through: Option<u32>,
    stopped: bool,
}

impl IntervalProgress {
    /// `fwd_deps[i]` lists the intervals whose rows interval `i` reads in a
    /// forward Gather, `bwd_deps[i]` those it reads in a backward Gather.
    pub fn new(
        shape: ChainShape,
        mode: PipelineMode,
        max_epochs: u32,
        fwd_deps: Vec<Vec<usize>>,
        bwd_deps: Vec<Vec<usize>>,
    ) -> Self {
        let n = fwd_deps.len();
        let start = if max_epochs > 0 {
            Some(Step::START)
        } else {
            None
        };
        Self {
            shape,
            mode,
            max_epochs,
            intervals: vec![
                IntervalState {
                    epoch: 0,
                    step: start,
                    running: false,
                };
                n
            ],
            fwd: vec![vec![BTreeSet::new(); n]; shape.layers],
            bwd: vec![vec![BTreeSet::new(); n]; shape.layers],
            fwd_deps,
            bwd_deps,
            weights_ready_through: None,
            stopped: false,
        }
    }

    pub fn shape(&self) -> ChainShape {
        self.shape
    }

    pub fn mode(&self) -> PipelineMode {
        self.mode
    }

    pub fn intervals(&self) -> &[IntervalState] {
        &self.intervals
    }

    pub fn is_done(&self) -> bool {
        self.stopped || self.intervals.iter().all(|s| s.step.is_none())
    }

    pub fn stop(&mut self) {
        self.stopped = true;
    }

    /// Lowest epoch any interval is in or about to start.
    pub fn slowest_epoch(&self) -> u32 {
        self.intervals.iter().map(|s| s.epoch).min().unwrap_or(0)
    }

    /// Distance between the most advanced interval that has begun its epoch
    /// and the slowest interval.
    pub fn epoch_gap(&self) -> u32 {
        let slowest = self.slowest_epoch();
        self.intervals
            .iter()
            .filter(|s| s.step.is_some() && !s.waiting_to_start())
            .map(|s| s.epoch - slowest)
            .max()
            .unwrap_or(0)
    }

    /// Weight updates of every epoch up to `epoch` are applied and visible.
    pub fn record_weights_ready(&mut self, epoch: u32) {
        self.weights_ready_through =
            Some(self.weights_ready_through.map_or(epoch, |e| e.max(epoch)));
    }

    pub fn mark_started(&mut self, task: &Task) {
        let s = &mut self.intervals[task.interval];
        debug_assert_eq!(s.step, Some(task.step()));
        debug_assert!(!s.running);
        s.running = true;
    }

    /// Advances the interval past `task`; returns true when that finished
    /// the interval's epoch.
    pub fn mark_completed(&mut self, task: &Task) -> bool {
        match task.kind {
            TaskKind::Scatter => {
                self.fwd[task.layer + 1][task.interval].insert(task.epoch);
            }
            TaskKind::GradScatter => {
                self.bwd[task.layer][task.interval].insert(task.epoch);
            }
            _ => {}
        }
        let shape = self.shape;
        let max = self.max_epochs;
        let s = &mut self.intervals[task.interval];
        s.running = false;
        match shape.successor(task.step()) {
            Some(next) => {
                s.step = Some(next);
                false
            }
            None => {
                s.epoch += 1;
                s.step = (s.epoch < max).then_some(Step::START);
                true
            }
        }
    }

    fn history(&self, dir: Direction, layer: usize, interval: usize) -> &BTreeSet<u32> {
        match dir {
            Direction::Forward => &self.fwd[layer][interval],
            Direction::Backward => &self.bwd[layer][interval],
        }
    }

    /// For a Gather task, the (producer interval, value epoch) pairs it would
    /// read, or `None` while it must block. Forward layer 0 reads the static
    /// features and resolves to an empty list.
    pub fn resolve_gather(&self, task: &Task) -> Option<Vec<(usize, u32)>> {
        let dir = task.direction();
        if dir == Direction::Forward && task.layer == 0 {
            return Some(Vec::new());
        }
        let e = task.epoch;
        match self.mode {
            PipelineMode::Pipe => {
                let all = (0..self.intervals.len())
                    .all(|j| self.history(dir, task.layer, j).contains(&e));
                if !all {
                    return None;
                }
                Some(
                    self.deps(dir, task.interval)
                        .iter()
                        .map(|&j| (j, e))
                        .collect(),
                )
            }
            PipelineMode::Async { staleness } => self
                .deps(dir, task.interval)
                .iter()
                .map(|&j| {
                    let ve = *self.history(dir, task.layer, j).range(..=e).next_back()?;
                    (check_gather_admissible(e, ve, staleness) == Admission::Admit)
                        .then_some((j, ve))
                })
                .collect(),
        }
    }

    fn deps(&self, dir: Direction, interval: usize) -> &[usize] {
        match dir {
            Direction::Forward => &self.fwd_deps[interval],
            Direction::Backward => &self.bwd_deps[interval],
        }
    }

    fn may_start_epoch(&self, e: u32) -> bool {
        match self.mode {
            PipelineMode::Pipe => e == 0 || self.weights_ready_through.is_some_and(|r| r + 1 >= e),
            PipelineMode::Async { staleness } => e - self.slowest_epoch() <= staleness,
        }
    }

    /// Every runnable task, ordered by (epoch, layer, interval).
    pub fn next_tasks(&self) -> Vec<Task> {
        if self.stopped {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (i, s) in self.intervals.iter().enumerate() {
            let Some(step) = s.step else { continue };
            if s.running {
                continue;
            }
            let task = Task {
                epoch: s.epoch,
                layer: step.layer,
                interval: i,
                kind: step.kind,
            };
            if step == Step::START && !self.may_start_epoch(s.epoch) {
                continue;
            }
            if matches!(step.kind, TaskKind::Gather | TaskKind::GradGather)
                && self.resolve_gather(&task).is_none()
            {
                continue;
            }
            out.push(task);
        }
        out.sort_unstable_by_key(|t| (t.epoch, t.layer, t.interval));
        out
    }

    /// Forgets value epochs no consumer can still admit, keeping the newest.
    pub fn prune(&mut self) {
        let floor = self.slowest_epoch().saturating_sub(self.mode.staleness());
        for set in self.fwd.iter_mut().chain(self.bwd.iter_mut()).flatten() {
            while set.len() > 1 && set.first().is_some_and(|&e| e < floor) {
                set.pop_first();
            }
        }
    }
}
