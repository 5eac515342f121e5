use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Starting fleet size for a graph server with `intervals` intervals.
pub fn initial_fleet_size(intervals: usize) -> usize {
    intervals.clamp(1, 100)
}

/// One tuning decision over the trailing `window` queue samples.
///
/// A strictly growing queue means the fleet outpaces the graph server, so it
/// shrinks by 0.8; a strictly shrinking queue grows it by 1.25.
pub fn autotune_step(history: &[usize], window: usize, size: usize, max: usize) -> usize {
    let max = max.max(1);
    if window < 2 || history.len() < window {
        return size.clamp(1, max);
    }
    let tail = &history[history.len() - window..];
    let next = if tail.windows(2).all(|w| w[0] < w[1]) {
        (size * 4).div_ceil(5)
    } else if tail.windows(2).all(|w| w[0] > w[1]) {
        (size * 5).div_ceil(4)
    } else {
        size
    };
    next.clamp(1, max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autotuner {
    size: usize,
    max: usize,
    window: usize,
    history: VecDeque<usize>,
    trajectory: Vec<usize>,
}

impl Autotuner {
    pub fn new(intervals: usize, max: usize, window: usize) -> Self {
        let max = max.max(1);
        let size = initial_fleet_size(intervals).min(max);
        Self {
            size,
            max,
            window,
            history: VecDeque::new(),
            trajectory: alloc::vec![size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn max(&self) -> usize {
        self.max
    }

    /// Every fleet size taken so far, starting with the initial one.
    pub fn trajectory(&self) -> &[usize] {
        &self.trajectory
    }

    /// Feeds one queue-length sample and returns the (possibly new) size.
    pub fn observe(&mut self, queue_len: usize) -> usize {
        self.history.push_back(queue_len);
        while self.history.len() > self.window {
            self.history.pop_front();
        }
        let h: Vec<usize> = self.history.iter().copied().collect();
        let next = autotune_step(&h, self.window, self.size, self.max);
        if next != self.size {
            self.size = next;
            self.trajectory.push(next);
            self.history.clear();
        }
        self.size
    }
}
