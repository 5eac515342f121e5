use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ServerlessError;
use crate::cost::billed_duration_us;

/// Resources of one lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSpec {
    pub vcpu_fraction: f64,
    pub memory_mb: u32,
    /// Reference-core single-precision GFLOP/s.
    pub core_gflops: f64,
}

impl Default for LambdaSpec {
    fn default() -> Self {
        Self {
            vcpu_fraction: 0.11,
            memory_mb: 192,
            core_gflops: 4.0,
        }
    }
}

impl LambdaSpec {
    /// FLOP/s of one lambda.
    pub fn compute_rate(&self) -> f64 {
        self.vcpu_fraction * self.core_gflops * 1e9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub base_latency_us: u64,
    pub peak_bw_mbps: f64,
    /// Shared by all lambdas talking to one graph server.
    pub aggregate_cap_mbps: f64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        Self {
            base_latency_us: 5_000,
            peak_bw_mbps: 800.0,
            aggregate_cap_mbps: 20_000.0,
        }
    }
}

impl NetworkModel {
    /// Per-lambda bandwidth with `n` lambdas active: `min(peak, cap/n)`.
    pub fn bandwidth_mbps(&self, n: usize) -> f64 {
        let n = n.max(1) as f64;
        self.peak_bw_mbps.min(self.aggregate_cap_mbps / n)
    }

    /// Microseconds to move `bytes` at `n`-lambda bandwidth.
    pub fn transfer_us(&self, bytes: u64, n: usize) -> f64 {
        // Mbit/s is bit/µs
        (bytes * 8) as f64 / self.bandwidth_mbps(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TensorKind {
    ApplyVertex,
    ApplyEdge,
    GradApplyVertex,
    GradApplyEdge,
    Fused,
}

/// FLOPs and bytes moved by one tensor task.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TensorWork {
    pub flops: f64,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

impl TensorWork {
    /// One invocation doing `first` then `second`: summed FLOPs, the first
    /// task's inputs and the second task's outputs.
    pub fn fused(first: TensorWork, second: TensorWork) -> Self {
        Self {
            flops: first.flops + second.flops,
            bytes_in: first.bytes_in,
            bytes_out: second.bytes_out,
        }
    }
}

/// `rows × fan_in` times `fan_in × fan_out`, plus the activation. Without
/// rematerialisation the pre-activation is uploaded for the backward pass.
pub fn apply_vertex_work(
    rows: usize,
    fan_in: usize,
    fan_out: usize,
    scalar_bytes: usize,
    remat: bool,
) -> TensorWork {
    let (r, i, o, b) = (
        rows as u64,
        fan_in as u64,
        fan_out as u64,
        scalar_bytes as u64,
    );
    let stash = if remat { 0 } else { r * o * b };
    TensorWork {
        flops: (2 * r * i * o + r * o) as f64,
        bytes_in: (r * i + i * o) * b,
        bytes_out: r * o * b + stash,
    }
}

/// ∇W and, optionally, the downstream gradient. Rematerialisation recomputes
/// the pre-activation instead of downloading it.
pub fn grad_apply_vertex_work(
    rows: usize,
    fan_in: usize,
    fan_out: usize,
    scalar_bytes: usize,
    remat: bool,
    downstream: bool,
) -> TensorWork {
    let (r, i, o, b) = (
        rows as u64,
        fan_in as u64,
        fan_out as u64,
        scalar_bytes as u64,
    );
    let mut flops = 2 * r * i * o + r * o;
    if downstream {
        flops += 2 * r * o * i;
    }
    let mut bytes_in = (r * o + r * i + i * o) * b;
    if remat {
        flops += 2 * r * i * o;
    } else {
        bytes_in += r * o * b;
    }
    TensorWork {
        flops: flops as f64,
        bytes_in,
        bytes_out: (i * o + if downstream { r * i } else { 0 }) * b,
    }
}

/// Identity ApplyEdge over `edges` messages of `width`.
pub fn apply_edge_work(edges: usize, width: usize, scalar_bytes: usize) -> TensorWork {
    let bytes = (edges * width * scalar_bytes) as u64;
    TensorWork {
        flops: (edges * width) as f64,
        bytes_in: bytes,
        bytes_out: bytes,
    }
}

/// Components of one invocation's duration, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvocationTiming {
    pub latency_us: f64,
    pub transfer_in_us: f64,
    pub compute_us: f64,
    pub transfer_out_us: f64,
    pub streaming: bool,
}

impl InvocationTiming {
    pub fn total_us(&self) -> u64 {
        let t = if self.streaming {
            // compute starts on the first half of the input while the
            // second half is still arriving
            let half_in = self.transfer_in_us / 2.0;
            let half_c = self.compute_us / 2.0;
            self.latency_us + half_in + half_c.max(half_in) + half_c + self.transfer_out_us
        } else {
            self.latency_us + self.transfer_in_us + self.compute_us + self.transfer_out_us
        };
        libm::ceil(t) as u64
    }
}

/// Scales the compute term of `timing` by `factor`.
pub fn inject_straggler(timing: &mut InvocationTiming, factor: f64) {
    timing.compute_us *= factor;
}

/// Seeded choice of which invocations straggle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StragglerPlan {
    pub fraction: f64,
    pub factor: f64,
    pub seed: u64,
}

impl Default for StragglerPlan {
    fn default() -> Self {
        Self {
            fraction: 0.0,
            factor: 1.0,
            seed: 0,
        }
    }
}

impl StragglerPlan {
    pub fn factor_for(&self, seq: u64) -> Option<f64> {
        if self.fraction <= 0.0 {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(seq);
        (rng.random::<f64>() < self.fraction).then_some(self.factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    pub spec: LambdaSpec,
    pub network: NetworkModel,
    pub streaming: bool,
    pub stragglers: StragglerPlan,
    pub timeout_multiplier: f64,
    pub min_timeout_us: u64,
    /// Recent invocations the p95 is taken over.
    pub p95_window: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            spec: LambdaSpec::default(),
            network: NetworkModel::default(),
            streaming: false,
            stragglers: StragglerPlan::default(),
            timeout_multiplier: 5.0,
            min_timeout_us: 1_000_000,
            p95_window: 256,
        }
    }
}

/// Identifies the task an invocation ran for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskRef {
    pub kind: TensorKind,
    pub partition: usize,
    pub interval: usize,
    pub layer: usize,
    pub epoch: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Ok,
    Straggler,
    /// Killed at the timeout and launched again.
    TimeoutRelaunched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub seq: u64,
    pub task: TaskRef,
    pub start_us: u64,
    pub end_us: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub billed_us: u64,
    pub outcome: Outcome,
}

impl Invocation {
    pub fn duration_us(&self) -> u64 {
        self.end_us - self.start_us
    }
}

/// Turns tensor work into virtual durations and invocation records.
#[derive(Debug, Clone)]
pub struct Executor {
    config: ExecutorConfig,
    next_seq: u64,
    recent: VecDeque<u64>,
}

impl Executor {
    pub fn new(config: ExecutorConfig) -> Self {
        Self {
            config,
            next_seq: 0,
            recent: VecDeque::new(),
        }
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    pub fn timing(&self, work: &TensorWork, fleet_size: usize) -> InvocationTiming {
        let net = &self.config.network;
        InvocationTiming {
            latency_us: net.base_latency_us as f64,
            transfer_in_us: net.transfer_us(work.bytes_in, fleet_size),
            compute_us: work.flops / self.config.spec.compute_rate() * 1e6,
            transfer_out_us: net.transfer_us(work.bytes_out, fleet_size),
            streaming: self.config.streaming,
        }
    }

    /// `max(multiplier × p95 of recent durations, floor)`.
    pub fn timeout_us(&self) -> u64 {
        if self.recent.is_empty() {
            return self.config.min_timeout_us;
        }
        let mut sorted: Vec<u64> = self.recent.iter().copied().collect();
        sorted.sort_unstable();
        let idx = libm::ceil(0.95 * sorted.len() as f64) as usize - 1;
        let p95 = sorted[idx.min(sorted.len() - 1)] as f64;
        (libm::ceil(p95 * self.config.timeout_multiplier) as u64).max(self.config.min_timeout_us)
    }

    fn remember(&mut self, d: u64) {
        self.recent.push_back(d);
        while self.recent.len() > self.config.p95_window.max(1) {
            self.recent.pop_front();
        }
    }

    /// Runs `work` starting at `start_us`; returns the records (two when a
    /// relaunch happened) and the completion time.
    pub fn invoke(
        &mut self,
        task: TaskRef,
        work: &TensorWork,
        fleet_size: usize,
        start_us: u64,
    ) -> Result<(Vec<Invocation>, u64), ServerlessError> {
        if fleet_size == 0 {
            return Err(ServerlessError::EmptyFleet);
        }
        let timeout = self.timeout_us();
        let mut records = Vec::new();
        let mut start = start_us;
        for attempt in 0..2 {
            let seq = self.next_seq;
            self.next_seq += 1;
            let mut timing = self.timing(work, fleet_size);
            let straggle = self.config.stragglers.factor_for(seq);
            if let Some(f) = straggle {
                inject_straggler(&mut timing, f);
            }
            let d = timing.total_us();
            if d > timeout {
                if attempt == 1 {
                    return Err(ServerlessError::RepeatedTimeout {
                        seq,
                        timeout_us: timeout,
                    });
                }
                records.push(Invocation {
                    seq,
                    task,
                    start_us: start,
                    end_us: start + timeout,
                    bytes_in: work.bytes_in,
                    bytes_out: 0,
                    billed_us: billed_duration_us(timeout),
                    outcome: Outcome::TimeoutRelaunched,
                });
                start += timeout;
                continue;
            }
            self.remember(d);
            records.push(Invocation {
                seq,
                task,
                start_us: start,
                end_us: start + d,
                bytes_in: work.bytes_in,
                bytes_out: work.bytes_out,
                billed_us: billed_duration_us(d),
                outcome: if straggle.is_some() {
                    Outcome::Straggler
                } else {
                    Outcome::Ok
                },
            });
            return Ok((records, start + d));
        }
        unreachable!("second attempt either returns or errors")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task() -> TaskRef {
        TaskRef {
            kind: TensorKind::ApplyVertex,
            partition: 0,
            interval: 0,
            layer: 0,
            epoch: 0,
        }
    }

    #[test]
    fn bandwidth_curve() {
        let n = NetworkModel::default();
        assert_eq!(n.bandwidth_mbps(1), 800.0);
        assert_eq!(n.bandwidth_mbps(25), 800.0);
        assert_eq!(n.bandwidth_mbps(50), 400.0);
        assert_eq!(n.bandwidth_mbps(100), 200.0);
        // 1 MB at 800 Mbit/s
        assert_eq!(n.transfer_us(1_000_000, 1), 10_000.0);
    }

    #[test]
    fn compute_rate_is_fraction_of_core() {
        assert!((LambdaSpec::default().compute_rate() - 0.44e9).abs() < 1.0);
    }

    #[test]
    fn plain_and_streaming_durations() {
        let mut t = InvocationTiming {
            latency_us: 5_000.0,
            transfer_in_us: 4_000.0,
            compute_us: 6_000.0,
            transfer_out_us: 1_000.0,
            streaming: false,
        };
        assert_eq!(t.total_us(), 16_000);
        t.streaming = true;
        // 5 + 2 + max(3, 2) + 3 + 1
        assert_eq!(t.total_us(), 14_000);
        t.compute_us = 1_000.0;
        // transfer-bound: 5 + 2 + 2 + 0.5 + 1
        assert_eq!(t.total_us(), 10_500);
    }

    #[test]
    fn straggler_factor_one_is_neutral() {
        let mut t = InvocationTiming {
            latency_us: 1.0,
            transfer_in_us: 2.0,
            compute_us: 3.0,
            transfer_out_us: 4.0,
            streaming: false,
        };
        let before = t.total_us();
        inject_straggler(&mut t, 1.0);
        assert_eq!(t.total_us(), before);
        inject_straggler(&mut t, 5.0);
        assert_eq!(t.total_us(), 22);
    }

    #[test]
    fn straggler_fraction_is_respected() {
        let plan = StragglerPlan {
            fraction: 0.1,
            factor: 5.0,
            seed: 9,
        };
        let hits = (0..10_000)
            .filter(|&s| plan.factor_for(s).is_some())
            .count();
        assert!((800..1200).contains(&hits), "{hits}");
        assert_eq!(
            (0..100).map(|s| plan.factor_for(s)).collect::<Vec<_>>(),
            (0..100).map(|s| plan.factor_for(s)).collect::<Vec<_>>()
        );
        assert!(StragglerPlan::default().factor_for(3).is_none());
    }

    #[test]
    fn fusion_and_remat_change_work() {
        let av = apply_vertex_work(10, 8, 4, 4, false);
        let av_r = apply_vertex_work(10, 8, 4, 4, true);
        assert_eq!(av.bytes_out - av_r.bytes_out, 10 * 4 * 4);
        let g = grad_apply_vertex_work(10, 8, 4, 4, false, true);
        let g_r = grad_apply_vertex_work(10, 8, 4, 4, true, true);
        assert!(g_r.flops > g.flops);
        assert!(g_r.bytes_in < g.bytes_in);
        let f = TensorWork::fused(av, g);
        assert_eq!(f.flops, av.flops + g.flops);

        let mut ex = Executor::new(ExecutorConfig::default());
        let (_, t_sep1) = ex.invoke(task(), &av, 1, 0).unwrap();
        let (_, t_sep2) = ex.invoke(task(), &g, 1, 0).unwrap();
        let (_, t_fused) = ex.invoke(task(), &f, 1, 0).unwrap();
        assert!(t_fused < t_sep1 + t_sep2);
    }

    #[test]
    fn billing_rounds_up() {
        let mut ex = Executor::new(ExecutorConfig::default());
        let (recs, end) = ex.invoke(task(), &TensorWork::default(), 4, 100).unwrap();
        assert_eq!(end, 5_100);
        assert_eq!(recs[0].billed_us, 100_000);
        assert_eq!(recs[0].outcome, Outcome::Ok);
    }

    #[test]
    fn timeout_relaunches_once_then_errors() {
        let cfg = ExecutorConfig {
            stragglers: StragglerPlan {
                fraction: 1.0,
                factor: 1e6,
                seed: 1,
            },
            ..ExecutorConfig::default()
        };
        let mut ex = Executor::new(cfg);
        let work = TensorWork {
            flops: 1e6,
            bytes_in: 0,
            bytes_out: 0,
        };
        let err = ex.invoke(task(), &work, 1, 0).unwrap_err();
        assert!(matches!(
            err,
            ServerlessError::RepeatedTimeout {
                timeout_us: 1_000_000,
                ..
            }
        ));

        // a one-off straggler gets relaunched and both attempts are recorded
        let cfg = ExecutorConfig {
            stragglers: StragglerPlan {
                fraction: 0.5,
                factor: 1e6,
                seed: 3,
            },
            ..ExecutorConfig::default()
        };
        let plan = cfg.stragglers;
        let first = (0..1000)
            .find(|&s| plan.factor_for(s).is_some() && plan.factor_for(s + 1).is_none())
            .unwrap();
        let mut ex = Executor::new(cfg);
        for _ in 0..first {
            ex.next_seq += 1;
        }
        let (recs, end) = ex.invoke(task(), &work, 1, 0).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].outcome, Outcome::TimeoutRelaunched);
        assert_eq!(recs[1].start_us, 1_000_000);
        assert!(end > 1_000_000);
    }

    #[test]
    fn timeout_tracks_p95() {
        let mut ex = Executor::new(ExecutorConfig::default());
        assert_eq!(ex.timeout_us(), 1_000_000);
        for d in 1..=100u64 {
            ex.remember(d * 10_000);
        }
        // p95 = 950 ms → 4.75 s
        assert_eq!(ex.timeout_us(), 4_750_000);
    }
}
