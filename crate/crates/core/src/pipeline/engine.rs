use alloc::collections::{BTreeMap, BinaryHeap, VecDeque};
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::config::{EngineConfig, TrainingData};
use super::report::{
    BroadcastRecord, Captured, EpochRecord, GatherAudit, MixingAudit, QueueSample, RunStatus,
    TrainingReport, WeightAudit,
};
use super::scheduler::{IntervalProgress, PipelineMode};
use super::task::{ChainShape, Task, TaskKind};
use super::PipelineError;
use crate::cost::{CostSummary, UsageLedger};
use crate::gnn::{
    apply_vertex, backward_gather, gather, grad_apply_vertex, output_gradient, scatter, ChunkKind,
    ContextStore, DenseRows, Direction, LayerChunk, RowSource,
};
use crate::graph::{
    partition_graph, round_robin_assignment, split_intervals, Partition, PartitionId, VertexId,
    VertexInterval,
};
use crate::paramserver::{GradTag, PsCluster, WeightSet};
use crate::serverless::{
    apply_edge_work, apply_vertex_work, grad_apply_vertex_work, Autotuner, Executor, InProcess,
    Invocation, Message, MessageType, TaskRef, TensorWork, Transport, TransportError,
};
use crate::tensor::{argmax_rows, xavier_init, Matrix, OptimizerState};
use crate::Error;

/// Trains with the in-process transport.
pub fn run_epochs(data: &TrainingData, config: &EngineConfig) -> Result<TrainingReport, Error> {
    run_epochs_with(data, config, &mut InProcess::default())
}

/// Trains, sending every cross-partition message through `transport`.
pub fn run_epochs_with(
    data: &TrainingData,
    config: &EngineConfig,
    transport: &mut dyn Transport,
) -> Result<TrainingReport, Error> {
    Engine::new(data, config, transport)?.run()
}

/// Initial weights for `dims`, one seeded Xavier draw per layer.
pub fn initial_weights(dims: &[usize], seed: u64) -> Result<Vec<Matrix<f32>>, Error> {
    dims.windows(2)
        .enumerate()
        .map(|(l, w)| Ok(xavier_init(w[0], w[1], seed.wrapping_add(l as u64))?))
        .collect()
}

struct IntervalInfo {
    partition: PartitionId,
    iv: VertexInterval,
    in_edges: usize,
    out_edges: usize,
}

struct GhostBlock {
    vertices: Vec<VertexId>,
    rows: Matrix<f32>,
}

/// One interval's scattered rows at one epoch: the producer's copy plus the
/// ghost copies each remote partition received.
struct ValueBlock {
    rows: Matrix<f32>,
    ghosts: BTreeMap<PartitionId, GhostBlock>,
}

struct HistSource<'a> {
    consumer: PartitionId,
    owner: &'a [usize],
    intervals: &'a [IntervalInfo],
    parts: &'a [Partition],
    blocks: BTreeMap<usize, Arc<ValueBlock>>,
}

impl RowSource<f32> for HistSource<'_> {
    fn row(&self, v: VertexId) -> Option<&[f32]> {
        let j = *self.owner.get(v as usize)?;
        let block = self.blocks.get(&j)?;
        let info = &self.intervals[j];
        if info.partition == self.consumer {
            let i = self.parts[info.partition].local_index(v)? - info.iv.start;
            Some(block.rows.row(i))
        } else {
            let g = block.ghosts.get(&self.consumer)?;
            let i = g.vertices.binary_search(&v).ok()?;
            Some(g.rows.row(i))
        }
    }
}

#[derive(Default)]
struct Scratch {
    gathered: Option<Matrix<f32>>,
    output: Option<Matrix<f32>>,
    upstream: Option<Matrix<f32>>,
}

enum Outcome {
    Gathered(Matrix<f32>),
    Output(Matrix<f32>),
    Published(Arc<ValueBlock>),
    Identity,
    Gradient {
        grad_w: Matrix<f32>,
        downstream: Option<Matrix<f32>>,
    },
}

enum Event {
    Finish(Task, Outcome),
    UpdateDone { epoch: u32, layer: usize },
    Broadcast { ready_epoch: Option<u32> },
    Sample,
}

#[derive(Default)]
struct EpochStats {
    loss: f64,
    train_correct: usize,
    val_correct: usize,
    invocations: u64,
    histogram: BTreeMap<u32, u64>,
    finished_intervals: usize,
    applied_layers: usize,
}

fn fnv64(row: &[f32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in row {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

struct Engine<'a> {
    data: &'a TrainingData,
    cfg: &'a EngineConfig,
    transport: &'a mut dyn Transport,
    dims: Vec<usize>,
    layers: usize,
    parts: Vec<Partition>,
    intervals: Vec<IntervalInfo>,
    owner: Vec<usize>,
    progress: IntervalProgress,
    contexts: ContextStore<f32>,
    ps: PsCluster<f32>,
    executor: Executor,
    tuners: Vec<Autotuner>,
    fwd_hist: Vec<Vec<BTreeMap<u32, Arc<ValueBlock>>>>,
    bwd_hist: Vec<Vec<BTreeMap<u32, Arc<ValueBlock>>>>,
    produced: BTreeMap<(Direction, usize, VertexId, u32), u64>,
    scratch: Vec<Scratch>,
    train_count: usize,
    val_count: usize,

    now: u64,
    seq: u64,
    heap: BinaryHeap<Reverse<(u64, u64)>>,
    events: BTreeMap<u64, Event>,
    gs_busy: Vec<usize>,
    lambda_busy: Vec<usize>,
    in_flight: usize,
    wu_queue: VecDeque<(u32, usize)>,
    ps_busy: bool,
    updates_since_broadcast: u32,

    stats: BTreeMap<u32, EpochStats>,
    records: Vec<EpochRecord>,
    next_record: u32,
    last_completion: u64,
    status: Option<RunStatus>,
    plateau: u32,

    ledger: UsageLedger,
    invocations: Vec<Invocation>,
    staleness_audit: Vec<GatherAudit>,
    weight_audit: BTreeMap<(usize, u32, usize), WeightAudit>,
    mixing: MixingAudit,
    queue_samples: Vec<QueueSample>,
    broadcasts: Vec<BroadcastRecord>,
    ae_executions: u64,
    max_gap: u32,
    capture_logits: Option<Matrix<f32>>,
    capture_grads: Vec<BTreeMap<usize, Matrix<f32>>>,
}

impl<'a> Engine<'a> {
    fn new(
        data: &'a TrainingData,
        cfg: &'a EngineConfig,
        transport: &'a mut dyn Transport,
    ) -> Result<Self, Error> {
        cfg.validate(data)?;
        let n = data.num_vertices();
        let assignment = match &cfg.assignment {
            Some(a) => a.clone(),
            None => round_robin_assignment(n, cfg.partitions),
        };
        let mut parts = partition_graph(&data.graph, &assignment)?;
        if parts.len() != cfg.partitions {
            return Err(PipelineError::Config(format!(
                "assignment names {} partitions, config has {}",
                parts.len(),
                cfg.partitions
            ))
            .into());
        }
        let mut intervals = Vec::new();
        let mut owner = vec![0usize; n];
        for p in &mut parts {
            for iv in split_intervals(p, cfg.intervals)? {
                let g = intervals.len();
                for &v in &p.owned()[iv.range()] {
                    owner[v as usize] = g;
                }
                intervals.push(IntervalInfo {
                    partition: p.id(),
                    iv: VertexInterval { id: g, ..iv },
                    in_edges: p.in_edge_count(iv.range()),
                    out_edges: p.out_edge_count(iv.range()),
                });
            }
        }
        let k = intervals.len();
        let mut fwd_deps = vec![Vec::new(); k];
        let mut bwd_deps = vec![Vec::new(); k];
        for (g, info) in intervals.iter().enumerate() {
            let p = &parts[info.partition];
            let mut f = vec![g];
            let mut b = vec![g];
            for i in info.iv.range() {
                f.extend(p.in_edges(i).0.iter().map(|&u| owner[u as usize]));
                b.extend(p.out_edges(i).0.iter().map(|&v| owner[v as usize]));
            }
            f.sort_unstable();
            f.dedup();
            b.sort_unstable();
            b.dedup();
            fwd_deps[g] = f;
            bwd_deps[g] = b;
        }

        let layers = cfg.layers();
        let dims = cfg.dims(data.features.cols(), data.num_classes);
        let shape = ChainShape {
            layers,
            fuse: cfg.fuse,
            apply_edge: cfg.apply_edge,
        };
        let progress = IntervalProgress::new(shape, cfg.mode, cfg.max_epochs, fwd_deps, bwd_deps);
        let weights = initial_weights(&dims, cfg.seed)?;
        let optimizer = OptimizerState::new(cfg.optimizer, cfg.learning_rate as f32);
        let ps = PsCluster::new(
            weights,
            cfg.param_server.replicas,
            optimizer,
            k,
            cfg.mode.staleness(),
        )?;
        let tuners = (0..cfg.partitions)
            .map(|_| {
                let mut t =
                    Autotuner::new(cfg.intervals, cfg.autotune.max_lambdas, cfg.autotune.window);
                if let Some(initial) = cfg.autotune.initial {
                    t = Autotuner::new(
                        initial,
                        cfg.autotune.max_lambdas.max(initial),
                        cfg.autotune.window,
                    );
                }
                t
            })
            .collect();
        let hist = || {
            (0..layers)
                .map(|_| (0..k).map(|_| BTreeMap::new()).collect())
                .collect()
        };
        Ok(Self {
            data,
            cfg,
            transport,
            layers,
            parts,
            owner,
            progress,
            contexts: ContextStore::new(cfg.remat),
            ps,
            executor: Executor::new(cfg.executor),
            tuners,
            fwd_hist: hist(),
            bwd_hist: hist(),
            produced: BTreeMap::new(),
            scratch: (0..k).map(|_| Scratch::default()).collect(),
            train_count: data.train_count(),
            val_count: data.val_mask.iter().filter(|&&m| m).count(),
            now: 0,
            seq: 0,
            heap: BinaryHeap::new(),
            events: BTreeMap::new(),
            gs_busy: vec![0; cfg.partitions],
            lambda_busy: vec![0; cfg.partitions],
            in_flight: 0,
            wu_queue: VecDeque::new(),
            ps_busy: false,
            updates_since_broadcast: 0,
            stats: BTreeMap::new(),
            records: Vec::new(),
            next_record: 0,
            last_completion: 0,
            status: None,
            plateau: 0,
            ledger: UsageLedger::new(),
            invocations: Vec::new(),
            staleness_audit: Vec::new(),
            weight_audit: BTreeMap::new(),
            mixing: MixingAudit::default(),
            queue_samples: Vec::new(),
            broadcasts: Vec::new(),
            ae_executions: 0,
            max_gap: 0,
            capture_logits: cfg
                .capture_epoch
                .map(|_| Matrix::zeros(n, *dims.last().unwrap())),
            capture_grads: vec![BTreeMap::new(); layers],
            dims,
            intervals,
        })
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        let s = self.seq;
        self.seq += 1;
        self.heap.push(Reverse((at, s)));
        self.events.insert(s, ev);
    }

    fn run(mut self) -> Result<TrainingReport, Error> {
        self.schedule(0, Event::Sample);
        loop {
            if self.status.is_some() {
                break;
            }
            self.dispatch()?;
            if self.progress.is_done() && self.in_flight == 0 && self.wu_queue.is_empty() {
                break;
            }
            if self.in_flight == 0 && self.wu_queue.is_empty() {
                let states = format!("{:?}", self.progress.intervals());
                return Err(PipelineError::Deadlock {
                    time_us: self.now,
                    detail: states,
                }
                .into());
            }
            let Some(Reverse((t, s))) = self.heap.pop() else {
                return Err(PipelineError::Deadlock {
                    time_us: self.now,
                    detail: "event queue drained".to_string(),
                }
                .into());
            };
            self.now = t;
            let ev = self.events.remove(&s).expect("event body");
            self.handle(ev)?;
        }
        self.finish()
    }

    fn dispatch(&mut self) -> Result<(), Error> {
        loop {
            let mut started = false;
            for task in self.progress.next_tasks() {
                let p = self.intervals[task.interval].partition;
                let free = if task.kind.is_tensor() {
                    self.lambda_busy[p] < self.tuners[p].size()
                } else {
                    self.gs_busy[p] < self.cfg.graph_server.threads
                };
                if free {
                    self.start(task)?;
                    started = true;
                }
            }
            if !started {
                break;
            }
        }
        if !self.ps_busy {
            if let Some((epoch, layer)) = self.wu_queue.pop_front() {
                self.ps_busy = true;
                self.in_flight += 1;
                let (r, c) = self.ps.latest().layers[layer].shape();
                let ns =
                    self.cfg.param_server.ns_per_element * (r * c * self.intervals.len()) as f64;
                let d = self.cfg.param_server.update_overhead_us + libm::ceil(ns / 1000.0) as u64;
                self.schedule(self.now + d, Event::UpdateDone { epoch, layer });
            }
        }
        self.max_gap = self.max_gap.max(self.progress.epoch_gap());
        Ok(())
    }

    fn graph_time(&self, elements: usize, remote_bytes: u64) -> u64 {
        let gs = &self.cfg.graph_server;
        let mut us = gs.task_overhead_us as f64 + gs.ns_per_edge_element * elements as f64 / 1000.0;
        if remote_bytes > 0 {
            us += gs.network_latency_us as f64
                + (remote_bytes * 8) as f64 / (gs.network_gbps * 1000.0);
        }
        libm::ceil(us) as u64
    }

    fn fetch(&mut self, g: usize, epoch: u32) -> Result<Arc<WeightSet<f32>>, Error> {
        Ok(self.ps.fetch_weights(g, epoch)?.weights)
    }

    fn audit_weights(&mut self, g: usize, epoch: u32, layer: usize, version: u64, forward: bool) {
        let entry = self
            .weight_audit
            .entry((g, epoch, layer))
            .or_insert(WeightAudit {
                interval: g,
                epoch,
                layer,
                forward_version: None,
                backward_version: None,
            });
        if forward {
            entry.forward_version = Some(version);
        } else {
            entry.backward_version = Some(version);
        }
    }

    fn start(&mut self, task: Task) -> Result<(), Error> {
        self.progress.mark_started(&task);
        self.in_flight += 1;
        let g = task.interval;
        let p = self.intervals[g].partition;
        let (outcome, end) = if task.kind.is_tensor() {
            self.lambda_busy[p] += 1;
            let (outcome, work) = self.run_tensor(&task)?;
            let kind = task.kind.tensor_kind().unwrap();
            let tref = TaskRef {
                kind,
                partition: p,
                interval: g,
                layer: task.layer,
                epoch: task.epoch,
            };
            let (records, end) =
                self.executor
                    .invoke(tref, &work, self.lambda_busy[p], self.now)?;
            for r in records {
                self.ledger.record_invocation(r.duration_us());
                self.stats.entry(task.epoch).or_default().invocations += 1;
                self.invocations.push(r);
            }
            (outcome, end)
        } else {
            self.gs_busy[p] += 1;
            let (outcome, d) = self.run_graph(&task)?;
            (outcome, self.now + d)
        };
        self.schedule(end, Event::Finish(task, outcome));
        Ok(())
    }

    /// Graph-server tasks: numerics now, duration returned.
    fn run_graph(&mut self, task: &Task) -> Result<(Outcome, u64), Error> {
        let g = task.interval;
        let l = task.layer;
        let info = &self.intervals[g];
        let p = info.partition;
        let rows = info.iv.len();
        let (in_edges, out_edges) = (info.in_edges, info.out_edges);
        match task.kind {
            TaskKind::Gather | TaskKind::GradGather => {
                let dir = task.direction();
                let mut mixing = None;
                let width = self.dims[l];
                let resolved = self.progress.resolve_gather(task).ok_or_else(|| {
                    PipelineError::Invariant(format!("started a blocked gather {task:?}"))
                })?;
                let chunk = if dir == Direction::Forward && l == 0 {
                    gather(
                        &self.parts[p],
                        &info.iv,
                        l,
                        task.epoch,
                        width,
                        &DenseRows(&self.data.features),
                    )?
                } else {
                    let hist = match dir {
                        Direction::Forward => &self.fwd_hist[l],
                        Direction::Backward => &self.bwd_hist[l],
                    };
                    let mut blocks = BTreeMap::new();
                    for &(j, ve) in &resolved {
                        let b = hist[j].get(&ve).ok_or_else(|| {
                            PipelineError::Invariant(format!(
                                "value of interval {j} epoch {ve} missing"
                            ))
                        })?;
                        blocks.insert(j, b.clone());
                    }
                    let src = HistSource {
                        consumer: p,
                        owner: &self.owner,
                        intervals: &self.intervals,
                        parts: &self.parts,
                        blocks,
                    };
                    let chunk = match dir {
                        Direction::Forward => {
                            gather(&self.parts[p], &info.iv, l, task.epoch, width, &src)?
                        }
                        Direction::Backward => {
                            backward_gather(&self.parts[p], &info.iv, l, task.epoch, width, &src)?
                        }
                    };
                    if self.cfg.record_mixing {
                        mixing = Some(self.check_mixing(task, &src, &resolved));
                    }
                    chunk
                };
                if let Some(m) = mixing {
                    self.mixing.rows_checked += m.rows_checked;
                    self.mixing.mismatched += m.mismatched;
                    self.mixing.out_of_window += m.out_of_window;
                }
                self.audit_gather(task, &resolved);
                let edges = match dir {
                    Direction::Forward => in_edges,
                    Direction::Backward => out_edges,
                };
                let d = self.graph_time((rows + edges) * width, 0);
                Ok((Outcome::Gathered(chunk.matrix), d))
            }
            TaskKind::Scatter | TaskKind::GradScatter => {
                let (dir, msg_type, value_layer) = match task.kind {
                    TaskKind::Scatter => (Direction::Forward, MessageType::Activations, l + 1),
                    _ => (Direction::Backward, MessageType::Gradients, l),
                };
                let rows_m = self.scratch[g].output.take().ok_or_else(|| {
                    PipelineError::Invariant(format!("nothing to scatter for {task:?}"))
                })?;
                let chunk = LayerChunk {
                    interval: g,
                    layer: value_layer,
                    epoch: task.epoch,
                    kind: ChunkKind::Scattered,
                    matrix: rows_m,
                };
                let msgs = scatter(&chunk, &self.parts[p], &info.iv, dir)?;
                let mut ghosts = BTreeMap::new();
                let mut remote_bytes = 0u64;
                for m in msgs {
                    let sent = Message {
                        msg_type,
                        epoch: task.epoch,
                        layer: value_layer as u8,
                        interval: g as u32,
                        payload: m.rows.data().to_vec(),
                    };
                    remote_bytes += m.rows.byte_len() as u64;
                    let got = self.transport.deliver(m.to, sent)?;
                    if got.payload.len() != m.rows.data().len() {
                        return Err(TransportError::Io(format!(
                            "ghost payload for partition {} has {} values, expected {}",
                            m.to,
                            got.payload.len(),
                            m.rows.data().len()
                        ))
                        .into());
                    }
                    let rows =
                        Matrix::from_vec(m.vertices.len(), chunk.matrix.cols(), got.payload)?;
                    ghosts.insert(
                        m.to,
                        GhostBlock {
                            vertices: m.vertices,
                            rows,
                        },
                    );
                }
                let d = self.graph_time(rows * chunk.matrix.cols(), remote_bytes);
                let block = ValueBlock {
                    rows: chunk.matrix,
                    ghosts,
                };
                Ok((Outcome::Published(Arc::new(block)), d))
            }
            _ => Err(PipelineError::Invariant(format!("{task:?} is not a graph task")).into()),
        }
    }

    fn audit_gather(&mut self, task: &Task, resolved: &[(usize, u32)]) {
        let g = task.interval;
        let info = &self.intervals[g];
        let part = &self.parts[info.partition];
        let epoch_of: BTreeMap<usize, u32> = resolved.iter().copied().collect();
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        if !epoch_of.is_empty() {
            for i in info.iv.range() {
                let nbrs = match task.direction() {
                    Direction::Forward => part.in_edges(i).0,
                    Direction::Backward => part.out_edges(i).0,
                };
                for ve in core::iter::once(epoch_of[&g])
                    .chain(nbrs.iter().map(|&u| epoch_of[&self.owner[u as usize]]))
                {
                    *counts.entry(ve).or_insert(0) += 1;
                }
            }
        }
        let hist = &mut self.stats.entry(task.epoch).or_default().histogram;
        for (&ve, &c) in &counts {
            *hist.entry(task.epoch - ve).or_insert(0) += c as u64;
        }
        self.staleness_audit.push(GatherAudit {
            interval: g,
            layer: task.layer,
            direction: task.direction(),
            consumer_epoch: task.epoch,
            value_epochs: counts,
        });
    }

    fn check_mixing(
        &self,
        task: &Task,
        src: &HistSource<'_>,
        resolved: &[(usize, u32)],
    ) -> MixingAudit {
        let dir = task.direction();
        let s = self.cfg.mode.staleness();
        let info = &self.intervals[task.interval];
        let part = &self.parts[info.partition];
        let epoch_of: BTreeMap<usize, u32> = resolved.iter().copied().collect();
        let mut audit = MixingAudit::default();
        for i in info.iv.range() {
            let nbrs = match dir {
                Direction::Forward => part.in_edges(i).0,
                Direction::Backward => part.out_edges(i).0,
            };
            for &u in core::iter::once(&part.owned()[i]).chain(nbrs) {
                let ve = epoch_of[&self.owner[u as usize]];
                let row = src.row(u).expect("resolved row");
                audit.rows_checked += 1;
                if self.produced.get(&(dir, task.layer, u, ve)) != Some(&fnv64(row)) {
                    audit.mismatched += 1;
                }
                if task.epoch < ve || task.epoch - ve > s {
                    audit.out_of_window += 1;
                }
            }
        }
        audit
    }

    /// Tensor tasks: numerics now, work returned for the fleet model.
    fn run_tensor(&mut self, task: &Task) -> Result<(Outcome, TensorWork), Error> {
        let g = task.interval;
        let l = task.layer;
        let e = task.epoch;
        let rows = self.intervals[g].iv.len();
        let last = l + 1 == self.layers;
        let remat = self.cfg.remat;
        let (fi, fo) = (self.dims[l], self.dims[l + 1]);
        match task.kind {
            TaskKind::ApplyEdge | TaskKind::GradApplyEdge => {
                self.ae_executions += 1;
                let width = if task.kind == TaskKind::ApplyEdge {
                    fo
                } else {
                    fi
                };
                Ok((
                    Outcome::Identity,
                    apply_edge_work(self.intervals[g].in_edges, width, 4),
                ))
            }
            TaskKind::ApplyVertex => {
                let out = self.forward_vertex(task)?;
                Ok((
                    Outcome::Output(out),
                    apply_vertex_work(rows, fi, fo, 4, remat),
                ))
            }
            TaskKind::GradApplyVertex | TaskKind::FusedApplyVertex => {
                let fused = task.kind == TaskKind::FusedApplyVertex;
                let upstream = if last {
                    let logits = if fused {
                        self.forward_vertex(task)?
                    } else {
                        self.scratch[g].output.take().ok_or_else(|| {
                            PipelineError::Invariant(format!("no logits for {task:?}"))
                        })?
                    };
                    self.loss_gradient(task, logits)?
                } else {
                    self.scratch[g].upstream.take().ok_or_else(|| {
                        PipelineError::Invariant(format!("no upstream gradient for {task:?}"))
                    })?
                };
                let weights = self.fetch(g, e)?;
                self.audit_weights(g, e, l, weights.version, false);
                let (grad_w, downstream) = grad_apply_vertex(
                    &mut self.contexts,
                    g,
                    l,
                    e,
                    &upstream,
                    &weights.layers[l],
                    weights.version,
                    last,
                    l > 0,
                )?;
                let mut work = grad_apply_vertex_work(rows, fi, fo, 4, remat, l > 0);
                if fused {
                    work = TensorWork::fused(apply_vertex_work(rows, fi, fo, 4, remat), work);
                    if self.cfg.apply_edge {
                        self.ae_executions += 1;
                        work.flops += apply_edge_work(self.intervals[g].in_edges, fo, 4).flops;
                    }
                }
                Ok((Outcome::Gradient { grad_w, downstream }, work))
            }
            _ => Err(PipelineError::Invariant(format!("{task:?} is not a tensor task")).into()),
        }
    }

    fn forward_vertex(&mut self, task: &Task) -> Result<Matrix<f32>, Error> {
        let g = task.interval;
        let l = task.layer;
        let gathered = self.scratch[g]
            .gathered
            .take()
            .ok_or_else(|| PipelineError::Invariant(format!("nothing gathered for {task:?}")))?;
        let weights = self.fetch(g, task.epoch)?;
        self.audit_weights(g, task.epoch, l, weights.version, true);
        let chunk = LayerChunk {
            interval: g,
            layer: l,
            epoch: task.epoch,
            kind: ChunkKind::Gathered,
            matrix: gathered,
        };
        let out = apply_vertex(
            &chunk,
            &weights.layers[l],
            weights.version,
            l + 1 == self.layers,
            &mut self.contexts,
        )?;
        Ok(out.matrix)
    }

    fn loss_gradient(&mut self, task: &Task, logits: Matrix<f32>) -> Result<Matrix<f32>, Error> {
        let g = task.interval;
        let info = &self.intervals[g];
        let verts = &self.parts[info.partition].owned()[info.iv.range()];
        let classes: Vec<u32> = verts
            .iter()
            .map(|&v| self.data.labels[v as usize])
            .collect();
        let train: Vec<bool> = verts
            .iter()
            .map(|&v| self.data.train_mask[v as usize])
            .collect();
        let chunk = LayerChunk {
            interval: g,
            layer: task.layer,
            epoch: task.epoch,
            kind: ChunkKind::Activated,
            matrix: logits,
        };
        let out = output_gradient(&chunk, &classes, &train, self.train_count)?;
        let pred = argmax_rows(&chunk.matrix);
        let stats = self.stats.entry(task.epoch).or_default();
        stats.loss += out.loss as f64;
        for (r, &v) in verts.iter().enumerate() {
            let ok = pred[r] == classes[r] as usize;
            if ok && self.data.train_mask[v as usize] {
                stats.train_correct += 1;
            }
            if ok && self.data.val_mask[v as usize] {
                stats.val_correct += 1;
            }
        }
        if self.cfg.capture_epoch == Some(task.epoch) {
            let cap = self.capture_logits.as_mut().unwrap();
            for (r, &v) in verts.iter().enumerate() {
                cap.row_mut(v as usize).copy_from_slice(chunk.matrix.row(r));
            }
        }
        Ok(out.grad)
    }

    fn handle(&mut self, ev: Event) -> Result<(), Error> {
        match ev {
            Event::Finish(task, outcome) => self.complete(task, outcome),
            Event::UpdateDone { epoch, layer } => {
                self.ps_busy = false;
                self.in_flight -= 1;
                self.ps.apply_update(epoch, layer)?;
                self.updates_since_broadcast += 1;
                let stats = self.stats.entry(epoch).or_default();
                stats.applied_layers += 1;
                let epoch_done = stats.applied_layers == self.layers;
                let forced = epoch_done && self.cfg.mode == PipelineMode::Pipe;
                if forced || self.updates_since_broadcast >= self.cfg.param_server.broadcast_every {
                    self.updates_since_broadcast = 0;
                    self.in_flight += 1;
                    let at = self.now + self.cfg.param_server.broadcast_latency_us;
                    self.schedule(
                        at,
                        Event::Broadcast {
                            ready_epoch: epoch_done.then_some(epoch),
                        },
                    );
                }
                self.finalize_epochs();
                Ok(())
            }
            Event::Broadcast { ready_epoch } => {
                self.in_flight -= 1;
                let updated = self.ps.broadcast();
                self.broadcasts.push(BroadcastRecord {
                    time_us: self.now,
                    version: self.ps.latest().version,
                    replicas_updated: updated,
                    in_flight_stashes: self.ps.total_stashes(),
                });
                if let Some(e) = ready_epoch {
                    self.progress.record_weights_ready(e);
                }
                Ok(())
            }
            Event::Sample => {
                let ready = self.progress.next_tasks();
                for p in 0..self.cfg.partitions {
                    let queue_len = ready
                        .iter()
                        .filter(|t| {
                            !t.kind.is_tensor() && self.intervals[t.interval].partition == p
                        })
                        .count();
                    if self.cfg.autotune.enabled {
                        self.tuners[p].observe(queue_len);
                    }
                    self.queue_samples.push(QueueSample {
                        time_us: self.now,
                        partition: p,
                        queue_len,
                        fleet_size: self.tuners[p].size(),
                    });
                }
                if !self.progress.is_done() {
                    self.schedule(self.now + self.cfg.autotune.sample_period_us, Event::Sample);
                }
                Ok(())
            }
        }
    }

    fn complete(&mut self, task: Task, outcome: Outcome) -> Result<(), Error> {
        let g = task.interval;
        let p = self.intervals[g].partition;
        self.in_flight -= 1;
        if task.kind.is_tensor() {
            self.lambda_busy[p] -= 1;
        } else {
            self.gs_busy[p] -= 1;
        }
        match outcome {
            Outcome::Gathered(m) => match task.kind {
                TaskKind::Gather => self.scratch[g].gathered = Some(m),
                _ => self.scratch[g].upstream = Some(m),
            },
            Outcome::Output(m) => self.scratch[g].output = Some(m),
            Outcome::Identity => {}
            Outcome::Published(block) => {
                let (dir, layer, hist) = match task.kind {
                    TaskKind::Scatter => (Direction::Forward, task.layer + 1, &mut self.fwd_hist),
                    _ => (Direction::Backward, task.layer, &mut self.bwd_hist),
                };
                if self.cfg.record_mixing {
                    let info = &self.intervals[g];
                    let owned = &self.parts[p].owned()[info.iv.range()];
                    for (r, &v) in owned.iter().enumerate() {
                        self.produced
                            .insert((dir, layer, v, task.epoch), fnv64(block.rows.row(r)));
                    }
                }
                hist[layer][g].insert(task.epoch, block);
            }
            Outcome::Gradient { grad_w, downstream } => {
                if self.cfg.capture_epoch == Some(task.epoch) {
                    self.capture_grads[task.layer].insert(g, grad_w.clone());
                }
                let tag = GradTag {
                    interval: g,
                    epoch: task.epoch,
                    layer: task.layer,
                };
                if self.ps.push_gradient(tag, grad_w)? {
                    self.wu_queue.push_back((task.epoch, task.layer));
                }
                self.scratch[g].output = downstream;
                if task.layer == 0 {
                    self.ps.release_stash(g, task.epoch)?;
                    self.contexts.release(g, task.epoch);
                }
            }
        }
        if self.progress.mark_completed(&task) {
            self.stats.entry(task.epoch).or_default().finished_intervals += 1;
            self.prune();
            self.finalize_epochs();
        }
        Ok(())
    }

    fn prune(&mut self) {
        self.progress.prune();
        let floor = self
            .progress
            .slowest_epoch()
            .saturating_sub(self.cfg.mode.staleness());
        for map in self
            .fwd_hist
            .iter_mut()
            .chain(self.bwd_hist.iter_mut())
            .flatten()
        {
            while map.len() > 1 && map.first_key_value().is_some_and(|(&e, _)| e < floor) {
                map.pop_first();
            }
        }
        if floor > 0 {
            self.ps.prune_assignments(floor.saturating_sub(1));
        }
    }

    fn finalize_epochs(&mut self) {
        while self.status.is_none() {
            let e = self.next_record;
            let k = self.intervals.len();
            let Some(stats) = self.stats.get(&e) else {
                return;
            };
            if stats.finished_intervals < k || stats.applied_layers < self.layers {
                return;
            }
            let stats = self.stats.remove(&e).unwrap();
            let rec = EpochRecord {
                epoch: e,
                loss: stats.loss,
                train_acc: stats.train_correct as f64 / self.train_count as f64,
                val_acc: if self.val_count == 0 {
                    0.0
                } else {
                    stats.val_correct as f64 / self.val_count as f64
                },
                makespan_us: self.now - self.last_completion,
                completed_at_us: self.now,
                lambdas: self.tuners.iter().map(|t| t.size()).sum(),
                invocations: stats.invocations,
                staleness_histogram: stats.histogram,
            };
            self.last_completion = self.now;
            self.next_record += 1;
            let metric = rec.metric(self.cfg.target_metric);
            let prev = self
                .records
                .last()
                .map(|r| r.metric(self.cfg.target_metric));
            self.records.push(rec);
            if self.cfg.target_accuracy.is_some_and(|t| metric >= t) {
                self.status = Some(RunStatus::TargetReached);
                self.progress.stop();
            } else if let Some(patience) = self.cfg.plateau_patience {
                if prev.is_some_and(|p| libm::fabs(metric - p) < 0.001) {
                    self.plateau += 1;
                } else {
                    self.plateau = 0;
                }
                if self.plateau >= patience {
                    self.status = Some(RunStatus::Converged);
                    self.progress.stop();
                }
            }
        }
    }

    fn finish(mut self) -> Result<TrainingReport, Error> {
        let total = self.last_completion;
        let secs = total as f64 / 1e6;
        self.ledger.record_server_time(
            &self.cfg.graph_server.instance,
            secs * self.cfg.partitions as f64,
        )?;
        self.ledger.record_server_time(
            &self.cfg.param_server.instance,
            secs * self.cfg.param_server.replicas as f64,
        )?;
        let cost = CostSummary::from_ledger(&self.ledger, &self.cfg.prices)?;
        let captured = match (self.cfg.capture_epoch, self.capture_logits.take()) {
            (Some(epoch), Some(logits)) => {
                let mut grads = Vec::new();
                for per_interval in &self.capture_grads {
                    let mut total: Option<Matrix<f32>> = None;
                    for m in per_interval.values() {
                        match &mut total {
                            None => total = Some(m.clone()),
                            Some(t) => t.add_assign(m)?,
                        }
                    }
                    grads.push(total.unwrap_or_default());
                }
                Some(Captured {
                    epoch,
                    logits,
                    weight_grads: grads,
                })
            }
            _ => None,
        };
        Ok(TrainingReport {
            status: self.status.unwrap_or(RunStatus::MaxEpochs),
            epochs: self.records,
            total_virtual_us: total,
            staleness_audit: self.staleness_audit,
            weight_audit: self.weight_audit.into_values().collect(),
            mixing: self.mixing,
            invocations: self.invocations,
            apply_edge_executions: self.ae_executions,
            queue_samples: self.queue_samples,
            fleet_trajectories: self
                .tuners
                .iter()
                .map(|t| t.trajectory().to_vec())
                .collect(),
            broadcasts: self.broadcasts,
            max_epoch_gap: self.max_gap,
            final_weight_version: self.ps.latest().version,
            cost,
            captured,
            final_weights: self.ps.latest().layers.clone(),
        })
    }
}
