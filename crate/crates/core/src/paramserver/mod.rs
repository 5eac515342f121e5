//! Replicated parameter servers.
//!
//! Every replica holds all layers. An interval's first weight fetch in an
//! epoch picks the least-loaded replica and snapshots its latest weights
//! there; the rest of that interval-epoch, backward pass included, reads the
//! snapshot. Gradients are summed on replica 0, which applies the optimiser
//! and later broadcasts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{optimizer_step, Matrix, OptimizerState, Scalar, TensorError};

pub type Version = u64;
pub type PsId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsError {
    #[error("at least one parameter server is required")]
    NoServers,
    #[error("no parameter server {0}")]
    UnknownServer(PsId),
    #[error("layer {0} does not exist")]
    UnknownLayer(usize),
    #[error("duplicate gradient for interval {} epoch {} layer {}", .0.interval, .0.epoch, .0.layer)]
    DuplicateContribution(GradTag),
    #[error("epoch {epoch} layer {layer}: {have} of {expected} contributions")]
    Incomplete {
        epoch: u32,
        layer: usize,
        have: usize,
        expected: usize,
    },
    #[error("stash for interval {interval} epoch {epoch} was evicted")]
    StashEvicted { interval: usize, epoch: u32 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Weights of every layer at one version.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<T> {
    pub version: Version,
    pub layers: Vec<Matrix<T>>,
}

/// Identifies one gradient contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GradTag {
    pub interval: usize,
    pub epoch: u32,
    pub layer: usize,
}

/// Argmin load, ties to the lowest id.
pub fn pick_ps(loads: &[usize]) -> Option<PsId> {
    loads
        .iter()
        .enumerate()
        .min_by_key(|&(i, &l)| (l, i))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone)]
pub struct ParamServer<T> {
    id: PsId,
    latest: Arc<WeightSet<T>>,
    stash: BTreeMap<(usize, u32), Arc<WeightSet<T>>>,
    load: usize,
}

impl<T: Scalar> ParamServer<T> {
    pub fn id(&self) -> PsId {
        self.id
    }

    pub fn latest(&self) -> &WeightSet<T> {
        &self.latest
    }

    pub fn version(&self) -> Version {
        self.latest.version
    }

    pub fn load(&self) -> usize {
        self.load
    }

    pub fn stash_len(&self) -> usize {
        self.stash.len()
    }

    pub fn stashed(&self, interval: usize, epoch: u32) -> Option<&WeightSet<T>> {
        self.stash.get(&(interval, epoch)).map(|a| &**a)
    }
}

/// What an interval's weight fetch returned.
#[derive(Debug, Clone)]
pub struct Fetched<T> {
    pub ps: PsId,
    pub weights: Arc<WeightSet<T>>,
    /// True on the fetch that created the stash.
    pub first_contact: bool,
}

#[derive(Debug, Clone)]
pub struct PsCluster<T> {
    servers: Vec<ParamServer<T>>,
    optimizers: Vec<OptimizerState<T>>,
    intervals: usize,
    tag_retention: u32,
    assigned: BTreeMap<(usize, u32), PsId>,
    pending: BTreeMap<(u32, usize), BTreeMap<usize, Matrix<T>>>,
    seen: BTreeSet<GradTag>,
    applied: BTreeSet<(u32, usize)>,
}

impl<T: Scalar> PsCluster<T> {
    /// `intervals` is the number of contributions expected per (epoch, layer);
    /// duplicate tags are remembered for the trailing `staleness + 1` epochs.
    pub fn new(
        initial: Vec<Matrix<T>>,
        replicas: usize,
        optimizer: OptimizerState<T>,
        intervals: usize,
        staleness: u32,
    ) -> Result<Self, PsError> {
        if replicas == 0 {
            return Err(PsError::NoServers);
        }
        let latest = Arc::new(WeightSet {
            version: 0,
            layers: initial,
        });
        let servers = (0..replicas)
            .map(|id| ParamServer {
                id,
                latest: latest.clone(),
                stash: BTreeMap::new(),
                load: 0,
            })
            .collect();
        Ok(Self {
            servers,
            optimizers: alloc::vec![optimizer; latest.layers.len()],
            intervals,
            tag_retention: staleness + 1,
            assigned: BTreeMap::new(),
            pending: BTreeMap::new(),
            seen: BTreeSet::new(),
            applied: BTreeSet::new(),
        })
    }

    pub fn replicas(&self) -> usize {
        self.servers.len()
    }

    pub fn server(&self, ps: PsId) -> Result<&ParamServer<T>, PsError> {
        self.servers.get(ps).ok_or(PsError::UnknownServer(ps))
    }

    pub fn loads(&self) -> Vec<usize> {
        self.servers.iter().map(|s| s.load).collect()
    }

    /// Newest weights anywhere (the accumulator's).
    pub fn latest(&self) -> &WeightSet<T> {
        &self.servers[0].latest
    }

    pub fn assigned_ps(&self, interval: usize, epoch: u32) -> Option<PsId> {
        self.assigned.get(&(interval, epoch)).copied()
    }

    /// Weights for (interval, epoch): the first call snapshots the chosen
    /// replica's latest version; later calls return that snapshot.
    pub fn fetch_weights(&mut self, interval: usize, epoch: u32) -> Result<Fetched<T>, PsError> {
        if let Some(&ps) = self.assigned.get(&(interval, epoch)) {
            let weights = self.servers[ps]
                .stash
                .get(&(interval, epoch))
                .cloned()
                .ok_or(PsError::StashEvicted { interval, epoch })?;
            return Ok(Fetched {
                ps,
                weights,
                first_contact: false,
            });
        }
        let ps = pick_ps(&self.loads()).ok_or(PsError::NoServers)?;
        let server = &mut self.servers[ps];
        let weights = server.latest.clone();
        server.stash.insert((interval, epoch), weights.clone());
        server.load += 1;
        self.assigned.insert((interval, epoch), ps);
        Ok(Fetched {
            ps,
            weights,
            first_contact: true,
        })
    }

    /// Drops the interval-epoch's stash once its backward pass is done.
    pub fn release_stash(&mut self, interval: usize, epoch: u32) -> Result<(), PsError> {
        let ps = *self
            .assigned
            .get(&(interval, epoch))
            .ok_or(PsError::StashEvicted { interval, epoch })?;
        let server = &mut self.servers[ps];
        if server.stash.remove(&(interval, epoch)).is_none() {
            return Err(PsError::StashEvicted { interval, epoch });
        }
        server.load -= 1;
        Ok(())
    }

    /// Adds one interval's gradient; returns whether all intervals have now
    /// contributed for (epoch, layer).
    pub fn push_gradient(&mut self, tag: GradTag, grad: Matrix<T>) -> Result<bool, PsError> {
        let shape = self
            .latest()
            .layers
            .get(tag.layer)
            .ok_or(PsError::UnknownLayer(tag.layer))?
            .shape();
        if grad.shape() != shape {
            return Err(TensorError::Shape {
                op: "push_gradient",
                left: shape,
                right: grad.shape(),
            }
            .into());
        }
        if self.seen.contains(&tag) || self.applied.contains(&(tag.epoch, tag.layer)) {
            return Err(PsError::DuplicateContribution(tag));
        }
        self.seen.insert(tag);
        let slot = self.pending.entry((tag.epoch, tag.layer)).or_default();
        slot.insert(tag.interval, grad);
        Ok(slot.len() == self.intervals)
    }

    /// Sums the contributions for (epoch, layer) in interval order, applies
    /// one optimiser step on the accumulator and bumps its version.
    pub fn apply_update(&mut self, epoch: u32, layer: usize) -> Result<Version, PsError> {
        if layer >= self.optimizers.len() {
            return Err(PsError::UnknownLayer(layer));
        }
        let have = self.pending.get(&(epoch, layer)).map_or(0, |m| m.len());
        if have != self.intervals {
            return Err(PsError::Incomplete {
                epoch,
                layer,
                have,
                expected: self.intervals,
            });
        }
        let contributions = self.pending.remove(&(epoch, layer)).unwrap();
        let mut total: Option<Matrix<T>> = None;
        for g in contributions.into_values() {
            match &mut total {
                None => total = Some(g),
                Some(t) => t.add_assign(&g)?,
            }
        }
        let acc = &mut self.servers[0];
        let mut next = WeightSet::clone(&acc.latest);
        let grad = total.unwrap_or_else(|| {
            let (r, c) = next.layers[layer].shape();
            Matrix::zeros(r, c)
        });
        next.layers[layer] =
            optimizer_step(&mut self.optimizers[layer], &next.layers[layer], &grad)?;
        next.version += 1;
        acc.latest = Arc::new(next);
        self.applied.insert((epoch, layer));

        let horizon = epoch.saturating_sub(self.tag_retention);
        self.seen.retain(|t| t.epoch >= horizon);
        self.applied.retain(|&(e, _)| e >= horizon);
        Ok(acc.latest.version)
    }

    /// Copies the accumulator's latest weights to every older replica;
    /// returns how many were updated. Stashes are untouched.
    pub fn broadcast(&mut self) -> usize {
        let latest = self.servers[0].latest.clone();
        let mut updated = 0;
        for s in &mut self.servers[1..] {
            if s.latest.version < latest.version {
                s.latest = latest.clone();
                updated += 1;
            }
        }
        updated
    }

    /// Forgets assignments of epochs that can no longer be fetched.
    pub fn prune_assignments(&mut self, before_epoch: u32) {
        self.assigned.retain(|&(_, e), _| e >= before_epoch);
    }

    pub fn total_stashes(&self) -> usize {
        self.servers.iter().map(|s| s.stash.len()).sum()
    }
}
