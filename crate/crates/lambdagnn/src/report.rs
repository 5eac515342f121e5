//! JSON-lines run output: one `epoch` line per finished epoch, then a
//! `summary` line and a `cost` line.

use std::io::{self, Write};

use lambdagnn_core::cost::{value, CostSummary};
use lambdagnn_core::pipeline::{EpochRecord, MixingAudit, RunStatus, TrainingReport};
use serde::Serialize;

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line<'a> {
    Epoch(&'a EpochRecord),
    Summary {
        status: RunStatus,
        epochs: usize,
        total_virtual_us: u64,
        mean_makespan_us: f64,
        final_weight_version: u64,
        max_epoch_gap: u32,
        max_staleness: Option<i64>,
        mixing: MixingAudit,
        invocations: usize,
        apply_edge_executions: u64,
        broadcasts: usize,
        fleet_trajectories: &'a [Vec<usize>],
    },
    Cost {
        #[serde(flatten)]
        summary: &'a CostSummary,
        value: Option<f64>,
    },
}

pub fn write_report<W: Write>(report: &TrainingReport, mut out: W) -> io::Result<()> {
    let mut line = |l: &Line| -> io::Result<()> {
        serde_json::to_writer(&mut out, l)?;
        out.write_all(b"\n")
    };
    for e in &report.epochs {
        line(&Line::Epoch(e))?;
    }
    line(&Line::Summary {
        status: report.status,
        epochs: report.epochs.len(),
        total_virtual_us: report.total_virtual_us,
        mean_makespan_us: report.mean_makespan_us(),
        final_weight_version: report.final_weight_version,
        max_epoch_gap: report.max_epoch_gap,
        max_staleness: report.max_staleness(),
        mixing: report.mixing,
        invocations: report.invocations.len(),
        apply_edge_executions: report.apply_edge_executions,
        broadcasts: report.broadcasts.len(),
        fleet_trajectories: &report.fleet_trajectories,
    })?;
    let secs = report.total_virtual_us as f64 / 1e6;
    line(&Line::Cost {
        summary: &report.cost,
        value: value(secs, report.cost.total_usd).ok(),
    })?;
    out.flush()
}
