use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use lambdagnn_core::pipeline::{
    run_epochs_with, EngineConfig, PipelineMode, TargetMetric, TrainingData,
};
use lambdagnn_core::serverless::{InProcess, StragglerPlan, Transport};
use lambdagnn_core::synth::{synth_sbm_with, SbmSpec};
use lambdagnn_core::tensor::OptimizerKind;

use crate::bsnap::{load_dataset, load_parts};
use crate::report::write_report;
use crate::transport::TcpTransport;
use crate::{CliError, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Pipe,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportKind {
    /// Messages stay in memory.
    Inproc,
    /// Every ghost message crosses a loopback TCP socket.
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Train,
    Val,
}

/// Train a GCN on the simulated serverless backend.
#[derive(Debug, Clone, Parser)]
#[command(name = "lambdagnn", version)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["dataset", "synth"])))]
pub struct RunConfig {
    /// Directory holding graph.bsnap, features.bsnap and labels.bsnap.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Synthetic blocks, e.g. `sbm:4x100`.
    #[arg(long)]
    pub synth: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p_out: f64,
    /// Vertex → partition file, one id per line. Round-robin otherwise.
    #[arg(long)]
    pub parts: Option<PathBuf>,

    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Width of every hidden layer.
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, value_enum, default_value_t = Mode::Pipe)]
    pub mode: Mode,
    /// Staleness bound; async mode only.
    #[arg(long = "s")]
    pub staleness: Option<u32>,
    /// Initial lambdas per graph server.
    #[arg(long = "l")]
    pub lambdas: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_lambdas: usize,
    /// Keep the fleet size fixed.
    #[arg(long)]
    pub no_autotune: bool,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = Optimizer::Adam)]
    pub optimizer: Optimizer,
    /// Intervals per partition.
    #[arg(long, default_value_t = 4)]
    pub intervals: usize,
    #[arg(long, default_value_t = 1)]
    pub partitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: u32,
    #[arg(long)]
    pub target_acc: Option<f64>,
    #[arg(long, value_enum, default_value_t = Metric::Val)]
    pub target_metric: Metric,
    #[arg(long)]
    pub patience: Option<u32>,
    #[arg(long)]
    pub fuse: bool,
    #[arg(long)]
    pub remat: bool,
    #[arg(long)]
    pub stream: bool,
    #[arg(long)]
    pub apply_edge: bool,
    /// Fraction of invocations slowed down.
    #[arg(long, default_value_t = 0.0)]
    pub stragglers: f64,
    #[arg(long, default_value_t = 5.0)]
    pub straggler_factor: f64,
    #[arg(long, value_enum, default_value_t = TransportKind::Inproc)]
    pub transport: TransportKind,
    /// JSON-lines output; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// `sbm:CxN` → (communities, per community).
pub fn parse_synth(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || config_err(format!("--synth expects sbm:CxN, got {s:?}"));
    let body = s.strip_prefix("sbm:").ok_or_else(bad)?;
    let (c, n) = body.split_once('x').ok_or_else(bad)?;
    let c = c.parse().map_err(|_| bad())?;
    let n = n.parse().map_err(|_| bad())?;
    if c == 0 || n == 0 {
        return Err(bad());
    }
    Ok((c, n))
}

impl RunConfig {
    pub fn engine_config(&self) -> Result<EngineConfig, CliError> {
        if self.layers == 0 {
            return Err(config_err("--layers must be at least 1"));
        }
        let mode = match (self.mode, self.staleness) {
            (Mode::Pipe, Some(_)) => return Err(config_err("--s only applies with --mode async")),
            (Mode::Pipe, None) => PipelineMode::Pipe,
            (Mode::Async, s) => PipelineMode::Async {
                staleness: s.unwrap_or(0),
            },
        };
        if !(0.0..=1.0).contains(&self.stragglers) || self.straggler_factor < 1.0 {
            return Err(config_err(
                "--stragglers must lie in [0, 1] and the factor be ≥ 1",
            ));
        }
        if self.target_acc.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
            return Err(config_err("--target-acc must lie in [0, 1]"));
        }
        let mut cfg = EngineConfig {
            hidden: vec![self.hidden; self.layers - 1],
            mode,
            partitions: self.partitions,
            intervals: self.intervals,
            optimizer: match self.optimizer {
                Optimizer::Sgd => OptimizerKind::Sgd,
                Optimizer::Adam => OptimizerKind::Adam,
            },
            learning_rate: self.lr,
            seed: self.seed,
            max_epochs: self.max_epochs,
            target_accuracy: self.target_acc,
            target_metric: match self.target_metric {
                Metric::Train => TargetMetric::Train,
                Metric::Val => TargetMetric::Validation,
            },
            plateau_patience: self.patience,
            fuse: self.fuse,
            remat: self.remat,
            apply_edge: self.apply_edge,
            ..Default::default()
        };
        cfg.executor.streaming = self.stream;
        cfg.executor.stragglers = StragglerPlan {
            fraction: self.stragglers,
            factor: self.straggler_factor,
            seed: self.seed,
        };
        cfg.autotune.enabled = !self.no_autotune;
        cfg.autotune.initial = self.lambdas;
        cfg.autotune.max_lambdas = self.max_lambdas;
        Ok(cfg)
    }

    pub fn training_data(&self) -> Result<TrainingData, CliError> {
        let data = match (&self.dataset, &self.synth) {
            (Some(dir), _) => {
                let d = load_dataset(dir)?;
                TrainingData::new(d.graph, d.features, d.labels, d.num_classes)
            }
            (None, Some(s)) => {
                let (c, n) = parse_synth(s)?;
                let spec = SbmSpec::new(c, n, self.p_in, self.p_out, self.seed);
                let d = synth_sbm_with(&spec).map_err(|e| config_err(e.to_string()))?;
                TrainingData::from_dataset(d)
            }
            (None, None) => return Err(config_err("one of --dataset or --synth is required")),
        };
        data.map_err(|e| config_err(e.to_string()))
    }
}

/// Parses, trains and writes the report.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let mut engine = cfg.engine_config()?;
    let data = cfg.training_data()?;
    if let Some(p) = &cfg.parts {
        engine.assignment = Some(load_parts(p, data.num_vertices())?);
    }
    let mut transport: Box<dyn Transport> = match cfg.transport {
        TransportKind::Inproc => Box::new(InProcess::default()),
        TransportKind::Tcp => Box::new(TcpTransport::loopback(engine.partitions).map_err(
            |source| IoError::Io {
                path: "127.0.0.1".into(),
                source,
            },
        )?),
    };
    let report = run_epochs_with(&data, &engine, transport.as_mut())?;
    let io = |path: PathBuf| move |source: io::Error| IoError::Io { path, source };
    match &cfg.report {
        Some(path) => {
            let f = File::create(path).map_err(io(path.clone()))?;
            write_report(&report, BufWriter::new(f)).map_err(io(path.clone()))?;
        }
        None => {
            let out = io::stdout().lock();
            write_report(&report, out).map_err(io("<stdout>".into()))?;
        }
    }
    io::stderr().flush().ok();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        RunConfig::try_parse_from(["lambdagnn"].iter().chain(args)).unwrap()
    }

    #[test]
    fn synth_spec() {
        assert_eq!(parse_synth("sbm:4x100").unwrap(), (4, 100));
        for bad in ["sbm:4", "er:4x4", "sbm:0x3", "sbm:axb"] {
            assert!(parse_synth(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn staleness_needs_async() {
        let c = parse(&["--synth", "sbm:2x10", "--s", "1"]);
        assert!(matches!(c.engine_config(), Err(CliError::Config(_))));
        let c = parse(&["--synth", "sbm:2x10", "--s", "1", "--mode", "async"]);
        assert_eq!(
            c.engine_config().unwrap().mode,
            PipelineMode::Async { staleness: 1 }
        );
    }

    #[test]
    fn input_is_required() {
        assert!(RunConfig::try_parse_from(["lambdagnn"]).is_err());
        assert!(
            RunConfig::try_parse_from(["lambdagnn", "--synth", "sbm:2x2", "--dataset", "d"])
                .is_err()
        );
    }

    #[test]
    fn layers_map_to_hidden_widths() {
        let c = parse(&["--synth", "sbm:2x10", "--layers", "3", "--hidden", "5"]);
        assert_eq!(c.engine_config().unwrap().hidden, vec![5, 5]);
    }
}
