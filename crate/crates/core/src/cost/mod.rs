//! Price tables, usage accounting and the value metric `1/(T×C)`.
//!
//! Money is kept in integer picodollars so that per-request and per-100 ms
//! prices are exact; conversion to USD happens only for display.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 10⁻¹² USD.
pub type Picodollars = u64;

pub const PICODOLLARS_PER_USD: f64 = 1e12;

/// Billing granularity of a serverless invocation, in microseconds.
pub const BILLING_QUANTUM_US: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("rate for {0} must be positive")]
    NonPositiveRate(String),
    #[error("no hourly rate for instance type {0}")]
    UnknownInstance(String),
    #[error("time and cost must be positive (got T={time}, C={cost})")]
    NonPositiveInput { time: f64, cost: f64 },
    #[error("negative server time {0}")]
    NegativeDuration(f64),
}

pub fn usd(pd: Picodollars) -> f64 {
    pd as f64 / PICODOLLARS_PER_USD
}

fn to_picodollars(dollars: f64) -> Picodollars {
    libm::round(dollars * PICODOLLARS_PER_USD) as Picodollars
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub per_request: Picodollars,
    pub per_billing_quantum: Picodollars,
    /// USD per hour by instance type.
    pub server_rates: BTreeMap<String, f64>,
}

impl Default for PriceTable {
    fn default() -> Self {
        let mut server_rates = BTreeMap::new();
        server_rates.insert("c5.base".to_string(), 0.085);
        server_rates.insert("p3.2xlarge".to_string(), 3.06);
        Self::new(0.20, 0.01125, server_rates).expect("default rates are positive")
    }
}

impl PriceTable {
    /// Builds a table from USD per million requests and USD per lambda-hour.
    pub fn new(
        per_million_requests: f64,
        compute_per_hour: f64,
        server_rates: BTreeMap<String, f64>,
    ) -> Result<Self, CostError> {
        if per_million_requests.is_nan() || per_million_requests <= 0.0 {
            return Err(CostError::NonPositiveRate("requests".to_string()));
        }
        if compute_per_hour.is_nan() || compute_per_hour <= 0.0 {
            return Err(CostError::NonPositiveRate("lambda compute".to_string()));
        }
        if let Some((name, _)) = server_rates.iter().find(|(_, r)| r.is_nan() || **r <= 0.0) {
            return Err(CostError::NonPositiveRate(name.clone()));
        }
        let quanta_per_hour = 3_600_000_000.0 / BILLING_QUANTUM_US as f64;
        Ok(Self {
            per_request: to_picodollars(per_million_requests / 1e6),
            per_billing_quantum: to_picodollars(compute_per_hour / quanta_per_hour),
            server_rates,
        })
    }
}

/// Rounds an invocation's duration up to the billing quantum.
pub fn billed_duration_us(actual_us: u64) -> u64 {
    actual_us.div_ceil(BILLING_QUANTUM_US) * BILLING_QUANTUM_US
}

/// Append-only record of what a run consumed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    invocations: u64,
    actual_us: u64,
    billed_us: u64,
    server_seconds: BTreeMap<String, f64>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one invocation and returns its billed duration.
    pub fn record_invocation(&mut self, actual_us: u64) -> u64 {
        let billed = billed_duration_us(actual_us);
        self.invocations += 1;
        self.actual_us = self.actual_us.saturating_add(actual_us);
        self.billed_us = self.billed_us.saturating_add(billed);
        billed
    }

    pub fn record_server_time(&mut self, instance: &str, seconds: f64) -> Result<(), CostError> {
        if seconds.is_nan() || seconds < 0.0 {
            return Err(CostError::NegativeDuration(seconds));
        }
        *self
            .server_seconds
            .entry(instance.to_string())
            .or_insert(0.0) += seconds;
        Ok(())
    }

    pub fn invocations(&self) -> u64 {
        self.invocations
    }

    pub fn actual_us(&self) -> u64 {
        self.actual_us
    }

    pub fn billed_us(&self) -> u64 {
        self.billed_us
    }

    pub fn server_seconds(&self) -> &BTreeMap<String, f64> {
        &self.server_seconds
    }
}

/// Request charge plus billed compute charge.
pub fn lambda_cost(ledger: &UsageLedger, prices: &PriceTable) -> Picodollars {
    lambda_request_cost(ledger, prices) + lambda_compute_cost(ledger, prices)
}

fn lambda_request_cost(ledger: &UsageLedger, prices: &PriceTable) -> Picodollars {
    ledger.invocations.saturating_mul(prices.per_request)
}

fn lambda_compute_cost(ledger: &UsageLedger, prices: &PriceTable) -> Picodollars {
    (ledger.billed_us / BILLING_QUANTUM_US).saturating_mul(prices.per_billing_quantum)
}

/// Per-second server billing at the table's hourly rates.
pub fn server_cost(ledger: &UsageLedger, prices: &PriceTable) -> Result<Picodollars, CostError> {
    let mut dollars = 0.0;
    for (name, &secs) in &ledger.server_seconds {
        let rate = prices
            .server_rates
            .get(name)
            .ok_or_else(|| CostError::UnknownInstance(name.clone()))?;
        dollars += rate * secs / 3600.0;
    }
    Ok(to_picodollars(dollars))
}

/// `1/(T×C)` in 1/(s·$).
pub fn value(time_s: f64, cost_usd: f64) -> Result<f64, CostError> {
    if !(time_s > 0.0 && cost_usd > 0.0) || !time_s.is_finite() || !cost_usd.is_finite() {
        return Err(CostError::NonPositiveInput {
            time: time_s,
            cost: cost_usd,
        });
    }
    Ok(1.0 / (time_s * cost_usd))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub invocations: u64,
    pub actual_ms: f64,
    pub billed_ms: u64,
    pub lambda_request_usd: f64,
    pub lambda_compute_usd: f64,
    pub server_usd: f64,
    pub total_usd: f64,
}

impl CostSummary {
    pub fn from_ledger(ledger: &UsageLedger, prices: &PriceTable) -> Result<Self, CostError> {
        let req = lambda_request_cost(ledger, prices);
        let compute = lambda_compute_cost(ledger, prices);
        let server = server_cost(ledger, prices)?;
        Ok(Self {
            invocations: ledger.invocations,
            actual_ms: ledger.actual_us as f64 / 1000.0,
            billed_ms: ledger.billed_us / 1000,
            lambda_request_usd: usd(req),
            lambda_compute_usd: usd(compute),
            server_usd: usd(server),
            total_usd: usd(req + compute + server),
        })
    }
}
