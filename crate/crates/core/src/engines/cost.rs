use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How plan latencies are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Wall-clock time of the executors plus simulated transfer time.
    Measured,
    /// Per-operator unit cost times input cardinality plus simulated
    /// transfer time; bit-for-bit reproducible.
    Synthetic,
}

/// Seconds charged per input row of each operator in synthetic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCosts {
    pub label_scan: f64,
    pub expand: f64,
    pub var_expand: f64,
    pub filter: f64,
    pub hash_build: f64,
    pub hash_probe: f64,
    pub produce: f64,
    pub table_scan: f64,
    pub project: f64,
}

impl SyntheticCosts {
    /// Lowest per-row charge of any operator.
    pub fn cheapest(&self) -> f64 {
        [
            self.label_scan,
            self.expand,
            self.var_expand,
            self.filter,
            self.hash_build,
            self.hash_probe,
            self.produce,
            self.table_scan,
            self.project,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

impl Default for SyntheticCosts {
    fn default() -> Self {
        SyntheticCosts {
            label_scan: 2e-7,
            expand: 1e-6,
            var_expand: 4e-6,
            filter: 1e-7,
            hash_build: 3e-7,
            hash_probe: 2e-7,
            produce: 2e-7,
            table_scan: 5e-8,
            project: 5e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModelConfig {
    /// Link bandwidth in bits per second.
    pub bandwidth_bits_per_sec: f64,
    /// Seconds of round trip paid once per transfer batch.
    pub rtt: f64,
    /// Seconds per shipped row.
    pub per_row_overhead: f64,
    pub mode: CostMode,
    pub synthetic: SyntheticCosts,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        CostModelConfig {
            bandwidth_bits_per_sec: 1e9,
            rtt: 5e-4,
            per_row_overhead: 1e-7,
            mode: CostMode::Measured,
            synthetic: SyntheticCosts::default(),
        }
    }
}

impl CostModelConfig {
    pub fn synthetic() -> Self {
        CostModelConfig {
            mode: CostMode::Synthetic,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.synthetic;
        let all = [
            self.rtt,
            self.per_row_overhead,
            s.label_scan,
            s.expand,
            s.var_expand,
            s.filter,
            s.hash_build,
            s.hash_probe,
            s.produce,
            s.table_scan,
            s.project,
        ];
        if !(self.bandwidth_bits_per_sec > 0.0 && self.bandwidth_bits_per_sec.is_finite()) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config("costs must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Seconds to ship `rows` rows of `bytes_per_row` bytes in one batch.
pub fn transfer_cost(rows: u64, bytes_per_row: u64, cfg: &CostModelConfig) -> f64 {
    transfer_cost_bytes(rows, rows.saturating_mul(bytes_per_row), cfg)
}

/// Seconds to ship `rows` rows totalling `bytes` bytes in one batch.
pub fn transfer_cost_bytes(rows: u64, bytes: u64, cfg: &CostModelConfig) -> f64 {
    cfg.rtt + rows as f64 * cfg.per_row_overhead + bytes as f64 * 8.0 / cfg.bandwidth_bits_per_sec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_megabit_link() {
        let cfg = CostModelConfig {
            bandwidth_bits_per_sec: 50e6,
            rtt: 0.05,
            per_row_overhead: 0.0,
            ..Default::default()
        };
        assert!((transfer_cost(1_000_000, 100, &cfg) - 16.05).abs() < 1e-9);
        assert_eq!(transfer_cost(0, 100, &cfg), 0.05);
        let fast = CostModelConfig {
            bandwidth_bits_per_sec: 100e6,
            ..cfg
        };
        assert!((transfer_cost(1_000_000, 100, &fast) - 8.05).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = CostModelConfig::default();
        cfg.bandwidth_bits_per_sec = 0.0;
        assert!(cfg.validate().is_err());
        cfg.bandwidth_bits_per_sec = 1.0;
        cfg.rtt = -1.0;
        assert!(cfg.validate().is_err());
    }
}
