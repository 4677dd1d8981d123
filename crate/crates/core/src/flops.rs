//! Analytical FLOP accounting.
//!
//! Counts are recorded explicitly at the optimizer's kernel call sites using
//! the usual dense-algebra conventions: an `(m x n)(n x p)` product costs
//! `m n p` complex multiplications, a complex multiplication is 6 real FLOPs
//! and a complex division 8. Factorizations of an `n x n` Hermitian matrix
//! cost `n^3` and an SVD/eigen-decomposition of an `m x n` matrix
//! `m^2 n + n^3` complex multiplications.

use std::io::Write;
use std::time::Duration;

use serde::Serialize;

use crate::Result;

pub const FLOPS_PER_COMPLEX_MUL: u64 = 6;
pub const FLOPS_PER_COMPLEX_DIV: u64 = 8;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlopMeter {
    pub complex_mults: u64,
    pub complex_divs: u64,
    pub real_ops: u64,
    pub wall_time: Duration,
    pub iterations: u64,
}

impl FlopMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_gemm(&mut self, m: usize, n: usize, p: usize) {
        self.complex_mults += (m * n * p) as u64;
    }

    pub fn record_complex_mults(&mut self, count: usize) {
        self.complex_mults += count as u64;
    }

    pub fn record_complex_divs(&mut self, count: usize) {
        self.complex_divs += count as u64;
    }

    pub fn record_real_ops(&mut self, count: usize) {
        self.real_ops += count as u64;
    }

    /// Cholesky-based log-det or inverse of an `n x n` Hermitian matrix.
    pub fn record_factorization(&mut self, n: usize) {
        self.complex_mults += (n * n * n) as u64;
    }

    /// SVD or Hermitian eigen-decomposition of an `m x n` matrix.
    pub fn record_svd(&mut self, m: usize, n: usize) {
        self.complex_mults += (m * m * n + n * n * n) as u64;
    }

    pub fn flops(&self) -> u64 {
        FLOPS_PER_COMPLEX_MUL * self.complex_mults + FLOPS_PER_COMPLEX_DIV * self.complex_divs + self.real_ops
    }

    /// Add another meter's counters into this one.
    pub fn merge(&mut self, other: &FlopMeter) {
        self.complex_mults += other.complex_mults;
        self.complex_divs += other.complex_divs;
        self.real_ops += other.real_ops;
        self.wall_time += other.wall_time;
        self.iterations += other.iterations;
    }

    /// Same counters without the wall-clock component, for determinism checks.
    pub fn counters(&self) -> (u64, u64, u64, u64) {
        (self.complex_mults, self.complex_divs, self.real_ops, self.iterations)
    }
}

/// One row of the complexity table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopReport {
    pub n_ris: usize,
    pub iter_count: f64,
    pub flop_count: f64,
    pub runtime_s: f64,
}

pub fn report(meter: &FlopMeter, n_ris: usize) -> FlopReport {
    FlopReport {
        n_ris,
        iter_count: meter.iterations as f64,
        flop_count: meter.flops() as f64,
        runtime_s: meter.wall_time.as_secs_f64(),
    }
}

impl FlopReport {
    /// Average of several runs at the same surface size.
    pub fn mean(n_ris: usize, runs: &[FlopReport]) -> FlopReport {
        let n = runs.len().max(1) as f64;
        FlopReport {
            n_ris,
            iter_count: runs.iter().map(|r| r.iter_count).sum::<f64>() / n,
            flop_count: runs.iter().map(|r| r.flop_count).sum::<f64>() / n,
            runtime_s: runs.iter().map(|r| r.runtime_s).sum::<f64>() / n,
        }
    }
}

/// Write reports as CSV with header `n_ris,iter_count,flop_count,runtime_s`.
pub fn write_reports<W: Write>(out: W, reports: &[FlopReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
