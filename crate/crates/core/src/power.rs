//! Spatial-frequency waterfilling.
//!
//! Every (subcarrier, stream) pair competes for the same total budget
//! against one cutoff `lambda_sf`:
//! `P_{k,g} = max(0, 1/lambda_sf - 1/lambda_{k,g})`.

use crate::flops::FlopMeter;
use crate::linalg::hermitian_eigen_desc;
use crate::rate::EquivalentChannel;
use crate::{CMatrix, Error, Result, C64};

/// Eigenvalues at or below this are never allocated power.
pub const MIN_EIGENVALUE: f64 = 1e-15;
/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const RELATIVE_EIGENVALUE_FLOOR: f64 = 1e-12;

const BISECTION_STEPS: usize = 200;

/// Per-subcarrier eigenmodes of `H_eq^H H_eq / sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenmodes {
    /// Top `N_s` eigenvalues, descending.
    pub values: Vec<f64>,
    /// Matching orthonormal eigenvectors as columns, `N_t x N_s`.
    pub basis: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Transmit covariance per subcarrier, `N_t x N_t`.
    pub q: Vec<CMatrix>,
    /// Eigen-basis per subcarrier, `N_t x N_s`.
    pub u: Vec<CMatrix>,
    /// Stream powers per subcarrier.
    pub p: Vec<Vec<f64>>,
    /// Water-filling cutoff `lambda_sf`.
    pub cutoff: f64,
    pub total_power: f64,
}

impl PowerAllocation {
    pub fn allocated_power(&self) -> f64 {
        self.p.iter().flatten().sum()
    }
}

pub fn channel_eigvals(eq: &EquivalentChannel, noise_variance: f64, streams: usize) -> Vec<Eigenmodes> {
    channel_eigvals_metered(eq, noise_variance, streams, &mut FlopMeter::new())
}

pub(crate) fn channel_eigvals_metered(
    eq: &EquivalentChannel,
    noise_variance: f64,
    streams: usize,
    meter: &mut FlopMeter,
) -> Vec<Eigenmodes> {
    eq.heq
        .iter()
        .map(|h| {
            let (nr, nt) = h.shape();
            let gram = h.adjoint() * h * C64::new(1.0 / noise_variance, 0.0);
            meter.record_gemm(nt, nr, nt);
            let (values, vectors) = hermitian_eigen_desc(&gram);
            meter.record_svd(nt, nt);
            let ns = streams.min(nt);
            Eigenmodes {
                values: values.into_iter().take(ns).map(|v| v.max(0.0)).collect(),
                basis: vectors.columns(0, ns).into_owned(),
            }
        })
        .collect()
}

/// Joint waterfilling over a flattened list of eigenvalues.
/// Returns the powers (same order as `gains`) and the cutoff `lambda_sf`.
pub fn waterfill(gains: &[f64], total_power: f64) -> Result<(Vec<f64>, f64)> {
    if !(total_power > 0.0 && total_power.is_finite()) {
        return Err(Error::Config(format!("total power must be positive, got {total_power}")));
    }
    let max = gains.iter().copied().fold(0.0, f64::max);
    let floor = MIN_EIGENVALUE.max(RELATIVE_EIGENVALUE_FLOOR * max);
    let eligible: Vec<bool> = gains.iter().map(|&g| g > floor && g.is_finite()).collect();
    if !eligible.iter().any(|&e| e) {
        return Err(Error::NoActiveStream);
    }

    let allocated = |cutoff: f64| -> f64 {
        gains
            .iter()
            .zip(&eligible)
            .filter(|(_, &e)| e)
            .map(|(&g, _)| (1.0 / cutoff - 1.0 / g).max(0.0))
            .sum()
    };

    // allocated() decreases in the cutoff, is 0 at `max` and unbounded near 0.
    let (mut lo, mut hi) = (0.0, max);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let excess = allocated(mid) - total_power;
        if excess.abs() < 1e-12 * total_power {
            lo = mid;
            hi = mid;
            break;
        }
        if excess > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Closed-form level on the active set found by the search.
    let cutoff_guess = 0.5 * (lo + hi);
    let mut active: Vec<bool> = gains
        .iter()
        .zip(&eligible)
        .map(|(&g, &e)| e && g > cutoff_guess)
        .collect();
    if !active.iter().any(|&a| a) {
        let best = gains.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        active[best] = true;
    }
    let mut level = 0.0;
    for _ in 0..gains.len() + 1 {
        let (n, inv_sum) = gains
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .fold((0usize, 0.0), |(n, s), (&g, _)| (n + 1, s + 1.0 / g));
        level = (total_power + inv_sum) / n as f64;
        let mut changed = false;
        for (i, &g) in gains.iter().enumerate() {
            let should = eligible[i] && 1.0 / g < level;
            if should != active[i] {
                active[i] = should;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let powers = gains
        .iter()
        .zip(&active)
        .map(|(&g, &a)| if a { (level - 1.0 / g).max(0.0) } else { 0.0 })
        .collect();
    Ok((powers, 1.0 / level))
}

/// `Q[k] = U[k] diag(p[k]) U[k]^H`.
pub fn build_covariances(u: &[CMatrix], p: &[Vec<f64>]) -> Result<Vec<CMatrix>> {
    build_covariances_metered(u, p, &mut FlopMeter::new())
}

pub(crate) fn build_covariances_metered(u: &[CMatrix], p: &[Vec<f64>], meter: &mut FlopMeter) -> Result<Vec<CMatrix>> {
    if u.len() != p.len() {
        return Err(Error::Shape(format!("{} bases for {} power vectors", u.len(), p.len())));
    }
    u.iter()
        .zip(p)
        .map(|(uk, pk)| {
            if uk.ncols() != pk.len() {
                return Err(Error::Shape(format!("basis has {} columns, {} powers given", uk.ncols(), pk.len())));
            }
            let mut scaled = uk.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= C64::new(pk[j], 0.0);
            }
            meter.record_complex_mults(uk.nrows() * uk.ncols());
            meter.record_gemm(uk.nrows(), uk.ncols(), uk.nrows());
            Ok(scaled * uk.adjoint())
        })
        .collect()
}

/// Eigen-decompose, waterfill across all (k, g) pairs and build the covariances.
pub fn allocate(eq: &EquivalentChannel, noise_variance: f64, total_power: f64, streams: usize) -> Result<PowerAllocation> {
    allocate_metered(eq, noise_variance, total_power, streams, &mut FlopMeter::new())
}

pub(crate) fn allocate_metered(
    eq: &EquivalentChannel,
    noise_variance: f64,
    total_power: f64,
    streams: usize,
    meter: &mut FlopMeter,
) -> Result<PowerAllocation> {
    let modes = channel_eigvals_metered(eq, noise_variance, streams, meter);
    let flat: Vec<f64> = modes.iter().flat_map(|m| m.values.iter().copied()).collect();
    let (powers, cutoff) = waterfill(&flat, total_power)?;
    meter.record_real_ops(2 * flat.len());
    let mut offset = 0;
    let p: Vec<Vec<f64>> = modes
        .iter()
        .map(|m| {
            let chunk = powers[offset..offset + m.values.len()].to_vec();
            offset += m.values.len();
            chunk
        })
        .collect();
    let u: Vec<CMatrix> = modes.into_iter().map(|m| m.basis).collect();
    let q = build_covariances_metered(&u, &p, meter)?;
    Ok(PowerAllocation { q, u, p, cutoff, total_power })
}
