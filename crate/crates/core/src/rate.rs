//! Equivalent channel and spectral efficiency.

use std::f64::consts::PI;

use rand::Rng;

use crate::channel::FreqChannelSet;
use crate::linalg::{complex_gaussian, eye, log2_det_hpd, min_hermitian_eigenvalue};
use crate::propagation::LinkGains;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Unit-modulus tolerance for RIS reflection coefficients.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;
/// Covariances may have eigenvalues down to `-PSD_TOL` times their largest entry.
pub const PSD_TOL: f64 = 1e-9;

/// Diagonal of the RIS reflection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases(Vec<C64>);

impl RisPhases {
    /// Wrap reflection coefficients that are already on the unit circle.
    pub fn new(diag: Vec<C64>) -> Result<Self> {
        if let Some((i, z)) = diag.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            return Err(Error::Config(format!("RIS element {i} has modulus {}", z.norm())));
        }
        Ok(RisPhases(diag))
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        RisPhases(angles.iter().map(|&a| C64::from_polar(1.0, a)).collect())
    }

    /// Phases drawn i.i.d. from U[0, 2π).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        RisPhases((0..n).map(|_| C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect())
    }

    pub fn ones(n: usize) -> Self {
        RisPhases(vec![C64::new(1.0, 0.0); n])
    }

    pub(crate) fn from_unit_unchecked(diag: Vec<C64>) -> Self {
        RisPhases(diag)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest deviation of any `|phi_i|` from one.
    pub fn max_modulus_error(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Multiply every element by `e^{j theta}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = C64::from_polar(1.0, theta);
        RisPhases(self.0.iter().map(|z| z * r).collect())
    }
}

/// `H_eq[k]` for every subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    pub heq: Vec<CMatrix>,
}

impl EquivalentChannel {
    pub fn subcarriers(&self) -> usize {
        self.heq.len()
    }
}

/// `H_2 diag(phi) H_1 + H_3` where the stacks already carry their pathloss
/// scalars (see [`FreqChannelSet::fold_gains`]).
pub fn equivalent_channel_folded(ch: &FreqChannelSet, phi: &RisPhases) -> Result<EquivalentChannel> {
    if phi.len() != ch.n_ris() {
        return Err(Error::Shape(format!(
            "{} RIS phases for a {}-element surface",
            phi.len(),
            ch.n_ris()
        )));
    }
    let heq = ch
        .h1
        .iter()
        .zip(&ch.h2)
        .zip(&ch.h3)
        .map(|((h1, h2), h3)| cascade(h2, phi.as_slice(), h1) + h3)
        .collect();
    Ok(EquivalentChannel { heq })
}

/// `sqrt(rho_d) H_3[k] + sqrt(rho_i) H_2[k] diag(phi) H_1[k]` for every `k`.
pub fn equivalent_channel(ch: &FreqChannelSet, phi: &RisPhases, gains: &LinkGains) -> Result<EquivalentChannel> {
    ch.validate()?;
    let folded = ch.clone().fold_gains(gains.rho_direct, gains.rho_indirect);
    equivalent_channel_folded(&folded, phi)
}

/// `H_2 diag(phi) H_1`.
pub(crate) fn cascade(h2: &CMatrix, phi: &[C64], h1: &CMatrix) -> CMatrix {
    let mut scaled = h2.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phi[j];
    }
    scaled * h1
}

/// Sum over subcarriers of `log2 det(I + H Q H^H / sigma^2)`, unchecked.
pub(crate) fn sum_log_det(heq: &[CMatrix], q: &[CMatrix], noise_variance: f64) -> Result<f64> {
    heq.iter()
        .zip(q)
        .map(|(h, q)| {
            let a = eye(h.nrows()) + (h * q * h.adjoint()) * C64::new(1.0 / noise_variance, 0.0);
            log2_det_hpd(&a)
        })
        .sum()
}

/// `(1/K) Σ_k log2 det(I + H_eq[k] Q[k] H_eq[k]^H / sigma^2)` in bits/s/Hz.
pub fn spectral_efficiency(eq: &EquivalentChannel, q: &[CMatrix], noise_variance: f64) -> Result<f64> {
    if q.len() != eq.subcarriers() {
        return Err(Error::Shape(format!(
            "{} covariances for {} subcarriers",
            q.len(),
            eq.subcarriers()
        )));
    }
    for (k, (h, qk)) in eq.heq.iter().zip(q).enumerate() {
        if qk.shape() != (h.ncols(), h.ncols()) {
            return Err(Error::Shape(format!(
                "covariance {k} is {:?}, channel has {} transmit antennas",
                qk.shape(),
                h.ncols()
            )));
        }
        let min = min_hermitian_eigenvalue(qk);
        let scale = qk.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if min < -PSD_TOL * scale {
            return Err(Error::NotPsd { subcarrier: k, min_eigenvalue: min });
        }
    }
    if !(noise_variance > 0.0) {
        return Err(Error::Config(format!("noise variance must be positive, got {noise_variance}")));
    }
    Ok((sum_log_det(&eq.heq, q, noise_variance)? / eq.subcarriers() as f64).max(0.0))
}

/// `y[k] = H_eq[k] x[k] + v[k]` with `v[k] ~ CN(0, sigma^2 I)`.
pub fn received_signal<R: Rng + ?Sized>(
    eq: &EquivalentChannel,
    x: &[CVector],
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<CVector>> {
    if x.len() != eq.subcarriers() {
        return Err(Error::Shape(format!("{} symbols for {} subcarriers", x.len(), eq.subcarriers())));
    }
    let sigma = noise_variance.sqrt();
    eq.heq
        .iter()
        .zip(x)
        .map(|(h, xk)| {
            if xk.len() != h.ncols() {
                return Err(Error::Shape(format!("symbol has {} entries, expected {}", xk.len(), h.ncols())));
            }
            let mut y = h * xk;
            if sigma > 0.0 {
                y.iter_mut().for_each(|yi| *yi += complex_gaussian(rng) * sigma);
            }
            Ok(y)
        })
        .collect()
}
