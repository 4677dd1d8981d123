//! Projected gradient ascent on the RIS reflection coefficients.
//!
//! The gradient of `Σ_k log2 det A_k(Φ)`, `A_k = I + H_eq Q H_eq^H / σ²`,
//! with respect to the diagonal of `Φ` (holding `Φ^H` fixed) is
//!
//! ```text
//! g_i = (1/ln 2) Σ_k [ (Y_k + Z_k) A_k^{-1} X_k ]_{i,i}
//! X_k = H_2 / σ²,  Y_k = H_1 Q H_3^H,  Z_k = H_1 Q H_1^H Φ^H H_2^H
//! ```
//!
//! For a real objective the steepest-ascent direction in the complex plane is
//! `conj(g)`, so each step is `φ_i <- P(φ_i + μ conj(g_i))` with `P` the
//! projection onto the unit circle. The channel stacks are expected to carry
//! their pathloss scalars already (see [`FreqChannelSet::fold_gains`]).

use std::time::Instant;

use crate::channel::FreqChannelSet;
use crate::flops::FlopMeter;
use crate::linalg::{eye, inverse_hpd, log2_det_hpd};
use crate::power::{allocate_metered, PowerAllocation};
use crate::rate::{cascade, EquivalentChannel, RisPhases};
use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct PgaConfig {
    /// Initial learning rate `μ_0`.
    pub learning_rate: f64,
    /// Stop once the rate changes by less than this between iterations.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Terminate when the learning rate drops below this.
    pub min_learning_rate: f64,
    pub noise_variance: f64,
    /// Total transmit power across all subcarriers and streams.
    pub total_power: f64,
    /// Number of spatial streams `N_s`.
    pub streams: usize,
}

impl PgaConfig {
    pub fn new(total_power: f64, streams: usize) -> Self {
        PgaConfig {
            learning_rate: 0.1,
            epsilon: 1e-3,
            max_iterations: 200,
            min_learning_rate: 1e-12,
            noise_variance: 1.0,
            total_power,
            streams,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(format!(
                "learning rate {} and epsilon {} must be positive with a nonzero iteration cap",
                self.learning_rate, self.epsilon
            )));
        }
        if !(self.noise_variance > 0.0) || self.streams == 0 {
            return Err(Error::Config("noise variance and stream count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The last rate change was below epsilon.
    Converged,
    /// The learning rate fell below its floor.
    LearningRateFloor,
    /// The iteration cap was hit first.
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgaOutcome {
    pub phi: RisPhases,
    pub power: PowerAllocation,
    /// Spectral efficiency of the returned iterate, bits/s/Hz.
    pub rate: f64,
    pub initial_rate: f64,
    /// Accepted rates, starting with the initial one. Non-decreasing.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_learning_rate: f64,
}

impl PgaOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn equivalent_metered(ch: &FreqChannelSet, phi: &RisPhases, meter: &mut FlopMeter) -> EquivalentChannel {
    let (nr, nt, nris) = (ch.n_r(), ch.n_t(), ch.n_ris());
    let heq = ch
        .h1
        .iter()
        .zip(&ch.h2)
        .zip(&ch.h3)
        .map(|((h1, h2), h3)| {
            meter.record_complex_mults(nr * nris);
            meter.record_gemm(nr, nris, nt);
            cascade(h2, phi.as_slice(), h1) + h3
        })
        .collect();
    EquivalentChannel { heq }
}

fn rate_metered(eq: &EquivalentChannel, q: &[CMatrix], noise_variance: f64, meter: &mut FlopMeter) -> Result<f64> {
    let mut total = 0.0;
    for (h, qk) in eq.heq.iter().zip(q) {
        let (nr, nt) = h.shape();
        let a = eye(nr) + (h * qk * h.adjoint()) * C64::new(1.0 / noise_variance, 0.0);
        meter.record_gemm(nr, nt, nt);
        meter.record_gemm(nr, nt, nr);
        meter.record_factorization(nr);
        total += log2_det_hpd(&a)?;
    }
    Ok(total / eq.subcarriers() as f64)
}

/// Gradient contribution of one subcarrier.
#[allow(clippy::too_many_arguments)]
fn subcarrier_gradient(
    h1: &CMatrix,
    h2: &CMatrix,
    h3: &CMatrix,
    q: &CMatrix,
    phi: &RisPhases,
    noise_variance: f64,
    meter: &mut FlopMeter,
    acc: &mut [C64],
) -> Result<()> {
    let (nr, nt) = h3.shape();
    let nris = h1.nrows();
    let inv_noise = C64::new(1.0 / noise_variance, 0.0);

    let heq = cascade(h2, phi.as_slice(), h1) + h3;
    meter.record_complex_mults(nr * nris);
    meter.record_gemm(nr, nris, nt);

    let a = eye(nr) + (&heq * q * heq.adjoint()) * inv_noise;
    meter.record_gemm(nr, nt, nt);
    meter.record_gemm(nr, nt, nr);
    let a_inv = inverse_hpd(&a)?;
    meter.record_factorization(nr);

    let x = h2 * inv_noise;
    meter.record_complex_mults(nr * nris);

    let h1q = h1 * q;
    meter.record_gemm(nris, nt, nt);
    let y = &h1q * h3.adjoint();
    meter.record_gemm(nris, nt, nr);

    let mut z = &h1q * h1.adjoint();
    meter.record_gemm(nris, nt, nris);
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col *= phi.as_slice()[j].conj();
    }
    meter.record_complex_mults(nris * nris);
    let z = z * h2.adjoint();
    meter.record_gemm(nris, nris, nr);

    // Only the diagonal of (Y + Z) A^{-1} X is needed.
    let w = (y + z) * a_inv;
    meter.record_gemm(nris, nr, nr);
    for (i, g) in acc.iter_mut().enumerate() {
        *g += (0..nr).map(|r| w[(i, r)] * x[(r, i)]).sum::<C64>();
    }
    meter.record_complex_mults(nris * nr);
    Ok(())
}

/// Wirtinger gradient of `Σ_k log2 det A_k` with respect to `diag(Φ)`.
pub fn gradient_phi(ch: &FreqChannelSet, q: &[CMatrix], phi: &RisPhases, noise_variance: f64) -> Result<Vec<C64>> {
    gradient_phi_metered(ch, q, phi, noise_variance, &mut FlopMeter::new())
}

pub fn gradient_phi_metered(
    ch: &FreqChannelSet,
    q: &[CMatrix],
    phi: &RisPhases,
    noise_variance: f64,
    meter: &mut FlopMeter,
) -> Result<Vec<C64>> {
    if phi.len() != ch.n_ris() || q.len() != ch.subcarriers() {
        return Err(Error::Shape(format!(
            "{} phases / {} covariances for {} elements / {} subcarriers",
            phi.len(),
            q.len(),
            ch.n_ris(),
            ch.subcarriers()
        )));
    }
    let mut g = vec![C64::new(0.0, 0.0); phi.len()];
    for (((h1, h2), h3), qk) in ch.h1.iter().zip(&ch.h2).zip(&ch.h3).zip(q) {
        subcarrier_gradient(h1, h2, h3, qk, phi, noise_variance, meter, &mut g)?;
    }
    let scale = 1.0 / std::f64::consts::LN_2;
    g.iter_mut().for_each(|z| *z *= scale);
    meter.record_real_ops(2 * g.len());
    Ok(g)
}

/// Gradient of a single subcarrier's `log2 det A_k`.
pub fn gradient_phi_subcarrier(
    ch: &FreqChannelSet,
    k: usize,
    q: &CMatrix,
    phi: &RisPhases,
    noise_variance: f64,
) -> Result<Vec<C64>> {
    let mut g = vec![C64::new(0.0, 0.0); phi.len()];
    subcarrier_gradient(&ch.h1[k], &ch.h2[k], &ch.h3[k], q, phi, noise_variance, &mut FlopMeter::new(), &mut g)?;
    g.iter_mut().for_each(|z| *z /= std::f64::consts::LN_2);
    Ok(g)
}

/// Scale every entry back onto the unit circle. Entries already unit up to
/// rounding are returned as is; entries of zero modulus keep the
/// corresponding value of `previous`.
pub fn project_unit_modulus(v: &[C64], previous: &RisPhases) -> RisPhases {
    let out = v
        .iter()
        .zip(previous.as_slice())
        .map(|(&z, &prev)| {
            let r = z.norm();
            if (r - 1.0).abs() <= 4.0 * f64::EPSILON {
                z
            } else if r > 0.0 && r.is_finite() {
                z / r
            } else {
                prev
            }
        })
        .collect();
    RisPhases::from_unit_unchecked(out)
}

/// Joint optimization of the RIS phases and per-subcarrier covariances.
///
/// Starting from `initial`, each iteration takes a gradient step on the
/// phases, projects back to unit modulus, re-runs waterfilling and evaluates
/// the rate. A step that does not increase the rate is discarded and the
/// learning rate divided by ten. The loop stops once the rate changes by less
/// than `epsilon`, the learning rate hits its floor, or the iteration cap is
/// reached. The best iterate is returned in every case.
pub fn pga_optimize(ch: &FreqChannelSet, cfg: &PgaConfig, initial: RisPhases, meter: &mut FlopMeter) -> Result<PgaOutcome> {
    cfg.validate()?;
    ch.validate()?;
    if initial.len() != ch.n_ris() {
        return Err(Error::Shape(format!("{} initial phases for {} elements", initial.len(), ch.n_ris())));
    }
    let start = Instant::now();
    let sigma2 = cfg.noise_variance;

    let mut phi = initial;
    let eq = equivalent_metered(ch, &phi, meter);
    let mut power = allocate_metered(&eq, sigma2, cfg.total_power, cfg.streams, meter)?;
    let mut rate = rate_metered(&eq, &power.q, sigma2, meter)?;
    let initial_rate = rate;
    let mut trace = vec![rate];
    let mut mu = cfg.learning_rate;
    let mut iterations = 0;
    let mut termination = Termination::IterationCap;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let g = gradient_phi_metered(ch, &power.q, &phi, sigma2, meter)?;
        let stepped: Vec<C64> = phi.as_slice().iter().zip(&g).map(|(p, gi)| p + gi.conj() * mu).collect();
        meter.record_complex_mults(stepped.len());
        let candidate = project_unit_modulus(&stepped, &phi);
        meter.record_complex_divs(stepped.len());

        let eq = equivalent_metered(ch, &candidate, meter);
        let cand_power = allocate_metered(&eq, sigma2, cfg.total_power, cfg.streams, meter)?;
        let cand_rate = rate_metered(&eq, &cand_power.q, sigma2, meter)?;
        let delta = cand_rate - rate;
        if delta > 0.0 {
            phi = candidate;
            power = cand_power;
            rate = cand_rate;
            trace.push(rate);
        } else {
            mu /= 10.0;
            meter.record_real_ops(1);
        }
        if delta.abs() < cfg.epsilon {
            termination = Termination::Converged;
            break;
        }
        if mu < cfg.min_learning_rate {
            termination = Termination::LearningRateFloor;
            break;
        }
    }

    meter.iterations += iterations as u64;
    meter.wall_time += start.elapsed();
    Ok(PgaOutcome {
        phi,
        power,
        rate,
        initial_rate,
        trace,
        iterations,
        termination,
        final_learning_rate: mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian_matrix;
    use crate::rate::{equivalent_channel_folded, sum_log_det};
    use crate::rng::StreamKey;

    fn scalar(z: C64) -> CMatrix {
        CMatrix::from_element(1, 1, z)
    }

    fn random_instance(nt: usize, nr: usize, nris: usize, k: usize, seed: u64) -> (FreqChannelSet, Vec<CMatrix>, RisPhases) {
        let mut rng = StreamKey::root(seed).rng();
        let mut g = |r, c| (0..k).map(|_| complex_gaussian_matrix(r, c, &mut rng)).collect::<Vec<_>>();
        let ch = FreqChannelSet::new(g(nris, nt), g(nr, nris), g(nr, nt)).unwrap();
        let q = g(nt, nt).into_iter().map(|b| &b * b.adjoint() * C64::new(0.5, 0.0)).collect();
        let phi = RisPhases::random(nris, &mut StreamKey::root(seed + 1000).rng());
        (ch, q, phi)
    }

    #[test]
    fn zero_ris_to_ue_link_gives_zero_gradient() {
        let (mut ch, q, phi) = random_instance(3, 2, 4, 2, 1);
        ch.h2.iter_mut().for_each(|h| h.fill(C64::new(0.0, 0.0)));
        let g = gradient_phi(&ch, &q, &phi, 1.0).unwrap();
        assert!(g.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn zero_power_gives_zero_gradient() {
        let (ch, _, phi) = random_instance(3, 2, 4, 2, 2);
        let q = vec![CMatrix::zeros(3, 3); 2];
        let g = gradient_phi(&ch, &q, &phi, 1.0).unwrap();
        assert!(g.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn gradient_is_sum_of_subcarrier_gradients() {
        let (ch, q, phi) = random_instance(4, 2, 4, 3, 3);
        let total = gradient_phi(&ch, &q, &phi, 0.8).unwrap();
        let mut summed = vec![C64::new(0.0, 0.0); 4];
        for k in 0..3 {
            let gk = gradient_phi_subcarrier(&ch, k, &q[k], &phi, 0.8).unwrap();
            summed.iter_mut().zip(gk).for_each(|(s, g)| *s += g);
        }
        for (a, b) in total.iter().zip(&summed) {
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn directional_derivative_matches_finite_differences() {
        let (ch, q, phi) = random_instance(4, 2, 4, 2, 4);
        let sigma2 = 1.0;
        let g = gradient_phi(&ch, &q, &phi, sigma2).unwrap();
        let objective = |p: &RisPhases| {
            let eq = equivalent_channel_folded(&ch, p).unwrap();
            sum_log_det(&eq.heq, &q, sigma2).unwrap()
        };
        let delta = 1e-5;
        for i in 0..4 {
            let mut plus = phi.as_slice().to_vec();
            let mut minus = phi.as_slice().to_vec();
            plus[i] *= C64::from_polar(1.0, delta);
            minus[i] *= C64::from_polar(1.0, -delta);
            let fd = (objective(&RisPhases::new(plus).unwrap()) - objective(&RisPhases::new(minus).unwrap())) / (2.0 * delta);
            let analytic = -2.0 * (phi.as_slice()[i] * g[i]).im;
            assert!((fd - analytic).abs() <= 1e-5 * fd.abs(), "element {i}: {analytic} vs {fd}");
        }
    }

    #[test]
    fn projection_cases() {
        let prev = RisPhases::from_angles(&[0.1, 0.2, 0.3]);
        let v = vec![C64::new(3.0, 4.0), C64::new(0.0, 0.0), C64::from_polar(1.0, -2.0)];
        let p = project_unit_modulus(&v, &prev);
        assert!((p.as_slice()[0] - C64::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(p.as_slice()[1], prev.as_slice()[1]);
        assert!((p.as_slice()[2] - v[2]).norm() < 1e-15);
        let again = project_unit_modulus(p.as_slice(), &prev);
        assert_eq!(again, p);
    }

    #[test]
    fn cascade_only_scalar_optimum() {
        // any phase is optimal; rate = log2(1 + |h1 h2|^2 P / sigma^2)
        let h1 = C64::new(0.8, -0.3);
        let h2 = C64::new(-0.4, 1.1);
        let ch = FreqChannelSet::new(vec![scalar(h1)], vec![scalar(h2)], vec![scalar(C64::new(0.0, 0.0))]).unwrap();
        let p = 5.0;
        let out = pga_optimize(&ch, &PgaConfig::new(p, 1), RisPhases::from_angles(&[1.3]), &mut FlopMeter::new()).unwrap();
        let want = (1.0 + (h1 * h2).norm_sqr() * p).log2();
        assert!((out.rate - want).abs() < 1e-3);
        assert!(out.rate >= out.initial_rate);
    }

    #[test]
    fn aligns_cascade_with_direct_path() {
        let a = C64::new(0.5, 0.9);
        let (h1, h2) = (C64::new(0.7, 0.2), C64::new(-0.3, 0.6));
        let b = h1 * h2;
        let ch = FreqChannelSet::new(vec![scalar(h1)], vec![scalar(h2)], vec![scalar(a)]).unwrap();
        let p = 10.0;
        let cfg = PgaConfig { epsilon: 1e-12, max_iterations: 5000, ..PgaConfig::new(p, 1) };
        let out = pga_optimize(&ch, &cfg, RisPhases::from_angles(&[2.5]), &mut FlopMeter::new()).unwrap();
        let want = (1.0 + (a.norm() + b.norm()).powi(2) * p).log2();
        assert!((out.rate - want).abs() < 1e-6, "{} vs {want}", out.rate);
    }

    #[test]
    fn accepted_rates_never_decrease() {
        let (ch, _, phi) = random_instance(4, 2, 8, 3, 9);
        let out = pga_optimize(&ch, &PgaConfig::new(20.0, 2), phi, &mut FlopMeter::new()).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.phi.max_modulus_error() <= 1e-12);
        assert_eq!(*out.trace.last().unwrap(), out.rate);
    }

    #[test]
    fn global_rotation_is_invisible_without_direct_path() {
        for nris in [1, 5] {
            let (mut ch, q, phi) = random_instance(3, 2, nris, 2, 40 + nris as u64);
            ch.h3.iter_mut().for_each(|h| h.fill(C64::new(0.0, 0.0)));
            let r = |p: &RisPhases| sum_log_det(&equivalent_channel_folded(&ch, p).unwrap().heq, &q, 1.0).unwrap();
            let base = r(&phi);
            for theta in [0.3, 1.7, -2.9] {
                assert!((r(&phi.rotated(theta)) - base).abs() < 1e-10 * base.max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (ch, _, phi) = random_instance(2, 2, 2, 1, 50);
        let mut cfg = PgaConfig::new(1.0, 1);
        cfg.learning_rate = 0.0;
        assert!(pga_optimize(&ch, &cfg, phi, &mut FlopMeter::new()).is_err());
    }
}
