//! Link geometry, LOS probability and pathloss gains.
//!
//! All gains returned here are linear power gains (≤ 1 in practice) that
//! multiply the channel as `sqrt(rho)`.

use std::f64::consts::PI;

use rand::Rng;

use crate::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Ground distance between BS and UE, `D`.
    pub distance: f64,
    /// BS array height, `l_t`.
    pub bs_height: f64,
    /// UE array height, `l_r`.
    pub ue_height: f64,
    /// Ground offset between BS array center and RIS center, `d_RIS`.
    pub ris_offset: f64,
    pub wavelength: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub reference_distance: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    /// Replaces the distance-based LOS probability when set.
    pub p_los_override: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            distance: 200.0,
            bs_height: 10.0,
            ue_height: 1.8,
            ris_offset: 2.2,
            wavelength: SPEED_OF_LIGHT / 28e9,
            tx_gain: 10f64.powf(6.2),
            rx_gain: 1.0,
            reference_distance: 1.0,
            los_exponent: 2.0,
            nlos_exponent: 4.0,
            p_los_override: None,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("distance", self.distance),
            ("bs_height", self.bs_height),
            ("ue_height", self.ue_height),
            ("ris_offset", self.ris_offset),
            ("wavelength", self.wavelength),
            ("tx_gain", self.tx_gain),
            ("rx_gain", self.rx_gain),
            ("reference_distance", self.reference_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("los_exponent", self.los_exponent), ("nlos_exponent", self.nlos_exponent)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if let Some(p) = self.p_los_override {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("p_los_override must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// LOS probability used for blockage draws: the override when present,
    /// otherwise [`p_los`].
    pub fn los_probability(&self) -> f64 {
        self.p_los_override.unwrap_or_else(|| p_los(self))
    }

    /// `K_0 = (λ / 4π d_0)^2 G_t G_r`
    pub fn k0(&self) -> f64 {
        (self.wavelength / (4.0 * PI * self.reference_distance)).powi(2) * self.tx_gain * self.rx_gain
    }
}

/// Distances BS–RIS, RIS–UE and BS–UE (direct).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDistances {
    pub bs_ris: f64,
    pub ris_ue: f64,
    pub direct: f64,
}

pub fn link_distances(g: &GeometryConfig) -> LinkDistances {
    LinkDistances {
        bs_ris: g.ris_offset.hypot(g.bs_height),
        ris_ue: (g.distance - g.ris_offset).hypot(g.ue_height),
        direct: g.distance.hypot(g.bs_height - g.ue_height),
    }
}

/// `exp(-(d_dir - 10) / 50)` clamped to [0, 1].
pub fn p_los(g: &GeometryConfig) -> f64 {
    let d = link_distances(g).direct;
    (-(d - 10.0) / 50.0).exp().clamp(0.0, 1.0)
}

/// Power gain of the BS–RIS–UE path:
/// `G_t G_r λ^4 (l_t/d_1 + l_r/d_2)^2 / (256 π^2 d_1^2 d_2^2)`.
pub fn indirect_gain(g: &GeometryConfig) -> f64 {
    let LinkDistances { bs_ris: d1, ris_ue: d2, .. } = link_distances(g);
    let incidence = g.bs_height / d1 + g.ue_height / d2;
    let loss = 256.0 * PI * PI * d1 * d1 * d2 * d2 / (g.wavelength.powi(4) * incidence * incidence);
    g.tx_gain * g.rx_gain / loss
}

/// Power gain of the direct path for the given blockage state.
pub fn direct_gain(g: &GeometryConfig, los: bool) -> f64 {
    let d = link_distances(g).direct;
    let alpha = if los { g.los_exponent } else { g.nlos_exponent };
    g.k0() * (g.reference_distance / d).powf(alpha)
}

/// Bernoulli(p) draw; `true` means the direct path is LOS.
pub fn sample_blockage<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    // p = 1 must always succeed and p = 0 always fail
    rng.random::<f64>() < p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    pub rho_direct: f64,
    pub rho_indirect: f64,
    pub los: bool,
}

impl LinkGains {
    pub fn for_state(g: &GeometryConfig, los: bool) -> Self {
        LinkGains { rho_direct: direct_gain(g, los), rho_indirect: indirect_gain(g), los }
    }
}
