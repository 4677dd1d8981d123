//! Clustered geometric Rician channel synthesis.
//!
//! Each link is a list of time-domain taps. A tap mixes a deterministic
//! geometric part (sum of cluster rays through URA steering vectors) with an
//! i.i.d. CN(0, 1) scatter part according to the Rician factor, and is scaled
//! by an exponentially decaying power profile. The taps are then taken to the
//! subcarrier domain with a K-point DFT.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::Rng;

use crate::linalg::{complex_gaussian, complex_gaussian_matrix};
use crate::rng::StreamKey;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Geometry of a uniform rectangular array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UraSpec {
    pub rows: usize,
    pub cols: usize,
    /// Element pitch in carrier wavelengths.
    pub spacing_wavelengths: f64,
}

impl UraSpec {
    pub fn new(rows: usize, cols: usize, spacing_wavelengths: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!("array {rows}x{cols} has no elements")));
        }
        if !(spacing_wavelengths > 0.0 && spacing_wavelengths.is_finite()) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {spacing_wavelengths}"
            )));
        }
        Ok(UraSpec { rows, cols, spacing_wavelengths })
    }

    /// Half-wavelength array.
    pub fn half_wave(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, 0.5)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Wrap an azimuth into [-π, π).
pub fn wrap_azimuth(az: f64) -> f64 {
    let w = (az + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Map an arbitrary (azimuth, elevation) pair to the same direction with
/// azimuth in [-π, π) and elevation in [-π/2, π/2].
pub fn principal_direction(az: f64, el: f64) -> (f64, f64) {
    let mut el = wrap_azimuth(el);
    let mut az = az;
    if el > FRAC_PI_2 {
        el = PI - el;
        az += PI;
    } else if el < -FRAC_PI_2 {
        el = -PI - el;
        az += PI;
    }
    (wrap_azimuth(az), el)
}

/// Unit-norm URA steering vector.
///
/// Element `(m, n)` (row-major index `m * cols + n`) has phase
/// `2π d (m sin(az) cos(el) + n sin(el))` with `d` the pitch in wavelengths.
pub fn ura_response(azimuth: f64, elevation: f64, spec: &UraSpec) -> CVector {
    let (az, el) = principal_direction(azimuth, elevation);
    let k = 2.0 * PI * spec.spacing_wavelengths;
    let u = az.sin() * el.cos();
    let v = el.sin();
    let scale = 1.0 / (spec.len() as f64).sqrt();
    CVector::from_iterator(
        spec.len(),
        (0..spec.rows).flat_map(|m| {
            (0..spec.cols).map(move |n| C64::from_polar(scale, k * (m as f64 * u + n as f64 * v)))
        }),
    )
}

/// One propagation ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub gain: C64,
    pub arrival_azimuth: f64,
    pub arrival_elevation: f64,
    pub departure_azimuth: f64,
    pub departure_elevation: f64,
}

/// Rays grouped in `clusters` clusters of `rays_per_cluster` rays each,
/// stored cluster-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRaySet {
    pub rays: Vec<Ray>,
    pub clusters: usize,
    pub rays_per_cluster: usize,
    pub spread: f64,
}

impl ClusterRaySet {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn cluster(&self, c: usize) -> &[Ray] {
        &self.rays[c * self.rays_per_cluster..(c + 1) * self.rays_per_cluster]
    }
}

/// Zero-mean Laplacian with standard deviation `std`.
fn laplace<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    let b = std / SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

fn uniform_azimuth<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-PI..PI)
}

fn uniform_elevation<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-FRAC_PI_2..=FRAC_PI_2)
}

/// Draw cluster centers uniformly over the sphere of directions and spread
/// rays around them with Laplacian offsets.
pub fn draw_cluster_rays<R: Rng + ?Sized>(
    clusters: usize,
    rays_per_cluster: usize,
    spread: f64,
    rng: &mut R,
) -> ClusterRaySet {
    let mut rays = Vec::with_capacity(clusters * rays_per_cluster);
    for _ in 0..clusters {
        let center = [
            uniform_azimuth(rng),
            uniform_elevation(rng),
            uniform_azimuth(rng),
            uniform_elevation(rng),
        ];
        for _ in 0..rays_per_cluster {
            let mut off = [0.0; 4];
            for o in off.iter_mut() {
                *o = laplace(spread, rng);
            }
            rays.push(Ray {
                gain: complex_gaussian(rng),
                arrival_azimuth: wrap_azimuth(center[0] + off[0]),
                arrival_elevation: (center[1] + off[1]).clamp(-FRAC_PI_2, FRAC_PI_2),
                departure_azimuth: wrap_azimuth(center[2] + off[2]),
                departure_elevation: (center[3] + off[3]).clamp(-FRAC_PI_2, FRAC_PI_2),
            });
        }
    }
    ClusterRaySet { rays, clusters, rays_per_cluster, spread }
}

/// Geometric channel `sqrt(N_rx N_tx / (R C)) Σ β a_r a_t^H`.
pub fn geometric_tap(rays: &ClusterRaySet, rx: &UraSpec, tx: &UraSpec) -> CMatrix {
    let (n_rx, n_tx) = (rx.len(), tx.len());
    let mut h = CMatrix::zeros(n_rx, n_tx);
    if rays.is_empty() {
        return h;
    }
    for ray in &rays.rays {
        let ar = ura_response(ray.arrival_azimuth, ray.arrival_elevation, rx) * ray.gain;
        let at = ura_response(ray.departure_azimuth, ray.departure_elevation, tx);
        h.gerc(C64::new(1.0, 0.0), &ar, &at, C64::new(1.0, 0.0));
    }
    let norm = ((n_rx * n_tx) as f64 / rays.len() as f64).sqrt();
    h * C64::new(norm, 0.0)
}

/// Rician combination `sqrt(K/(K+1)) los + sqrt(1/(K+1)) scatter`.
/// An infinite factor returns the LOS part unchanged.
pub fn rician_tap(los: &CMatrix, scatter: &CMatrix, rician_factor: f64) -> Result<CMatrix> {
    if los.shape() != scatter.shape() {
        return Err(Error::Shape(format!(
            "LOS part is {:?} but scatter part is {:?}",
            los.shape(),
            scatter.shape()
        )));
    }
    if !(rician_factor >= 0.0) {
        return Err(Error::Config(format!("Rician factor must be nonnegative, got {rician_factor}")));
    }
    if rician_factor.is_infinite() {
        return Ok(los.clone());
    }
    let a = (rician_factor / (rician_factor + 1.0)).sqrt();
    let b = (1.0 / (rician_factor + 1.0)).sqrt();
    Ok(los * C64::new(a, 0.0) + scatter * C64::new(b, 0.0))
}

/// Which link a tap channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// BS to RIS, `H_1`.
    BsRis,
    /// RIS to UE, `H_2`.
    RisUe,
    /// BS to UE, `H_3`.
    Direct,
}

impl Link {
    pub fn index(self) -> u64 {
        match self {
            Link::BsRis => 1,
            Link::RisUe => 2,
            Link::Direct => 3,
        }
    }
}

/// Time-domain taps of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct TapChannel {
    pub taps: Vec<CMatrix>,
    pub link: Link,
    pub rician_factor: f64,
}

impl TapChannel {
    pub fn shape(&self) -> (usize, usize) {
        self.taps.first().map(|t| t.shape()).unwrap_or((0, 0))
    }
}

/// `H[k] = Σ_l H[l] exp(-j 2π k l / K)` for `k = 0..K`.
pub fn taps_to_subcarriers(taps: &[CMatrix], subcarriers: usize) -> Result<Vec<CMatrix>> {
    if subcarriers < taps.len() || subcarriers == 0 {
        return Err(Error::TooFewSubcarriers { taps: taps.len(), subcarriers });
    }
    let Some(first) = taps.first() else {
        return Err(Error::TooFewSubcarriers { taps: 0, subcarriers });
    };
    let (r, c) = first.shape();
    if taps.iter().any(|t| t.shape() != (r, c)) {
        return Err(Error::Shape("taps of one link must share a shape".into()));
    }
    let twiddle = |k: usize, l: usize| {
        let idx = (k * l) % subcarriers;
        C64::from_polar(1.0, -2.0 * PI * idx as f64 / subcarriers as f64)
    };
    Ok((0..subcarriers)
        .map(|k| {
            let mut h = CMatrix::zeros(r, c);
            for (l, tap) in taps.iter().enumerate() {
                h.zip_apply(tap, |acc, t| *acc += t * twiddle(k, l));
            }
            h
        })
        .collect())
}

/// Per-tap power weights `w_l ∝ e^{-l}` summing to one.
pub fn tap_power_profile(taps: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..taps).map(|l| (-(l as f64)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Cluster and ray counts for one link state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scattering {
    pub clusters: usize,
    pub rays: usize,
}

/// Everything needed to synthesize the three links of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub bs: UraSpec,
    pub ue: UraSpec,
    pub ris: UraSpec,
    /// Taps of the BS–RIS, RIS–UE and direct links.
    pub taps: [usize; 3],
    pub rician_factor: f64,
    /// Angular spread in radians.
    pub angular_spread: f64,
    pub ris_scattering: Scattering,
    pub direct_los_scattering: Scattering,
    pub direct_nlos_scattering: Scattering,
    pub subcarriers: usize,
}

impl ChannelModel {
    fn arrays(&self, link: Link) -> (&UraSpec, &UraSpec) {
        match link {
            Link::BsRis => (&self.ris, &self.bs),
            Link::RisUe => (&self.ue, &self.ris),
            Link::Direct => (&self.ue, &self.bs),
        }
    }

    fn tap_count(&self, link: Link) -> usize {
        self.taps[link.index() as usize - 1]
    }

    fn scattering(&self, link: Link, direct_los: bool) -> Scattering {
        match link {
            Link::Direct if direct_los => self.direct_los_scattering,
            Link::Direct => self.direct_nlos_scattering,
            _ => self.ris_scattering,
        }
    }
}

/// Synthesize the taps of one link. Tap `l` draws from the substream
/// `key.child(l)`, so links and taps are independent of each other.
/// `direct_los` only matters for [`Link::Direct`].
pub fn synthesize_link(
    link: Link,
    direct_los: bool,
    model: &ChannelModel,
    key: StreamKey,
) -> Result<TapChannel> {
    let (rx, tx) = model.arrays(link);
    let scat = model.scattering(link, direct_los);
    let weights = tap_power_profile(model.tap_count(link));
    let taps = weights
        .iter()
        .enumerate()
        .map(|(l, &w)| {
            let mut rng = key.child(l as u64).rng();
            let rays = draw_cluster_rays(scat.clusters, scat.rays, model.angular_spread, &mut rng);
            let los = geometric_tap(&rays, rx, tx);
            let scatter = complex_gaussian_matrix(rx.len(), tx.len(), &mut rng);
            rician_tap(&los, &scatter, model.rician_factor).map(|t| t * C64::new(w.sqrt(), 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TapChannel { taps, link, rician_factor: model.rician_factor })
}

/// Per-subcarrier responses of the three links.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqChannelSet {
    /// BS to RIS, `N_ris x N_t` per subcarrier.
    pub h1: Vec<CMatrix>,
    /// RIS to UE, `N_r x N_ris` per subcarrier.
    pub h2: Vec<CMatrix>,
    /// BS to UE, `N_r x N_t` per subcarrier.
    pub h3: Vec<CMatrix>,
}

impl FreqChannelSet {
    pub fn new(h1: Vec<CMatrix>, h2: Vec<CMatrix>, h3: Vec<CMatrix>) -> Result<Self> {
        let set = FreqChannelSet { h1, h2, h3 };
        set.validate()?;
        Ok(set)
    }

    pub fn subcarriers(&self) -> usize {
        self.h3.len()
    }

    pub fn n_t(&self) -> usize {
        self.h3[0].ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h3[0].nrows()
    }

    pub fn n_ris(&self) -> usize {
        self.h1[0].nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.h3.len();
        if k == 0 || self.h1.len() != k || self.h2.len() != k {
            return Err(Error::Shape(format!(
                "channel stacks have {}, {} and {} subcarriers",
                self.h1.len(),
                self.h2.len(),
                self.h3.len()
            )));
        }
        let (nr, nt) = self.h3[0].shape();
        let nris = self.h1[0].nrows();
        for i in 0..k {
            if self.h1[i].shape() != (nris, nt)
                || self.h2[i].shape() != (nr, nris)
                || self.h3[i].shape() != (nr, nt)
            {
                return Err(Error::Shape(format!("subcarrier {i} has inconsistent link shapes")));
            }
        }
        Ok(())
    }

    /// Multiply the direct stack by `sqrt(rho_direct)` and the BS–RIS stack by
    /// `sqrt(rho_indirect)`, so the equivalent channel needs no extra scalars.
    pub fn fold_gains(mut self, rho_direct: f64, rho_indirect: f64) -> Self {
        let sd = C64::new(rho_direct.sqrt(), 0.0);
        let si = C64::new(rho_indirect.sqrt(), 0.0);
        self.h3.iter_mut().for_each(|h| *h *= sd);
        self.h1.iter_mut().for_each(|h| *h *= si);
        self
    }
}

/// Synthesize all three links for one trial and convert them to subcarriers.
/// Link `i` uses the substream `key.child(i)`.
pub fn synthesize_channels(model: &ChannelModel, direct_los: bool, key: StreamKey) -> Result<FreqChannelSet> {
    let to_freq = |link: Link| -> Result<Vec<CMatrix>> {
        let taps = synthesize_link(link, direct_los, model, key.child(link.index()))?;
        taps_to_subcarriers(&taps.taps, model.subcarriers)
    };
    FreqChannelSet::new(to_freq(Link::BsRis)?, to_freq(Link::RisUe)?, to_freq(Link::Direct)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_element_response_is_one() {
        let v = ura_response(0.0, 0.0, &UraSpec::half_wave(1, 1).unwrap());
        assert_eq!(v.len(), 1);
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn broadside_entries_have_equal_modulus() {
        let v = ura_response(0.0, 0.0, &UraSpec::half_wave(2, 2).unwrap());
        for z in v.iter() {
            assert!((z.norm() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn response_matches_scalar_evaluation() {
        // 4x1, az = π/4, el = 0: phase_m = π m sin(π/4)
        let v = ura_response(PI / 4.0, 0.0, &UraSpec::half_wave(4, 1).unwrap());
        let expected = [
            c(0.5, 0.0),
            c(-0.3028499335394067, 0.39784660078374046),
            c(-0.13312767102070783, -0.48195126642493863),
            c(0.4641207588229163, 0.18598903524036134),
        ];
        for (got, want) in v.iter().zip(expected) {
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_spread_rays_sit_on_center() {
        let mut rng = StreamKey::root(1).rng();
        let set = draw_cluster_rays(1, 1, 0.0, &mut rng);
        assert_eq!(set.len(), 1);
        let mut rng2 = StreamKey::root(1).rng();
        let center = [
            uniform_azimuth(&mut rng2),
            uniform_elevation(&mut rng2),
            uniform_azimuth(&mut rng2),
            uniform_elevation(&mut rng2),
        ];
        let r = set.rays[0];
        assert_eq!(
            [r.arrival_azimuth, r.arrival_elevation, r.departure_azimuth, r.departure_elevation],
            center
        );
    }

    #[test]
    fn single_broadside_ray_gives_unit_tap() {
        let set = ClusterRaySet {
            rays: vec![Ray {
                gain: c(1.0, 0.0),
                arrival_azimuth: 0.0,
                arrival_elevation: 0.0,
                departure_azimuth: 0.0,
                departure_elevation: 0.0,
            }],
            clusters: 1,
            rays_per_cluster: 1,
            spread: 0.0,
        };
        let one = UraSpec::half_wave(1, 1).unwrap();
        let h = geometric_tap(&set, &one, &one);
        assert!((h[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rician_scalar_evaluation() {
        let one = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let h = rician_tap(&one, &one, 1.0).unwrap();
        assert!((h[(0, 0)].re - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn rician_limits() {
        let mut rng = StreamKey::root(2).rng();
        let los = complex_gaussian_matrix(2, 3, &mut rng);
        let scatter = complex_gaussian_matrix(2, 3, &mut rng);
        assert_eq!(rician_tap(&los, &scatter, 0.0).unwrap(), scatter);
        assert_eq!(rician_tap(&los, &scatter, f64::INFINITY).unwrap(), los);
        let near = rician_tap(&los, &scatter, 1e12).unwrap();
        assert!(frobenius(&(near - &los)) / frobenius(&los) < 1e-5);
    }

    #[test]
    fn rician_rejects_mismatched_shapes() {
        let a = CMatrix::zeros(2, 2);
        let b = CMatrix::zeros(2, 3);
        assert!(matches!(rician_tap(&a, &b, 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn dft_hand_example() {
        let taps = vec![CMatrix::from_element(1, 1, c(1.0, 0.0)), CMatrix::from_element(1, 1, c(0.0, 1.0))];
        let h = taps_to_subcarriers(&taps, 4).unwrap();
        let want = [c(1.0, 1.0), c(2.0, 0.0), c(1.0, -1.0), c(0.0, 0.0)];
        for (got, want) in h.iter().zip(want) {
            assert!((got[(0, 0)] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn flat_channel_and_dc_bin() {
        let mut rng = StreamKey::root(4).rng();
        let tap = complex_gaussian_matrix(2, 2, &mut rng);
        let flat = taps_to_subcarriers(std::slice::from_ref(&tap), 5).unwrap();
        assert!(flat.iter().all(|h| *h == tap));

        let taps: Vec<CMatrix> = (0..3).map(|_| complex_gaussian_matrix(2, 2, &mut rng)).collect();
        let h = taps_to_subcarriers(&taps, 8).unwrap();
        let sum = taps.iter().fold(CMatrix::zeros(2, 2), |a, t| a + t);
        assert!(frobenius(&(&h[0] - sum)) < 1e-14);
    }

    #[test]
    fn dft_needs_enough_subcarriers() {
        let taps = vec![CMatrix::zeros(1, 1); 5];
        assert!(matches!(
            taps_to_subcarriers(&taps, 4),
            Err(Error::TooFewSubcarriers { taps: 5, subcarriers: 4 })
        ));
    }

    #[test]
    fn tap_profile_closed_form() {
        let w = tap_power_profile(3);
        let z = 1.0 + (-1.0f64).exp() + (-2.0f64).exp();
        assert!((w[0] - 1.0 / z).abs() < 1e-15);
        assert!((w[1] - (-1.0f64).exp() / z).abs() < 1e-15);
        assert!((w[2] - (-2.0f64).exp() / z).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn principal_direction_preserves_response() {
        let spec = UraSpec::half_wave(3, 2).unwrap();
        let a = ura_response(0.3, 0.4, &spec);
        let b = ura_response(0.3 - PI, PI - 0.4, &spec);
        assert!((a - b).norm() < 1e-12);
    }
}
