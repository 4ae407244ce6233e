//! Large-scale gains, RIS geometry, LoS vectors and small-scale fading.
//!
//! All gains are linear power gains multiplying the transmitted power.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::special::sinc;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Eigenvalues of a correlation matrix below this are treated as invalid
/// rather than as rounding noise.
const MIN_EIGENVALUE: f64 = -1e-8;

pub fn wavelength(carrier_hz: f64) -> Result<f64> {
    if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
        return Err(Error::domain(format!(
            "carrier frequency must be positive, got {carrier_hz}"
        )));
    }
    Ok(SPEED_OF_LIGHT / carrier_hz)
}

/// Power-law gain of a direct BS–user link.
pub fn bs_user_gain(distance: f64, exponent: f64, ref_gain: f64, ref_distance: f64) -> Result<f64> {
    if !(distance > 0.0) || !(ref_distance > 0.0) {
        return Err(Error::domain(format!(
            "distances must be positive, got d = {distance}, d0 = {ref_distance}"
        )));
    }
    if distance < ref_distance {
        return Err(Error::domain(format!(
            "distance {distance} is inside the reference distance {ref_distance}"
        )));
    }
    Ok(ref_gain * (distance / ref_distance).powf(exponent))
}

/// Gain of the BS–RIS hop for a single maximum-gain element.
pub fn bs_ris_gain(wavelength: f64, bs_ris_distance: f64) -> Result<f64> {
    if !(bs_ris_distance > 0.0) {
        return Err(Error::domain(format!(
            "BS–RIS distance must be positive, got {bs_ris_distance}"
        )));
    }
    Ok(wavelength * wavelength / (16.0 * PI * bs_ris_distance * bs_ris_distance))
}

/// Gain of the RIS–user hop for a single maximum-gain element.
pub fn ris_user_gain(wavelength: f64, ris_user_distance: f64) -> Result<f64> {
    if !(ris_user_distance > 0.0) {
        return Err(Error::domain(format!(
            "RIS–user distance must be positive, got {ris_user_distance}"
        )));
    }
    Ok(wavelength * wavelength / (16.0 * PI * ris_user_distance * ris_user_distance))
}

/// Cascaded per-element gain `λ⁴ / (256 π² r_s² r_m²)`.
pub fn ris_path_gain(wavelength: f64, bs_ris_distance: f64, ris_user_distance: f64) -> Result<f64> {
    Ok(bs_ris_gain(wavelength, bs_ris_distance)? * ris_user_gain(wavelength, ris_user_distance)?)
}

/// Smallest integer BS–RIS distance that keeps the BS in the far field.
pub fn far_field_distance(n_elements: usize, wavelength: f64) -> f64 {
    (n_elements as f64 * wavelength / 2.0).ceil()
}

/// Reference-distance power law for direct links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub ref_gain: f64,
    pub ref_distance: f64,
    pub exponent: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            ref_gain: 1e-3,
            ref_distance: 1.0,
            exponent: -3.5,
        }
    }
}

impl PathLossModel {
    pub fn gain(&self, distance: f64) -> Result<f64> {
        bs_user_gain(distance, self.exponent, self.ref_gain, self.ref_distance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    bs_user: f64,
    bs_ris: f64,
    ris_user: f64,
}

impl LinkBudget {
    pub fn new(bs_user: f64, bs_ris: f64, ris_user: f64) -> Result<Self> {
        for (name, g) in [
            ("BS–user", bs_user),
            ("BS–RIS", bs_ris),
            ("RIS–user", ris_user),
        ] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::domain(format!(
                    "{name} gain must be positive, got {g}"
                )));
            }
        }
        Ok(Self {
            bs_user,
            bs_ris,
            ris_user,
        })
    }

    pub fn from_distances(
        path_loss: &PathLossModel,
        wavelength: f64,
        bs_user_distance: f64,
        bs_ris_distance: f64,
        ris_user_distance: f64,
    ) -> Result<Self> {
        Self::new(
            path_loss.gain(bs_user_distance)?,
            bs_ris_gain(wavelength, bs_ris_distance)?,
            ris_user_gain(wavelength, ris_user_distance)?,
        )
    }

    pub fn bs_user_gain(&self) -> f64 {
        self.bs_user
    }

    pub fn bs_ris_gain(&self) -> f64 {
        self.bs_ris
    }

    pub fn ris_user_gain(&self) -> f64 {
        self.ris_user
    }

    pub fn ris_total_gain(&self) -> f64 {
        self.bs_ris * self.ris_user
    }
}

/// How the linear element index `n` runs over a planar surface in the LoS
/// phase progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseIndexing {
    /// `n` counts row-major across the whole surface.
    #[default]
    RowMajor,
    /// `n` restarts at every row.
    PerRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisGeometry {
    pub n_h: usize,
    pub n_v: usize,
    pub d_l: f64,
    pub d_w: f64,
    pub wavelength: f64,
    pub elevation_aoa: f64,
    pub azimuth_aoa: f64,
    pub indexing: PhaseIndexing,
}

/// Most-square factorisation `n = n_h × n_v` with `n_h ≥ n_v`.
pub fn planar_layout(n: usize) -> (usize, usize) {
    let mut n_v = (n as f64).sqrt().floor() as usize;
    while n_v > 1 && !n.is_multiple_of(n_v) {
        n_v -= 1;
    }
    let n_v = n_v.max(1);
    (n / n_v, n_v)
}

impl RisGeometry {
    pub fn new(n_h: usize, n_v: usize, d_l: f64, d_w: f64, wavelength: f64) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::config("RIS must have at least one element per axis"));
        }
        if !(d_l > 0.0 && d_w > 0.0 && wavelength > 0.0) {
            return Err(Error::config(format!(
                "element size and wavelength must be positive (d_l = {d_l}, d_w = {d_w}, λ = {wavelength})"
            )));
        }
        Ok(Self {
            n_h,
            n_v,
            d_l,
            d_w,
            wavelength,
            elevation_aoa: 0.0,
            azimuth_aoa: 0.0,
            indexing: PhaseIndexing::RowMajor,
        })
    }

    /// Planar surface of `n` elements, most-square layout, both spacings
    /// equal to `spacing_wavelengths × λ`.
    pub fn planar(n: usize, wavelength: f64, spacing_wavelengths: f64) -> Result<Self> {
        let (n_h, n_v) = planar_layout(n);
        let d = spacing_wavelengths * wavelength;
        Self::new(n_h, n_v, d, d, wavelength)
    }

    pub fn with_angles(mut self, elevation: f64, azimuth: f64) -> Self {
        self.elevation_aoa = elevation;
        self.azimuth_aoa = azimuth;
        self
    }

    pub fn with_indexing(mut self, indexing: PhaseIndexing) -> Self {
        self.indexing = indexing;
        self
    }

    pub fn n(&self) -> usize {
        self.n_h * self.n_v
    }

    /// In-plane position of element `idx` (zero-based).
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let col = idx % self.n_h;
        let row = idx / self.n_h;
        (col as f64 * self.d_l, row as f64 * self.d_w)
    }

    /// LoS phase progression `ψ(n)` for element `idx` (zero-based).
    pub fn los_phase(&self, idx: usize) -> f64 {
        let k = match self.indexing {
            PhaseIndexing::RowMajor => idx,
            PhaseIndexing::PerRow => idx % self.n_h,
        };
        PI * k as f64 * self.azimuth_aoa.sin() * self.elevation_aoa.sin()
    }
}

/// Deterministic BS–RIS LoS vector `[h]_n = √gain · e^{-jψ(n)}`.
pub fn los_vector(geometry: &RisGeometry, gain: f64) -> Result<Vec<Complex64>> {
    if !(gain > 0.0) {
        return Err(Error::domain(format!(
            "LoS gain must be positive, got {gain}"
        )));
    }
    let amp = gain.sqrt();
    Ok((0..geometry.n())
        .map(|i| Complex64::from_polar(amp, -geometry.los_phase(i)))
        .collect())
}

/// Spatial correlation `sinc(2‖u_n − u_ñ‖/λ)` between element positions.
pub fn correlation_matrix(geometry: &RisGeometry) -> DMatrix<f64> {
    let n = geometry.n();
    let pos: Vec<(f64, f64)> = (0..n).map(|i| geometry.position(i)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
        sinc(2.0 * dx.hypot(dy) / geometry.wavelength)
    })
}

/// Real square-root factor `F` with `F Fᵀ = R` for a correlation matrix.
#[derive(Debug, Clone)]
pub struct CorrelationFactor {
    factor: DMatrix<f64>,
    clamped: usize,
}

impl CorrelationFactor {
    pub fn new(correlation: &DMatrix<f64>) -> Result<Self> {
        if !correlation.is_square() {
            return Err(Error::usage("correlation matrix must be square"));
        }
        let asym = (correlation - correlation.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::domain(format!(
                "correlation matrix is not symmetric (max gap {asym})"
            )));
        }
        let eig = SymmetricEigen::new(correlation.clone());
        let min = eig.eigenvalues.min();
        if min < MIN_EIGENVALUE {
            return Err(Error::domain(format!(
                "correlation matrix has eigenvalue {min}, below {MIN_EIGENVALUE}"
            )));
        }
        let clamped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        if clamped > 0 {
            log::debug!("clamped {clamped} negative eigenvalues (min {min})");
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self { factor, clamped })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Number of negative eigenvalues set to zero.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Writes `F · white` into `out`.
    pub fn colour(&self, white: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim();
        debug_assert_eq!(white.len(), n);
        debug_assert_eq!(out.len(), n);
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        // Column-major storage: accumulate column by column.
        for (j, w) in white.iter().enumerate() {
            let col = self.factor.column(j);
            for (o, &f) in out.iter_mut().zip(col.iter()) {
                *o += w * f;
            }
        }
    }
}

/// One circularly symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Unit-variance draws for one user, before scaling and colouring.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteUser {
    pub bs: Complex64,
    pub ris: Vec<Complex64>,
}

impl WhiteUser {
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let bs = complex_normal(rng);
        let ris = (0..n).map(|_| complex_normal(rng)).collect();
        Self { bs, ris }
    }
}

/// Small-scale fading of one user in one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct UserFading {
    /// Direct BS–user coefficient.
    pub bs: Complex64,
    /// RIS–user vector, one entry per element.
    pub ris: Vec<Complex64>,
}

impl UserFading {
    /// Scales (and optionally colours) a white draw with the user's budget.
    pub fn realize(
        white: &WhiteUser,
        bs_user_gain: f64,
        ris_user_gain: f64,
        factor: Option<&CorrelationFactor>,
    ) -> Self {
        let mut ris = vec![Complex64::new(0.0, 0.0); white.ris.len()];
        match factor {
            Some(f) => f.colour(&white.ris, &mut ris),
            None => ris.copy_from_slice(&white.ris),
        }
        let amp = ris_user_gain.sqrt();
        ris.iter_mut().for_each(|g| *g *= amp);
        Self {
            bs: white.bs * bs_user_gain.sqrt(),
            ris,
        }
    }
}

/// Fading of every user in one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    /// Users behind the RIS, served by the BS only.
    pub c1: Vec<UserFading>,
    /// Users in front of the RIS, served by its sub-surfaces.
    pub c2: Vec<UserFading>,
    pub correlated: bool,
}

/// White draws of every user in one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteDraw {
    pub c1: Vec<WhiteUser>,
    pub c2: Vec<WhiteUser>,
}

impl WhiteDraw {
    pub fn sample<R: Rng + ?Sized>(m1: usize, m2: usize, n: usize, rng: &mut R) -> Self {
        let c1 = (0..m1).map(|_| WhiteUser::sample(n, rng)).collect();
        let c2 = (0..m2).map(|_| WhiteUser::sample(n, rng)).collect();
        Self { c1, c2 }
    }
}

/// Everything needed to turn white draws into channel realizations.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub geometry: RisGeometry,
    pub c1: Vec<LinkBudget>,
    pub c2: Vec<LinkBudget>,
    /// BS–RIS LoS vector.
    pub los: Vec<Complex64>,
    factor: CorrelationFactor,
}

impl ChannelModel {
    pub fn new(geometry: RisGeometry, c1: Vec<LinkBudget>, c2: Vec<LinkBudget>) -> Result<Self> {
        let all = c1.iter().chain(c2.iter());
        let bs_ris = c2
            .first()
            .or(c1.first())
            .map(|b| b.bs_ris_gain())
            .ok_or_else(|| Error::config("scenario has no users"))?;
        if all
            .clone()
            .any(|b| (b.bs_ris_gain() - bs_ris).abs() > 1e-12 * bs_ris)
        {
            return Err(Error::config("all users must share the BS–RIS gain"));
        }
        let los = los_vector(&geometry, bs_ris)?;
        let factor = CorrelationFactor::new(&correlation_matrix(&geometry))?;
        Ok(Self {
            geometry,
            c1,
            c2,
            los,
            factor,
        })
    }

    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    pub fn factor(&self) -> &CorrelationFactor {
        &self.factor
    }

    pub fn realize(&self, white: &WhiteDraw, correlated: bool) -> FadingDraw {
        let factor = correlated.then_some(&self.factor);
        let side = |w: &[WhiteUser], b: &[LinkBudget]| {
            w.iter()
                .zip(b)
                .map(|(w, b)| UserFading::realize(w, b.bs_user_gain(), b.ris_user_gain(), factor))
                .collect()
        };
        FadingDraw {
            c1: side(&white.c1, &self.c1),
            c2: side(&white.c2, &self.c2),
            correlated,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, correlated: bool, rng: &mut R) -> FadingDraw {
        let white = WhiteDraw::sample(self.c1.len(), self.c2.len(), self.n(), rng);
        self.realize(&white, correlated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = SPEED_OF_LIGHT / 1.8e9;

    #[test]
    fn direct_gain_values() {
        assert!((bs_user_gain(1.0, -3.5, 1e-3, 1.0).unwrap() - 1e-3).abs() < 1e-18);
        let g100 = bs_user_gain(100.0, -3.5, 1e-3, 1.0).unwrap();
        assert!((g100 / 1e-10 - 1.0).abs() < 1e-12);
        let g150 = bs_user_gain(150.0, -3.5, 1e-3, 1.0).unwrap();
        assert!((g150 / g100 - 0.241_924_912_867).abs() < 1e-11);
        assert!(bs_user_gain(0.0, -3.5, 1e-3, 1.0).is_err());
        assert!(bs_user_gain(-2.0, -3.5, 1e-3, 1.0).is_err());
    }

    #[test]
    fn ris_gain_values() {
        let g = ris_path_gain(0.16655, 4.0, 104.0).unwrap();
        let hand = 0.16655f64.powi(4) / (256.0 * PI * PI * 16.0 * 104.0 * 104.0);
        assert!((g / hand - 1.0).abs() < 1e-12);
        assert!((g - 1.76e-12).abs() < 0.01e-12);
        let g2 = ris_path_gain(0.16655, 4.0, 208.0).unwrap();
        assert!((g / g2 - 4.0).abs() < 1e-12);
        let g3 = ris_path_gain(2.0 * 0.16655, 4.0, 104.0).unwrap();
        assert!((g3 / g - 16.0).abs() < 1e-12);
        assert!(ris_path_gain(0.16655, 0.0, 104.0).is_err());
    }

    #[test]
    fn budget_product_is_exact() {
        let b = LinkBudget::from_distances(&PathLossModel::default(), LAMBDA, 150.0, 4.0, 146.0)
            .unwrap();
        assert_eq!(b.ris_total_gain(), b.bs_ris_gain() * b.ris_user_gain());
        assert_eq!(
            b.ris_total_gain(),
            ris_path_gain(LAMBDA, 4.0, 146.0).unwrap()
        );
        assert!(LinkBudget::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn far_field_values() {
        assert_eq!(far_field_distance(40, 0.16655), 4.0);
        assert_eq!(far_field_distance(80, 0.16655), 7.0);
        assert_eq!(far_field_distance(2, 1.0), 1.0);
    }

    #[test]
    fn layouts() {
        assert_eq!(planar_layout(40), (8, 5));
        assert_eq!(planar_layout(50), (10, 5));
        assert_eq!(planar_layout(80), (10, 8));
        assert_eq!(planar_layout(200), (20, 10));
        assert_eq!(planar_layout(49), (7, 7));
        assert_eq!(planar_layout(13), (13, 1));
    }

    #[test]
    fn los_phases() {
        let g = RisGeometry::planar(40, LAMBDA, 0.5)
            .unwrap()
            .with_angles(0.7, 0.0);
        let h = los_vector(&g, 4.0).unwrap();
        assert!(h
            .iter()
            .all(|z| (z - Complex64::new(2.0, 0.0)).norm() < 1e-15));
        let g = g.with_angles(PI / 2.0, PI / 2.0);
        let h = los_vector(&g, 1.0).unwrap();
        assert!((h[1].arg().abs() - PI).abs() < 1e-12);
        assert!(h.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let per_row = g.clone().with_indexing(PhaseIndexing::PerRow);
        let h2 = los_vector(&per_row, 1.0).unwrap();
        assert!((h2[8] - h2[0]).norm() < 1e-15);
    }

    #[test]
    fn correlation_entries() {
        let g = RisGeometry::new(40, 1, LAMBDA / 2.0, LAMBDA / 2.0, LAMBDA).unwrap();
        let r = correlation_matrix(&g);
        assert_eq!(r, DMatrix::identity(40, 40));
        let g = RisGeometry::planar(40, LAMBDA, 0.5).unwrap();
        let r = correlation_matrix(&g);
        assert!(r.diagonal().iter().all(|&d| d == 1.0));
        assert_eq!(r[(0, 1)], 0.0);
        assert_eq!(r[(0, 8)], 0.0);
        // Diagonal neighbours on a planar grid sit at √2 · λ/2.
        assert!((r[(0, 9)] - sinc(2f64.sqrt())).abs() < 1e-12);
        let g = RisGeometry::planar(40, LAMBDA, 0.25).unwrap();
        let r = correlation_matrix(&g);
        assert!((r[(0, 1)] - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn factor_reconstructs() {
        let g = RisGeometry::planar(40, LAMBDA, 0.25).unwrap();
        let r = correlation_matrix(&g);
        let f = CorrelationFactor::new(&r).unwrap();
        let rr = f.matrix() * f.matrix().transpose();
        assert!((rr - &r).amax() < 1e-6);
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = 2.0;
        bad[(1, 0)] = 2.0;
        assert!(CorrelationFactor::new(&bad).is_err());
    }

    #[test]
    fn zero_gain_gives_zero_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = WhiteUser::sample(16, &mut rng);
        let u = UserFading::realize(&w, 0.0, 0.0, None);
        assert!(u.ris.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(u.bs, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rayleigh_amplitude_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gain: f64 = 3.0;
        let n = 1_000_000;
        let amps: Vec<f64> = (0..n)
            .map(|_| (complex_normal(&mut rng) * gain.sqrt()).norm() / gain.sqrt())
            .collect();
        let mean = amps.iter().sum::<f64>() / n as f64;
        let var = amps.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean / (PI.sqrt() / 2.0) - 1.0).abs() < 0.01);
        assert!((var / ((4.0 - PI) / 4.0) - 1.0).abs() < 0.02);
    }
}
