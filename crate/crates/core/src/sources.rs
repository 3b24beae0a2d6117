//! Synthetic sources, mixing with optional Gaussian noise, and seed derivation.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Open01, StandardNormal};

use crate::error::{IcaError, Result};
use crate::linalg::determinant;
use crate::preprocess::SignalMatrix;
use crate::scalar::Scalar;

/// Deterministic generator used for every random stream in the crate.
pub type IcaRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> IcaRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child seed for stream `index` of `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    /// Uniform on `(−τ₁, τ₁)`.
    Uniform,
    /// Rayleigh with unit scale.
    Rayleigh,
    /// Laplace with scale `τ₂`.
    Laplacian,
    /// `exp(N(0, 1))`.
    LogNormal,
}

impl SourceKind {
    pub const ALL: [SourceKind; 4] = [
        SourceKind::Uniform,
        SourceKind::Rayleigh,
        SourceKind::Laplacian,
        SourceKind::LogNormal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Uniform => "uniform",
            SourceKind::Rayleigh => "rayleigh",
            SourceKind::Laplacian => "laplacian",
            SourceKind::LogNormal => "lognormal",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceKind {
    type Err = IcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "s1" => Ok(SourceKind::Uniform),
            "rayleigh" | "s2" => Ok(SourceKind::Rayleigh),
            "laplacian" | "laplace" | "s3" => Ok(SourceKind::Laplacian),
            "lognormal" | "log-normal" | "s4" => Ok(SourceKind::LogNormal),
            other => Err(IcaError::invalid(format!("unknown source kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub tau1: f64,
    pub tau2: f64,
    pub samples: usize,
    pub seed: u64,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, samples: usize, seed: u64) -> Self {
        Self {
            kind,
            tau1: 3.0,
            tau2: 1.0,
            samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau1.is_finite()) || !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(IcaError::invalid("source parameters must be positive"));
        }
        if self.samples < 2 {
            return Err(IcaError::invalid("a source needs at least 2 samples"));
        }
        Ok(())
    }
}

/// Draws `spec.samples` i.i.d. values from the named density.
pub fn sample_source<T: Scalar>(spec: &SourceSpec) -> Result<Array1<T>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let n = spec.samples;
    let v: Vec<f64> = match spec.kind {
        SourceKind::Uniform => (0..n).map(|_| rng.random_range(-spec.tau1..spec.tau1)).collect(),
        SourceKind::Rayleigh => (0..n)
            .map(|_| {
                let u: f64 = Open01.sample(&mut rng);
                (-2.0 * u.ln()).sqrt()
            })
            .collect(),
        SourceKind::Laplacian => (0..n)
            .map(|_| {
                let u: f64 = Open01.sample(&mut rng);
                let c = u - 0.5;
                -spec.tau2 * c.signum() * (1.0 - 2.0 * c.abs()).ln()
            })
            .collect(),
        SourceKind::LogNormal => {
            let d = LogNormal::new(0.0, 1.0).expect("valid log-normal parameters");
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
    };
    Ok(v.into_iter().map(T::lit).collect())
}

/// One row per kind, row `i` seeded with `derive_seed(seed, i)`.
pub fn generate_sources<T: Scalar>(
    kinds: &[SourceKind],
    samples: usize,
    seed: u64,
) -> Result<SignalMatrix<T>> {
    let rows = kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            sample_source::<T>(&SourceSpec::new(k, samples, derive_seed(seed, i as u64))).map(|a| a.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    SignalMatrix::from_rows(&rows)
}

/// `E[s⁴] / E[s²]² − 3` with raw moments.
pub fn kurtosis<T: Scalar>(s: &[T]) -> Result<T> {
    if s.len() < 2 {
        return Err(IcaError::invalid("kurtosis needs at least 2 samples"));
    }
    let n = T::from_usize_lossy(s.len());
    let m2 = s.iter().map(|&v| v * v).sum::<T>() / n;
    let m4 = s.iter().map(|&v| (v * v) * (v * v)).sum::<T>() / n;
    if !(m2 > T::zero()) {
        return Err(IcaError::invalid("kurtosis of a zero signal is undefined"));
    }
    Ok(m4 / (m2 * m2) - T::lit(3.0))
}

/// `x = A s + v` with `v ~ N(0, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingModel<T> {
    pub a: Array2<T>,
    pub noise_sigma: T,
}

impl<T: Scalar> MixingModel<T> {
    pub fn new(a: Array2<T>, noise_sigma: T) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(IcaError::invalid("mixing matrix must be square"));
        }
        if !(noise_sigma >= T::zero()) || !noise_sigma.is_finite() {
            return Err(IcaError::invalid(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        let scale = a.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let det = determinant(a.view());
        let tol = T::lit(1e-12) * scale.powi(a.nrows() as i32);
        if !(det.abs() > tol) {
            return Err(IcaError::invalid(format!(
                "mixing matrix is rank deficient (det {det})"
            )));
        }
        Ok(Self { a, noise_sigma })
    }

    pub fn noiseless(a: Array2<T>) -> Result<Self> {
        Self::new(a, T::zero())
    }
}

/// Two-channel mixing matrix `[[0.5, 0.6], [0.3, 0.4]]ᵀ` (determinant 0.02).
pub fn reference_mixing_2x2<T: Scalar>() -> Array2<T> {
    ndarray::arr2(&[[0.5, 0.3], [0.6, 0.4]]).mapv(T::lit)
}

/// Three-channel mixing matrix used for the speech/music task.
pub fn reference_mixing_3x3<T: Scalar>() -> Array2<T> {
    ndarray::arr2(&[[0.8, 0.3, -0.3], [0.2, -0.8, 0.7], [0.3, 0.2, 0.3]])
        .reversed_axes()
        .mapv(T::lit)
}

/// Noise level achieving `10 log10(mean ‖A s_t‖² / (M σ²)) = snr_db`.
pub fn noise_sigma_for_snr<T: Scalar>(clean: &Array2<T>, snr_db: T) -> Result<T> {
    if !snr_db.is_finite() {
        return Err(IcaError::invalid("SNR must be finite"));
    }
    let power = clean.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(clean.len());
    if !(power > T::zero()) {
        return Err(IcaError::invalid("cannot set SNR for a zero signal"));
    }
    Ok((power / T::lit(10.0).powf(snr_db / T::lit(10.0))).sqrt())
}

/// Mixes `s` and adds noise drawn from `seed`. A zero noise level returns
/// exactly `A s`.
pub fn mix<T: Scalar>(s: &SignalMatrix<T>, model: &MixingModel<T>, seed: u64) -> Result<SignalMatrix<T>> {
    if model.a.ncols() != s.channels() {
        return Err(IcaError::invalid(format!(
            "mixing matrix has {} columns for {} sources",
            model.a.ncols(),
            s.channels()
        )));
    }
    let mut x = model.a.dot(s.data());
    if model.noise_sigma > T::zero() {
        let mut rng = rng_from_seed(seed);
        for v in x.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += model.noise_sigma * T::lit(n);
        }
    }
    SignalMatrix::new(x)
}

/// Mixes at a target SNR; returns the mixture, its noise-free part and σ.
pub fn mix_with_snr<T: Scalar>(
    s: &SignalMatrix<T>,
    a: &Array2<T>,
    snr_db: T,
    seed: u64,
) -> Result<(SignalMatrix<T>, SignalMatrix<T>, T)> {
    let clean = mix(s, &MixingModel::noiseless(a.clone())?, seed)?;
    let sigma = noise_sigma_for_snr(clean.data(), snr_db)?;
    let noisy = mix(s, &MixingModel::new(a.clone(), sigma)?, seed)?;
    Ok((noisy, clean, sigma))
}

/// I.i.d. `U(−1, 1)` entries, redrawn until `|det| ≥ 0.01`.
pub fn random_mixing_matrix<T: Scalar, R: Rng + ?Sized>(m: usize, rng: &mut R) -> Array2<T> {
    loop {
        let a: Array2<f64> = Array2::from_shape_fn((m, m), |_| rng.random_range(-1.0..1.0));
        if determinant(a.view()).abs() >= 0.01 {
            return a.mapv(T::lit);
        }
    }
}
