//! Blind source separation with the convex Cauchy-Schwarz divergence.
//!
//! The crate provides discrete divergence measures on 2×2 tables, Gaussian
//! Parzen density estimates, the nonparametric CCS contrast with its
//! analytic gradient, and three solvers:
//!
//! * [`ica_gradient_descent`]: fixed-step descent on the full demixer,
//! * [`ica_pairwise_gd`]: descent on every 2×2 channel subproblem,
//! * [`ica_pairwise_jacobi`]: grid search over planar rotations.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below fix the precision.
//!
//! ```
//! use ccs_ica::{generate_sources, ica_pairwise_jacobi, mix, amari_index};
//! use ccs_ica::{JacobiConfig, MixingModel, SourceKind, reference_mixing_2x2};
//!
//! let s = generate_sources::<f64>(&[SourceKind::Uniform, SourceKind::Laplacian], 300, 1).unwrap();
//! let a = reference_mixing_2x2();
//! let x = mix(&s, &MixingModel::noiseless(a.clone()).unwrap(), 0).unwrap();
//! let cfg = JacobiConfig { stride: 3, ..JacobiConfig::default() };
//! let out = ica_pairwise_jacobi(&x, &cfg).unwrap();
//! assert!(amari_index(&out.demixer, &a).unwrap() < 0.1);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod divergences;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod objective;
pub mod optimizers;
pub mod preprocess;
pub mod scalar;
pub mod sources;

pub use density::{default_bandwidth, ParzenModel};
pub use divergences::{
    alpha_div, beta_div, c_div, ccs_angle, ccs_div, ccs_terms, convex_f, convex_f_prime, cs_angle, cs_div,
    cs_terms, divergence_slice, divergence_surface, e_div, f_div, js_div, kl_div, second_differences,
    ConvexityParam, CsTerms, DiscreteBivariate, DivergenceKind, DivergenceParams, SurfacePoint,
};
pub use error::{IcaError, Result};
pub use metrics::{amari_index, amari_index_of, match_sources, sir_db, SIR_CAP_DB};
pub use objective::{
    ccs_contrast, ccs_gradient, cofactor_matrix, CcsObjective, ContrastConfig, ContrastKind, ContrastTerms,
    DemixingState, ReferenceSet,
};
pub use optimizers::{
    compose_demixer, ica_gradient_descent, ica_pairwise_gd, ica_pairwise_jacobi, rotation, separate_with,
    GdConfig, GdOutcome, JacobiConfig, JacobiOutcome, PairwiseGdConfig, PairwiseGdOutcome,
};
pub use preprocess::{center_and_whiten, remove_mean, whiten, SignalMatrix, WhiteningTransform};
pub use scalar::{Scalar, EPS_FLOOR};
pub use sources::{
    derive_seed, generate_sources, kurtosis, mix, mix_with_snr, noise_sigma_for_snr, random_mixing_matrix,
    reference_mixing_2x2, reference_mixing_3x3, rng_from_seed, sample_source, IcaRng, MixingModel,
    SourceKind, SourceSpec,
};

pub type SignalMatrixF64 = SignalMatrix<f64>;
pub type SignalMatrixF32 = SignalMatrix<f32>;
pub type WhiteningTransformF64 = WhiteningTransform<f64>;
pub type WhiteningTransformF32 = WhiteningTransform<f32>;
pub type DiscreteBivariateF64 = DiscreteBivariate<f64>;
pub type DiscreteBivariateF32 = DiscreteBivariate<f32>;
pub type ConvexityParamF64 = ConvexityParam<f64>;
pub type ConvexityParamF32 = ConvexityParam<f32>;
pub type ParzenModelF64 = ParzenModel<f64>;
pub type ParzenModelF32 = ParzenModel<f32>;
pub type CcsObjectiveF64 = CcsObjective<f64>;
pub type CcsObjectiveF32 = CcsObjective<f32>;
pub type GdConfigF64 = GdConfig<f64>;
pub type GdConfigF32 = GdConfig<f32>;
pub type JacobiConfigF64 = JacobiConfig<f64>;
pub type JacobiConfigF32 = JacobiConfig<f32>;
pub type MixingModelF64 = MixingModel<f64>;
pub type MixingModelF32 = MixingModel<f32>;
