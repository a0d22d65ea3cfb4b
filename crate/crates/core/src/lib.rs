//! # mmdkl
//!
//! Non-parametric lower and upper bounds on the Kullback–Leibler divergence
//! between two sampled distributions, built from kernel maximum mean
//! discrepancy (MMD) statistics in universal reproducing kernel Hilbert spaces.
//!
//! For distributions P and Q on a compact domain with P ≪ Q,
//!
//! ```text
//! -log(1 - MMD_inf² / 4)  <=  KL(P‖Q)  <=  log(MMD_2,Q² + 1)
//! ```
//!
//! where `MMD_inf` uses witnesses bounded in sup-norm and `MMD_2,Q` uses
//! witnesses bounded in L²(Q). Both are estimated from samples:
//!
//! | Quantity | Estimator |
//! |----------|-----------|
//! | lower-bound MMD | max over a kernel family of ‖μ̂p − μ̂q‖ / √M(k) |
//! | upper-bound MMD² | ⟨μ̂p − μ̂q, (Ψ̂ + λI)⁻¹(μ̂p − μ̂q)⟩ via the Woodbury identity |
//!
//! ## Modules
//!
//! - [`kernels`]: Gaussian RBF and inverse-polynomial kernels, Gram matrices.
//! - [`numerics`]: SPD factorization with jitter, solves, random orthogonal matrices.
//! - [`estimators`]: plug-in MMD statistics from Gram matrices.
//! - [`bounds`]: mapping statistics to KL bounds, mutual-information proxies.
//! - [`discrete`]: exact finite-alphabet quantities and inequality verification.
//! - [`gaussian`]: closed-form Gaussian KL / MI and seeded sampling.
//! - [`cli`]: sweeps, two-sample reports and verification commands.
//!
//! ## Quick start
//!
//! ```rust
//! use mmdkl::{bounds, estimators::EstimatorConfig, SampleSet};
//!
//! let x = SampleSet::from_rows(&[vec![0.0]]).unwrap();
//! let y = SampleSet::from_rows(&[vec![1.0]]).unwrap();
//! let cfg = EstimatorConfig::single_rbf(1.0, 1.0);
//! let est = bounds::kl_bounds(&cfg, 1.0, &x, &y).unwrap();
//! assert!(est.kl_lower > 0.0 && est.kl_upper > est.kl_lower);
//! ```

pub mod bounds;
pub mod cli;
pub mod discrete;
mod error;
pub mod estimators;
pub mod gaussian;
pub mod kernels;
pub mod numerics;
mod sample;
pub mod seeds;
pub mod stats;

pub use error::{Error, Result};
pub use faer::Mat;
pub use sample::SampleSet;
