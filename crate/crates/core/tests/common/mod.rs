#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use mmdkl::estimators::{self, Grams};
use mmdkl::kernels::{GramMatrix, KernelFamily};
use mmdkl::{seeds, SampleSet};
use rand::Rng;
use rand_distr::StandardNormal;

/// Kernel value written out from the closed forms, independent of the crate.
pub fn kernel_direct(family: KernelFamily, gamma: f64, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    match family {
        KernelFamily::GaussianRbf => (-gamma * d2).exp(),
        KernelFamily::InversePolynomial => (1.0 + d2).powf(-gamma),
    }
}

/// Plug-in MMD² as a literal double sum.
pub fn mmd_sq_double_sum(family: KernelFamily, gamma: f64, x: &SampleSet, y: &SampleSet) -> f64 {
    let k = |a: &[f64], b: &[f64]| kernel_direct(family, gamma, a, b);
    let (m, n) = (x.len() as f64, y.len() as f64);
    let mut sxx = 0.0;
    for a in x.rows() {
        for b in x.rows() {
            sxx += k(a, b);
        }
    }
    let mut syy = 0.0;
    for a in y.rows() {
        for b in y.rows() {
            syy += k(a, b);
        }
    }
    let mut sxy = 0.0;
    for a in x.rows() {
        for b in y.rows() {
            sxy += k(a, b);
        }
    }
    sxx / (m * m) + syy / (n * n) - 2.0 * sxy / (m * n)
}

pub fn normal_set<R: Rng>(rng: &mut R, len: usize, dim: usize, shift: f64) -> SampleSet {
    let data = (0..len * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
        .collect();
    SampleSet::from_flat(data, len, dim).unwrap()
}

pub struct FeatureInstance {
    pub phi_x: Mat<f64>,
    pub phi_y: Mat<f64>,
    pub lambda: f64,
}

/// Seeded explicit-feature instance: rows are feature vectors.
pub fn feature_instance(seed: u64) -> FeatureInstance {
    let mut rng = seeds::rng(seed);
    let d = rng.random_range(1..=20);
    let m = rng.random_range(1..=100);
    let n = rng.random_range(1..=100);
    let shift: f64 = rng.random_range(-1.0..1.0);
    let scale = 1.0 / (d as f64).sqrt();
    let phi_x = Mat::from_fn(m, d, |_, _| scale * (rng.sample::<f64, _>(StandardNormal) + shift));
    let phi_y = Mat::from_fn(n, d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let lambda = 10f64.powf(rng.random_range(-2.0..0.0));
    FeatureInstance { phi_x, phi_y, lambda }
}

impl FeatureInstance {
    /// `⟨μp − μq, (Ψ + λI)⁻¹(μp − μq)⟩` with `Ψ = (1/n) Σ φ(y)φ(y)ᵀ`,
    /// solved directly in feature space.
    pub fn feature_space_value(&self) -> f64 {
        let (m, n, d) = (self.phi_x.nrows(), self.phi_y.nrows(), self.phi_x.ncols());
        let mu = |phi: &Mat<f64>, len: usize, j: usize| (0..len).map(|i| phi[(i, j)]).sum::<f64>() / len as f64;
        let diff = Mat::from_fn(d, 1, |j, _| mu(&self.phi_x, m, j) - mu(&self.phi_y, n, j));
        let psi = self.phi_y.transpose() * &self.phi_y;
        let a = Mat::from_fn(d, d, |i, j| {
            psi[(i, j)] / n as f64 + if i == j { self.lambda } else { 0.0 }
        });
        let sol = a.llt(Side::Lower).expect("Ψ + λI is SPD").solve(&diff);
        (0..d).map(|j| diff[(j, 0)] * sol[(j, 0)]).sum()
    }

    /// The crate's Gram-side value on the linear-kernel Gram matrices.
    pub fn gram_side_value(&self) -> f64 {
        let g = |a: &Mat<f64>, b: &Mat<f64>| GramMatrix::from_mat(a * b.transpose()).unwrap();
        let grams = Grams {
            pp: g(&self.phi_x, &self.phi_x),
            qq: g(&self.phi_y, &self.phi_y),
            pq: g(&self.phi_x, &self.phi_y),
        };
        estimators::ub_statistic_sq_from_grams(&grams, self.lambda).unwrap()
    }
}
