//! Closed-form Gaussian KL divergence and mutual information, plus seeded
//! sampling. These are the ground truth for the synthetic sweeps.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::{random_unitary, spd_factor, JitterPolicy, SpdFactor};
use crate::{seeds, Error, Mat, Result, SampleSet};

fn factor_strict(cov: &Mat<f64>, what: &str) -> Result<SpdFactor> {
    spd_factor(cov, JitterPolicy::None).map_err(|e| match e {
        Error::Numerical(_) => Error::numerical(format!("{what} is not positive definite")),
        other => other,
    })
}

/// `N(mean, cov)` with the covariance factor cached.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    mean: Vec<f64>,
    cov: Mat<f64>,
    factor: SpdFactor,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, cov: Mat<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::input(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("mean has non-finite entries"));
        }
        let factor = factor_strict(&cov, "covariance")?;
        Ok(Self { mean, cov, factor })
    }

    /// `N(0, I_dim)`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], Mat::identity(dim, dim))
    }

    /// `N(shift·1, scale·I_dim)`.
    pub fn isotropic(dim: usize, shift: f64, scale: f64) -> Result<Self> {
        Self::new(
            vec![shift; dim],
            Mat::from_fn(dim, dim, |i, j| if i == j { scale } else { 0.0 }),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Mat<f64> {
        &self.cov
    }
}

/// `KL(N_p ‖ N_q)` from Cholesky factors.
pub fn kl_gaussian(p: &GaussianSpec, q: &GaussianSpec) -> Result<f64> {
    let n = p.dim();
    if q.dim() != n {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            n,
            q.dim()
        )));
    }
    let log_det_ratio = q.factor.log_det() - p.factor.log_det();
    // tr(Σq⁻¹ Σp) = ‖Lq⁻¹ Lp‖²_F
    let mut w = p.factor.lower().clone();
    q.factor.lower().solve_lower_triangular_in_place(&mut w);
    let trace = w.norm_l2().powi(2);
    let diff: Vec<f64> = p.mean.iter().zip(&q.mean).map(|(a, b)| a - b).collect();
    let maha: f64 = q.factor.forward_solve(&diff)?.iter().map(|v| v * v).sum();
    Ok((0.5 * (log_det_ratio + trace + maha - n as f64)).max(0.0))
}

/// Joint Gaussian of `(X, Y)` with zero mean.
#[derive(Debug, Clone)]
pub struct JointGaussianSpec {
    cov_x: Mat<f64>,
    cov_y: Mat<f64>,
    cross: Mat<f64>,
    epsilon: Option<f64>,
    unitary_seed: Option<u64>,
}

impl JointGaussianSpec {
    /// Checks the full joint covariance is PSD.
    pub fn new(cov_x: Mat<f64>, cov_y: Mat<f64>, cross: Mat<f64>) -> Result<Self> {
        let (dx, dy) = (cov_x.nrows(), cov_y.nrows());
        if cross.nrows() != dx || cross.ncols() != dy {
            return Err(Error::input(format!(
                "cross block is {}x{}, expected {dx}x{dy}",
                cross.nrows(),
                cross.ncols()
            )));
        }
        let spec = Self {
            cov_x,
            cov_y,
            cross,
            epsilon: None,
            unitary_seed: None,
        };
        let joint = spec.joint_cov();
        let scale = joint.norm_max().max(1.0);
        let eig = joint
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|_| Error::numerical("eigenvalue solver failed on joint covariance"))?;
        if eig[0] < -1e-10 * scale {
            return Err(Error::input(format!(
                "joint covariance is not PSD (min eigenvalue {:e})",
                eig[0]
            )));
        }
        Ok(spec)
    }

    /// `Σ_X = Σ_Y = I_dim`, `Σ_XY = εU` with `U = random_unitary(dim, unitary_seed)`.
    pub fn identity_marginals(dim: usize, epsilon: f64, unitary_seed: u64) -> Result<Self> {
        if !(epsilon.abs() < 1.0) {
            return Err(Error::input(format!(
                "epsilon must satisfy |epsilon| < 1, got {epsilon}"
            )));
        }
        let u = random_unitary(dim, unitary_seed)?;
        let cross = Mat::from_fn(dim, dim, |i, j| epsilon * u[(i, j)]);
        let mut spec = Self::new(Mat::identity(dim, dim), Mat::identity(dim, dim), cross)?;
        spec.epsilon = Some(epsilon);
        spec.unitary_seed = Some(unitary_seed);
        Ok(spec)
    }

    pub fn dim_x(&self) -> usize {
        self.cov_x.nrows()
    }

    pub fn dim_y(&self) -> usize {
        self.cov_y.nrows()
    }

    pub fn cross(&self) -> &Mat<f64> {
        &self.cross
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn unitary_seed(&self) -> Option<u64> {
        self.unitary_seed
    }

    /// `[[Σ_X, Σ_XY], [Σ_XYᵀ, Σ_Y]]`.
    pub fn joint_cov(&self) -> Mat<f64> {
        let dx = self.dim_x();
        Mat::from_fn(dx + self.dim_y(), dx + self.dim_y(), |i, j| {
            match (i < dx, j < dx) {
                (true, true) => self.cov_x[(i, j)],
                (true, false) => self.cross[(i, j - dx)],
                (false, true) => self.cross[(j, i - dx)],
                (false, false) => self.cov_y[(i - dx, j - dx)],
            }
        })
    }
}

/// `½ log(det Σ_Y / det(Σ_Y − Σ_XYᵀ Σ_X⁻¹ Σ_XY))`.
pub fn mi_gaussian(joint: &JointGaussianSpec) -> Result<f64> {
    let fx = factor_strict(&joint.cov_x, "X covariance")?;
    let fy = factor_strict(&joint.cov_y, "Y covariance")?;
    let mut w = joint.cross.clone();
    fx.lower().solve_lower_triangular_in_place(&mut w);
    let wtw = w.transpose() * &w;
    let dy = joint.dim_y();
    let schur = Mat::from_fn(dy, dy, |i, j| {
        joint.cov_y[(i, j)] - 0.5 * (wtw[(i, j)] + wtw[(j, i)])
    });
    let fs = factor_strict(&schur, "joint covariance")?;
    Ok((0.5 * (fy.log_det() - fs.log_det())).max(0.0))
}

fn draw(mean: &[f64], lower: &Mat<f64>, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::input("sample count must be at least 1"));
    }
    let d = mean.len();
    let mut rng = seeds::rng(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut s = mean[i];
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                s += lower[(i, k)] * zk;
            }
            data.push(s);
        }
    }
    SampleSet::from_flat(data, n, d)
}

/// `n` seeded draws `mean + L z`.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, seed: u64) -> Result<SampleSet> {
    draw(&spec.mean, spec.factor.lower(), n, seed)
}

/// `n` seeded draws of `(X, Y)`; columns are the X block then the Y block.
pub fn sample_joint_gaussian(joint: &JointGaussianSpec, n: usize, seed: u64) -> Result<SampleSet> {
    let f = factor_strict(&joint.joint_cov(), "joint covariance")?;
    draw(&vec![0.0; joint.dim_x() + joint.dim_y()], f.lower(), n, seed)
}
