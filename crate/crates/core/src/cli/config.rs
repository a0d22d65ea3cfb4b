//! Run configuration: a JSON file layer, a command-line layer, and the fully
//! resolved per-command configs that get echoed into every output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimators::{EstimatorConfig, LambdaPolicy, DEFAULT_GAMMA_GRID};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::{Error, Result};

pub const MEAN_SHIFT_GRID: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5];
pub const COV_SCALE_GRID: [f64; 7] = [1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0];
pub const MI_GRID: [f64; 7] = [0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9];
pub const KL_SWEEP_GAMMAS: [f64; 3] = [0.1, 0.3, 1.0];
/// Smallest covariance scale used by the covariance sweep.
pub const COV_FLOOR: f64 = 0.05;

/// One (kernel, λ) combination evaluated by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct KernelChoice {
    pub kernel: KernelFamily,
    pub gamma: f64,
    pub lambda: LambdaPolicy,
}

impl KernelChoice {
    pub fn spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.gamma)
    }

    pub fn estimator(&self) -> Result<EstimatorConfig> {
        let cfg = EstimatorConfig::single(self.spec()?, self.lambda);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// `p = N(ε·1, I)`, `q = N(0, I)`
    MeanShift,
    /// `p = N(0, max(ε, 0.05)·I)`, `q = N(0, I)`
    CovScale,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('_', "-").as_str() {
            "mean-shift" => Ok(SweepKind::MeanShift),
            "cov-scale" => Ok(SweepKind::CovScale),
            other => Err(Error::input(format!(
                "unknown sweep kind {other:?} (expected mean-shift or cov-scale)"
            ))),
        }
    }
}

/// Every configurable value; `None` means "use the command default".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub kernel: Option<KernelFamily>,
    pub gamma_grid: Option<Vec<f64>>,
    pub lambda: Option<LambdaPolicy>,
    pub lambda_grid: Option<Vec<f64>>,
    /// Explicit (kernel, γ, λ) list for the sweeps; wins over the grid flags.
    pub kernels: Option<Vec<KernelChoice>>,
    pub ub_gamma: Option<f64>,
    pub lb_scale: Option<f64>,
    pub dim: Option<usize>,
    pub n: Option<usize>,
    pub sweep: Option<SweepKind>,
    pub epsilon_grid: Option<Vec<f64>>,
    pub permutations: Option<usize>,
    pub replicates: Option<usize>,
    pub lb_sizes: Option<Vec<usize>>,
    pub ub_sizes: Option<Vec<usize>>,
    pub shift: Option<f64>,
    pub pairs: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub p: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub file_p: Option<PathBuf>,
    pub file_q: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("config {}: {e}", path.display())))
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, top;
            seed, jobs, out, kernel, gamma_grid, lambda, lambda_grid, kernels, ub_gamma,
            lb_scale, dim, n, sweep, epsilon_grid, permutations, replicates, lb_sizes,
            ub_sizes, shift, pairs, k_min, k_max, p, q, file_p, file_q)
    }

    fn lb_scale(&self) -> Result<f64> {
        let s = self.lb_scale.unwrap_or(1.0);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::input(format!("lb-scale must be positive, got {s}")));
        }
        Ok(s)
    }

    /// Kernel list for a sweep: explicit `kernels`, else kernel × gamma-grid
    /// when either was set, else `default`. `lambda` replaces every λ.
    fn kernel_choices(&self, default: &[KernelChoice]) -> Result<Vec<KernelChoice>> {
        let mut list = if let Some(k) = &self.kernels {
            k.clone()
        } else if self.gamma_grid.is_some() || self.kernel.is_some() {
            let family = self.kernel.unwrap_or(KernelFamily::GaussianRbf);
            let lambda = self.lambda.unwrap_or(default[0].lambda);
            let grid = match &self.gamma_grid {
                Some(g) => g.clone(),
                None => default.iter().map(|c| c.gamma).collect(),
            };
            grid.into_iter()
                .map(|gamma| KernelChoice { kernel: family, gamma, lambda })
                .collect()
        } else {
            default.to_vec()
        };
        if let Some(l) = self.lambda {
            for c in &mut list {
                c.lambda = l;
            }
        }
        if list.is_empty() {
            return Err(Error::input("kernel list is empty"));
        }
        for c in &list {
            c.estimator()?;
        }
        Ok(list)
    }
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::input(format!("{name} must be at least 1")));
    }
    Ok(v)
}

fn finite_grid(name: &str, g: Vec<f64>) -> Result<Vec<f64>> {
    if g.is_empty() {
        return Err(Error::input(format!("{name} is empty")));
    }
    if let Some(v) = g.iter().find(|v| !v.is_finite()) {
        return Err(Error::input(format!("{name} contains non-finite value {v}")));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct KlSweepConfig {
    pub seed: u64,
    pub sweep: SweepKind,
    pub dim: usize,
    pub n: usize,
    pub epsilon_grid: Vec<f64>,
    pub kernels: Vec<KernelChoice>,
    pub lb_scale: f64,
}

impl KlSweepConfig {
    pub fn resolve(c: &RunConfig) -> Result<Self> {
        let sweep = c.sweep.unwrap_or(SweepKind::MeanShift);
        let default_grid = match sweep {
            SweepKind::MeanShift => MEAN_SHIFT_GRID.to_vec(),
            SweepKind::CovScale => COV_SCALE_GRID.to_vec(),
        };
        let defaults: Vec<KernelChoice> = KL_SWEEP_GAMMAS
            .iter()
            .map(|&gamma| KernelChoice {
                kernel: KernelFamily::GaussianRbf,
                gamma,
                lambda: LambdaPolicy::Fixed(1e-3),
            })
            .collect();
        Ok(Self {
            seed: c.seed.unwrap_or(0),
            sweep,
            dim: positive("dim", c.dim.unwrap_or(3))?,
            n: positive("n", c.n.unwrap_or(2000))?,
            epsilon_grid: finite_grid("epsilon-grid", c.epsilon_grid.clone().unwrap_or(default_grid))?,
            kernels: c.kernel_choices(&defaults)?,
            lb_scale: c.lb_scale()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MiSweepConfig {
    pub seed: u64,
    pub dim: usize,
    pub n: usize,
    pub epsilon_grid: Vec<f64>,
    pub kernels: Vec<KernelChoice>,
    /// When set, every kernel is evaluated at each of these λ on the same data.
    pub lambda_grid: Option<Vec<f64>>,
    pub permutations: usize,
    pub lb_scale: f64,
}

impl MiSweepConfig {
    pub fn resolve(c: &RunConfig) -> Result<Self> {
        let defaults = [
            KernelChoice {
                kernel: KernelFamily::GaussianRbf,
                gamma: 0.3,
                lambda: LambdaPolicy::Fixed(1e-4),
            },
            KernelChoice {
                kernel: KernelFamily::InversePolynomial,
                gamma: 0.7,
                lambda: LambdaPolicy::Fixed(2e-4),
            },
        ];
        let eps = finite_grid("epsilon-grid", c.epsilon_grid.clone().unwrap_or(MI_GRID.to_vec()))?;
        if let Some(e) = eps.iter().find(|e| !(e.abs() < 1.0)) {
            return Err(Error::input(format!("MI epsilon must satisfy |epsilon| < 1, got {e}")));
        }
        let lambda_grid = match &c.lambda_grid {
            Some(g) => {
                let g = finite_grid("lambda-grid", g.clone())?;
                if let Some(l) = g.iter().find(|l| **l <= 0.0) {
                    return Err(Error::input(format!("lambda-grid entries must be positive, got {l}")));
                }
                Some(g)
            }
            None => None,
        };
        Ok(Self {
            seed: c.seed.unwrap_or(0),
            dim: positive("dim", c.dim.unwrap_or(3))?,
            n: positive("n", c.n.unwrap_or(4000))?,
            epsilon_grid: eps,
            kernels: c.kernel_choices(&defaults)?,
            lambda_grid,
            permutations: positive("permutations", c.permutations.unwrap_or(1))?,
            lb_scale: c.lb_scale()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConvergenceConfig {
    pub seed: u64,
    pub dim: usize,
    pub replicates: usize,
    pub lb_sizes: Vec<usize>,
    pub ub_sizes: Vec<usize>,
    /// Mean shift of p in the p ≠ q case.
    pub shift: f64,
    pub kernel: KernelChoice,
}

impl ConvergenceConfig {
    pub fn resolve(c: &RunConfig) -> Result<Self> {
        let default = KernelChoice {
            kernel: KernelFamily::GaussianRbf,
            gamma: 0.3,
            lambda: LambdaPolicy::Decaying(0.05),
        };
        let kernels = c.kernel_choices(&[default])?;
        if kernels.len() != 1 {
            return Err(Error::input("convergence takes exactly one kernel"));
        }
        let sizes = |name: &str, v: Option<&Vec<usize>>, d: [usize; 3]| -> Result<Vec<usize>> {
            let v = v.cloned().unwrap_or(d.to_vec());
            if v.is_empty() || v.iter().any(|n| *n < 2) {
                return Err(Error::input(format!("{name} needs sizes >= 2")));
            }
            Ok(v)
        };
        let shift = c.shift.unwrap_or(1.0);
        if !shift.is_finite() {
            return Err(Error::input("shift must be finite"));
        }
        Ok(Self {
            seed: c.seed.unwrap_or(0),
            dim: positive("dim", c.dim.unwrap_or(3))?,
            replicates: positive("replicates", c.replicates.unwrap_or(20))?,
            lb_sizes: sizes("lb-sizes", c.lb_sizes.as_ref(), [100, 400, 1600])?,
            ub_sizes: sizes("ub-sizes", c.ub_sizes.as_ref(), [200, 800, 3200])?,
            shift,
            kernel: kernels[0],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TwoSampleConfig {
    pub file_p: PathBuf,
    pub file_q: PathBuf,
    pub kernel: KernelFamily,
    pub gamma_grid: Vec<f64>,
    pub ub_gamma: f64,
    pub lambda: LambdaPolicy,
    pub lb_scale: f64,
}

impl TwoSampleConfig {
    pub fn resolve(c: &RunConfig) -> Result<Self> {
        let file_p = c.file_p.clone().ok_or_else(|| Error::input("missing sample file for p"))?;
        let file_q = c.file_q.clone().ok_or_else(|| Error::input("missing sample file for q"))?;
        let gamma_grid = finite_grid(
            "gamma-grid",
            c.gamma_grid.clone().unwrap_or(DEFAULT_GAMMA_GRID.to_vec()),
        )?;
        // grid value closest to 0.3 unless given
        let ub_gamma = c.ub_gamma.unwrap_or_else(|| {
            gamma_grid
                .iter()
                .copied()
                .min_by(|a, b| (a - 0.3).abs().total_cmp(&(b - 0.3).abs()))
                .unwrap_or(0.3)
        });
        let cfg = Self {
            file_p,
            file_q,
            kernel: c.kernel.unwrap_or(KernelFamily::GaussianRbf),
            gamma_grid,
            ub_gamma,
            lambda: c.lambda.unwrap_or_default(),
            lb_scale: c.lb_scale()?,
        };
        cfg.estimator()?;
        Ok(cfg)
    }

    pub fn estimator(&self) -> Result<EstimatorConfig> {
        let cfg = EstimatorConfig {
            family: self
                .gamma_grid
                .iter()
                .map(|&g| KernelSpec::new(self.kernel, g))
                .collect::<Result<_>>()?,
            ub_kernel: KernelSpec::new(self.kernel, self.ub_gamma)?,
            lambda: self.lambda,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct VerifyConfig {
    pub seed: u64,
    pub pairs: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub p: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    /// Debug only: scale KL before the checks so they fail.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub break_chain: Option<f64>,
}

impl VerifyConfig {
    pub fn resolve(c: &RunConfig, break_chain: Option<f64>) -> Result<Self> {
        if c.p.is_some() != c.q.is_some() {
            return Err(Error::input("a fixed pair needs both p and q"));
        }
        Ok(Self {
            seed: c.seed.unwrap_or(0),
            pairs: positive("pairs", c.pairs.unwrap_or(1000))?,
            k_min: c.k_min.unwrap_or(2),
            k_max: c.k_max.unwrap_or(10),
            p: c.p.clone(),
            q: c.q.clone(),
            break_chain,
        })
    }
}
