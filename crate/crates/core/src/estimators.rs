//! Plug-in MMD statistics computed from Gram matrices.
//!
//! With samples `x_1..x_m ~ p` and `y_1..y_n ~ q`:
//!
//! ```text
//! ‖μ̂p − μ̂q‖²  = 1ᵀΦpp1/m² + 1ᵀΦqq1/n² − 2·1ᵀΦpq1/(mn)
//! lb           = max_k ‖μ̂p − μ̂q‖_k / √M(k)
//! ub²          = (‖μ̂p − μ̂q‖² − Θᵀ(nλI + Φqq)⁻¹Θ) / λ
//! Θ            = Φpqᵀ1/m − Φqq1/n
//! ```
//!
//! The last line is `⟨μ̂p − μ̂q, (Ψ̂ + λI)⁻¹(μ̂p − μ̂q)⟩` after the Woodbury
//! identity, with `Ψ̂ = (1/n) Σ Φ(y_i) ⊗ Φ(y_i)`. The second-moment operator is
//! never formed; everything stays in Gram coordinates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::kernels::{self, GramMatrix, KernelSpec};
use crate::numerics::{self, JitterPolicy};
use crate::{Error, Result, SampleSet};

const MMD_CLAMP: f64 = 1e-12;
const UB_CLAMP: f64 = 1e-9;

/// Regularization weight policy for the upper-bound statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Fixed(f64),
    /// `λ = c / √n`, n the size of the reference (q) sample.
    Decaying(f64),
}

impl LambdaPolicy {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            LambdaPolicy::Fixed(c) => c,
            LambdaPolicy::Decaying(c) => c / (n as f64).sqrt(),
        }
    }

    fn coefficient(&self) -> f64 {
        match *self {
            LambdaPolicy::Fixed(c) | LambdaPolicy::Decaying(c) => c,
        }
    }
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Fixed(1e-3)
    }
}

impl fmt::Display for LambdaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaPolicy::Fixed(c) => write!(f, "{c}"),
            LambdaPolicy::Decaying(c) => write!(f, "decay:{c}"),
        }
    }
}

impl FromStr for LambdaPolicy {
    type Err = Error;

    /// Accepts `"<real>"` or `"decay:<real>"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (policy, num) = match s.strip_prefix("decay:") {
            Some(rest) => (LambdaPolicy::Decaying as fn(f64) -> LambdaPolicy, rest),
            None => (LambdaPolicy::Fixed as fn(f64) -> LambdaPolicy, s),
        };
        let c: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("cannot parse lambda {s:?}")))?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::input(format!("lambda must be positive, got {s:?}")));
        }
        Ok(policy(c))
    }
}

impl Serialize for LambdaPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LambdaPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) => LambdaPolicy::from_str(&c.to_string()),
            Raw::Text(t) => LambdaPolicy::from_str(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// The RBF bandwidth grid used for the lower-bound family when none is given.
pub const DEFAULT_GAMMA_GRID: [f64; 6] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EstimatorConfig {
    /// Kernels searched by the lower-bound statistic; first wins on ties.
    pub family: Vec<KernelSpec>,
    pub ub_kernel: KernelSpec,
    pub lambda: LambdaPolicy,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            family: DEFAULT_GAMMA_GRID
                .iter()
                .map(|&g| KernelSpec::rbf(g).expect("grid is positive"))
                .collect(),
            ub_kernel: KernelSpec::rbf(0.3).expect("positive"),
            lambda: LambdaPolicy::default(),
        }
    }
}

impl EstimatorConfig {
    /// One RBF kernel for both statistics with a fixed λ.
    pub fn single_rbf(gamma: f64, lambda: f64) -> Self {
        let k = KernelSpec::rbf(gamma).expect("gamma must be positive");
        Self {
            family: vec![k.clone()],
            ub_kernel: k,
            lambda: LambdaPolicy::Fixed(lambda),
        }
    }

    pub fn single(kernel: KernelSpec, lambda: LambdaPolicy) -> Self {
        Self {
            family: vec![kernel.clone()],
            ub_kernel: kernel,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family.is_empty() {
            return Err(Error::input("lower-bound kernel family is empty"));
        }
        for k in self.family.iter().chain(std::iter::once(&self.ub_kernel)) {
            k.validate()?;
        }
        let c = self.lambda.coefficient();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::input(format!("lambda must be positive, got {c}")));
        }
        Ok(())
    }
}

/// Raw statistics from one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MmdStatistics {
    /// `‖μ̂p − μ̂q‖²` under the upper-bound kernel.
    pub mmd_sq_plugin: f64,
    /// Argmax of the lower-bound family.
    pub chosen_kernel: KernelSpec,
    pub lb_statistic: f64,
    /// Lower-bound value for every family member, in family order.
    pub family_values: Vec<f64>,
    pub ub_statistic_sq: f64,
    pub lambda_used: f64,
    pub m: usize,
    pub n: usize,
}

/// The three Gram matrices for one kernel and one (X, Y) pair.
#[derive(Debug, Clone)]
pub struct Grams {
    pub pp: GramMatrix,
    pub qq: GramMatrix,
    pub pq: GramMatrix,
}

impl Grams {
    pub fn compute(kernel: &KernelSpec, x: &SampleSet, y: &SampleSet) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::input(format!(
                "X has dimension {} but Y has dimension {}",
                x.dim(),
                y.dim()
            )));
        }
        Ok(Self {
            pp: kernels::gram_self(kernel, x)?,
            qq: kernels::gram_self(kernel, y)?,
            pq: kernels::gram(kernel, x, y)?,
        })
    }

    fn check_shapes(&self) -> Result<(usize, usize)> {
        let m = self.pp.left_n();
        let n = self.qq.left_n();
        if self.pp.right_n() != m
            || self.qq.right_n() != n
            || self.pq.left_n() != m
            || self.pq.right_n() != n
        {
            return Err(Error::input(format!(
                "inconsistent Gram shapes: pp {}x{}, qq {}x{}, pq {}x{}",
                self.pp.left_n(),
                self.pp.right_n(),
                self.qq.left_n(),
                self.qq.right_n(),
                self.pq.left_n(),
                self.pq.right_n()
            )));
        }
        Ok((m, n))
    }
}

/// `‖μ̂p − μ̂q‖²` from the three Gram matrices.
pub fn mmd_sq_plugin(pp: &GramMatrix, qq: &GramMatrix, pq: &GramMatrix) -> Result<f64> {
    let grams = Grams {
        pp: pp.clone(),
        qq: qq.clone(),
        pq: pq.clone(),
    };
    mmd_sq_from(&grams)
}

fn mmd_sq_from(g: &Grams) -> Result<f64> {
    let (m, n) = g.check_shapes()?;
    let (mf, nf) = (m as f64, n as f64);
    let raw = g.pp.total_sum() / (mf * mf) + g.qq.total_sum() / (nf * nf)
        - 2.0 * g.pq.total_sum() / (mf * nf);
    if raw < -MMD_CLAMP {
        return Err(Error::numerical(format!(
            "plug-in MMD² is {raw:e} < 0; Gram input is not a valid kernel matrix"
        )));
    }
    Ok(raw.max(0.0))
}

/// Upper-bound statistic from precomputed Gram matrices.
pub fn ub_statistic_sq_from_grams(g: &Grams, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    let (m, n) = g.check_shapes()?;
    let mmd_sq = mmd_sq_from(g)?;
    let (mf, nf) = (m as f64, n as f64);
    let pq_cols = g.pq.col_sums();
    let qq_rows = g.qq.row_sums();
    let theta: Vec<f64> = pq_cols
        .iter()
        .zip(&qq_rows)
        .map(|(a, b)| a / mf - b / nf)
        .collect();

    let shift = nf * lambda;
    let mut a = g.qq.entries().clone();
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let factor = numerics::spd_factor(&a, JitterPolicy::default())?;
    let correction = numerics::quadratic_form(&theta, &factor)?;
    let raw = (mmd_sq - correction) / lambda;
    if raw < -UB_CLAMP {
        return Err(Error::numerical(format!(
            "upper-bound statistic is {raw:e} < 0 (lambda {lambda:e})"
        )));
    }
    Ok(raw.max(0.0))
}

/// `max_k ‖μ̂p − μ̂q‖_k / √M(k)` over the family, with the maximizing kernel.
pub fn lb_statistic(
    family: &[KernelSpec],
    x: &SampleSet,
    y: &SampleSet,
) -> Result<(f64, KernelSpec)> {
    let values = family_values(family, x, y, None)?;
    Ok(argmax_first(family, &values))
}

fn argmax_first(family: &[KernelSpec], values: &[f64]) -> (f64, KernelSpec) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    (values[best], family[best].clone())
}

fn family_values(
    family: &[KernelSpec],
    x: &SampleSet,
    y: &SampleSet,
    reuse: Option<(&KernelSpec, &Grams)>,
) -> Result<Vec<f64>> {
    if family.is_empty() {
        return Err(Error::input("lower-bound kernel family is empty"));
    }
    family
        .iter()
        .map(|k| {
            let mmd_sq = match reuse {
                Some((rk, g)) if rk == k => mmd_sq_from(g)?,
                _ => mmd_sq_from(&Grams::compute(k, x, y)?)?,
            };
            Ok((mmd_sq / kernels::sup_bound(k, None)).sqrt())
        })
        .collect()
}

/// Upper-bound statistic `⟨μ̂p − μ̂q, (Ψ̂ + λI)⁻¹(μ̂p − μ̂q)⟩`.
pub fn ub_statistic_sq(
    kernel: &KernelSpec,
    x: &SampleSet,
    y: &SampleSet,
    lambda: f64,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    ub_statistic_sq_from_grams(&Grams::compute(kernel, x, y)?, lambda)
}

/// Runs both statistics. Gram matrices of the upper-bound kernel are shared
/// with the family search when the kernel is a family member.
pub fn estimate(config: &EstimatorConfig, x: &SampleSet, y: &SampleSet) -> Result<MmdStatistics> {
    config.validate()?;
    let ub_grams = Grams::compute(&config.ub_kernel, x, y)?;
    let lambda = config.lambda.resolve(y.len());
    let values = family_values(&config.family, x, y, Some((&config.ub_kernel, &ub_grams)))?;
    let (lb, chosen) = argmax_first(&config.family, &values);
    Ok(MmdStatistics {
        mmd_sq_plugin: mmd_sq_from(&ub_grams)?,
        chosen_kernel: chosen,
        lb_statistic: lb,
        family_values: values,
        ub_statistic_sq: ub_statistic_sq_from_grams(&ub_grams, lambda)?,
        lambda_used: lambda,
        m: x.len(),
        n: y.len(),
    })
}
