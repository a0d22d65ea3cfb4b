//! Universal kernel families and dense Gram matrices.
//!
//! Two families are supported, both with `k(x, x) = 1`:
//!
//! - Gaussian RBF: `exp(-γ‖g(x) − g(y)‖²)`
//! - inverse polynomial: `(1 + ‖g(x) − g(y)‖²)^(−γ)`
//!
//! where `g` is an optional bijective affine-diagonal pre-transform. Composing
//! a universal kernel with a continuous bijection keeps it universal, and the
//! diagonal stays 1, so the sup bound `M(k)` is exactly 1 for every spec.

use std::borrow::Cow;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Mat, Result, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    #[serde(alias = "rbf")]
    GaussianRbf,
    #[serde(alias = "invpoly")]
    InversePolynomial,
}

impl KernelFamily {
    pub fn short_name(self) -> &'static str {
        match self {
            KernelFamily::GaussianRbf => "rbf",
            KernelFamily::InversePolynomial => "invpoly",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rbf" | "gaussian" | "gaussian-rbf" => Ok(KernelFamily::GaussianRbf),
            "invpoly" | "inverse-polynomial" => Ok(KernelFamily::InversePolynomial),
            other => Err(Error::input(format!(
                "unknown kernel family {other:?} (expected rbf or invpoly)"
            ))),
        }
    }
}

/// Elementwise pre-transform applied to every sample before the kernel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Transform {
    #[default]
    Identity,
    /// `g(x)_i = scale_i * x_i + offset_i`; every scale entry must be nonzero.
    AffineDiagonal { scale: Vec<f64>, offset: Vec<f64> },
}

impl Transform {
    pub fn affine_diagonal(scale: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if scale.len() != offset.len() {
            return Err(Error::input(format!(
                "transform scale has {} entries but offset has {}",
                scale.len(),
                offset.len()
            )));
        }
        if scale.is_empty() {
            return Err(Error::input("affine transform needs at least one coordinate"));
        }
        if let Some(i) = scale.iter().position(|s| *s == 0.0 || !s.is_finite()) {
            return Err(Error::input(format!(
                "transform scale[{i}] = {} is not a nonzero finite number",
                scale[i]
            )));
        }
        if offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::input("transform offset must be finite"));
        }
        Ok(Transform::AffineDiagonal { scale, offset })
    }

    /// Required input dimension, if the transform fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Transform::Identity => None,
            Transform::AffineDiagonal { scale, .. } => Some(scale.len()),
        }
    }

    fn apply<'a>(&self, x: &'a [f64]) -> Cow<'a, [f64]> {
        match self {
            Transform::Identity => Cow::Borrowed(x),
            Transform::AffineDiagonal { scale, offset } => Cow::Owned(
                x.iter()
                    .zip(scale.iter().zip(offset))
                    .map(|(v, (s, o))| s * v + o)
                    .collect(),
            ),
        }
    }
}

/// Declarative description of a universal kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct KernelSpec {
    family: KernelFamily,
    gamma: f64,
    #[serde(default)]
    transform: Transform,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::input(format!(
                "kernel gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self {
            family,
            gamma,
            transform: Transform::Identity,
        })
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::GaussianRbf, gamma)
    }

    pub fn inverse_polynomial(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::InversePolynomial, gamma)
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// Re-checks invariants, for specs that came in through deserialization.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.family, self.gamma)?;
        if let Transform::AffineDiagonal { scale, offset } = &self.transform {
            Transform::affine_diagonal(scale.clone(), offset.clone())?;
        }
        Ok(())
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.transform.dim() {
            Some(d) if d != dim => Err(Error::input(format!(
                "kernel transform expects dimension {d}, samples have dimension {dim}"
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    fn profile(&self, sq_dist: f64) -> f64 {
        match self.family {
            KernelFamily::GaussianRbf => (-self.gamma * sq_dist).exp(),
            KernelFamily::InversePolynomial => (1.0 + sq_dist).powf(-self.gamma),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(gamma={})", self.family.short_name(), self.gamma)?;
        if self.transform != Transform::Identity {
            write!(f, "+affine")?;
        }
        Ok(())
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Evaluates `k(x, y)` for the given spec.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::input("kernel arguments must be non-empty"));
    }
    spec.check_dim(x.len())?;
    let gx = spec.transform.apply(x);
    let gy = spec.transform.apply(y);
    Ok(spec.profile(sq_dist(&gx, &gy)))
}

/// Dense kernel matrix; rows index the left sample set, columns the right.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: Mat<f64>,
}

impl GramMatrix {
    /// Wraps an externally computed kernel matrix (e.g. from an explicit
    /// feature map). Entries must be finite.
    pub fn from_mat(entries: Mat<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::input("Gram matrix must be non-empty"));
        }
        for j in 0..entries.ncols() {
            for i in 0..entries.nrows() {
                if !entries[(i, j)].is_finite() {
                    return Err(Error::input(format!("Gram entry ({i}, {j}) is not finite")));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn left_n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn right_n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Sum of all entries, `1ᵀ K 1`.
    pub fn total_sum(&self) -> f64 {
        self.col_sums().iter().sum()
    }

    /// Column sums, `Kᵀ 1`.
    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.right_n())
            .map(|j| self.entries.col(j).iter().sum())
            .collect()
    }

    /// Row sums, `K 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.left_n()];
        for j in 0..self.right_n() {
            for (o, v) in out.iter_mut().zip(self.entries.col(j).iter()) {
                *o += v;
            }
        }
        out
    }
}

fn transformed<'a>(spec: &KernelSpec, set: &'a SampleSet) -> Result<Cow<'a, [f64]>> {
    spec.check_dim(set.dim())?;
    Ok(match spec.transform() {
        Transform::Identity => Cow::Borrowed(set.as_flat()),
        t => Cow::Owned(set.rows().flat_map(|r| t.apply(r).into_owned()).collect()),
    })
}

/// Builds the Gram matrix `K[i][j] = k(left[i], right[j])`.
///
/// Columns are filled in parallel; every entry is computed independently so
/// the result does not depend on scheduling.
pub fn gram(spec: &KernelSpec, left: &SampleSet, right: &SampleSet) -> Result<GramMatrix> {
    if left.dim() != right.dim() {
        return Err(Error::input(format!(
            "left samples have dimension {}, right samples {}",
            left.dim(),
            right.dim()
        )));
    }
    let dim = left.dim();
    let (m, n) = (left.len(), right.len());
    let a = transformed(spec, left)?;
    let b = transformed(spec, right)?;
    let mut buf = vec![0.0; m * n];
    buf.par_chunks_mut(m).enumerate().for_each(|(j, col)| {
        let y = &b[j * dim..(j + 1) * dim];
        for (i, out) in col.iter_mut().enumerate() {
            *out = spec.profile(sq_dist(&a[i * dim..(i + 1) * dim], y));
        }
    });
    Ok(GramMatrix {
        entries: Mat::from_fn(m, n, |i, j| buf[j * m + i]),
    })
}

/// Self-Gram matrix of one sample set; computes the upper triangle and mirrors.
pub fn gram_self(spec: &KernelSpec, set: &SampleSet) -> Result<GramMatrix> {
    let dim = set.dim();
    let n = set.len();
    let a = transformed(spec, set)?;
    let mut buf = vec![0.0; n * n];
    buf.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let y = &a[j * dim..(j + 1) * dim];
        for (i, out) in col.iter_mut().enumerate().take(j + 1) {
            *out = spec.profile(sq_dist(&a[i * dim..(i + 1) * dim], y));
        }
    });
    Ok(GramMatrix {
        entries: Mat::from_fn(n, n, |i, j| {
            if i <= j {
                buf[j * n + i]
            } else {
                buf[i * n + j]
            }
        }),
    })
}

/// `M(k) = max_x k(x, x)`; exactly 1 for both supported families, with or
/// without a pre-transform, on any domain.
pub fn sup_bound(spec: &KernelSpec, _domain_hint: Option<&SampleSet>) -> f64 {
    match spec.family() {
        KernelFamily::GaussianRbf | KernelFamily::InversePolynomial => 1.0,
    }
}
