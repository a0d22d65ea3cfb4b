//! The experiment and report commands. Each returns structured results plus a
//! renderer, so tests can inspect rows without going through files.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{
    ConvergenceConfig, KernelChoice, KlSweepConfig, MiSweepConfig, SweepKind, TwoSampleConfig,
    VerifyConfig, COV_FLOOR,
};
use super::io::{fmt_num, json_report, read_samples, CsvDoc};
use crate::bounds::{self, BoundEstimate};
use crate::discrete::{self, ChainReport, DiscreteDist, SuiteReport};
use crate::estimators::{self, LambdaPolicy};
use crate::gaussian::{self, GaussianSpec, JointGaussianSpec};
use crate::seeds::{self, stream};
use crate::stats::{median, relative_spread, spearman};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSummary {
    pub kernel: &'static str,
    pub gamma: f64,
    pub lambda: LambdaPolicy,
    pub rho_lower: f64,
    pub rho_upper: f64,
}

impl RankSummary {
    fn line(&self, lower: &str, upper: &str, truth: &str) -> String {
        format!(
            "spearman kernel={} gamma={} lambda={} rho({lower},{truth})={} rho({upper},{truth})={}",
            self.kernel,
            self.gamma,
            self.lambda,
            fmt_num(self.rho_lower),
            fmt_num(self.rho_upper)
        )
    }
}

fn rank_summaries<R>(
    rows: &[R],
    key: impl Fn(&R) -> (&'static str, f64, LambdaPolicy),
    val: impl Fn(&R) -> (f64, f64, f64),
) -> Vec<RankSummary> {
    let mut keys: Vec<(&'static str, f64, LambdaPolicy)> = Vec::new();
    for r in rows {
        let k = key(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let (mut t, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
            for r in rows.iter().filter(|r| key(r) == k) {
                let (a, b, c) = val(r);
                t.push(a);
                lo.push(b);
                hi.push(c);
            }
            RankSummary {
                kernel: k.0,
                gamma: k.1,
                lambda: k.2,
                rho_lower: spearman(&lo, &t),
                rho_upper: spearman(&hi, &t),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlRow {
    pub epsilon: f64,
    pub kernel: &'static str,
    pub gamma: f64,
    pub lambda: LambdaPolicy,
    pub kl_true: f64,
    pub lb_statistic: f64,
    pub ub_statistic_sq: f64,
    pub kl_lower: f64,
    pub kl_upper: f64,
    pub lambda_used: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct KlSweepOutput {
    pub config: KlSweepConfig,
    pub rows: Vec<KlRow>,
    pub summary: Vec<RankSummary>,
}

/// The (p, q) pair of a KL sweep point.
pub fn kl_sweep_specs(sweep: SweepKind, dim: usize, epsilon: f64) -> Result<(GaussianSpec, GaussianSpec)> {
    let q = GaussianSpec::standard(dim)?;
    let p = match sweep {
        SweepKind::MeanShift => GaussianSpec::isotropic(dim, epsilon, 1.0)?,
        SweepKind::CovScale => GaussianSpec::isotropic(dim, 0.0, epsilon.max(COV_FLOOR))?,
    };
    Ok((p, q))
}

pub fn kl_sweep(cfg: &KlSweepConfig) -> Result<KlSweepOutput> {
    let per_point: Vec<Vec<KlRow>> = cfg
        .epsilon_grid
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| -> Result<Vec<KlRow>> {
            let (p, q) = kl_sweep_specs(cfg.sweep, cfg.dim, eps)?;
            let kl_true = gaussian::kl_gaussian(&p, &q)?;
            let x = gaussian::sample_gaussian(&p, cfg.n, seeds::derive(cfg.seed, stream::SAMPLE_P, i as u64))?;
            let y = gaussian::sample_gaussian(&q, cfg.n, seeds::derive(cfg.seed, stream::SAMPLE_Q, i as u64))?;
            cfg.kernels
                .iter()
                .map(|k| {
                    let est = bounds::kl_bounds(&k.estimator()?, cfg.lb_scale, &x, &y)?;
                    Ok(KlRow {
                        epsilon: eps,
                        kernel: k.kernel.short_name(),
                        gamma: k.gamma,
                        lambda: k.lambda,
                        kl_true,
                        lb_statistic: est.stats.lb_statistic,
                        ub_statistic_sq: est.stats.ub_statistic_sq,
                        kl_lower: est.kl_lower,
                        kl_upper: est.kl_upper,
                        lambda_used: est.stats.lambda_used,
                        seed: cfg.seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<KlRow> = per_point.into_iter().flatten().collect();
    let summary = rank_summaries(
        &rows,
        |r| (r.kernel, r.gamma, r.lambda),
        |r| (r.kl_true, r.kl_lower, r.kl_upper),
    );
    Ok(KlSweepOutput {
        config: cfg.clone(),
        rows,
        summary,
    })
}

impl KlSweepOutput {
    pub fn to_csv(&self) -> Result<String> {
        let mut doc = CsvDoc::new(
            "kl-sweep",
            &self.config,
            &[
                "epsilon", "kernel", "gamma", "kl_true", "lb_statistic", "ub_statistic_sq",
                "kl_lower", "kl_upper", "lambda_used", "seed",
            ],
        )?;
        for r in &self.rows {
            doc.row(&[
                fmt_num(r.epsilon),
                r.kernel.into(),
                fmt_num(r.gamma),
                fmt_num(r.kl_true),
                fmt_num(r.lb_statistic),
                fmt_num(r.ub_statistic_sq),
                fmt_num(r.kl_lower),
                fmt_num(r.kl_upper),
                fmt_num(r.lambda_used),
                r.seed.to_string(),
            ]);
        }
        for s in &self.summary {
            doc.comment(&s.line("kl_lower", "kl_upper", "kl_true"));
        }
        Ok(doc.finish())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiRow {
    pub epsilon: f64,
    pub kernel: &'static str,
    pub gamma: f64,
    pub lambda: LambdaPolicy,
    pub mi_true: f64,
    pub mi_lower: f64,
    pub mi_upper: f64,
    pub lb_statistic: f64,
    pub ub_statistic_sq: f64,
    pub lambda_used: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct MiSweepOutput {
    pub config: MiSweepConfig,
    pub rows: Vec<MiRow>,
    pub summary: Vec<RankSummary>,
}

pub fn mi_sweep(cfg: &MiSweepConfig) -> Result<MiSweepOutput> {
    let choices: Vec<KernelChoice> = match &cfg.lambda_grid {
        None => cfg.kernels.clone(),
        Some(grid) => cfg
            .kernels
            .iter()
            .flat_map(|k| {
                grid.iter().map(move |&l| KernelChoice {
                    lambda: LambdaPolicy::Fixed(l),
                    ..*k
                })
            })
            .collect(),
    };
    let unitary_seed = seeds::derive(cfg.seed, stream::UNITARY, 0);
    let per_point: Vec<Vec<MiRow>> = cfg
        .epsilon_grid
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| -> Result<Vec<MiRow>> {
            let joint = JointGaussianSpec::identity_marginals(cfg.dim, eps, unitary_seed)?;
            let mi_true = gaussian::mi_gaussian(&joint)?;
            let sample = gaussian::sample_joint_gaussian(
                &joint,
                cfg.n,
                seeds::derive(cfg.seed, stream::SAMPLE_P, i as u64),
            )?;
            let perm_seed = seeds::derive(cfg.seed, stream::PERMUTATION, i as u64);
            choices
                .iter()
                .map(|k| {
                    let proxy = bounds::mi_bounds_continuous(
                        &k.estimator()?,
                        cfg.lb_scale,
                        &sample,
                        cfg.dim,
                        perm_seed,
                        cfg.permutations,
                    )?;
                    let m = proxy.permutations.len() as f64;
                    let mean = |f: fn(&BoundEstimate) -> f64| proxy.permutations.iter().map(f).sum::<f64>() / m;
                    Ok(MiRow {
                        epsilon: eps,
                        kernel: k.kernel.short_name(),
                        gamma: k.gamma,
                        lambda: k.lambda,
                        mi_true,
                        mi_lower: proxy.mi_lower,
                        mi_upper: proxy.mi_upper,
                        lb_statistic: mean(|e| e.stats.lb_statistic),
                        ub_statistic_sq: mean(|e| e.stats.ub_statistic_sq),
                        lambda_used: mean(|e| e.stats.lambda_used),
                        seed: cfg.seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<MiRow> = per_point.into_iter().flatten().collect();
    let summary = rank_summaries(
        &rows,
        |r| (r.kernel, r.gamma, r.lambda),
        |r| (r.mi_true, r.mi_lower, r.mi_upper),
    );
    Ok(MiSweepOutput {
        config: cfg.clone(),
        rows,
        summary,
    })
}

impl MiSweepOutput {
    pub fn to_csv(&self) -> Result<String> {
        let mut doc = CsvDoc::new(
            "mi-sweep",
            &self.config,
            &[
                "epsilon", "kernel", "gamma", "lambda", "mi_true", "mi_lower", "mi_upper",
                "lb_statistic", "ub_statistic_sq", "lambda_used", "seed",
            ],
        )?;
        for r in &self.rows {
            doc.row(&[
                fmt_num(r.epsilon),
                r.kernel.into(),
                fmt_num(r.gamma),
                r.lambda.to_string(),
                fmt_num(r.mi_true),
                fmt_num(r.mi_lower),
                fmt_num(r.mi_upper),
                fmt_num(r.lb_statistic),
                fmt_num(r.ub_statistic_sq),
                fmt_num(r.lambda_used),
                r.seed.to_string(),
            ]);
        }
        for s in &self.summary {
            doc.comment(&s.line("mi_lower", "mi_upper", "mi_true"));
        }
        Ok(doc.finish())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    /// p = q
    Equal,
    /// p is q shifted by `shift·1`
    Shifted,
}

impl Case {
    fn name(self) -> &'static str {
        match self {
            Case::Equal => "equal",
            Case::Shifted => "shifted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Lb,
    Ub,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub case: Case,
    pub statistic: Statistic,
    pub n: usize,
    /// NaN for the lower-bound statistic.
    pub lambda_used: f64,
    pub median: f64,
    pub relative_spread: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceOutput {
    pub config: ConvergenceConfig,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceOutput {
    pub fn row(&self, case: Case, statistic: Statistic, n: usize) -> Option<&ConvergenceRow> {
        self.rows
            .iter()
            .find(|r| r.case == case && r.statistic == statistic && r.n == n)
    }
}

pub fn convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceOutput> {
    let spec = cfg.kernel.spec()?;
    let q = GaussianSpec::standard(cfg.dim)?;
    let mut rows = Vec::new();
    for (ci, case) in [Case::Equal, Case::Shifted].into_iter().enumerate() {
        let p = match case {
            Case::Equal => q.clone(),
            Case::Shifted => GaussianSpec::isotropic(cfg.dim, cfg.shift, 1.0)?,
        };
        for (statistic, sizes) in [(Statistic::Lb, &cfg.lb_sizes), (Statistic::Ub, &cfg.ub_sizes)] {
            for &n in sizes {
                let tag = (n as u64) << 2 | (ci as u64) << 1 | (statistic == Statistic::Ub) as u64;
                let values: Vec<f64> = (0..cfg.replicates as u64)
                    .into_par_iter()
                    .map(|r| -> Result<f64> {
                        let base = seeds::derive(cfg.seed, stream::REPLICATE, r);
                        let x = gaussian::sample_gaussian(&p, n, seeds::derive(base, stream::SAMPLE_P, tag))?;
                        let y = gaussian::sample_gaussian(&q, n, seeds::derive(base, stream::SAMPLE_Q, tag))?;
                        match statistic {
                            Statistic::Lb => Ok(estimators::lb_statistic(std::slice::from_ref(&spec), &x, &y)?.0),
                            Statistic::Ub => estimators::ub_statistic_sq(&spec, &x, &y, cfg.kernel.lambda.resolve(n)),
                        }
                    })
                    .collect::<Result<_>>()?;
                rows.push(ConvergenceRow {
                    case,
                    statistic,
                    n,
                    lambda_used: match statistic {
                        Statistic::Lb => f64::NAN,
                        Statistic::Ub => cfg.kernel.lambda.resolve(n),
                    },
                    median: median(&values),
                    relative_spread: relative_spread(&values),
                    mean: values.iter().sum::<f64>() / values.len() as f64,
                    min: values.iter().copied().fold(f64::INFINITY, f64::min),
                    max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    values,
                });
            }
        }
    }
    Ok(ConvergenceOutput {
        config: cfg.clone(),
        rows,
    })
}

impl ConvergenceOutput {
    pub fn to_csv(&self) -> Result<String> {
        let mut doc = CsvDoc::new(
            "convergence",
            &self.config,
            &[
                "case", "statistic", "n", "lambda_used", "median", "relative_spread", "mean", "min",
                "max", "replicates",
            ],
        )?;
        for r in &self.rows {
            doc.row(&[
                r.case.name().into(),
                match r.statistic {
                    Statistic::Lb => "lb_statistic",
                    Statistic::Ub => "ub_statistic_sq",
                }
                .into(),
                r.n.to_string(),
                fmt_num(r.lambda_used),
                fmt_num(r.median),
                fmt_num(r.relative_spread),
                fmt_num(r.mean),
                fmt_num(r.min),
                fmt_num(r.max),
                r.values.len().to_string(),
            ]);
        }
        Ok(doc.finish())
    }
}

pub fn two_sample(cfg: &TwoSampleConfig) -> Result<BoundEstimate> {
    let x = read_samples(&cfg.file_p)?;
    let y = read_samples(&cfg.file_q)?;
    if x.dim() != y.dim() {
        return Err(Error::input(format!(
            "column count mismatch: {} has {} columns, {} has {}",
            cfg.file_p.display(),
            x.dim(),
            cfg.file_q.display(),
            y.dim()
        )));
    }
    bounds::kl_bounds(&cfg.estimator()?, cfg.lb_scale, &x, &y)
}

pub fn two_sample_json(cfg: &TwoSampleConfig, est: &BoundEstimate) -> Result<String> {
    json_report("two-sample", cfg, est)
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum VerifyReport {
    Pair(ChainReport),
    Suite(SuiteReport),
}

impl VerifyReport {
    pub fn all_hold(&self) -> bool {
        match self {
            VerifyReport::Pair(r) => r.all_hold,
            VerifyReport::Suite(s) => s.all_hold,
        }
    }
}

pub fn verify_discrete(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mult = cfg.break_chain.unwrap_or(1.0);
    match (&cfg.p, &cfg.q) {
        (Some(p), Some(q)) => {
            let p = DiscreteDist::new(p.clone())?;
            let q = DiscreteDist::new(q.clone())?;
            Ok(VerifyReport::Pair(discrete::verify_chain_with_kl_multiplier(&p, &q, mult)?))
        }
        _ => Ok(VerifyReport::Suite(discrete::run_suite(
            cfg.pairs, cfg.k_min, cfg.k_max, cfg.seed, mult,
        )?)),
    }
}

pub fn verify_json(cfg: &VerifyConfig, report: &VerifyReport) -> Result<String> {
    json_report("verify-discrete", cfg, report)
}
