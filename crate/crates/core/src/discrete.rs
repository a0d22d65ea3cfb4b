//! Exact computations on a finite alphabet.
//!
//! On a finite alphabet every function is continuous, so the MMDs over the
//! sup-norm and L²(ν) unit balls have closed forms:
//!
//! - sup-norm ball: `Σ|p − q|` (attained at the sign vector of `p − q`)
//! - L²(ν) ball: `‖p/ν − q/ν‖_ν = √(Σ (p − q)² / ν)`
//!
//! [`verify_chain`] evaluates every KL ↔ MMD inequality on a pair and reports
//! the margin of each one.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::bounds::{tv_lower_coefficient, tv_upper_from_kl};
use crate::{seeds, Error, Result};

/// Slack allowed on every inequality check.
pub const CHECK_SLACK: f64 = 1e-9;

/// Probabilities are floored at this value before renormalizing in
/// [`dirichlet_dist`].
pub const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::input("distribution needs at least one outcome"));
        }
        if let Some(i) = probs.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::input(format!(
                "probability {i} is {} (must be finite and >= 0)",
                probs[i]
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::input("weights must have a positive finite sum"));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Reference measure for the L² witness class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nu {
    /// ν = Q
    Reference,
    /// ν(x) = 1 for every outcome
    Counting,
    /// ν = P + Q
    Sum,
}

impl Nu {
    fn weight(self, p: f64, q: f64) -> f64 {
        match self {
            Nu::Reference => q,
            Nu::Counting => 1.0,
            Nu::Sum => p + q,
        }
    }

    fn total_mass(self, k: usize) -> f64 {
        match self {
            Nu::Reference => 1.0,
            Nu::Counting => k as f64,
            Nu::Sum => 2.0,
        }
    }
}

fn check_sizes(p: &DiscreteDist, q: &DiscreteDist) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::input(format!(
            "alphabet sizes differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

fn pairs<'a>(p: &'a DiscreteDist, q: &'a DiscreteDist) -> impl Iterator<Item = (f64, f64)> + 'a {
    p.probs.iter().copied().zip(q.probs.iter().copied())
}

/// `Σ p log(p/q)` with `0·log(0/q) = 0`.
pub fn kl_discrete(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    check_sizes(p, q)?;
    let mut kl = 0.0;
    for (i, (pi, qi)) in pairs(p, q).enumerate() {
        if pi > 0.0 {
            if qi == 0.0 {
                return Err(Error::input(format!(
                    "P is not absolutely continuous w.r.t. Q: p[{i}] = {pi} but q[{i}] = 0"
                )));
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// `Σ|p − q|`, twice the largest event-probability gap.
pub fn tv_discrete(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    check_sizes(p, q)?;
    Ok(pairs(p, q).map(|(a, b)| (a - b).abs()).sum())
}

/// MMD over the sup-norm unit ball; equals [`tv_discrete`].
pub fn exact_mmd_sup(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    tv_discrete(p, q)
}

/// MMD over the L²(ν) unit ball, `√(Σ (p − q)² / ν)`.
pub fn exact_mmd_l2(p: &DiscreteDist, q: &DiscreteDist, nu: Nu) -> Result<f64> {
    check_sizes(p, q)?;
    let mut s = 0.0;
    for (i, (pi, qi)) in pairs(p, q).enumerate() {
        let d = pi - qi;
        if d == 0.0 {
            continue;
        }
        let w = nu.weight(pi, qi);
        if w <= 0.0 {
            return Err(Error::input(format!(
                "reference measure is zero at outcome {i} where p != q"
            )));
        }
        s += d * d / w;
    }
    Ok(s.sqrt())
}

/// `max dP/dQ`, over outcomes with q > 0.
pub fn alpha(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    kl_discrete(p, q)?;
    Ok(pairs(p, q)
        .filter(|(_, qi)| *qi > 0.0)
        .map(|(pi, qi)| pi / qi)
        .fold(0.0, f64::max))
}

/// `max |dP/dν − dQ/dν|`, over outcomes with ν > 0.
pub fn beta(p: &DiscreteDist, q: &DiscreteDist, nu: Nu) -> Result<f64> {
    check_sizes(p, q)?;
    Ok(pairs(p, q)
        .filter_map(|(pi, qi)| {
            let w = nu.weight(pi, qi);
            (w > 0.0).then(|| (pi - qi).abs() / w)
        })
        .fold(0.0, f64::max))
}

/// One inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; the check holds when this is `>= -CHECK_SLACK`.
    pub margin: f64,
    pub holds: bool,
}

fn check(name: &'static str, lhs: f64, rhs: f64) -> ChainCheck {
    let margin = if lhs == rhs { 0.0 } else { rhs - lhs };
    ChainCheck {
        name,
        lhs,
        rhs,
        margin,
        holds: margin >= -CHECK_SLACK,
    }
}

/// Every quantity and inequality for one (P, Q) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub kl: f64,
    pub tv: f64,
    pub alpha: f64,
    /// β for the counting measure.
    pub beta: f64,
    /// β for ν = P + Q; never above 1.
    pub beta_sum: f64,
    pub mmd_sup: f64,
    pub mmd_l2_q: f64,
    pub mmd_l2_counting: f64,
    pub mmd_l2_sum: f64,
    /// `KL/α`, lower bound on `mmd_sup`.
    pub lb_thm1: f64,
    /// `2√(1 − e^(−KL))`, upper bound on `mmd_sup`.
    pub ub_thm1: f64,
    /// `√(e^KL − 1)`, lower bound on `mmd_l2_q`.
    pub lb_thm2: f64,
    /// `√2 (1 − e^(−KL))^(1/4)`, upper bound on `mmd_l2_sum`.
    pub ub_thm2: f64,
    /// `−log(1 − mmd_sup²/4)`, lower bound on KL.
    pub lb_thm3: f64,
    /// `log(mmd_l2_q² + 1)`, upper bound on KL.
    pub ub_thm3: f64,
    pub checks: Vec<ChainCheck>,
    pub all_hold: bool,
    pub violations: Vec<String>,
}

/// Evaluates every KL ↔ MMD inequality for the pair.
pub fn verify_chain(p: &DiscreteDist, q: &DiscreteDist) -> Result<ChainReport> {
    verify_chain_with_kl_multiplier(p, q, 1.0)
}

/// Same as [`verify_chain`] but scales KL before the checks. Any multiplier
/// other than 1 breaks the inequalities; used to exercise the failure path.
#[doc(hidden)]
pub fn verify_chain_with_kl_multiplier(
    p: &DiscreteDist,
    q: &DiscreteDist,
    kl_multiplier: f64,
) -> Result<ChainReport> {
    let kl = kl_discrete(p, q)? * kl_multiplier;
    let k = p.len();
    let tv = tv_discrete(p, q)?;
    let alpha = alpha(p, q)?;
    let beta_counting = beta(p, q, Nu::Counting)?;
    let beta_sum = beta(p, q, Nu::Sum)?;
    let beta_ref = beta(p, q, Nu::Reference)?;
    let mmd_sup = exact_mmd_sup(p, q)?;
    let mmd_l2_q = exact_mmd_l2(p, q, Nu::Reference)?;
    let mmd_l2_counting = exact_mmd_l2(p, q, Nu::Counting)?;
    let mmd_l2_sum = exact_mmd_l2(p, q, Nu::Sum)?;
    let min_q = q.probs.iter().copied().fold(f64::INFINITY, f64::min);

    let one_minus = -(-kl).exp_m1(); // 1 − e^(−KL)
    let quarter = one_minus.sqrt().sqrt();
    let coef = tv_lower_coefficient(alpha);

    let lb_thm1 = kl / alpha;
    let ub_thm1 = tv_upper_from_kl(kl);
    let lb_thm2 = kl.exp_m1().sqrt();
    let ub_thm2 = 2f64.sqrt() * quarter;
    let lb_thm3 = if mmd_sup >= 2.0 {
        f64::INFINITY
    } else {
        -(-mmd_sup * mmd_sup / 4.0).ln_1p()
    };
    let ub_thm3 = (mmd_l2_q * mmd_l2_q).ln_1p();

    let mut checks = vec![
        check("thm1.lower", lb_thm1, mmd_sup),
        check("thm1.upper", mmd_sup, ub_thm1),
        check("pinsker.lower", coef * kl, tv),
        check("pinsker.upper", tv, ub_thm1),
        check("thm2.b1", lb_thm2, mmd_l2_q),
        check("thm2.b2", mmd_l2_sum, ub_thm2),
    ];
    for (nu, b, mmd, lo, hi) in [
        (Nu::Reference, beta_ref, mmd_l2_q, "thm2.a.reference.lower", "thm2.a.reference.upper"),
        (Nu::Counting, beta_counting, mmd_l2_counting, "thm2.a.counting.lower", "thm2.a.counting.upper"),
        (Nu::Sum, beta_sum, mmd_l2_sum, "thm2.a.sum.lower", "thm2.a.sum.upper"),
    ] {
        checks.push(check(lo, coef / nu.total_mass(k).sqrt() * kl, mmd));
        checks.push(check(hi, mmd, (2.0 * b).sqrt() * quarter));
    }
    checks.extend([
        check("thm3.lower", lb_thm3, kl),
        check("thm3.upper", kl, ub_thm3),
        check("finite.coefficient", 1.0 / alpha, coef / 2.0),
        check("finite.min-q", min_q, 1.0 / alpha),
        check("finite.sup.lower", min_q * kl, mmd_sup),
        check("finite.counting.lower", 2.0 * min_q / (k as f64).sqrt() * kl, mmd_l2_counting),
        check("finite.counting.upper", mmd_l2_counting, ub_thm2),
        check("alpha.at-least-one", 1.0, alpha),
        check("beta.sum.at-most-one", beta_sum, 1.0),
    ]);

    let violations: Vec<String> = checks
        .iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{}: {} > {} (margin {:e})", c.name, c.lhs, c.rhs, c.margin))
        .collect();
    Ok(ChainReport {
        kl,
        tv,
        alpha,
        beta: beta_counting,
        beta_sum,
        mmd_sup,
        mmd_l2_q,
        mmd_l2_counting,
        mmd_l2_sum,
        lb_thm1,
        ub_thm1,
        lb_thm2,
        ub_thm2,
        lb_thm3,
        ub_thm3,
        all_hold: violations.is_empty(),
        checks,
        violations,
    })
}

/// Dirichlet(1, …, 1) draw on `k` outcomes, floored at [`PROB_FLOOR`] and
/// renormalized so every outcome has positive mass.
pub fn dirichlet_dist<R: Rng>(k: usize, rng: &mut R) -> Result<DiscreteDist> {
    if k == 0 {
        return Err(Error::input("alphabet size must be positive"));
    }
    let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = w.iter().sum();
    let floored: Vec<f64> = w.iter().map(|v| (v / s).max(PROB_FLOOR)).collect();
    DiscreteDist::from_weights(&floored)
}

/// The `index`-th pair of the seeded randomized suite.
pub fn suite_pair(
    seed: u64,
    index: u64,
    k_min: usize,
    k_max: usize,
) -> Result<(DiscreteDist, DiscreteDist)> {
    if k_min < 2 || k_max < k_min {
        return Err(Error::input(format!(
            "alphabet range {k_min}..={k_max} is invalid (need 2 <= min <= max)"
        )));
    }
    let mut rng = seeds::rng(seeds::derive(seed, seeds::stream::DISCRETE_PAIR, index));
    let k = rng.random_range(k_min..=k_max);
    Ok((dirichlet_dist(k, &mut rng)?, dirichlet_dist(k, &mut rng)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pairs: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub all_hold: bool,
    pub failing_pairs: Vec<u64>,
    pub checks: Vec<CheckSummary>,
}

/// Runs [`verify_chain`] on `pairs` seeded Dirichlet pairs.
pub fn run_suite(
    pairs: usize,
    k_min: usize,
    k_max: usize,
    seed: u64,
    kl_multiplier: f64,
) -> Result<SuiteReport> {
    let mut summary: Vec<CheckSummary> = Vec::new();
    let mut failing = Vec::new();
    for i in 0..pairs as u64 {
        let (p, q) = suite_pair(seed, i, k_min, k_max)?;
        let report = verify_chain_with_kl_multiplier(&p, &q, kl_multiplier)?;
        if summary.is_empty() {
            summary = report
                .checks
                .iter()
                .map(|c| CheckSummary {
                    name: c.name,
                    passed: 0,
                    failed: 0,
                    worst_margin: f64::INFINITY,
                })
                .collect();
        }
        for (s, c) in summary.iter_mut().zip(&report.checks) {
            if c.holds {
                s.passed += 1;
            } else {
                s.failed += 1;
            }
            s.worst_margin = s.worst_margin.min(c.margin);
        }
        if !report.all_hold {
            failing.push(i);
        }
    }
    Ok(SuiteReport {
        pairs,
        k_min,
        k_max,
        seed,
        all_hold: failing.is_empty(),
        failing_pairs: failing,
        checks: summary,
    })
}
