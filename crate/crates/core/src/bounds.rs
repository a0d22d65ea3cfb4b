//! KL-divergence bounds from MMD statistics, and mutual-information proxies.
//!
//! For P ≪ Q:
//!
//! ```text
//! -log(1 - MMD_inf²/4)  <=  KL(P‖Q)  <=  log(MMD_2,Q² + 1)
//! ```
//!
//! These are population statements. The plug-in, regularized estimates can
//! land on either side of the true divergence at finite n.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize, Serializer};

use crate::estimators::{self, EstimatorConfig, MmdStatistics};
use crate::{seeds, Error, Result, SampleSet};

/// Lower-bound MMD values at or above this are treated as saturated.
const SATURATION: f64 = 2.0 * (1.0 - 1e-12);

/// `-log(1 - mmd²/4)`; `+∞` when `mmd` reaches 2.
pub fn kl_lower_from_mmd(mmd: f64) -> Result<f64> {
    if !(0.0..=2.0 + 1e-9).contains(&mmd) {
        return Err(Error::input(format!(
            "lower-bound MMD must lie in [0, 2], got {mmd}"
        )));
    }
    let mmd = mmd.min(2.0);
    if mmd >= SATURATION {
        return Ok(f64::INFINITY);
    }
    Ok(-(-mmd * mmd / 4.0).ln_1p())
}

/// `log(mmd_sq + 1)`.
pub fn kl_upper_from_mmd_sq(mmd_sq: f64) -> Result<f64> {
    if !(mmd_sq >= 0.0) {
        return Err(Error::input(format!(
            "upper-bound MMD² must be non-negative, got {mmd_sq}"
        )));
    }
    Ok(mmd_sq.ln_1p())
}

fn ser_bound<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_bound<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad bound {t:?}"))),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundNotes {
    /// The scaled lower-bound MMD exceeded 2 and was clamped.
    pub clamped: bool,
    /// The lower bound is infinite (scaled MMD reached 2).
    pub lb_saturated: bool,
    /// `lb_scale != 1`, so `kl_lower` is a display-scaled value.
    pub lb_scaled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundEstimate {
    /// `+∞` (serialized as `"inf"`) when saturated.
    #[serde(serialize_with = "ser_bound", deserialize_with = "de_bound")]
    pub kl_lower: f64,
    pub kl_upper: f64,
    pub lb_scale: f64,
    pub stats: MmdStatistics,
    pub notes: BoundNotes,
}

/// Maps already-computed statistics to KL bounds.
pub fn bounds_from_stats(stats: MmdStatistics, lb_scale: f64) -> Result<BoundEstimate> {
    if !(lb_scale > 0.0 && lb_scale.is_finite()) {
        return Err(Error::input(format!("lb_scale must be positive, got {lb_scale}")));
    }
    let scaled = lb_scale * stats.lb_statistic;
    let clamped = scaled > 2.0;
    let kl_lower = kl_lower_from_mmd(scaled.min(2.0))?;
    let kl_upper = kl_upper_from_mmd_sq(stats.ub_statistic_sq)?;
    Ok(BoundEstimate {
        kl_lower,
        kl_upper,
        lb_scale,
        stats,
        notes: BoundNotes {
            clamped,
            lb_saturated: kl_lower.is_infinite(),
            lb_scaled: lb_scale != 1.0,
        },
    })
}

/// Estimates both KL bounds for `X ~ p` against `Y ~ q`.
pub fn kl_bounds(
    config: &EstimatorConfig,
    lb_scale: f64,
    x: &SampleSet,
    y: &SampleSet,
) -> Result<BoundEstimate> {
    if !(lb_scale > 0.0 && lb_scale.is_finite()) {
        return Err(Error::input(format!("lb_scale must be positive, got {lb_scale}")));
    }
    bounds_from_stats(estimators::estimate(config, x, y)?, lb_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiMode {
    ContinuousJoint,
    DiscreteConditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClassBound {
    pub label: i64,
    pub count: usize,
    pub weight: f64,
    pub estimate: BoundEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MiProxy {
    #[serde(serialize_with = "ser_bound", deserialize_with = "de_bound")]
    pub mi_lower: f64,
    pub mi_upper: f64,
    pub mode: MiMode,
    /// Discrete mode only, sorted by label.
    pub per_class: Option<Vec<ClassBound>>,
    /// Continuous mode only: one estimate per product-marginal permutation.
    pub permutations: Vec<BoundEstimate>,
}

/// MI proxy for a joint sample whose columns `[0, split)` hold X and
/// `[split, N)` hold Y.
///
/// The product-of-marginals sample pairs each X-row with a Y-row drawn by a
/// seeded permutation. With `permutations > 1` the bounds are averaged over
/// independent permutations.
pub fn mi_bounds_continuous(
    config: &EstimatorConfig,
    lb_scale: f64,
    joint: &SampleSet,
    split_index: usize,
    seed: u64,
    permutations: usize,
) -> Result<MiProxy> {
    if joint.len() < 4 {
        return Err(Error::input(format!(
            "need at least 4 joint samples, got {}",
            joint.len()
        )));
    }
    if permutations == 0 {
        return Err(Error::input("need at least one permutation"));
    }
    let (xs, ys) = joint.split_columns(split_index)?;
    let mut estimates = Vec::with_capacity(permutations);
    for r in 0..permutations {
        let mut order: Vec<usize> = (0..joint.len()).collect();
        order.shuffle(&mut seeds::rng(seeds::derive(
            seed,
            seeds::stream::PERMUTATION,
            r as u64,
        )));
        let product = SampleSet::hstack(&xs, &ys.select(&order)?)?;
        estimates.push(kl_bounds(config, lb_scale, joint, &product)?);
    }
    let k = permutations as f64;
    Ok(MiProxy {
        mi_lower: estimates.iter().map(|e| e.kl_lower).sum::<f64>() / k,
        mi_upper: estimates.iter().map(|e| e.kl_upper).sum::<f64>() / k,
        mode: MiMode::ContinuousJoint,
        per_class: None,
        permutations: estimates,
    })
}

/// MI proxy for continuous X with discrete labels Y: the class-frequency
/// weighted mean of the bounds between each class-conditional sample and the
/// pooled sample (which includes the class itself).
pub fn mi_bounds_discrete(
    config: &EstimatorConfig,
    lb_scale: f64,
    x: &SampleSet,
    labels: &[i64],
) -> Result<MiProxy> {
    if labels.len() != x.len() {
        return Err(Error::input(format!(
            "{} labels for {} samples",
            labels.len(),
            x.len()
        )));
    }
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    if let Some((label, _)) = classes.iter().find(|(_, idx)| idx.len() < 2) {
        return Err(Error::input(format!(
            "class {label} has a single sample; every class needs at least 2"
        )));
    }
    let total = x.len();
    let mut per_class = Vec::with_capacity(classes.len());
    for (label, idx) in &classes {
        let cond = x.select(idx)?;
        per_class.push(ClassBound {
            label: *label,
            count: idx.len(),
            weight: idx.len() as f64 / total as f64,
            estimate: kl_bounds(config, lb_scale, &cond, x)?,
        });
    }
    let weight_sum: f64 = per_class.iter().map(|c| c.weight).sum();
    debug_assert!((weight_sum - 1.0).abs() <= 1e-12);
    let mi_lower = per_class
        .iter()
        .map(|c| c.weight * c.estimate.kl_lower)
        .sum();
    let mi_upper = per_class
        .iter()
        .map(|c| c.weight * c.estimate.kl_upper)
        .sum();
    Ok(MiProxy {
        mi_lower,
        mi_upper,
        mode: MiMode::DiscreteConditional,
        per_class: Some(per_class),
        permutations: Vec::new(),
    })
}

/// Two-sided total-variation bounds (TV as `Σ|p − q|`) from a KL value and
/// the density-ratio maximum `alpha >= 1`:
///
/// ```text
/// (2 − 2/α) / log α · KL  <=  TV  <=  2·√(1 − e^(−KL))
/// ```
///
/// The coefficient tends to 2 as α → 1.
pub fn tv_bounds_from_kl(kl: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(kl >= 0.0) {
        return Err(Error::input(format!("KL must be non-negative, got {kl}")));
    }
    if !(alpha >= 1.0) {
        return Err(Error::input(format!("alpha must be >= 1, got {alpha}")));
    }
    Ok((tv_lower_coefficient(alpha) * kl, tv_upper_from_kl(kl)))
}

pub(crate) fn tv_lower_coefficient(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-9 {
        2.0
    } else if alpha.is_infinite() {
        0.0
    } else {
        (2.0 - 2.0 / alpha) / alpha.ln()
    }
}

pub(crate) fn tv_upper_from_kl(kl: f64) -> f64 {
    2.0 * (-(-kl).exp_m1()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn set(rows: &[f64]) -> SampleSet {
        SampleSet::from_flat(rows.to_vec(), rows.len(), 1).unwrap()
    }

    #[test]
    fn lower_map_examples() {
        assert_eq!(kl_lower_from_mmd(0.0).unwrap(), 0.0);
        assert!((kl_lower_from_mmd(1.0).unwrap() - 0.287_682_072_451_780_9).abs() < 1e-15);
        assert_eq!(kl_lower_from_mmd(2.0).unwrap(), f64::INFINITY);
        assert_eq!(kl_lower_from_mmd(2.0 + 5e-10).unwrap(), f64::INFINITY);
        assert!(kl_lower_from_mmd(-1e-3).is_err());
        assert!(kl_lower_from_mmd(2.1).is_err());
        assert!(kl_lower_from_mmd(f64::NAN).is_err());
    }

    #[test]
    fn upper_map_examples() {
        assert_eq!(kl_upper_from_mmd_sq(0.0).unwrap(), 0.0);
        assert!((kl_upper_from_mmd_sq(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((kl_upper_from_mmd_sq(0.3333).unwrap() - 0.287_657_072_139_275_7).abs() < 1e-15);
        assert!(kl_upper_from_mmd_sq(-1e-6).is_err());
    }

    #[test]
    fn maps_are_strictly_increasing() {
        let mut prev = -1.0;
        for i in 0..2000 {
            let v = kl_lower_from_mmd(i as f64 * 1e-3).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = -1.0;
        for i in 0..5000 {
            let v = kl_upper_from_mmd_sq(i as f64 * 1e-2).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn upper_round_trip() {
        for i in 0..=500 {
            let v = i as f64 / 100.0;
            let back = kl_upper_from_mmd_sq(v.exp_m1()).unwrap();
            assert!((back - v).abs() <= 1e-12, "{v}: {back}");
        }
    }

    #[test]
    fn single_point_chain() {
        let cfg = EstimatorConfig::single_rbf(1.0, 1.0);
        let e = kl_bounds(&cfg, 1.0, &set(&[0.0]), &set(&[1.0])).unwrap();
        // -log(1 - (2 - 2/e)/4) and log(1 + (2 - 2/e) - (1 - 1/e)^2/2)
        assert!((e.kl_lower - 0.379_885_493_041_722_5).abs() < 1e-12, "{}", e.kl_lower);
        assert!((e.kl_upper - 0.724_865_260_179_493_6).abs() < 1e-12, "{}", e.kl_upper);
        assert!(!e.notes.lb_scaled);
    }

    #[test]
    fn identical_samples_give_zero_bounds() {
        let x = set(&[0.0, 0.3, -1.2, 2.5]);
        let e = kl_bounds(&EstimatorConfig::default(), 1.0, &x, &x).unwrap();
        assert!(e.kl_lower < 1e-9 && e.kl_upper < 1e-9);
    }

    #[test]
    fn lb_scale_is_applied_and_flagged() {
        let mut stats = estimators::estimate(
            &EstimatorConfig::single_rbf(1.0, 1.0),
            &set(&[0.0]),
            &set(&[0.0]),
        )
        .unwrap();
        stats.lb_statistic = 0.1;
        let e = bounds_from_stats(stats.clone(), 5.0).unwrap();
        assert!((e.kl_lower - 0.064_538_521_137_571_17).abs() < 1e-15);
        assert!(e.notes.lb_scaled && !e.notes.lb_saturated);

        stats.lb_statistic = 0.5;
        let e = bounds_from_stats(stats, 5.0).unwrap();
        assert!(e.kl_lower.is_infinite());
        assert!(e.notes.clamped && e.notes.lb_saturated);
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"kl-lower\":\"inf\""));
        let back: BoundEstimate = serde_json::from_str(&json).unwrap();
        assert!(back.kl_lower.is_infinite());
    }

    #[test]
    fn bad_lb_scale() {
        let x = set(&[0.0]);
        let cfg = EstimatorConfig::single_rbf(1.0, 1.0);
        assert!(matches!(kl_bounds(&cfg, 0.0, &x, &x), Err(Error::Input(_))));
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_bounds_from_kl(0.0, 3.0).unwrap(), (0.0, 0.0));
        let (lo, hi) = tv_bounds_from_kl(0.1438, 2.0).unwrap();
        assert!((lo - 0.207_459_546_879_832_9).abs() < 1e-12, "{lo}");
        assert!((hi - 0.731_953_706_383_876_7).abs() < 1e-12, "{hi}");
        let (lo, _) = tv_bounds_from_kl(0.5, 1.0).unwrap();
        assert_eq!(lo, 1.0);
        // the coefficient is continuous through the cutoff
        assert!((tv_lower_coefficient(1.0 + 1e-6) - 2.0).abs() < 1e-5);
        assert!(tv_bounds_from_kl(0.1, 0.5).is_err());
        assert!(tv_bounds_from_kl(-0.1, 2.0).is_err());
    }

    fn joint_with_constant_y() -> SampleSet {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), 4.0])
            .collect();
        SampleSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_y_block_has_zero_mi() {
        let cfg = EstimatorConfig::single_rbf(0.3, 1e-3);
        let mi = mi_bounds_continuous(&cfg, 1.0, &joint_with_constant_y(), 2, 5, 1).unwrap();
        assert!(mi.mi_lower <= 1e-6 && mi.mi_upper <= 1e-6, "{mi:?}");
        assert_eq!(mi.mode, MiMode::ContinuousJoint);
    }

    #[test]
    fn continuous_mi_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.21;
                vec![t.sin(), t.sin() + 0.1 * t.cos()]
            })
            .collect();
        let joint = SampleSet::from_rows(&rows).unwrap();
        let cfg = EstimatorConfig::single_rbf(1.0, 1e-2);
        let a = mi_bounds_continuous(&cfg, 1.0, &joint, 1, 42, 3).unwrap();
        let b = mi_bounds_continuous(&cfg, 1.0, &joint, 1, 42, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.permutations.len(), 3);
        let c = mi_bounds_continuous(&cfg, 1.0, &joint, 1, 43, 3).unwrap();
        assert_ne!(a.mi_upper, c.mi_upper);
    }

    #[test]
    fn continuous_mi_errors() {
        let cfg = EstimatorConfig::single_rbf(1.0, 1e-2);
        let joint = joint_with_constant_y();
        assert!(mi_bounds_continuous(&cfg, 1.0, &joint, 0, 1, 1).is_err());
        assert!(mi_bounds_continuous(&cfg, 1.0, &joint, 3, 1, 1).is_err());
        let small = joint.select(&[0, 1, 2]).unwrap();
        assert!(mi_bounds_continuous(&cfg, 1.0, &small, 1, 1, 1).is_err());
    }

    #[test]
    fn discrete_single_class_is_zero() {
        let x = set(&[0.1, 0.5, -0.3, 2.0]);
        let cfg = EstimatorConfig::single_rbf(1.0, 1e-3);
        let mi = mi_bounds_discrete(&cfg, 1.0, &x, &[7, 7, 7, 7]).unwrap();
        assert!(mi.mi_lower < 1e-9 && mi.mi_upper < 1e-9);
        let classes = mi.per_class.unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].weight, 1.0);
    }

    #[test]
    fn discrete_weights_and_order() {
        let x = set(&[0.0, 0.1, 0.2, 3.0, 3.1, 2.9, 3.2]);
        let labels = [5, 5, 5, -1, -1, -1, -1];
        let cfg = EstimatorConfig::single_rbf(1.0, 1e-2);
        let mi = mi_bounds_discrete(&cfg, 1.0, &x, &labels).unwrap();
        let classes = mi.per_class.as_ref().unwrap();
        assert_eq!(classes[0].label, -1);
        assert_eq!(classes[1].label, 5);
        let wsum: f64 = classes.iter().map(|c| c.weight).sum();
        assert!((wsum - 1.0).abs() <= 1e-12);
        assert!(mi.mi_lower > 0.0 && mi.mi_upper > 0.0);
        let expect: f64 = classes.iter().map(|c| c.weight * c.estimate.kl_upper).sum();
        assert_eq!(mi.mi_upper, expect);
    }

    #[test]
    fn discrete_singleton_class_named() {
        let x = set(&[0.0, 0.1, 0.2]);
        let cfg = EstimatorConfig::single(KernelSpec::rbf(1.0).unwrap(), Default::default());
        let err = mi_bounds_discrete(&cfg, 1.0, &x, &[1, 1, 9]).unwrap_err();
        assert!(err.to_string().contains("class 9"), "{err}");
        assert!(mi_bounds_discrete(&cfg, 1.0, &x, &[1, 1]).is_err());
    }
}
