//! Cohort statistics: linear fits, group tests, effect sizes, age adjustment.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Groups smaller than this are summarized but not tested.
pub const MIN_TEST_GROUP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub p_value: f64,
    pub n: usize,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sum_sq_dev(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Two-sided p-value of a t statistic.
fn two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} x values for {} y values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("linear fit needs n >= 3, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit input"));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx = sum_sq_dev(x, mx);
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot = sum_sq_dev(y, my);
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(FitResult { slope, intercept, r_squared: 0.0, p_value: 1.0, n });
    }
    let r_squared = (1.0 - ss_res / ss_tot).clamp(0.0, 1.0);
    let dof = (n - 2) as f64;
    let se = (ss_res / dof / sxx).sqrt();
    let p_value = if se == 0.0 { 0.0 } else { two_sided_p(slope / se, dof) };
    Ok(FitResult { slope, intercept, r_squared, p_value, n })
}

/// Quantile whose fit has the highest R²; ties go to the smaller quantile.
/// Keys are quantiles in tenths (0..=9).
pub fn select_quantile(per_q: &BTreeMap<u8, (Vec<f64>, Vec<f64>)>) -> Result<(f64, FitResult)> {
    let mut best: Option<(u8, FitResult)> = None;
    for (&k, (ages, scores)) in per_q {
        if k > 9 {
            return Err(Error::InvalidArgument(format!("quantile index {k} outside 0..=9")));
        }
        let fit = fit_linear(ages, scores)?;
        if best.as_ref().is_none_or(|(_, b)| fit.r_squared > b.r_squared) {
            best = Some((k, fit));
        }
    }
    let (k, fit) = best.ok_or_else(|| Error::Empty("no quantile to select from".into()))?;
    Ok((f64::from(k) / 10.0, fit))
}

fn sample_var(x: &[f64]) -> f64 {
    sum_sq_dev(x, mean(x)) / (x.len() - 1) as f64
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!("samples need >= 2 values, got {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("test sample"));
    }
    Ok(())
}

fn degenerate_t(diff: f64) -> (f64, f64) {
    if diff == 0.0 {
        (0.0, 1.0)
    } else {
        (diff.signum() * f64::INFINITY, 0.0)
    }
}

/// Student two-sample t-test with pooled variance; returns `(t, p)`.
pub fn t_test_ind(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check_samples(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let diff = mean(a) - mean(b);
    let pooled = ((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0);
    if pooled == 0.0 {
        return Ok(degenerate_t(diff));
    }
    let t = diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok((t, two_sided_p(t, na + nb - 2.0)))
}

/// Welch's unequal-variance t-test; returns `(t, p)`.
pub fn t_test_welch(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check_samples(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let diff = mean(a) - mean(b);
    let (qa, qb) = (sample_var(a) / na, sample_var(b) / nb);
    if qa + qb == 0.0 {
        return Ok(degenerate_t(diff));
    }
    let t = diff / (qa + qb).sqrt();
    let dof = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok((t, two_sided_p(t, dof)))
}

pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m.max(1) as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectBand {
    None,
    Medium,
    Large,
    VeryLarge,
}

impl EffectBand {
    pub fn of(d: f64) -> Self {
        let a = d.abs();
        if a >= 0.9 {
            EffectBand::VeryLarge
        } else if a >= 0.65 {
            EffectBand::Large
        } else if a >= 0.35 {
            EffectBand::Medium
        } else {
            EffectBand::None
        }
    }
}

impl fmt::Display for EffectBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectBand::None => "none",
            EffectBand::Medium => "medium",
            EffectBand::Large => "large",
            EffectBand::VeryLarge => "very_large",
        })
    }
}

/// `(mean(a) - mean(b)) / s_pooled`, so the sign is negative when `b` is larger.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<(f64, EffectBand)> {
    check_samples(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(Error::Degenerate("zero pooled standard deviation".into()));
    }
    let d = (mean(a) - mean(b)) / pooled;
    Ok((d, EffectBand::of(d)))
}

/// Significance marks: ns, *, **, ***, ****.
pub fn stars(p: f64) -> &'static str {
    if p <= 1e-4 {
        "****"
    } else if p <= 1e-3 {
        "***"
    } else if p <= 1e-2 {
        "**"
    } else if p <= 0.05 {
        "*"
    } else {
        "ns"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupComparison {
    pub pair: (String, String),
    pub t_stat: f64,
    pub p_raw: f64,
    pub p_bonferroni: f64,
    pub cohens_d: f64,
    pub band: EffectBand,
}

/// t-test plus effect size for one pair, Bonferroni-corrected for `m` tests.
pub fn compare_groups(
    name_a: &str,
    a: &[f64],
    name_b: &str,
    b: &[f64],
    m: usize,
    welch: bool,
) -> Result<GroupComparison> {
    let (t, p) = if welch { t_test_welch(a, b)? } else { t_test_ind(a, b)? };
    let (d, band) = cohens_d(a, b)?;
    Ok(GroupComparison {
        pair: (name_a.to_string(), name_b.to_string()),
        t_stat: t,
        p_raw: p,
        p_bonferroni: bonferroni(p, m),
        cohens_d: d,
        band,
    })
}

/// Age-adjusted scores from the common-slope model `score = mu_g + beta * age`.
///
/// `adjusted_i = score_i - beta (age_i - mean age)`, then shifted so the
/// reference group's mean is zero.
pub fn ancova_adjust(scores: &[f64], ages: &[f64], groups: &[&str], reference_group: &str) -> Result<Vec<f64>> {
    let n = scores.len();
    if ages.len() != n || groups.len() != n {
        return Err(Error::InvalidArgument("scores, ages and groups differ in length".into()));
    }
    if scores.iter().chain(ages).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ancova input"));
    }
    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g).or_default().push(i);
    }
    if !by_group.contains_key(reference_group) {
        return Err(Error::Empty(format!("reference group {reference_group} has no members")));
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for idx in by_group.values() {
        let ma = idx.iter().map(|&i| ages[i]).sum::<f64>() / idx.len() as f64;
        let ms = idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64;
        for &i in idx {
            sxx += (ages[i] - ma) * (ages[i] - ma);
            sxy += (ages[i] - ma) * (scores[i] - ms);
        }
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("no within-group age variation".into()));
    }
    let beta = sxy / sxx;
    let grand_age = mean(ages);
    let adjusted: Vec<f64> = scores.iter().zip(ages).map(|(s, a)| s - beta * (a - grand_age)).collect();
    let reference = &by_group[reference_group];
    let offset = reference.iter().map(|&i| adjusted[i]).sum::<f64>() / reference.len() as f64;
    Ok(adjusted.into_iter().map(|v| v - offset).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let f = fit_linear(&x, &y).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert_eq!(f.r_squared, 1.0);
        assert_eq!(f.p_value, 0.0);
    }

    #[test]
    fn constant_y_and_degenerate_x() {
        let f = fit_linear(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((f.r_squared, f.p_value), (0.0, 1.0));
        assert!(matches!(fit_linear(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(Error::Degenerate(_))));
        assert!(fit_linear(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn slope_p_value_reference() {
        // x = 1..5, y = (1, 3, 2, 5, 4): slope 0.8, r = 0.8, t = 0.8 * sqrt(3) / 0.6
        let f = fit_linear(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r_squared, 0.64, epsilon = 1e-12);
        assert_abs_diff_eq!(f.p_value, 0.10408803866182779, epsilon = 1e-9);
    }

    #[test]
    fn hand_t_test() {
        let (t, p) = t_test_ind(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]).unwrap();
        assert_abs_diff_eq!(t, -6f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.0705, epsilon = 1e-3);
        let (t, p) = t_test_ind(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((t, p), (0.0, 1.0));
        assert_eq!(t_test_ind(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), (0.0, 1.0));
        assert_eq!(t_test_ind(&[1.0, 1.0], &[2.0, 2.0]).unwrap().1, 0.0);
        assert!(t_test_ind(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn welch_equals_pooled_for_equal_sizes_and_variances() {
        let (t1, p1) = t_test_ind(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]).unwrap();
        let (t2, p2) = t_test_welch(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]).unwrap();
        assert_abs_diff_eq!(t1, t2, epsilon = 1e-12);
        assert_abs_diff_eq!(p1, p2, epsilon = 1e-12);
    }

    #[test]
    fn bonferroni_clips() {
        assert_abs_diff_eq!(bonferroni(0.02, 6), 0.12, epsilon = 1e-15);
        assert_eq!(bonferroni(0.3, 6), 1.0);
    }

    #[test]
    fn effect_sizes() {
        let (d, band) = cohens_d(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]).unwrap();
        assert_eq!(d, -2.0);
        assert_eq!(band, EffectBand::VeryLarge);
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), (0.0, EffectBand::None));
        assert!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]).is_err());
        assert_eq!(EffectBand::of(0.3499), EffectBand::None);
        assert_eq!(EffectBand::of(0.35), EffectBand::Medium);
        assert_eq!(EffectBand::of(-0.65), EffectBand::Large);
        assert_eq!(EffectBand::of(0.8999), EffectBand::Large);
        assert_eq!(EffectBand::of(0.9), EffectBand::VeryLarge);
    }

    #[test]
    fn star_legend() {
        assert_eq!(stars(0.2), "ns");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.001), "***");
        assert_eq!(stars(0.0001), "****");
        assert_eq!(stars(0.0), "****");
    }

    #[test]
    fn quantile_selection() {
        let mut m = BTreeMap::new();
        let ages = vec![60.0, 70.0, 80.0, 90.0];
        m.insert(3u8, (ages.clone(), vec![0.0, 10.0, 20.0, 30.0]));
        assert_eq!(select_quantile(&m).unwrap().0, 0.3);
        m.insert(5u8, (ages.clone(), vec![0.0, 10.0, 20.0, 30.0]));
        m.insert(1u8, (ages.clone(), vec![0.0, 12.0, 15.0, 30.0]));
        assert_eq!(select_quantile(&m).unwrap().0, 0.3);
        assert!(select_quantile(&BTreeMap::new()).is_err());
    }

    #[test]
    fn ancova_cases() {
        let ages = [60.0, 65.0, 70.0, 75.0, 62.0, 68.0, 74.0, 80.0];
        let groups = ["CN", "CN", "CN", "CN", "AD", "AD", "AD", "AD"];
        let scores: Vec<f64> = ages.iter().zip(&groups).map(|(a, g)| a + if *g == "AD" { 5.0 } else { 0.0 }).collect();
        let adj = ancova_adjust(&scores, &ages, &groups, "CN").unwrap();
        let cn = adj[..4].iter().sum::<f64>() / 4.0;
        let ad = adj[4..].iter().sum::<f64>() / 4.0;
        assert_abs_diff_eq!(ad - cn, 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cn, 0.0, epsilon = 1e-9);

        let one = ["CN"; 4];
        let s: Vec<f64> = ages[..4].iter().map(|a| 2.0 * a).collect();
        let adj = ancova_adjust(&s, &ages[..4], &one, "CN").unwrap();
        assert!(adj.iter().all(|v| v.abs() < 1e-9));

        assert!(ancova_adjust(&[1.0, 2.0], &[60.0, 60.0], &["CN", "AD"], "CN").is_err());
        assert!(ancova_adjust(&[1.0, 2.0], &[60.0, 61.0], &["CN", "CN"], "AD").is_err());
    }
}
