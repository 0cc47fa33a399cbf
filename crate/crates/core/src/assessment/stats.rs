//! Rank statistics for small samples: Spearman's rho, the Wilcoxon
//! signed-rank test and the Mann-Whitney U test. All tests are two-sided.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::AssessmentError;

/// Largest sample for which the signed-rank test uses the exact null
/// distribution (when there are no ties).
pub const EXACT_SIGNED_RANK_MAX_N: usize = 25;

fn err<T>(msg: impl Into<String>) -> Result<T, AssessmentError> {
    Err(AssessmentError::Stats(msg.into()))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the groups of equal values, singletons included.
fn tie_groups(sorted: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Spearman's rank correlation (Pearson correlation of average ranks). The
/// p-value uses the t approximation with n − 2 degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, AssessmentError> {
    if x.len() != y.len() {
        return err(format!("series lengths differ ({} vs {})", x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return err(format!("need at least 3 pairs, got {n}"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return err("non-finite value");
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return err("a series is constant");
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p_value = if rho.abs() == 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / ((1.0 - rho) * (1.0 + rho))).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(Correlation { rho, p_value, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedRank {
    /// Non-zero differences used.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Standardized W+, present when the normal approximation was used.
    pub z: Option<f64>,
    pub p_value: f64,
    pub exact: bool,
}

/// Wilcoxon signed-rank test of the hypothesis that `diffs` are centred on
/// zero. Zero differences are dropped. Exact for small untied samples,
/// otherwise normal approximation with tie correction and no continuity
/// correction.
pub fn signed_rank(diffs: &[f64]) -> Result<SignedRank, AssessmentError> {
    if diffs.iter().any(|v| !v.is_finite()) {
        return err("non-finite value");
    }
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Ok(SignedRank {
            n,
            w_plus: 0.0,
            w_minus: 0.0,
            z: None,
            p_value: 1.0,
            exact: true,
        });
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let ties = tie_groups(&sorted);
    let tied = ties.iter().any(|&t| t > 1);

    if n <= EXACT_SIGNED_RANK_MAX_N && !tied {
        let counts = signed_rank_null_counts(n);
        let total_ways: f64 = counts.iter().sum();
        let w = w_plus.round() as usize;
        let lower: f64 = counts[..=w].iter().sum::<f64>() / total_ways;
        let upper: f64 = counts[w..].iter().sum::<f64>() / total_ways;
        let p_value = (2.0 * lower.min(upper)).min(1.0);
        return Ok(SignedRank {
            n,
            w_plus,
            w_minus,
            z: None,
            p_value,
            exact: true,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return err("zero variance");
    }
    let z = (w_plus - mean) / var.sqrt();
    let p_value = (2.0 * std_normal().sf(z.abs())).min(1.0);
    Ok(SignedRank {
        n,
        w_plus,
        w_minus,
        z: Some(z),
        p_value,
        exact: false,
    })
}

/// Paired signed-rank test on `after − before`.
pub fn signed_rank_paired(before: &[f64], after: &[f64]) -> Result<SignedRank, AssessmentError> {
    if before.len() != after.len() {
        return err("paired series lengths differ");
    }
    let d: Vec<f64> = before.iter().zip(after).map(|(b, a)| a - b).collect();
    signed_rank(&d)
}

/// Number of sign assignments of ranks 1..=n giving each W+ value.
fn signed_rank_null_counts(n: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    let mut c = vec![0.0; max + 1];
    c[0] = 1.0;
    for r in 1..=n {
        for w in (r..=max).rev() {
            c[w] += c[w - r];
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Mann-Whitney U test, normal approximation with tie correction and no
/// continuity correction.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<MannWhitney, AssessmentError> {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return err("empty sample");
    }
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    if all.iter().any(|v| !v.is_finite()) {
        return err("non-finite value");
    }
    let ranks = average_ranks(&all);
    let r1: f64 = ranks[..n1].iter().sum();
    let (f1, f2) = (n1 as f64, n2 as f64);
    let u = r1 - f1 * (f1 + 1.0) / 2.0;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let n = f1 + f2;
    let tie_sum: f64 = tie_groups(&sorted).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if var <= 0.0 {
        return err("zero variance");
    }
    let z = (u - f1 * f2 / 2.0) / var.sqrt();
    let p_value = (2.0 * std_normal().sf(z.abs())).min(1.0);
    Ok(MannWhitney { u, z, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    /// Spearman from pair signs: the centred average rank of x_i equals
    /// half the sum of sgn(x_i − x_j) over all j.
    fn pairwise_rho(x: &[f64], y: &[f64]) -> f64 {
        let sgn = |v: f64| (v > 0.0) as i32 as f64 - (v < 0.0) as i32 as f64;
        let centred = |v: &[f64]| -> Vec<f64> {
            v.iter().map(|a| v.iter().map(|b| sgn(a - b)).sum::<f64>() / 2.0).collect()
        };
        let (a, b) = (centred(x), centred(y));
        let sab: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
        let saa: f64 = a.iter().map(|p| p * p).sum();
        let sbb: f64 = b.iter().map(|q| q * q).sum();
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), [2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_matches_pair_counting() {
        let mut rng = SeededRng::new(12);
        for _ in 0..200 {
            let n = 3 + rng.index(10);
            let levels = 2 + rng.below(6);
            let x: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
            match spearman(&x, &y) {
                Ok(c) => assert!((c.rho - pairwise_rho(&x, &y)).abs() < 1e-9),
                Err(_) => assert!(x.iter().all(|v| *v == x[0])),
            }
        }
    }

    #[test]
    fn spearman_reference_values() {
        // scipy.stats.spearmanr
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0];
        let c = spearman(&x, &y).unwrap();
        assert!((c.rho - 0.821_428_571_428_571_5).abs() < 1e-12);
        assert!((c.p_value - 0.023_448_808_345_691_505).abs() < 1e-9);
        let tied = spearman(&[1.0, 1.0, 2.0, 3.0, 3.0, 4.0], &[3.0, 1.0, 2.0, 6.0, 5.0, 4.0]).unwrap();
        assert!((tied.rho - 0.706_187_863_603_799_7).abs() < 1e-12);
        assert!((tied.p_value - 0.116_806_606_947_455_66).abs() < 1e-9);
        let perfect = spearman(&x, &x).unwrap();
        assert_eq!((perfect.rho, perfect.p_value), (1.0, 0.0));
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn signed_rank_reference_values() {
        // scipy.stats.wilcoxon(method="exact")
        let d = [1.5, -0.5, 2.0, 3.0, -1.0, 4.0, 2.5, 0.75];
        let r = signed_rank(&d).unwrap();
        assert!(r.exact);
        assert_eq!(r.w_plus, 32.0);
        assert!((r.p_value - 0.0546875).abs() < 1e-12);
        // scipy.stats.wilcoxon(method="approx", correction=False), with ties and a zero
        let t = [1.0, 1.0, -2.0, 3.0, 3.0, 3.0, 0.0, 4.0, -1.0, 2.0];
        let r = signed_rank(&t).unwrap();
        assert!(!r.exact);
        assert_eq!(r.n, 9);
        assert!((r.p_value - 0.056_048_212_621_763_6).abs() < 1e-9);
        assert_eq!(signed_rank(&[0.0, 0.0]).unwrap().p_value, 1.0);
    }

    #[test]
    fn exact_null_distribution_is_symmetric() {
        for n in 1..=EXACT_SIGNED_RANK_MAX_N {
            let c = signed_rank_null_counts(n);
            assert_eq!(c.iter().sum::<f64>(), 2f64.powi(n as i32));
            assert!(c.iter().zip(c.iter().rev()).all(|(a, b)| a == b));
        }
    }

    #[test]
    fn mann_whitney_reference_values() {
        // scipy.stats.mannwhitneyu(method="asymptotic", use_continuity=False)
        let x = [1.1, 2.3, 2.3, 4.0, 5.2];
        let y = [3.3, 4.0, 6.1, 7.7, 8.0, 9.4];
        let r = mann_whitney(&x, &y).unwrap();
        assert_eq!(r.u, 3.5);
        assert!((r.p_value - 0.034_926_255_949_542).abs() < 1e-9);
    }
}
