use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 20;

/// Alternative hypothesis, stated for the second sample relative to the
/// first: `Greater` means `b` is stochastically greater than `a`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
    Less,
}

impl FromStr for Alternative {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "two-sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(format!("unknown alternative `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    NormalApprox,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "EXACT",
            Method::NormalApprox => "NORMAL_APPROX",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UTestResult {
    /// U of the first sample: pairs `(a_i, b_j)` with `a_i > b_j`, ties
    /// counting one half.
    pub u_statistic: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub method: Method,
    pub n_a: usize,
    pub n_b: usize,
}

/// Average ranks (1-based) of `values`, plus the sizes of tie groups
/// larger than one.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the mean of ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Mann–Whitney U test of `a` against `b`.
///
/// Without ties and with both samples of at most [`EXACT_MAX_N`] values the
/// p-value comes from the exact null distribution of U; otherwise from the
/// normal approximation with tie-corrected variance and a 0.5 continuity
/// correction. Two-sided p is twice the smaller one-sided p, capped at 1.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<UTestResult> {
    test_with(a, b, alternative, None)
}

/// As [`mann_whitney_u`] with the p-value method forced. The exact method
/// rejects tied samples and samples larger than [`EXACT_MAX_N`].
pub fn mann_whitney_u_using(a: &[f64], b: &[f64], alternative: Alternative, method: Method) -> Result<UTestResult> {
    test_with(a, b, alternative, Some(method))
}

fn test_with(a: &[f64], b: &[f64], alternative: Alternative, method: Option<Method>) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (n_a, n_b) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;

    let exact_ok = ties.is_empty() && n_a.max(n_b) <= EXACT_MAX_N;
    let exact = match method {
        None => exact_ok,
        Some(Method::NormalApprox) => false,
        Some(Method::Exact) if exact_ok => true,
        Some(Method::Exact) => {
            return Err(Error::InvalidParams(format!(
                "exact distribution needs untied samples of at most {EXACT_MAX_N}"
            )))
        }
    };
    let (p_le, p_ge) = if exact {
        let dist = UDistribution::new(n_a, n_b);
        let u = u.round() as usize;
        (dist.cdf(u), dist.sf(u))
    } else {
        normal_tails(u, n_a, n_b, &ties)
    };
    let p = match alternative {
        Alternative::Greater => p_le,
        Alternative::Less => p_ge,
        Alternative::TwoSided => 2.0 * p_le.min(p_ge),
    };
    Ok(UTestResult {
        u_statistic: u,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        alternative,
        method: if exact { Method::Exact } else { Method::NormalApprox },
        n_a,
        n_b,
    })
}

/// `(P(U <= u), P(U >= u))` under the normal approximation.
fn normal_tails(u: f64, n_a: usize, n_b: usize, ties: &[usize]) -> (f64, f64) {
    let (n1, n2) = (n_a as f64, n_b as f64);
    let n = n1 + n2;
    let mean = n1 * n2 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return (1.0, 1.0);
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let p_le = std_normal.cdf((u + 0.5 - mean) / sd);
    let p_ge = std_normal.sf((u - 0.5 - mean) / sd);
    (p_le, p_ge)
}

/// Exact null distribution of U for tie-free samples of sizes `n`, `m`.
struct UDistribution {
    counts: Vec<u64>,
    total: u64,
}

impl UDistribution {
    fn new(n: usize, m: usize) -> Self {
        // f[i][j] holds the count of arrangements of i a's and j b's by U;
        // the largest element either belongs to a (adding j to U) or to b.
        let max_u = n * m;
        let mut prev: Vec<Vec<u64>> = vec![vec![1]; m + 1];
        for i in 1..=n {
            let mut cur: Vec<Vec<u64>> = Vec::with_capacity(m + 1);
            cur.push(vec![1]);
            for j in 1..=m {
                let mut v = vec![0u64; i * j + 1];
                for (u, &c) in prev[j].iter().enumerate() {
                    v[u + j] += c;
                }
                for (u, &c) in cur[j - 1].iter().enumerate() {
                    v[u] += c;
                }
                cur.push(v);
            }
            prev = cur;
        }
        let counts = prev.swap_remove(m);
        debug_assert_eq!(counts.len(), max_u + 1);
        let total = counts.iter().sum();
        UDistribution { counts, total }
    }

    fn cdf(&self, u: usize) -> f64 {
        self.counts[..=u].iter().sum::<u64>() as f64 / self.total as f64
    }

    fn sf(&self, u: usize) -> f64 {
        self.counts[u..].iter().sum::<u64>() as f64 / self.total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Counts U over every placement of the a-ranks among n+m positions.
    fn enumerate_p(a: &[f64], b: &[f64]) -> (f64, f64) {
        let n = a.len() + b.len();
        let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        pooled.sort_by(f64::total_cmp);
        let u_of = |mask: u32| -> usize {
            let mut u = 0;
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    u += (0..i).filter(|&j| mask >> j & 1 == 0).count();
                }
            }
            u
        };
        let observed = a
            .iter()
            .map(|x| b.iter().filter(|y| x > y).count())
            .sum::<usize>();
        let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != a.len() {
                continue;
            }
            let u = u_of(mask);
            total += 1;
            le += u64::from(u <= observed);
            ge += u64::from(u >= observed);
        }
        (le as f64 / total as f64, ge as f64 / total as f64)
    }

    #[test]
    fn two_by_two_example() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Alternative::Greater).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.method, Method::Exact);
        assert!((r.p_value - 1.0 / 6.0).abs() < 1e-15);
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Alternative::Less).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Alternative::TwoSided).unwrap();
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_two_sided_is_one() {
        let a = [0.3, 0.1, 0.7, 0.7, 0.2];
        let r = mann_whitney_u(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.method, Method::NormalApprox);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.u_statistic, 12.5);
        let c = [1.0; 4];
        assert_eq!(mann_whitney_u(&c, &c, Alternative::Greater).unwrap().p_value, 1.0);
    }

    #[test]
    fn empty_sample() {
        assert!(matches!(mann_whitney_u(&[], &[1.0], Alternative::TwoSided), Err(Error::EmptySample)));
    }

    #[test]
    fn midranks_average_ties() {
        let (r, t) = midranks(&[1.0, 2.0, 2.0, 4.0, 5.0, 6.0, 7.0, 7.0, 9.0, 10.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0, 5.0, 6.0, 7.5, 7.5, 9.0, 10.0]);
        assert_eq!(t, vec![2, 2]);
    }

    #[test]
    fn exact_matches_enumeration() {
        let a = [0.11, 0.52, 0.93, 0.34];
        let b = [0.25, 0.66, 0.07, 0.88, 0.49];
        let (le, ge) = enumerate_p(&a, &b);
        let g = mann_whitney_u(&a, &b, Alternative::Greater).unwrap();
        let l = mann_whitney_u(&a, &b, Alternative::Less).unwrap();
        assert!((g.p_value - le).abs() < 1e-15);
        assert!((l.p_value - ge).abs() < 1e-15);
    }

    #[test]
    fn large_exact_table_is_symmetric() {
        let d = UDistribution::new(20, 20);
        assert_eq!(d.total, 137_846_528_820);
        for u in 0..=400 {
            assert_eq!(d.counts[u], d.counts[400 - u]);
        }
    }

    #[test]
    fn approx_tracks_exact_near_cutoff() {
        let a: Vec<f64> = (0..18).map(|i| i as f64 * 1.7 + 0.3).collect();
        let b: Vec<f64> = (0..16).map(|i| i as f64 * 1.9 + 4.1).collect();
        let e = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap();
        let (le, ge) = normal_tails(e.u_statistic, 18, 16, &[]);
        assert!((e.p_value - (2.0 * le.min(ge)).min(1.0)).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn u_duality(a in prop::collection::vec(0u8..20, 1..30), b in prop::collection::vec(0u8..20, 1..30)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ua = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap().u_statistic;
            let ub = mann_whitney_u(&b, &a, Alternative::TwoSided).unwrap().u_statistic;
            prop_assert_eq!(ua + ub, (a.len() * b.len()) as f64);
            prop_assert!(ua >= 0.0 && ua <= (a.len() * b.len()) as f64);
        }

        #[test]
        fn monotone_transform_invariance(
            a in prop::collection::hash_set(0u32..10_000, 1..12),
            b in prop::collection::hash_set(10_000u32..20_000, 1..12),
            shift in 0u32..10_000,
        ) {
            // offsets keep the pooled sample tie-free
            let a: Vec<f64> = a.into_iter().map(|v| f64::from(v + shift) / 7.0).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap();
            let ta: Vec<f64> = a.iter().map(|v| v.cbrt() * 2.0 + v.atan()).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.cbrt() * 2.0 + v.atan()).collect();
            let t = mann_whitney_u(&ta, &tb, Alternative::TwoSided).unwrap();
            prop_assert_eq!(r.u_statistic, t.u_statistic);
            prop_assert_eq!(r.p_value, t.p_value);
        }

        #[test]
        fn shifting_b_up_strengthens_greater(
            a in prop::collection::vec(0.0f64..1.0, 1..25),
            b in prop::collection::vec(0.0f64..1.0, 1..25),
            c in 0.0f64..0.5,
        ) {
            let p0 = mann_whitney_u(&a, &b, Alternative::Greater).unwrap().p_value;
            let shifted: Vec<f64> = b.iter().map(|v| v + c).collect();
            let p1 = mann_whitney_u(&a, &shifted, Alternative::Greater).unwrap().p_value;
            prop_assert!(p1 <= p0 + 1e-12, "{} > {}", p1, p0);
        }
    }
}
