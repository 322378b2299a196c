//! Goodness-of-fit statistics used to validate samplers against oracles.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail probability `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_tail((root + 0.12 + 0.11 / root) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> KsResult {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.total_cmp(q));
    b.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, ne),
    }
}

/// Pearson chi-square statistic of observed counts against cell probabilities.
pub fn chi_square_statistic(counts: &[usize], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len());
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&c, &p)| {
            let e = n as f64 * p;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

/// Upper `alpha` critical value of the chi-square distribution.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

/// Chi-square test of draws against a density known on a grid.
///
/// The grid density is normalised numerically, cut into `bins` equiprobable
/// intervals, and the draws are binned against those edges.
#[derive(Debug, Clone)]
pub struct GridChiSquare {
    pub statistic: f64,
    pub critical: f64,
    pub df: usize,
}

impl GridChiSquare {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical
    }
}

/// `grid` must be increasing; `density` is evaluated (unnormalised) at midpoints.
pub fn grid_chi_square(
    draws: &[f64],
    lo: f64,
    hi: f64,
    cells: usize,
    density: impl Fn(f64) -> f64,
    bins: usize,
    alpha: f64,
) -> GridChiSquare {
    let width = (hi - lo) / cells as f64;
    let mass: Vec<f64> = (0..cells)
        .map(|i| density(lo + (i as f64 + 0.5) * width).max(0.0))
        .collect();
    let total: f64 = mass.iter().sum();
    let mut cdf = Vec::with_capacity(cells + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for m in &mass {
        acc += m / total;
        cdf.push(acc);
    }
    // Equiprobable edges by inverting the piecewise-linear CDF.
    let mut edges = Vec::with_capacity(bins + 1);
    edges.push(f64::NEG_INFINITY);
    let mut k = 0;
    for b in 1..bins {
        let target = b as f64 / bins as f64;
        while cdf[k + 1] < target {
            k += 1;
        }
        let frac = (target - cdf[k]) / (cdf[k + 1] - cdf[k]).max(f64::MIN_POSITIVE);
        edges.push(lo + (k as f64 + frac) * width);
    }
    edges.push(f64::INFINITY);
    let mut counts = vec![0usize; bins];
    for &x in draws {
        let idx = edges.partition_point(|&e| e <= x).saturating_sub(1).min(bins - 1);
        counts[idx] += 1;
    }
    let probs = vec![1.0 / bins as f64; bins];
    GridChiSquare {
        statistic: chi_square_statistic(&counts, &probs),
        critical: chi_square_critical(bins - 1, alpha),
        df: bins - 1,
    }
}

/// Mean and its standard error estimated by non-overlapping batch means.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let size = n / batches;
    assert!(size >= 1, "too few draws for {batches} batches");
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (xs.iter().sum::<f64>() / n as f64, (var / batches as f64).sqrt())
}

/// Sample mean and its i.i.d. standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
