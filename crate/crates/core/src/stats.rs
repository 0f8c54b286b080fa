//! Small statistics toolbox: compensated sums, moment summaries,
//! confidence intervals and the two-sample Kolmogorov–Smirnov statistic.

use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for KahanSum {
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<KahanSum>().value() / xs.len() as f64
}

/// Unbiased sample variance (two-pass). `None` for fewer than two values.
pub fn variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).collect::<KahanSum>().value();
    Some(ss / (xs.len() - 1) as f64)
}

/// Standard error of the mean; `None` for fewer than two values.
pub fn std_error(xs: &[f64]) -> Option<f64> {
    variance(xs).map(|v| (v / xs.len() as f64).sqrt())
}

pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Percentile bootstrap interval of `statistic` at the given two-sided level.
/// Resampling is driven by a ChaCha8 stream seeded with `seed`.
pub fn bootstrap_ci<F>(xs: &[f64], statistic: F, resamples: usize, level: f64, seed: u64) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    assert!(!xs.is_empty() && resamples > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; xs.len()];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = xs[rng.gen_range(0..xs.len())];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let pick = |q: f64| {
        let idx = (q * (resamples - 1) as f64).round() as usize;
        stats[idx.min(resamples - 1)]
    };
    (pick(alpha), pick(1.0 - alpha))
}

/// Two-sample Kolmogorov–Smirnov statistic sup_x |F_a(x) - F_b(x)|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k += 1.0;
        for _ in 0..1_000_000 {
            k += 1e-16;
        }
        assert!((k.value() - (1.0 + 1e-10)).abs() < 1e-22);
    }

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(variance(&[1.0]).is_none());
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        // F_a jumps to 1/2 at 1 while F_b is still 0.
        assert_eq!(ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]), 0.5);
    }

    #[test]
    fn ks_brute_force_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..57).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..31).map(|_| rng.gen::<f64>().powi(2)).collect();
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let brute = a
            .iter()
            .chain(&b)
            .map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs())
            .fold(0.0, f64::max);
        assert!((ks_two_sample(&a, &b) - brute).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let xs: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        let a = bootstrap_ci(&xs, mean, 500, 0.95, 9);
        let b = bootstrap_ci(&xs, mean, 500, 0.95, 9);
        assert_eq!(a, b);
        assert!(a.0 < mean(&xs) && mean(&xs) < a.1);
    }
}
