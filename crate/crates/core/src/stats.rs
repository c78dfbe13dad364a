//! Streaming moments, mergeable in a fixed order, and the one-sample
//! Kolmogorov-Smirnov statistic.

use num_complex::Complex64;

/// Welford accumulator for real samples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Welford accumulator for complex samples; the spread is `E|z - mean|²`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexAccumulator {
    pub n: u64,
    pub mean: Complex64,
    pub m2: f64,
}

impl ComplexAccumulator {
    pub fn push(&mut self, z: Complex64) {
        self.n += 1;
        let d = z - self.mean;
        self.mean += d / self.n as f64;
        let d2 = z - self.mean;
        self.m2 += d.re * d2.re + d.im * d2.im;
    }

    /// Chan et al. pairwise combination. Merging is deterministic given the
    /// order of calls, which the engine fixes.
    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d.norm_sqr() * self.n as f64 * w;
        self.n = n;
    }

    /// Standard error of the mean, `sqrt(Σ|z - z̄|² / (n (n-1)))`.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / ((self.n - 1) as f64 * self.n as f64)).sqrt()
        }
    }
}

/// Sup-distance between the empirical CDF of `samples` and `cdf`.
/// Sorts `samples` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
