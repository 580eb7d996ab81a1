//! Binomial frequency bookkeeping for Monte Carlo games.

use serde::Serialize;

/// Hit count out of a number of Bernoulli trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Frequency {
    pub hits: u64,
    pub trials: u64,
}

impl Frequency {
    pub fn new(hits: u64, trials: u64) -> Self {
        Self { hits, trials }
    }

    pub fn record(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += u64::from(hit);
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    /// Normal-approximation radius `z * sqrt(p (1 - p) / n)` evaluated at
    /// the reference probability `p`.
    pub fn radius_at(&self, p: f64, z: f64) -> f64 {
        if self.trials == 0 {
            return f64::INFINITY;
        }
        z * (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Wilson score interval at `z` standard deviations.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        if self.trials == 0 {
            return (0.0, 1.0);
        }
        let n = self.trials as f64;
        let p = self.rate();
        let z2 = z * z;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }
}

impl std::ops::AddAssign for Frequency {
    fn add_assign(&mut self, rhs: Self) {
        self.hits += rhs.hits;
        self.trials += rhs.trials;
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = vec![0.0; n + 1];
    for i in 1..=n {
        table[i] = table[i - 1] + (i as f64).ln();
    }
    table
}

fn pmf(lf: &[f64], n: usize, k: usize, p: f64) -> f64 {
    if p == 0.0 {
        return f64::from(u8::from(k == 0));
    }
    let ln = lf[n] - lf[k] - lf[n - k] + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
    ln.exp()
}

/// Exact probability that an honest retrieval from an `n`-qubit OTM is
/// refused: the checked set has `Bin(n, 1/2)` positions, each flipped with
/// probability `noise`, and the token refuses when the flipped fraction
/// exceeds `delta` or nothing is checked.
pub fn otm_honest_failure(n: usize, delta: f64, noise: f64) -> f64 {
    let lf = ln_factorials(n);
    (0..=n)
        .map(|m| {
            let weight = pmf(&lf, n, m, 0.5);
            let refuse = if m == 0 {
                1.0
            } else {
                (0..=m)
                    .filter(|&k| k as f64 / m as f64 > delta)
                    .map(|k| pmf(&lf, m, k, noise))
                    .sum()
            };
            weight * refuse
        })
        .sum()
}
