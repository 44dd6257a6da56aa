//! Small numeric helpers shared by the estimators.

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Plain i.i.d. estimate; the standard error uses the `n - 1` variance
    /// and is reported as 0 for a single sample.
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        assert!(n > 0, "no samples");
        // left-to-right sum keeps the result independent of thread layout
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Estimate {
                mean,
                std_error: 0.0,
            };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        Estimate {
            mean,
            std_error: (var / n as f64).sqrt(),
        }
    }

    /// Batch-means estimate for a correlated series.
    pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
        let batches = batches.max(2).min(xs.len());
        let size = xs.len() / batches;
        if size == 0 {
            return Estimate::from_samples(xs);
        }
        let means: Vec<f64> = (0..batches)
            .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
            .collect();
        let overall = xs[..batches * size].iter().sum::<f64>() / (batches * size) as f64;
        let se = Estimate::from_samples(&means).std_error;
        Estimate {
            mean: overall,
            std_error: se,
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.std_error
    }
}

/// `log(sum(exp(x)))` without overflow; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `e^{a}/(e^{a}+e^{-a})`, the probability of `+1` under local field `a`.
pub fn plus_probability(a: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * a).exp())
}

/// Entropy term `-p log2 p` with `0 log 0 = 0`.
pub fn neg_plog2p(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_and_survives_overflow() {
        let xs = [0.1, -2.0, 3.0];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
        let big = [1000.0, 1000.0];
        assert!((log_sum_exp(&big) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
    }

    #[test]
    fn estimate_basic() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Estimate::from_samples(&[3.0]).std_error, 0.0);
    }

    #[test]
    fn plus_probability_closed_form() {
        // four aligned terms at p = 1/4: e^{4b} = 9
        let b = 3f64.sqrt().ln();
        let want = 81.0 / 82.0;
        assert!((plus_probability(4.0 * b) - want).abs() < 1e-15);
        assert_eq!(plus_probability(0.0), 0.5);
    }
}
