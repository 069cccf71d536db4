//! Compensated summation.
//!
//! Criterion values and convolution cross-checks compare float sums of 2^m
//! terms against 1e-9-scale tolerances, so plain accumulation error is not
//! acceptable. Neumaier's variant of Kahan summation keeps the running error
//! bound independent of term ordering magnitude.

/// Neumaier compensated accumulator.
///
/// ```
/// use hoplat::accum::Neumaier;
/// let mut acc = Neumaier::new();
/// for _ in 0..10 { acc.add(0.1); }
/// assert!((acc.value() - 1.0).abs() < 1e-15);
/// ```
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Neumaier { sum: 0.0, comp: 0.0 }
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

/// Compensated sum of a slice in index order.
pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = Neumaier::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_heavy_sum() {
        // 1.0 followed by many tiny terms that a naive sum drops entirely.
        let mut acc = Neumaier::new();
        acc.add(1.0);
        for _ in 0..1_000_000 {
            acc.add(1e-17);
        }
        assert!((acc.value() - (1.0 + 1e-11)).abs() < 1e-13);
    }

    #[test]
    fn matches_naive_on_benign_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(sum(&xs), 4950.0);
    }
}
