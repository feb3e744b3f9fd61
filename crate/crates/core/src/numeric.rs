//! Compensated summation and a few shared float helpers.

/// Neumaier variant of Kahan summation. Summation order is the caller's
/// responsibility; all accumulations in this crate feed atoms in their
/// fixed lexicographic order so results are bit-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
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

/// Sums a slice in its given order with compensation.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// side(Q)^s for a dyadic cube of the given level, i.e. 2^(-level*s).
#[inline]
pub fn dyadic_side_pow(level: u32, s: f64) -> f64 {
    (-(level as f64) * s).exp2()
}

/// Euclidean norm.
#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_beats_naive_on_cancellation() {
        // 1 + 1e16 - 1e16 loses the 1 naively when summed in this order.
        let xs = [1.0, 1e16, -1e16];
        assert_eq!(compensated_sum(&xs), 1.0);
    }

    #[test]
    fn dyadic_side_pow_integer_exponents_exact() {
        assert_eq!(dyadic_side_pow(2, 1.0), 0.25);
        assert_eq!(dyadic_side_pow(3, 2.0), 2f64.powi(-6));
    }
}
