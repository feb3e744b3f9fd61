//! Multivariate polynomials with complex coefficients, exact partial
//! derivatives, and closed-form integrals of monomials over the unit
//! ball. Backs the weak-identity diagnostic for formal adjoints.

use std::collections::BTreeMap;

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Poly {
    n: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn monomial(expo: Vec<u32>, coeff: Complex64) -> Self {
        let n = expo.len();
        let mut p = Self::zero(n);
        p.add_term(expo, coeff);
        p
    }

    pub fn add_term(&mut self, expo: Vec<u32>, coeff: Complex64) {
        debug_assert_eq!(expo.len(), self.n);
        let entry = self.terms.entry(expo.clone()).or_insert(Complex64::ZERO);
        *entry += coeff;
        if entry.norm_sqr() == 0.0 {
            self.terms.remove(&expo);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let expo: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(expo, ca * cb);
            }
        }
        out
    }

    pub fn partial_derivative(&self, axis: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut expo = e.clone();
            expo[axis] -= 1;
            out.add_term(expo, c * Complex64::new(e[axis] as f64, 0.0));
        }
        out
    }

    /// Applies `d^alpha`.
    pub fn derive_multi(&self, alpha: &[u32]) -> Poly {
        let mut p = self.clone();
        for (axis, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                p = p.partial_derivative(axis);
            }
        }
        p
    }

    pub fn conj(&self) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.conj());
        }
        out
    }

    /// Exact integral over the closed unit ball.
    pub fn integral_unit_ball(&self) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| c * unit_ball_moment(e))
            .sum()
    }
}

/// `(1 - |x|^2)^power` expanded into monomials; the compact polynomial
/// cutoff making weighted monomials valid test functions.
pub(crate) fn ball_cutoff(n: usize, power: u32) -> Poly {
    let mut radial = Poly::monomial(vec![0; n], Complex64::ONE);
    for i in 0..n {
        let mut sq = vec![0u32; n];
        sq[i] = 2;
        radial.add_term(sq, -Complex64::ONE);
    }
    let mut out = Poly::monomial(vec![0; n], Complex64::ONE);
    for _ in 0..power {
        out = out.mul(&radial);
    }
    out
}

/// `int_{B^n(0,1)} x^gamma dx`, zero unless every exponent is even, via
/// the surface-moment formula 2 prod Gamma((g_i+1)/2) / Gamma((|g|+n)/2)
/// divided by (|g| + n) for the radial part.
pub(crate) fn unit_ball_moment(gamma: &[u32]) -> f64 {
    if gamma.iter().any(|&g| g % 2 == 1) {
        return 0.0;
    }
    let n = gamma.len() as u32;
    let total: u32 = gamma.iter().sum();
    let mut surface = 2.0;
    for &g in gamma {
        surface *= gamma_half(g + 1);
    }
    surface /= gamma_half(total + n);
    surface / (total + n) as f64
}

/// Gamma(k/2) for positive integer k.
pub(crate) fn gamma_half(k: u32) -> f64 {
    assert!(k > 0);
    let mut x = k as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.0 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc // Gamma(1) = 1
    }
}

/// All multi-indices of arity `n` with total degree exactly `degree`.
pub(crate) fn multi_indices_of_degree(n: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    fn rec(axis: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if axis + 1 == current.len() {
            current[axis] = remaining;
            out.push(current.clone());
            return;
        }
        for k in 0..=remaining {
            current[axis] = k;
            rec(axis + 1, remaining - k, current, out);
        }
    }
    rec(0, degree, &mut current, &mut out);
    out
}

/// All multi-indices of arity `n` with total degree at most `degree`.
pub(crate) fn multi_indices_up_to(n: usize, degree: u32) -> Vec<Vec<u32>> {
    (0..=degree)
        .flat_map(|d| multi_indices_of_degree(n, d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_half_values() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(gamma_half(1), pi.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma_half(2), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_half(3), 0.5 * pi.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma_half(4), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_half(6), 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_half(8), 6.0, max_relative = 1e-14);
    }

    #[test]
    fn ball_moments_match_known_values() {
        let pi = std::f64::consts::PI;
        // Areas and volumes.
        assert_relative_eq!(unit_ball_moment(&[0, 0]), pi, max_relative = 1e-13);
        assert_relative_eq!(unit_ball_moment(&[0, 0, 0]), 4.0 * pi / 3.0, max_relative = 1e-13);
        // int x^2 over the disk = pi/4; int x^2 y^2 = pi/24.
        assert_relative_eq!(unit_ball_moment(&[2, 0]), pi / 4.0, max_relative = 1e-13);
        assert_relative_eq!(unit_ball_moment(&[2, 2]), pi / 24.0, max_relative = 1e-13);
        assert_eq!(unit_ball_moment(&[1, 0]), 0.0);
    }

    #[test]
    fn derivative_and_product_rules() {
        // d/dx (x^2 y) = 2 x y.
        let p = Poly::monomial(vec![2, 1], Complex64::ONE);
        let dp = p.partial_derivative(0);
        assert_eq!(dp, Poly::monomial(vec![1, 1], Complex64::new(2.0, 0.0)));
        // (x + y)^2 expanded.
        let x = Poly::monomial(vec![1, 0], Complex64::ONE);
        let y = Poly::monomial(vec![0, 1], Complex64::ONE);
        let sum = x.add(&y);
        let sq = sum.mul(&sum);
        let mut expect = Poly::monomial(vec![2, 0], Complex64::ONE);
        expect.add_term(vec![1, 1], Complex64::new(2.0, 0.0));
        expect.add_term(vec![0, 2], Complex64::ONE);
        assert_eq!(sq, expect);
    }

    #[test]
    fn cutoff_vanishes_to_high_order_at_boundary() {
        // (1 - x^2 - y^2)^2 at (1, 0) is 0 along with its first partials.
        let w = ball_cutoff(2, 2);
        let eval = |p: &Poly, x: f64, y: f64| -> Complex64 {
            p.terms
                .iter()
                .map(|(e, c)| c * x.powi(e[0] as i32) * y.powi(e[1] as i32))
                .sum()
        };
        assert_eq!(eval(&w, 1.0, 0.0), Complex64::ZERO);
        assert_eq!(eval(&w.partial_derivative(0), 1.0, 0.0), Complex64::ZERO);
        assert_eq!(eval(&w.partial_derivative(1), 1.0, 0.0), Complex64::ZERO);
    }

    #[test]
    fn multi_index_enumeration_counts() {
        assert_eq!(multi_indices_of_degree(2, 3).len(), 4);
        assert_eq!(multi_indices_of_degree(3, 2).len(), 6);
        assert_eq!(multi_indices_up_to(2, 2).len(), 6);
    }

    #[test]
    fn integration_by_parts_on_weighted_monomials() {
        // int (d_x u) v + int u (d_x v) = 0 for u, v = monomial * cutoff.
        let w = ball_cutoff(2, 2);
        let u = Poly::monomial(vec![1, 1], Complex64::ONE).mul(&w);
        let v = Poly::monomial(vec![2, 0], Complex64::ONE).mul(&w);
        let lhs = u.partial_derivative(0).mul(&v).integral_unit_ball();
        let rhs = u.mul(&v.partial_derivative(0)).integral_unit_ball();
        assert!((lhs + rhs).norm() <= 1e-14);
    }
}
