//! Witness fields for the divergence equation: the gradient of the
//! Newtonian potential summed directly over atoms solves `div f = mu` in
//! the sense of distributions. This module evaluates such fields, checks
//! the weak equation against built-in bump test functions, and tracks
//! sup-norm behaviour under measure refinement.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::ReportBlock;
use crate::measure::AtomicMeasure;
use crate::numeric::{dist, norm, CompensatedSum};

/// Surface area of the unit sphere in `R^n`: `2 pi^(n/2) / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1);
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(n as u32)
}

/// Gamma(k/2) for positive integer k via the recursion from Gamma(1/2)
/// and Gamma(1).
fn gamma_half_integer(k: u32) -> f64 {
    let mut x = k as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.0 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}

/// The Riesz kernel `K(x) = x / (sigma_{n-1} |x|^n)`, the gradient of the
/// Newtonian potential; its distributional divergence is the unit Dirac
/// mass at the origin.
pub fn kernel_eval(n: usize, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::param("kernel is singular at the origin"));
    }
    let scale = 1.0 / (unit_sphere_area(n) * r.powi(n as i32));
    Ok(x.iter().map(|&c| c * scale).collect())
}

/// Field evaluations with their exclusion bookkeeping.
#[derive(Debug, Clone)]
pub struct WitnessField {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    /// Sup of |f| over the evaluated (non-excluded) points.
    pub sup_norm: f64,
    /// Points dropped for sitting within `rho` of an atom.
    pub skipped: usize,
    pub rho: f64,
}

/// Evaluates `f(x) = sum_i mass_i K(x - y_i)` at each point, skipping
/// points within `rho` of an atom (the field genuinely blows up there and
/// the discretization is not trusted below its own resolution). `rho`
/// defaults to the measure's `r_min`.
pub fn solve_divergence(
    mu: &AtomicMeasure,
    points: &[Vec<f64>],
    rho: Option<f64>,
) -> Result<WitnessField> {
    let n = mu.dim();
    let rho = rho.unwrap_or(mu.r_min());
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::param(format!("exclusion radius must be > 0, got {rho}")));
    }
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
    }
    let sigma = unit_sphere_area(n);
    let evaluated: Vec<Option<Vec<f64>>> = points
        .par_iter()
        .map(|x| {
            let mut acc = vec![CompensatedSum::new(); n];
            for (pos, mass) in mu.atoms() {
                let d = dist(pos, x);
                if d < rho {
                    return None;
                }
                let scale = mass / (sigma * d.powi(n as i32));
                for (k, a) in acc.iter_mut().enumerate() {
                    a.add((x[k] - pos[k]) * scale);
                }
            }
            Some(acc.iter().map(CompensatedSum::value).collect())
        })
        .collect();

    let mut kept_points = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut skipped = 0;
    for (p, v) in points.iter().zip(evaluated) {
        match v {
            Some(v) => {
                kept_points.push(p.clone());
                values.push(v);
            }
            None => skipped += 1,
        }
    }
    if kept_points.is_empty() && !points.is_empty() {
        return Err(Error::Empty(format!(
            "all {} evaluation points lie within rho = {rho} of an atom",
            points.len()
        )));
    }
    let sup_norm = values.iter().map(|v| norm(v)).fold(0.0, f64::max);
    Ok(WitnessField { points: kept_points, values, sup_norm, skipped, rho })
}

/// Radial bump `phi(x) = exp(-t^2) (1 - t^2)^3` with `t = |x - c| / R`:
/// a Gaussian profile under a compact polynomial cutoff, C^2 across the
/// support boundary, with `phi(c) = 1`.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("bump radius must be > 0, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let t = dist(x, &self.center) / self.radius;
        if t >= 1.0 {
            return 0.0;
        }
        let c = 1.0 - t * t;
        (-t * t).exp() * c * c * c
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let t = dist(x, &self.center) / self.radius;
        if t >= 1.0 {
            return vec![0.0; x.len()];
        }
        // g'(t)/t = -2 exp(-t^2) (1-t^2)^2 (4 - t^2), smooth through t=0.
        let c = 1.0 - t * t;
        let factor = -2.0 * (-t * t).exp() * c * c * (4.0 - t * t) / (self.radius * self.radius);
        x.iter().zip(&self.center).map(|(&xi, &ci)| factor * (xi - ci)).collect()
    }

    /// Sup of |grad phi| by a dense deterministic scan of the radial
    /// profile.
    pub fn gradient_sup_norm(&self) -> f64 {
        let mut sup = 0.0f64;
        for k in 0..100_000 {
            let t = k as f64 / 100_000.0;
            let c = 1.0 - t * t;
            let g = 2.0 * t * (-t * t).exp() * c * c * (4.0 - t * t) / self.radius;
            sup = sup.max(g);
        }
        sup
    }
}

/// Tensor midpoint quadrature domain.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells_per_axis: usize,
    /// Cells within this distance of an atom are excluded; their own-atom
    /// contribution is bounded analytically in the report.
    pub exclusion_radius: f64,
}

impl QuadratureSpec {
    pub fn step(&self) -> f64 {
        (self.hi[0] - self.lo[0]) / self.cells_per_axis as f64
    }
}

/// Weak-equation residual diagnostics.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `| int f . grad phi dx + int phi dmu |`.
    pub residual: f64,
    pub field_term: f64,
    pub measure_term: f64,
    /// Analytic bound `mass * rho * sup|grad phi|` on the contribution
    /// removed with the exclusion balls.
    pub excluded_bound: f64,
    pub cells_per_axis: usize,
    pub step: f64,
    pub rho: f64,
}

impl ResidualReport {
    pub fn report(&self) -> ReportBlock {
        let mut b = ReportBlock::new();
        b.push("kind", "weak_residual");
        b.push_f64("residual", self.residual);
        b.push_f64("field_term", self.field_term);
        b.push_f64("measure_term", self.measure_term);
        b.push_f64("excluded_bound", self.excluded_bound);
        b.push("cells_per_axis", self.cells_per_axis.to_string());
        b.push_f64("step", self.step);
        b.push_f64("rho", self.rho);
        b
    }
}

/// Checks the distributional identity `div f = mu` against a bump test
/// function: `int f . grad phi dx = - int phi dmu`. The field term uses
/// tensor midpoint quadrature excluding `rho`-balls around atoms; the
/// measure term is an exact atom sum.
pub fn weak_divergence_residual(
    mu: &AtomicMeasure,
    bump: &Bump,
    quad: &QuadratureSpec,
) -> Result<ResidualReport> {
    let n = mu.dim();
    if bump.center.len() != n || quad.lo.len() != n || quad.hi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bump.center.len() });
    }
    if quad.cells_per_axis == 0 {
        return Err(Error::param("need at least one quadrature cell"));
    }
    for k in 0..n {
        if bump.center[k] - bump.radius < quad.lo[k] || bump.center[k] + bump.radius > quad.hi[k] {
            return Err(Error::param(
                "bump support reaches past the quadrature domain edge",
            ));
        }
    }
    let rho = quad.exclusion_radius;
    if !(rho > 0.0) {
        return Err(Error::param(format!("exclusion radius must be > 0, got {rho}")));
    }
    let cells = quad.cells_per_axis;
    let h: Vec<f64> = (0..n)
        .map(|k| (quad.hi[k] - quad.lo[k]) / cells as f64)
        .collect();
    let cell_volume: f64 = h.iter().product();
    let sigma = unit_sphere_area(n);

    // Row-major traversal of cell centers; rows evaluated in parallel and
    // reduced in fixed order.
    let total_cells: usize = cells.pow((n - 1) as u32);
    let row_sums: Vec<f64> = (0..total_cells)
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0usize; n - 1];
            let mut rem = flat;
            for k in 0..n - 1 {
                idx[k] = rem % cells;
                rem /= cells;
            }
            let mut x = vec![0.0; n];
            for k in 0..n - 1 {
                x[k + 1] = quad.lo[k + 1] + (idx[k] as f64 + 0.5) * h[k + 1];
            }
            let mut acc = CompensatedSum::new();
            'cell: for i in 0..cells {
                x[0] = quad.lo[0] + (i as f64 + 0.5) * h[0];
                let grad = bump.gradient(&x);
                if grad.iter().all(|&g| g == 0.0) {
                    continue;
                }
                let mut dot = 0.0;
                for (pos, mass) in mu.atoms() {
                    let d = dist(pos, &x);
                    if d < rho {
                        continue 'cell;
                    }
                    let scale = mass / (sigma * d.powi(n as i32));
                    for k in 0..n {
                        dot += (x[k] - pos[k]) * scale * grad[k];
                    }
                }
                acc.add(dot);
            }
            acc.value()
        })
        .collect();
    let mut field_acc = CompensatedSum::new();
    for v in row_sums {
        field_acc.add(v);
    }
    let field_term = field_acc.value() * cell_volume;

    let mut measure_acc = CompensatedSum::new();
    for (pos, mass) in mu.atoms() {
        measure_acc.add(mass * bump.value(pos));
    }
    let measure_term = measure_acc.value();

    let excluded_bound = mu.total_mass() * rho * bump.gradient_sup_norm();
    Ok(ResidualReport {
        residual: (field_term + measure_term).abs(),
        field_term,
        measure_term,
        excluded_bound,
        cells_per_axis: cells,
        step: h[0],
        rho,
    })
}

/// One row of a sup-norm refinement study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub level: u32,
    pub sup: f64,
    /// `sup / previous sup`; None on the first row.
    pub ratio: Option<f64>,
    pub skipped: usize,
}

/// Evaluates `sup |f|` for measures produced at successive resolutions
/// over a fixed evaluation grid with a fixed exclusion radius. A bounded
/// trend (ratios near 1) is the pass signal; steady growth is the
/// signature of a singular target.
pub fn supnorm_refinement_study(
    measures: &[(u32, &AtomicMeasure)],
    points: &[Vec<f64>],
    rho: f64,
) -> Result<Vec<StudyRow>> {
    if measures.len() < 3 {
        return Err(Error::param(format!(
            "refinement study needs >= 3 levels, got {}",
            measures.len()
        )));
    }
    let mut rows: Vec<StudyRow> = Vec::with_capacity(measures.len());
    for &(level, mu) in measures {
        let field = solve_divergence(mu, points, Some(rho))?;
        let ratio = rows.last().map(|prev: &StudyRow| field.sup_norm / prev.sup);
        rows.push(StudyRow { level, sup: field.sup_norm, ratio, skipped: field.skipped });
    }
    Ok(rows)
}

/// Cell centers of a uniform tensor grid, in row-major order.
pub fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    assert_eq!(hi.len(), n);
    assert!(per_axis > 0);
    let h: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / per_axis as f64).collect();
    let mut out = Vec::with_capacity(per_axis.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        out.push(
            (0..n)
                .map(|k| lo[k] + (idx[k] as f64 + 0.5) * h[k])
                .collect(),
        );
        let mut axis = 0;
        loop {
            if axis == n {
                return out;
            }
            idx[axis] += 1;
            if idx[axis] == per_axis {
                idx[axis] = 0;
                axis += 1;
            } else {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(unit_sphere_area(2), 2.0 * pi, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * pi, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(4), 2.0 * pi * pi, max_relative = 1e-14);
    }

    #[test]
    fn kernel_closed_forms() {
        let pi = std::f64::consts::PI;
        let k = kernel_eval(2, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(k[0], 1.0 / (2.0 * pi), max_relative = 1e-14);
        assert_eq!(k[1], 0.0);
        let k3 = kernel_eval(3, &[0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(norm(&k3), 1.0 / (4.0 * pi), max_relative = 1e-14);
    }

    #[test]
    fn kernel_homogeneity() {
        let x = [0.3, -0.4, 0.2];
        let k1 = kernel_eval(3, &x).unwrap();
        let x2: Vec<f64> = x.iter().map(|&c| 2.0 * c).collect();
        let k2 = kernel_eval(3, &x2).unwrap();
        for (a, b) in k1.iter().zip(&k2) {
            assert_relative_eq!(*b, 0.25 * a, max_relative = 1e-13);
        }
    }

    #[test]
    fn kernel_rejects_origin() {
        assert!(kernel_eval(2, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn single_atom_field_is_the_kernel() {
        let mu = AtomicMeasure::new(2, vec![(vec![0.0, 0.0], 1.0)], 1e-3).unwrap();
        let f = solve_divergence(&mu, &[vec![1.0, 0.0]], Some(1e-3)).unwrap();
        let k = kernel_eval(2, &[1.0, 0.0]).unwrap();
        assert_eq!(f.values[0], k);
    }

    #[test]
    fn field_is_linear_in_the_measure() {
        let a = AtomicMeasure::new(2, vec![(vec![0.0, 0.0], 0.7)], 1e-3).unwrap();
        let b = AtomicMeasure::new(2, vec![(vec![0.5, 0.25], 1.3)], 1e-3).unwrap();
        let ab = AtomicMeasure::new(
            2,
            vec![(vec![0.0, 0.0], 0.7), (vec![0.5, 0.25], 1.3)],
            1e-3,
        )
        .unwrap();
        let pts = vec![vec![2.0, 1.0], vec![-1.0, 0.5]];
        let fa = solve_divergence(&a, &pts, Some(1e-3)).unwrap();
        let fb = solve_divergence(&b, &pts, Some(1e-3)).unwrap();
        let fab = solve_divergence(&ab, &pts, Some(1e-3)).unwrap();
        for i in 0..pts.len() {
            for k in 0..2 {
                assert_relative_eq!(
                    fab.values[i][k],
                    fa.values[i][k] + fb.values[i][k],
                    max_relative = 1e-12,
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn field_is_translation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let atoms: Vec<(Vec<f64>, f64)> = (0..15)
            .map(|_| {
                (
                    vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    rng.random_range(0.1..1.0),
                )
            })
            .collect();
        let shift = [2.5, -1.25];
        let shifted: Vec<(Vec<f64>, f64)> = atoms
            .iter()
            .map(|(p, m)| (vec![p[0] + shift[0], p[1] + shift[1]], *m))
            .collect();
        let mu = AtomicMeasure::new(2, atoms, 1e-3).unwrap();
        let mu_t = AtomicMeasure::new(2, shifted, 1e-3).unwrap();
        let pts = vec![vec![1.5, 0.5], vec![-0.25, 1.75]];
        let pts_t: Vec<Vec<f64>> =
            pts.iter().map(|p| vec![p[0] + shift[0], p[1] + shift[1]]).collect();
        let f = solve_divergence(&mu, &pts, Some(1e-3)).unwrap();
        let ft = solve_divergence(&mu_t, &pts_t, Some(1e-3)).unwrap();
        for i in 0..pts.len() {
            for k in 0..2 {
                assert_relative_eq!(f.values[i][k], ft.values[i][k], max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn far_field_decay_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let big_r = 1.0;
        let atoms: Vec<(Vec<f64>, f64)> = (0..25)
            .map(|_| {
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r: f64 = rng.random_range(0.0..big_r);
                (vec![r * theta.cos(), r * theta.sin()], rng.random_range(0.1..1.0))
            })
            .collect();
        let mu = AtomicMeasure::new(2, atoms, 1e-3).unwrap();
        let total = mu.total_mass();
        let sigma = unit_sphere_area(2);
        for _ in 0..20 {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r: f64 = rng.random_range(2.0 * big_r..6.0 * big_r);
            let x = vec![r * theta.cos(), r * theta.sin()];
            let f = solve_divergence(&mu, &[x.clone()], Some(1e-3)).unwrap();
            let bound = total / (sigma * (norm(&x) - big_r));
            assert!(norm(&f.values[0]) <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mass_scaling_scales_sup_exactly() {
        let mu = AtomicMeasure::new(
            2,
            vec![(vec![0.2, 0.2], 1.0), (vec![0.8, 0.4], 0.5)],
            1e-2,
        )
        .unwrap();
        let pts = grid_points(&[-0.5, -0.5], &[1.5, 1.5], 16);
        let f1 = solve_divergence(&mu, &pts, Some(0.05)).unwrap();
        let f2 = solve_divergence(&mu.scale(3.0).unwrap(), &pts, Some(0.05)).unwrap();
        assert_relative_eq!(f2.sup_norm, 3.0 * f1.sup_norm, max_relative = 1e-13);
    }

    #[test]
    fn residual_zero_measure_is_machine_zero() {
        let mu = AtomicMeasure::new(2, vec![], 1e-2).unwrap();
        let bump = Bump::new(vec![0.0, 0.0], 0.8).unwrap();
        let quad = QuadratureSpec {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
            cells_per_axis: 32,
            exclusion_radius: 1e-3,
        };
        let rep = weak_divergence_residual(&mu, &bump, &quad).unwrap();
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn residual_shrinks_with_refinement() {
        let mu = AtomicMeasure::new(2, vec![(vec![0.0, 0.0], 1.0)], 1e-4).unwrap();
        let bump = Bump::new(vec![0.0, 0.0], 0.8).unwrap();
        let run = |cells: usize| {
            let h = 2.0 / cells as f64;
            let quad = QuadratureSpec {
                lo: vec![-1.0, -1.0],
                hi: vec![1.0, 1.0],
                cells_per_axis: cells,
                exclusion_radius: 0.5 * h,
            };
            weak_divergence_residual(&mu, &bump, &quad).unwrap()
        };
        let coarse = run(64);
        let fine = run(128);
        assert!(fine.residual < coarse.residual);
        // The measure term is exactly -phi(0) * mass = -1.
        assert_relative_eq!(coarse.measure_term, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn bump_support_must_fit_domain() {
        let mu = AtomicMeasure::new(2, vec![(vec![0.0, 0.0], 1.0)], 1e-3).unwrap();
        let bump = Bump::new(vec![0.6, 0.0], 0.8).unwrap();
        let quad = QuadratureSpec {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
            cells_per_axis: 16,
            exclusion_radius: 1e-3,
        };
        assert!(weak_divergence_residual(&mu, &bump, &quad).is_err());
    }

    #[test]
    fn study_needs_three_levels() {
        let mu = AtomicMeasure::new(2, vec![(vec![0.5, 0.5], 1.0)], 1e-2).unwrap();
        let pts = grid_points(&[0.0, 0.0], &[1.0, 1.0], 4);
        assert!(supnorm_refinement_study(&[(1, &mu), (2, &mu)], &pts, 0.05).is_err());
    }

    #[test]
    fn point_mass_sup_diverges_as_rho_shrinks() {
        // |f| = 1/(2 pi d) around a unit atom: tightening the exclusion
        // radius tenfold lets the sup grow about tenfold.
        let mu = AtomicMeasure::new(2, vec![(vec![0.0, 0.0], 1.0)], 1e-6).unwrap();
        let pts = grid_points(&[-0.2, -0.2], &[0.2, 0.2], 512);
        let wide = solve_divergence(&mu, &pts, Some(1e-2)).unwrap();
        let tight = solve_divergence(&mu, &pts, Some(1e-3)).unwrap();
        assert!(
            tight.sup_norm >= 5.0 * wide.sup_norm,
            "growth factor {} too small",
            tight.sup_norm / wide.sup_norm
        );
    }
}
