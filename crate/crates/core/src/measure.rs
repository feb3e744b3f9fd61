//! Atomic measures: finite weighted point sets with a resolution scale.
//!
//! Every measure in this crate is atomic. Growth and decay statements are
//! only asserted at radii `r >= r_min`; below its own resolution an atomic
//! measure approximates nothing.

use crate::error::{Error, Result};
use crate::numeric::{dist, norm, CompensatedSum};

/// A finite nonnegative atomic measure in `R^n`.
///
/// Atoms are stored flat and kept sorted lexicographically by position so
/// that every reduction over atoms has one fixed, reproducible order.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    n: usize,
    /// Flat positions, `n` coordinates per atom.
    positions: Vec<f64>,
    masses: Vec<f64>,
    r_min: f64,
}

/// Closed-ball query `B[x, r]`: mass is taken over distance `<= r`.
#[derive(Debug, Clone)]
pub struct BallQuery {
    center: Vec<f64>,
    radius: f64,
}

impl BallQuery {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::param(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("ball center must be finite"));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl AtomicMeasure {
    /// Builds a measure from `(position, mass)` atoms.
    ///
    /// Rejects non-finite data, nonpositive masses, arity mismatches and
    /// duplicate positions. The empty atom list is allowed (zero measure).
    pub fn new(n: usize, atoms: Vec<(Vec<f64>, f64)>, r_min: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("ambient dimension must be >= 1"));
        }
        if !(r_min.is_finite() && r_min > 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "resolution r_min must be finite and > 0, got {r_min}"
            )));
        }
        let mut flat = Vec::with_capacity(atoms.len() * n);
        let mut masses = Vec::with_capacity(atoms.len());
        for (pos, mass) in &atoms {
            if pos.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: pos.len() });
            }
            if pos.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom position".into()));
            }
            if !mass.is_finite() || *mass <= 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "atom mass must be finite and > 0, got {mass}"
                )));
            }
            flat.extend_from_slice(pos);
            masses.push(*mass);
        }
        let mut m = Self { n, positions: flat, masses, r_min };
        m.sort_atoms();
        for i in 1..m.len() {
            if m.position(i - 1) == m.position(i) {
                return Err(Error::InvalidMeasure(format!(
                    "duplicate atom position {:?}",
                    m.position(i)
                )));
            }
        }
        let total = m.total_mass();
        if !total.is_finite() {
            return Err(Error::InvalidMeasure("total mass is not finite".into()));
        }
        Ok(m)
    }

    fn sort_atoms(&mut self) {
        let n = self.n;
        let mut order: Vec<usize> = (0..self.masses.len()).collect();
        order.sort_by(|&a, &b| {
            let pa = &self.positions[a * n..(a + 1) * n];
            let pb = &self.positions[b * n..(b + 1) * n];
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let positions = order
            .iter()
            .flat_map(|&i| self.positions[i * n..(i + 1) * n].iter().copied())
            .collect();
        let masses = order.iter().map(|&i| self.masses[i]).collect();
        self.positions = positions;
        self.masses = masses;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    #[inline]
    pub(crate) fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(|i| (self.position(i), self.mass(i)))
    }

    pub fn total_mass(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for &m in &self.masses {
            acc.add(m);
        }
        acc.value()
    }

    /// Mass of the closed ball `B[x, r]`. Atoms are visited in their fixed
    /// lexicographic order with compensated summation.
    pub fn ball_mass(&self, q: &BallQuery) -> f64 {
        assert_eq!(q.center.len(), self.n, "query center arity");
        let mut acc = CompensatedSum::new();
        for (pos, mass) in self.atoms() {
            if dist(pos, &q.center) <= q.radius {
                acc.add(mass);
            }
        }
        acc.value()
    }

    /// Mass of the annulus `A_k = { k <= |x| < k+1 }`.
    pub fn annulus_mass(&self, k: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (pos, mass) in self.atoms() {
            if annulus_index(pos) == k {
                acc.add(mass);
            }
        }
        acc.value()
    }

    /// Largest annulus index carrying an atom, if any.
    pub fn max_annulus_index(&self) -> Option<u64> {
        self.atoms().map(|(pos, _)| annulus_index(pos)).max()
    }

    /// Largest atom distance from the origin (0 for the empty measure).
    pub fn max_norm(&self) -> f64 {
        self.atoms().map(|(pos, _)| norm(pos)).fold(0.0, f64::max)
    }

    /// Applies `f(position, mass)` to every atom mass. Positions, order and
    /// `r_min` are unchanged; the new masses must stay positive and finite.
    pub fn map_masses(&self, mut f: impl FnMut(&[f64], f64) -> f64) -> Result<Self> {
        let mut masses = Vec::with_capacity(self.len());
        for (pos, mass) in self.atoms() {
            let m = f(pos, mass);
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "mapped mass must be finite and > 0, got {m}"
                )));
            }
            masses.push(m);
        }
        Ok(Self { n: self.n, positions: self.positions.clone(), masses, r_min: self.r_min })
    }

    /// Scales every mass by `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::param(format!("scale factor must be > 0, got {c}")));
        }
        self.map_masses(|_, m| m * c)
    }

    /// Axis-aligned bounding box of the support as `(lo, hi)`, if nonempty.
    pub fn support_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = self.position(0).to_vec();
        let mut hi = lo.clone();
        for (pos, _) in self.atoms() {
            for (j, &c) in pos.iter().enumerate() {
                lo[j] = lo[j].min(c);
                hi[j] = hi[j].max(c);
            }
        }
        Some((lo, hi))
    }

    /// Distance from `x` to the nearest atom (`None` for the zero measure).
    pub fn nearest_atom_distance(&self, x: &[f64]) -> Option<f64> {
        self.atoms().map(|(pos, _)| dist(pos, x)).min_by(f64::total_cmp)
    }
}

/// Index `k` of the annulus `A_k = { k <= |x| < k+1 }` containing `x`.
pub fn annulus_index(x: &[f64]) -> u64 {
    norm(x).floor() as u64
}

/// Discretizes the density `|x|^-m` on an `h`-grid inside the ball of
/// radius `radius`: one atom per grid cell center `y = k*h` with mass
/// `|y|^-m * h^n`. The cell containing the origin is excluded since the
/// density is singular there.
pub fn gen_power_density(n: usize, m: u32, radius: f64, h: f64) -> Result<AtomicMeasure> {
    if n == 0 || m == 0 || (m as usize) >= n {
        return Err(Error::param(format!("need 0 < m < n, got m={m}, n={n}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param(format!("grid step must be > 0, got {h}")));
    }
    if radius <= h {
        return Err(Error::Empty(format!(
            "outer radius {radius} <= grid step {h} leaves no cells"
        )));
    }
    let k_max = (radius / h).floor() as i64;
    let mut atoms = Vec::new();
    let mut idx = vec![-k_max; n];
    loop {
        if idx.iter().any(|&k| k != 0) {
            let y: Vec<f64> = idx.iter().map(|&k| k as f64 * h).collect();
            let r = norm(&y);
            if r <= radius {
                atoms.push((y, r.powi(-(m as i32)) * h.powi(n as i32)));
            }
        }
        // Odometer over the n-dimensional index range.
        let mut axis = 0;
        loop {
            if axis == n {
                return AtomicMeasure::new(n, atoms, h);
            }
            idx[axis] += 1;
            if idx[axis] > k_max {
                idx[axis] = -k_max;
                axis += 1;
            } else {
                break;
            }
        }
    }
}
