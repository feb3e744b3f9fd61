//! Integer-indexed dyadic cubes, finite cube sets, fractal set generators
//! and box-counting dimension estimation.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Deepest level whose indices are guaranteed to fit comfortably in `i64`.
pub const MAX_LEVEL: u32 = 60;

/// Half-open dyadic cube `prod_i [index_i * 2^-level, (index_i + 1) * 2^-level)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicCube {
    level: u32,
    index: Vec<i64>,
}

impl DyadicCube {
    pub fn new(level: u32, index: Vec<i64>) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::param("cube index must have arity >= 1"));
        }
        if level > MAX_LEVEL {
            return Err(Error::InstanceTooLarge(format!(
                "level {level} exceeds the 64-bit indexable maximum {MAX_LEVEL}"
            )));
        }
        Ok(Self { level, index })
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &[i64] {
        &self.index
    }

    /// Side length `2^-level`, exactly representable.
    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn corner(&self) -> Vec<f64> {
        let h = self.side();
        self.index.iter().map(|&i| i as f64 * h).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        let h = self.side();
        self.index.iter().map(|&i| (i as f64 + 0.5) * h).collect()
    }

    /// The 2^n children at `level + 1`.
    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        let mut out = Vec::with_capacity(1 << n);
        for bits in 0..(1u64 << n) {
            let index = self
                .index
                .iter()
                .enumerate()
                .map(|(j, &i)| 2 * i + ((bits >> j) & 1) as i64)
                .collect();
            out.push(DyadicCube { level: self.level + 1, index });
        }
        out
    }

    /// Ancestor at a coarser level. Arithmetic shift floors correctly for
    /// negative indices.
    pub fn ancestor(&self, level: u32) -> DyadicCube {
        assert!(level <= self.level);
        let shift = self.level - level;
        DyadicCube {
            level,
            index: self.index.iter().map(|&i| i >> shift).collect(),
        }
    }

    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }
}

/// A finite set of dyadic cubes, all at one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeSet {
    n: usize,
    level: u32,
    members: BTreeSet<Vec<i64>>,
}

impl CubeSet {
    pub fn new(n: usize, level: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("ambient dimension must be >= 1"));
        }
        if level > MAX_LEVEL {
            return Err(Error::InstanceTooLarge(format!(
                "level {level} exceeds the 64-bit indexable maximum {MAX_LEVEL}"
            )));
        }
        Ok(Self { n, level, members: BTreeSet::new() })
    }

    pub fn from_members(n: usize, level: u32, members: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        let mut set = Self::new(n, level)?;
        for idx in members {
            set.insert(idx)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, index: Vec<i64>) -> Result<()> {
        if index.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: index.len() });
        }
        self.members.insert(index);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.members.iter()
    }

    pub fn contains(&self, index: &[i64]) -> bool {
        self.members.contains(index)
    }

    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        self.members
            .iter()
            .map(|idx| DyadicCube { level: self.level, index: idx.clone() })
    }

    /// Set of distinct ancestors at a coarser level.
    pub fn coarsen(&self, level: u32) -> Result<CubeSet> {
        if level > self.level {
            return Err(Error::param(format!(
                "cannot coarsen level {} to finer level {level}",
                self.level
            )));
        }
        let shift = self.level - level;
        let members: BTreeSet<Vec<i64>> = self
            .members
            .iter()
            .map(|idx| idx.iter().map(|&i| i >> shift).collect())
            .collect();
        Ok(CubeSet { n: self.n, level, members })
    }

    /// Full set of all 2^(n*level) cubes of the unit cube at `level`.
    pub fn full_unit_cube(n: usize, level: u32) -> Result<CubeSet> {
        if (n as u64) * (level as u64) > 24 {
            return Err(Error::InstanceTooLarge(format!(
                "full unit cube at n={n}, level={level} has 2^{} members",
                n as u64 * level as u64
            )));
        }
        let side = 1i64 << level;
        let mut set = CubeSet::new(n, level)?;
        let mut idx = vec![0i64; n];
        loop {
            set.insert(idx.clone())?;
            let mut axis = 0;
            loop {
                if axis == n {
                    return Ok(set);
                }
                idx[axis] += 1;
                if idx[axis] == side {
                    idx[axis] = 0;
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }
}

/// Generates the four-corner self-similar set with contraction `ratio` in
/// the unit square, iterated `generations` times, snapped outward to the
/// finest dyadic level whose cubes are no larger than the corner squares.
///
/// Each half-open generation square is replaced by the half-open dyadic
/// cubes at that level that intersect it. For `ratio = 1/4` the squares
/// align with the grid and the result has exactly `4^generations` members.
pub fn gen_four_corner_cantor(ratio: f64, generations: u32) -> Result<CubeSet> {
    if !(ratio > 0.0 && ratio < 0.5) {
        return Err(Error::param(format!(
            "corner ratio must lie in (0, 1/2), got {ratio}"
        )));
    }
    if generations == 0 {
        return Err(Error::param("need at least one generation"));
    }
    let level_f = (generations as f64) * (1.0 / ratio).log2();
    if level_f.ceil() > MAX_LEVEL as f64 {
        return Err(Error::InstanceTooLarge(format!(
            "generation {generations} at ratio {ratio} needs dyadic level {} > {MAX_LEVEL}",
            level_f.ceil()
        )));
    }
    let level = level_f.ceil() as u32;

    // Corner squares as (corner, side); children sit at offsets
    // {0, side * (1 - ratio)} in each axis.
    let mut squares: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut side = 1.0f64;
    for _ in 0..generations {
        let offset = side * (1.0 - ratio);
        let mut next = Vec::with_capacity(squares.len() * 4);
        for c in &squares {
            next.push([c[0], c[1]]);
            next.push([c[0] + offset, c[1]]);
            next.push([c[0], c[1] + offset]);
            next.push([c[0] + offset, c[1] + offset]);
        }
        squares = next;
        side *= ratio;
    }

    let scale = (level as f64).exp2();
    let mut set = CubeSet::new(2, level)?;
    for c in &squares {
        let (i0, i1) = snap_range(c[0], c[0] + side, scale);
        let (j0, j1) = snap_range(c[1], c[1] + side, scale);
        for i in i0..=i1 {
            for j in j0..=j1 {
                set.insert(vec![i, j])?;
            }
        }
    }
    Ok(set)
}

/// Indices of level cubes `[k/scale, (k+1)/scale)` meeting `[lo, hi)`.
fn snap_range(lo: f64, hi: f64, scale: f64) -> (i64, i64) {
    let first = (lo * scale).floor() as i64;
    let last = (hi * scale).ceil() as i64 - 1;
    (first, last.max(first))
}

/// Dyadic fractal percolation in the unit cube: starting from the root,
/// each cube keeps every child independently with probability `survival`,
/// down to `level`. Retries with a shifted stream if the set dies out.
pub fn gen_fractal_percolation(n: usize, level: u32, survival: f64, seed: u64) -> Result<CubeSet> {
    if !(survival > 0.0 && survival <= 1.0) {
        return Err(Error::param(format!(
            "survival probability must lie in (0, 1], got {survival}"
        )));
    }
    if n == 0 {
        return Err(Error::param("ambient dimension must be >= 1"));
    }
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut current: Vec<Vec<i64>> = vec![vec![0; n]];
        for _ in 0..level {
            let mut next = Vec::with_capacity(current.len() * 2);
            for idx in &current {
                for bits in 0..(1u64 << n) {
                    let keep = rng.random::<f64>() < survival;
                    if keep {
                        let child: Vec<i64> = idx
                            .iter()
                            .enumerate()
                            .map(|(j, &i)| 2 * i + ((bits >> j) & 1) as i64)
                            .collect();
                        next.push(child);
                    }
                }
            }
            current = next;
            if current.is_empty() {
                break;
            }
        }
        if !current.is_empty() {
            return CubeSet::from_members(n, level, current);
        }
    }
    Err(Error::Empty(format!(
        "percolation died out 64 times in a row (survival {survival})"
    )))
}

/// Least-squares slope of `log(count)` against `level * log 2` over a
/// sequence of cube sets at distinct levels. Needs at least three sets.
pub fn box_dimension_estimate(sets: &[&CubeSet]) -> Result<f64> {
    if sets.len() < 3 {
        return Err(Error::param(format!(
            "box-counting needs >= 3 levels, got {}",
            sets.len()
        )));
    }
    let xs: Vec<f64> = sets.iter().map(|s| s.level() as f64 * 2f64.ln()).collect();
    let ys: Vec<f64> = sets
        .iter()
        .map(|s| {
            if s.is_empty() {
                Err(Error::Empty("box-counting over an empty cube set".into()))
            } else {
                Ok((s.len() as f64).ln())
            }
        })
        .collect::<Result<_>>()?;
    let k = xs.len() as f64;
    let mean_x = compensated_sum(&xs) / k;
    let mean_y = compensated_sum(&ys) / k;
    let cov: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let var: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    if var == 0.0 {
        return Err(Error::param("box-counting levels must be distinct"));
    }
    Ok(cov / var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cube_side_and_children() {
        let q = DyadicCube::new(2, vec![1, 3]).unwrap();
        assert_eq!(q.side(), 0.25);
        let kids = q.children();
        assert_eq!(kids.len(), 4);
        for kid in &kids {
            assert_eq!(kid.ancestor(2), q);
            assert!(q.contains_cube(kid));
        }
    }

    #[test]
    fn ancestor_floors_negative_indices() {
        let q = DyadicCube::new(3, vec![-5]).unwrap();
        assert_eq!(q.ancestor(2).index(), &[-3]);
        assert_eq!(q.ancestor(0).index(), &[-1]);
    }

    #[test]
    fn four_corner_quarter_ratio_is_exact() {
        // ratio 1/4 aligns with the dyadic grid: generation k has exactly
        // 4^k members of side 4^-k at dyadic level 2k.
        let g1 = gen_four_corner_cantor(0.25, 1).unwrap();
        assert_eq!(g1.level(), 2);
        assert_eq!(g1.len(), 4);
        let expected: BTreeSet<Vec<i64>> =
            [vec![0, 0], vec![3, 0], vec![0, 3], vec![3, 3]].into_iter().collect();
        assert_eq!(g1.members().cloned().collect::<BTreeSet<_>>(), expected);

        for k in 2..=5 {
            let g = gen_four_corner_cantor(0.25, k).unwrap();
            assert_eq!(g.level(), 2 * k);
            assert_eq!(g.len(), 4usize.pow(k));
        }
    }

    #[test]
    fn four_corner_rejects_bad_ratio() {
        assert!(gen_four_corner_cantor(0.5, 3).is_err());
        assert!(gen_four_corner_cantor(0.0, 3).is_err());
    }

    #[test]
    fn box_dimension_of_full_square_is_two() {
        let sets: Vec<CubeSet> = (1..=5)
            .map(|l| CubeSet::full_unit_cube(2, l).unwrap())
            .collect();
        let refs: Vec<&CubeSet> = sets.iter().collect();
        let slope = box_dimension_estimate(&refs).unwrap();
        assert_relative_eq!(slope, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn box_dimension_of_single_cube_is_zero() {
        let sets: Vec<CubeSet> = (1..=5)
            .map(|l| CubeSet::from_members(2, l, vec![vec![0, 0]]).unwrap())
            .collect();
        let refs: Vec<&CubeSet> = sets.iter().collect();
        assert_eq!(box_dimension_estimate(&refs).unwrap(), 0.0);
    }

    #[test]
    fn box_dimension_of_quarter_cantor_is_one() {
        // Exact counts 4^k at side 4^-k give slope log4 / log4 = 1.
        let sets: Vec<CubeSet> = (1..=4)
            .map(|k| gen_four_corner_cantor(0.25, k).unwrap())
            .collect();
        let refs: Vec<&CubeSet> = sets.iter().collect();
        let slope = box_dimension_estimate(&refs).unwrap();
        assert_relative_eq!(slope, 1.0, epsilon = 1e-2);
    }

    #[test]
    fn box_dimension_needs_three_levels() {
        let a = CubeSet::full_unit_cube(2, 1).unwrap();
        let b = CubeSet::full_unit_cube(2, 2).unwrap();
        assert!(box_dimension_estimate(&[&a, &b]).is_err());
    }

    #[test]
    fn percolation_is_seeded_and_deterministic() {
        let a = gen_fractal_percolation(2, 5, 0.75, 42).unwrap();
        let b = gen_fractal_percolation(2, 5, 0.75, 42).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        let c = gen_fractal_percolation(2, 5, 0.75, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn coarsen_counts_distinct_ancestors() {
        let set = gen_four_corner_cantor(0.25, 3).unwrap(); // level 6, 64 members
        let coarse = set.coarsen(2).unwrap();
        assert_eq!(coarse.len(), 4);
        assert_eq!(set.coarsen(0).unwrap().len(), 1);
    }
}
