//! Exact suprema of ball-growth ratios over the critical radii of an
//! atomic measure.
//!
//! For fixed center x the map `r -> mu(B[x, r + delta])` is a right-
//! continuous step function jumping exactly at the atom distances, while
//! `r -> r^s` increases, so the ratio decreases between jumps and its
//! supremum over a radius window is attained on the finite critical set
//! {window start} union {jump radii}. Everything here evaluates that
//! finite set; no sampling is involved.
//!
//! The hot path classifies atoms in squared-distance space (one square
//! root per evaluated jump, not per atom) and prunes distance bins whose
//! rigorous upper bound cannot beat the running maximum. Pruning ties
//! closer than 1e-12 relative may resolve either way; certificate slacks
//! sit orders of magnitude above that.

use rayon::prelude::*;

use crate::measure::AtomicMeasure;
use crate::numeric::{dist, CompensatedSum};

/// Relative inflation applied to bin bounds so floating-point summation
/// error can never make pruning unsound.
const PRUNE_SAFETY: f64 = 1e-12;

/// Atoms below this count skip the binned machinery.
const BIN_PATH_MIN_ATOMS: usize = 512;


/// Distinct atom distances from `center` with the cumulative mass at each
/// (closed-ball convention: the cumulative at distance d includes every
/// atom at distance exactly d). Summation follows the fixed atom order.
pub(crate) fn sorted_jumps(mu: &AtomicMeasure, center: &[f64]) -> Vec<(f64, f64)> {
    let mut order: Vec<(f64, usize)> = (0..mu.len())
        .map(|i| (dist(mu.position(i), center), i))
        .collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(order.len());
    let mut acc = CompensatedSum::new();
    for &(d, i) in &order {
        acc.add(mu.mass(i));
        match jumps.last_mut() {
            Some(last) if last.0 == d => last.1 = acc.value(),
            _ => jumps.push((d, acc.value())),
        }
    }
    jumps
}

/// One center's contribution to a ratio supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CenterSup {
    pub sup: f64,
    pub radius: f64,
}

/// Per-center query: `weight * mu(B[x, r + delta]) / r^exponent` over
/// `r in [r_lo, r_hi]` (`r_hi = None` means unbounded above).
#[derive(Debug, Clone, Copy)]
pub(crate) struct RatioWindow {
    pub weight: f64,
    pub r_lo: f64,
    pub r_hi: Option<f64>,
}

/// Coordinate-major copy of the atom positions; built once per query.
struct Soa {
    coords: Vec<Vec<f64>>,
    masses: Vec<f64>,
    /// Largest atom norm; bounds any center's distance range a priori.
    max_norm: f64,
}

impl Soa {
    fn build(mu: &AtomicMeasure) -> Self {
        let n = mu.dim();
        let len = mu.len();
        let mut coords = vec![Vec::with_capacity(len); n];
        for i in 0..len {
            let pos = mu.position(i);
            for (k, c) in coords.iter_mut().enumerate() {
                c.push(pos[k]);
            }
        }
        Soa { coords, masses: mu.masses().to_vec(), max_norm: mu.max_norm() }
    }

    /// Squared distances from `center` into `out`.
    fn fill_d2(&self, center: &[f64], out: &mut Vec<f64>) {
        let len = self.masses.len();
        out.clear();
        out.resize(len, 0.0);
        match self.coords.len() {
            1 => {
                let c0 = center[0];
                for (o, &x) in out.iter_mut().zip(&self.coords[0]) {
                    let dx = x - c0;
                    *o = dx * dx;
                }
            }
            2 => {
                let (c0, c1) = (center[0], center[1]);
                for ((o, &x), &y) in out.iter_mut().zip(&self.coords[0]).zip(&self.coords[1]) {
                    let dx = x - c0;
                    let dy = y - c1;
                    *o = dx * dx + dy * dy;
                }
            }
            3 => {
                let (c0, c1, c2) = (center[0], center[1], center[2]);
                for (((o, &x), &y), &z) in out
                    .iter_mut()
                    .zip(&self.coords[0])
                    .zip(&self.coords[1])
                    .zip(&self.coords[2])
                {
                    let dx = x - c0;
                    let dy = y - c1;
                    let dz = z - c2;
                    *o = dx * dx + dy * dy + dz * dz;
                }
            }
            _ => {
                for (k, axis) in self.coords.iter().enumerate() {
                    let ck = center[k];
                    for (o, &x) in out.iter_mut().zip(axis) {
                        let d = x - ck;
                        *o += d * d;
                    }
                }
            }
        }
    }
}

/// Window boundaries in squared-distance space. An atom participates in
/// the boundary cumulative when `d2 <= u_lo2` and as a jump when
/// `u_lo2 < d2 <= u_cap2`; both paths share these predicates.
#[derive(Clone, Copy)]
struct SquaredWindow {
    u_lo2: f64,
    u_cap2: f64,
    weight: f64,
    r_lo: f64,
    delta: f64,
    exponent: f64,
}

impl SquaredWindow {
    fn new(delta: f64, exponent: f64, win: &RatioWindow) -> Option<Self> {
        if win.r_hi.is_some_and(|hi| hi < win.r_lo) {
            return None;
        }
        let u_lo = win.r_lo + delta;
        let u_cap2 = win.r_hi.map_or(f64::INFINITY, |hi| {
            let u = hi + delta;
            u * u
        });
        Some(SquaredWindow {
            u_lo2: u_lo * u_lo,
            u_cap2,
            weight: win.weight,
            r_lo: win.r_lo,
            delta,
            exponent,
        })
    }

    fn boundary_ratio(&self, cum: f64) -> f64 {
        self.weight * cum / self.r_lo.powf(self.exponent)
    }

    fn jump_ratio(&self, d2: f64, cum: f64) -> (f64, f64) {
        let r = d2.sqrt() - self.delta;
        (self.weight * cum / r.powf(self.exponent), r)
    }
}

/// Walks `(d2, idx)` items sorted ascending, updating `best` with every
/// admissible jump; ties prefer the smaller radius. Returns the boundary
/// cumulative mass if the boundary falls inside this run.
fn walk_sorted(
    items: &[(f64, u32)],
    masses: &[f64],
    cum_start: f64,
    sw: &SquaredWindow,
    best: &mut CenterSup,
) -> Option<f64> {
    let mut cum = CompensatedSum::new();
    cum.add(cum_start);
    let mut boundary: Option<f64> = None;
    let mut i = 0;
    while i < items.len() {
        let d2 = items[i].0;
        while i < items.len() && items[i].0 == d2 {
            cum.add(masses[items[i].1 as usize]);
            i += 1;
        }
        if d2 <= sw.u_lo2 {
            boundary = Some(cum.value());
            continue;
        }
        if d2 > sw.u_cap2 {
            break;
        }
        let (ratio, r) = sw.jump_ratio(d2, cum.value());
        if ratio > best.sup || (ratio == best.sup && r < best.radius) {
            *best = CenterSup { sup: ratio, radius: r };
        }
    }
    boundary
}

/// Reference implementation: full sort of the squared distances. Exact;
/// used for small centers and as the oracle for the binned path.
pub(crate) fn center_ratio_sup_sorted(
    mu: &AtomicMeasure,
    center: &[f64],
    delta: f64,
    exponent: f64,
    win: &RatioWindow,
) -> Option<CenterSup> {
    let sw = SquaredWindow::new(delta, exponent, win)?;
    let mut items: Vec<(f64, u32)> = (0..mu.len())
        .map(|i| {
            let p = mu.position(i);
            let d2: f64 = p
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i as u32)
        })
        .collect();
    items.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = CenterSup { sup: 0.0, radius: sw.r_lo };
    let boundary = walk_sorted(&items, mu.masses(), 0.0, &sw, &mut best);
    let ratio = sw.boundary_ratio(boundary.unwrap_or(0.0));
    if ratio > best.sup || (ratio == best.sup && sw.r_lo < best.radius) {
        best = CenterSup { sup: ratio, radius: sw.r_lo };
    }
    Some(best)
}

/// Scratch buffers reused across centers within one worker thread.
#[derive(Default)]
struct Scratch {
    d2: Vec<f64>,
    bin_idx: Vec<u16>,
    bin_mass: Vec<f64>,
    bin_count: Vec<u32>,
    offsets: Vec<u32>,
    cursor: Vec<u32>,
    slots: Vec<u32>,
    cum_through: Vec<f64>,
    bounds: Vec<f64>,
    local: Vec<(f64, u32)>,
}

/// Sentinel for atoms outside the binned range.
const OUT_OF_RANGE: u16 = u16::MAX;

fn center_ratio_sup_binned(
    soa: &Soa,
    center: &[f64],
    delta: f64,
    exponent: f64,
    win: &RatioWindow,
    scratch: &mut Scratch,
) -> Option<CenterSup> {
    let sw = SquaredWindow::new(delta, exponent, win)?;
    let n_atoms = soa.masses.len();
    soa.fill_d2(center, &mut scratch.d2);
    // Top of the binned range: no atom lies beyond max_norm + |center|,
    // and atoms beyond the radius cap cannot affect any admissible
    // evaluation. Always >= u_lo2 so the boundary bin exists.
    let center_norm2: f64 = center.iter().map(|c| c * c).sum();
    let reach = soa.max_norm + center_norm2.sqrt();
    let top2 = (reach * reach).min(sw.u_cap2).max(sw.u_lo2);
    let n_bins = (n_atoms / 32).clamp(64, 2048);
    let inv_width2 = n_bins as f64 / top2;
    let bin_of = |d2: f64| -> usize { ((d2 * inv_width2) as usize).min(n_bins - 1) };
    let boundary_bin = bin_of(sw.u_lo2);

    scratch.bin_mass.clear();
    scratch.bin_mass.resize(n_bins, 0.0);
    scratch.bin_count.clear();
    scratch.bin_count.resize(n_bins, 0);
    scratch.bin_idx.clear();
    scratch.bin_idx.resize(n_atoms, OUT_OF_RANGE);
    {
        let d2s = &scratch.d2[..n_atoms];
        let idxs = &mut scratch.bin_idx[..n_atoms];
        let masses = &soa.masses[..n_atoms];
        for i in 0..n_atoms {
            let d2 = d2s[i];
            if d2 <= top2 {
                let b = bin_of(d2);
                scratch.bin_mass[b] += masses[i];
                scratch.bin_count[b] += 1;
                idxs[i] = b as u16;
            }
        }
    }
    // Counting sort of atom ids by bin, so refining a bin only touches
    // its own atoms.
    scratch.offsets.clear();
    scratch.offsets.push(0);
    for b in 0..n_bins {
        let prev = scratch.offsets[b];
        scratch.offsets.push(prev + scratch.bin_count[b]);
    }
    let in_range = scratch.offsets[n_bins] as usize;
    scratch.slots.clear();
    scratch.slots.resize(in_range, 0);
    scratch.cursor.clear();
    scratch.cursor.extend_from_slice(&scratch.offsets[..n_bins]);
    for (i, &tag) in scratch.bin_idx.iter().enumerate() {
        if tag != OUT_OF_RANGE {
            let b = tag as usize;
            scratch.slots[scratch.cursor[b] as usize] = i as u32;
            scratch.cursor[b] += 1;
        }
    }
    // Cumulative mass through the end of each bin, fixed bin order.
    scratch.cum_through.clear();
    let mut acc = CompensatedSum::new();
    for b in 0..n_bins {
        acc.add(scratch.bin_mass[b]);
        scratch.cum_through.push(acc.value());
    }

    // Exact evaluation of one bin: gather its atoms, sort, walk.
    // Returns the boundary cumulative when the boundary lies here.
    let eval_bin = |b: usize, best: &mut CenterSup, scratch: &mut Scratch| -> Option<f64> {
        let lo = scratch.offsets[b] as usize;
        let hi = scratch.offsets[b + 1] as usize;
        scratch.local.clear();
        for &slot in &scratch.slots[lo..hi] {
            scratch.local.push((scratch.d2[slot as usize], slot));
        }
        scratch
            .local
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let cum_before = if b == 0 { 0.0 } else { scratch.cum_through[b - 1] };
        let boundary = walk_sorted(&scratch.local, &soa.masses, cum_before, &sw, best);
        if b == boundary_bin {
            Some(boundary.unwrap_or(cum_before))
        } else {
            None
        }
    };

    let mut best = CenterSup { sup: 0.0, radius: sw.r_lo };
    let boundary_cum = eval_bin(boundary_bin, &mut best, scratch).unwrap_or(0.0);
    let ratio = sw.boundary_ratio(boundary_cum);
    if ratio > best.sup || (ratio == best.sup && sw.r_lo < best.radius) {
        best = CenterSup { sup: ratio, radius: sw.r_lo };
    }

    // Rigorous per-bin upper bounds. Bins at or below the boundary bin
    // hold no jump radii: the boundary evaluation absorbed them.
    let width2 = top2 / n_bins as f64;
    scratch.bounds.clear();
    scratch.bounds.resize(n_bins, 0.0);
    for b in (boundary_bin + 1)..n_bins {
        if scratch.bin_count[b] == 0 {
            continue;
        }
        let lo2 = b as f64 * width2;
        let r_floor = (lo2.sqrt() - delta).max(sw.r_lo);
        scratch.bounds[b] = sw.weight * scratch.cum_through[b] * (1.0 + PRUNE_SAFETY)
            / r_floor.powf(exponent);
    }
    // Selection scan: refine the best remaining bound until none beats
    // the running maximum. Refining every bin in the worst case amounts
    // to one radix-sorted full walk.
    loop {
        let mut arg = usize::MAX;
        let mut ub = best.sup;
        for (b, &bound) in scratch.bounds.iter().enumerate() {
            if bound > ub {
                ub = bound;
                arg = b;
            }
        }
        if arg == usize::MAX {
            return Some(best);
        }
        scratch.bounds[arg] = 0.0;
        eval_bin(arg, &mut best, scratch);
    }
}

/// Global supremum over a candidate list.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MultiCenterSup {
    pub sup: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Number of centers with a nonempty admissible radius window.
    pub admissible_centers: usize,
}

/// Evaluates the ratio supremum over every candidate center in parallel.
/// `window(center)` returns the per-center weight and radius window, or
/// `None` to skip the center. Per-center results are reduced in input
/// order, so the attaining pair is deterministic: ties keep the earliest
/// center, then the smallest radius. Callers pass candidates sorted
/// lexicographically.
pub(crate) fn ratio_sup_over_centers(
    mu: &AtomicMeasure,
    centers: &[Vec<f64>],
    delta: f64,
    exponent: f64,
    window: impl Fn(&[f64]) -> Option<RatioWindow> + Sync,
) -> MultiCenterSup {
    let use_bins = mu.len() >= BIN_PATH_MIN_ATOMS;
    let soa = use_bins.then(|| Soa::build(mu));
    let per_center: Vec<Option<CenterSup>> = centers
        .par_iter()
        .map_init(Scratch::default, |scratch, c| {
            let win = window(c)?;
            match &soa {
                Some(soa) => center_ratio_sup_binned(soa, c, delta, exponent, &win, scratch),
                None => center_ratio_sup_sorted(mu, c, delta, exponent, &win),
            }
        })
        .collect();
    let mut out = MultiCenterSup {
        sup: 0.0,
        center: Vec::new(),
        radius: f64::NAN,
        admissible_centers: 0,
    };
    for (i, res) in per_center.iter().enumerate() {
        let Some(cs) = res else { continue };
        out.admissible_centers += 1;
        if out.center.is_empty() || cs.sup > out.sup {
            out.sup = cs.sup;
            out.center = centers[i].clone();
            out.radius = cs.radius;
        }
    }
    out
}
