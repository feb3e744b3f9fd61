//! Scratch calibration runs for regression constants (not shipped).

use std::time::Instant;

use frostman_core::decay::{certify_cond1, certify_cond2, reweight, DecayParams};
use frostman_core::dyadic::{box_dimension_estimate, gen_four_corner_cantor, CubeSet};
use frostman_core::frostman::{ball_growth_normalize, greedy_frostman};
use frostman_core::growth::{bp1_sup, bp2_uniform, OperatorOrderParams};
use frostman_core::measure::gen_power_density;
use frostman_core::witness::{
    grid_points, supnorm_refinement_study, weak_divergence_residual, Bump, QuadratureSpec,
};
use frostman_core::measure::AtomicMeasure;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "boxdim" => boxdim(),
        "power" => power(),
        "residual" => residual(),
        "pipeline" => pipeline(),
        "lebesgue" => lebesgue(),
        _ => eprintln!("usage: calibrate <boxdim|power|residual|pipeline|lebesgue>"),
    }
}

fn boxdim() {
    for gens in [5u32, 6] {
        let t = Instant::now();
        let set = gen_four_corner_cantor(0.35, gens).unwrap();
        println!("gen {gens}: level={} members={} ({:?})", set.level(), set.len(), t.elapsed());
        for levels in [3u32..=6, 3..=7, 4..=7] {
            let coarse: Vec<CubeSet> =
                levels.clone().map(|l| set.coarsen(l).unwrap()).collect();
            let refs: Vec<&CubeSet> = coarse.iter().collect();
            let counts: Vec<usize> = refs.iter().map(|s| s.len()).collect();
            let slope = box_dimension_estimate(&refs).unwrap();
            println!("  levels {levels:?}: counts {counts:?} slope {slope:.4}");
        }
    }
    // Alternative oracle: per-generation sets at their own snap levels.
    let sets: Vec<CubeSet> = (3..=6).map(|g| gen_four_corner_cantor(0.35, g).unwrap()).collect();
    let refs: Vec<&CubeSet> = sets.iter().collect();
    let levels: Vec<u32> = refs.iter().map(|s| s.level()).collect();
    let counts: Vec<usize> = refs.iter().map(|s| s.len()).collect();
    println!("per-gen sets: levels {levels:?} counts {counts:?} slope {:.4}",
        box_dimension_estimate(&refs).unwrap());
}

fn power() {
    let p = OperatorOrderParams::new(2, 1).unwrap();
    for denom in [32.0f64, 64.0, 128.0] {
        let h = 1.0 / denom;
        let nu = gen_power_density(2, 1, 1.0, h).unwrap();
        let sup = bp1_sup(&nu, &p, h, 2.0).unwrap();
        println!(
            "h=1/{denom}: atoms={} total={:.6} sup={:.12} at r={:.6} (2pi={:.6})",
            nu.len(),
            nu.total_mass(),
            sup.sup,
            sup.radius,
            std::f64::consts::TAU
        );
    }
    // Pointwise regularity on the grid measure.
    let h = 1.0 / 64.0;
    let nu = gen_power_density(2, 1, 1.0, h).unwrap();
    let candidates: Vec<Vec<f64>> = nu
        .atoms()
        .map(|(pos, _)| pos.to_vec())
        .filter(|pos| pos.iter().map(|c| c * c).sum::<f64>().sqrt() > 0.1)
        .collect();
    let t = Instant::now();
    let rep = frostman_core::growth::pointwise_regularity_check(
        &nu,
        &p,
        f64::INFINITY,
        &candidates,
        0.0,
    )
    .unwrap();
    println!(
        "pointwise sup={:.12} at {:?} r={:.6} ({} candidates, {:?})",
        rep.sup,
        rep.center,
        rep.radius,
        candidates.len(),
        t.elapsed()
    );
}

fn residual() {
    let mu = AtomicMeasure::new(2, vec![(vec![0.0, 0.0], 1.0)], 1e-6).unwrap();
    let bump = Bump::new(vec![0.0, 0.0], 0.8).unwrap();
    let grad_sup = bump.gradient_sup_norm();
    println!("sup|grad phi| = {grad_sup:.6}, budget 1e-3*scale = {:.3e}", 1e-3 * grad_sup);
    let mut prev: Option<f64> = None;
    for cells in [128usize, 256, 512] {
        let h = 2.0 / cells as f64;
        for rho_frac in [0.25, 0.5, 1.0] {
            let quad = QuadratureSpec {
                lo: vec![-1.0, -1.0],
                hi: vec![1.0, 1.0],
                cells_per_axis: cells,
                exclusion_radius: rho_frac * h,
            };
            let t = Instant::now();
            let rep = weak_divergence_residual(&mu, &bump, &quad).unwrap();
            println!(
                "cells={cells} rho={rho_frac}h: residual={:.6e} excluded_bound={:.3e} ({:?})",
                rep.residual,
                rep.excluded_bound,
                t.elapsed()
            );
            if rho_frac == 0.5 {
                if let Some(p) = prev {
                    println!("   order vs prev: {:.3}", (p / rep.residual).log2());
                }
                prev = Some(rep.residual);
            }
        }
    }
    // Disjoint bump.
    let bump_far = Bump::new(vec![3.0, 0.0], 0.8).unwrap();
    let quad = QuadratureSpec {
        lo: vec![2.0, -1.0],
        hi: vec![4.0, 1.0],
        cells_per_axis: 512,
        exclusion_radius: 0.5 * (2.0 / 512.0),
    };
    let rep = weak_divergence_residual(&mu, &bump_far, &quad).unwrap();
    println!("disjoint bump 512: residual={:.6e}", rep.residual);
}

fn pipeline() {
    let alpha = 0.2;
    let s = 1.2;
    let params = DecayParams::new(alpha, s, 2).unwrap();
    let op = OperatorOrderParams::new(2, 1).unwrap();
    let mut measures: Vec<(u32, AtomicMeasure)> = Vec::new();
    for gens in [5u32, 6, 7] {
        let t = Instant::now();
        let set = gen_four_corner_cantor(0.35, gens).unwrap();
        let nu = greedy_frostman(&set, s).unwrap();
        let candidates: Vec<Vec<f64>> = nu.atoms().map(|(p, _)| p.to_vec()).collect();
        let delta = nu.r_min();
        let (nu_hat, m) = ball_growth_normalize(&nu, s, &candidates, delta).unwrap();
        let t_norm = t.elapsed();
        let mu = reweight(&nu_hat, alpha).unwrap();
        let c1 = certify_cond1(&mu, &params).unwrap();
        let t1 = Instant::now();
        let c2 = certify_cond2(&mu, &params, &candidates, delta).unwrap();
        let t_c2 = t1.elapsed();
        let samples: Vec<Vec<f64>> = candidates.iter().step_by(candidates.len() / 100 + 1).cloned().collect();
        let b2 = bp2_uniform(&mu, &op, &samples, mu.r_min(), 0.5).unwrap();
        let dini_bound = c2.sup * (-alpha).exp2() / alpha;
        println!(
            "gen {gens}: atoms={} M={m:.4} cond1 {:.4}/{:.1} cond2 {:.4}/{:.3} bp2 {:.5} (bound {:.5}) norm={t_norm:?} c2={t_c2:?}",
            nu.len(), c1.sup, c1.constant, c2.sup, c2.constant, b2.max, dini_bound,
        );
        // Fixed total mass normalization for the field study.
        let unit = mu.scale(1.0 / mu.total_mass()).unwrap();
        measures.push((gens, unit));
    }
    let refs: Vec<(u32, &AtomicMeasure)> = measures.iter().map(|(l, m)| (*l, m)).collect();
    for rho in [0.01f64, 0.02, 0.05] {
        for grid_n in [41usize, 61] {
            let pts = grid_points(&[-0.25, -0.25], &[1.25, 1.25], grid_n);
            let t = Instant::now();
            let rows = supnorm_refinement_study(&refs, &pts, rho).unwrap();
            let sups: Vec<String> = rows
                .iter()
                .map(|r| format!("L{}={:.5}(x{:.3},skip {})", r.level, r.sup,
                    r.ratio.unwrap_or(f64::NAN), r.skipped))
                .collect();
            println!("rho={rho} grid={grid_n}: {} ({:?})", sups.join(" "), t.elapsed());
        }
    }
}

fn lebesgue() {
    // Uniform measure on the full level-5 square grid.
    let level = 5u32;
    let h = 0.5f64.powi(level as i32);
    let side = 1i64 << level;
    let mut atoms = Vec::new();
    for i in 0..side {
        for j in 0..side {
            atoms.push((vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h], h * h));
        }
    }
    let nu = AtomicMeasure::new(2, atoms, h).unwrap();
    let candidates: Vec<Vec<f64>> = nu.atoms().map(|(p, _)| p.to_vec()).collect();
    let (_, m) = ball_growth_normalize(&nu, 2.0, &candidates, 0.0).unwrap();
    println!("lebesgue L=5 s=2 delta=0: M = {m:.15}");
    let (_, m_delta) = ball_growth_normalize(&nu, 2.0, &candidates, h).unwrap();
    println!("lebesgue L=5 s=2 delta=h: M = {m_delta:.15}");
}
