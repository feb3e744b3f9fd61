//! Homogeneous constant-coefficient operator symbols: evaluation,
//! sampled ellipticity margins, the canceling intersection, and formal
//! adjoints with an exact weak-identity diagnostic.
//!
//! Both classification checks are falsifiers, not proofs: injectivity and
//! the range intersection quantify over every nonzero frequency, so the
//! reports carry the sample counts and tolerances they were run with.

mod poly;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use poly::{ball_cutoff, multi_indices_up_to, Poly};

/// Relative rank tolerance for singular values, as a fraction of the
/// largest singular value in the matrix at hand.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// A homogeneous operator `sum_{|alpha|=m} c_alpha d^alpha` from E-valued
/// to F-valued functions, stored as its coefficient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSymbol {
    n: usize,
    order: u32,
    dim_e: usize,
    dim_f: usize,
    coeffs: BTreeMap<Vec<u32>, DMatrix<Complex64>>,
}

impl OperatorSymbol {
    pub fn new(
        n: usize,
        order: u32,
        dim_e: usize,
        dim_f: usize,
        coeffs: BTreeMap<Vec<u32>, DMatrix<Complex64>>,
    ) -> Result<Self> {
        if n == 0 || dim_e == 0 || dim_f == 0 || order == 0 {
            return Err(Error::param(
                "need n >= 1, order >= 1 and positive fiber dimensions",
            ));
        }
        let mut any_nonzero = false;
        for (alpha, c) in &coeffs {
            if alpha.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: alpha.len() });
            }
            if alpha.iter().sum::<u32>() != order {
                return Err(Error::param(format!(
                    "multi-index {alpha:?} does not have total order {order}"
                )));
            }
            if c.nrows() != dim_f || c.ncols() != dim_e {
                return Err(Error::param(format!(
                    "coefficient for {alpha:?} must be {dim_f}x{dim_e}, got {}x{}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            any_nonzero |= c.iter().any(|z| z.norm_sqr() > 0.0);
        }
        if !any_nonzero {
            return Err(Error::param("operator has no nonzero coefficient"));
        }
        Ok(Self { n, order, dim_e, dim_f, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    pub fn dim_f(&self) -> usize {
        self.dim_f
    }

    pub fn coefficients(&self) -> &BTreeMap<Vec<u32>, DMatrix<Complex64>> {
        &self.coeffs
    }

    /// `A(xi) = sum c_alpha xi^alpha` as a dimF x dimE matrix.
    pub fn evaluate(&self, xi: &[f64]) -> DMatrix<Complex64> {
        assert_eq!(xi.len(), self.n, "frequency arity");
        let mut out = DMatrix::<Complex64>::zeros(self.dim_f, self.dim_e);
        for (alpha, c) in &self.coeffs {
            let mut w = 1.0f64;
            for (x, &a) in xi.iter().zip(alpha) {
                w *= x.powi(a as i32);
            }
            if w != 0.0 {
                out += c * Complex64::new(w, 0.0);
            }
        }
        out
    }

    /// Formal adjoint: coefficients `(-1)^order c_alpha^H`, mapping
    /// F*-valued to E*-valued functions.
    pub fn adjoint(&self) -> OperatorSymbol {
        let sign = if self.order % 2 == 0 { 1.0 } else { -1.0 };
        let coeffs = self
            .coeffs
            .iter()
            .map(|(alpha, c)| (alpha.clone(), c.adjoint() * Complex64::new(sign, 0.0)))
            .collect();
        OperatorSymbol {
            n: self.n,
            order: self.order,
            dim_e: self.dim_f,
            dim_f: self.dim_e,
            coeffs,
        }
    }
}

/// Sampling plan shared by the ellipticity and canceling checks.
#[derive(Debug, Clone, Copy)]
pub struct SampleConfig {
    /// Deterministic grid resolution (circle points for n = 2, spiral
    /// points for n = 3). Axis directions are always included.
    pub grid_resolution: usize,
    pub random_samples: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 64,
            random_samples: 1024,
            seed: 0,
            tolerance: RANK_TOLERANCE,
        }
    }
}

/// Deterministic unit-sphere samples: the 2n signed axis directions, a
/// low-discrepancy grid for n = 2 and 3, then seeded Gaussian directions.
pub fn sphere_samples(n: usize, config: &SampleConfig) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[i] = sign;
            out.push(v);
        }
    }
    match n {
        1 => {}
        2 => {
            for j in 0..config.grid_resolution {
                let theta = std::f64::consts::TAU * j as f64 / config.grid_resolution as f64;
                out.push(vec![theta.cos(), theta.sin()]);
            }
        }
        3 => {
            // Fibonacci spiral.
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            let count = config.grid_resolution * config.grid_resolution;
            for j in 0..count {
                let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                let rho = (1.0 - z * z).sqrt();
                let theta = std::f64::consts::TAU * (j as f64 / golden).fract();
                out.push(vec![rho * theta.cos(), rho * theta.sin(), z]);
            }
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut produced = 0;
    while produced < config.random_samples {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                // Box-Muller keeps us independent of distribution crates.
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        out.push(v.into_iter().map(|x| x / norm).collect());
        produced += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EllipticityVerdict {
    /// Every sampled frequency had a healthy smallest singular value.
    NoCounterexample,
    /// A sampled frequency fell below the rank tolerance.
    Falsified,
    /// dimE > dimF: the symbol can never be injective; no sampling runs.
    DimensionObstruction,
}

#[derive(Debug, Clone)]
pub struct EllipticityReport {
    /// Minimum over samples of the smallest singular value of `A(xi)`.
    pub margin: f64,
    pub witness: Vec<f64>,
    pub verdict: EllipticityVerdict,
    pub samples: usize,
    pub tolerance: f64,
}

/// Smallest singular value of `A(xi)` minimized over the sample set.
pub fn ellipticity_margin(a: &OperatorSymbol, samples: &[Vec<f64>], tolerance: f64) -> Result<EllipticityReport> {
    if a.dim_e() > a.dim_f() {
        return Ok(EllipticityReport {
            margin: 0.0,
            witness: Vec::new(),
            verdict: EllipticityVerdict::DimensionObstruction,
            samples: 0,
            tolerance,
        });
    }
    if samples.is_empty() {
        return Err(Error::Empty("need at least one sphere sample".into()));
    }
    let mut margin = f64::INFINITY;
    let mut witness = samples[0].clone();
    for xi in samples {
        let m = a.evaluate(xi);
        let sv = m.svd(false, false).singular_values;
        // Rectangular dimF >= dimE: injectivity needs all dimE values.
        let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smallest = if sv.len() < a.dim_e() { 0.0 } else { smallest };
        if smallest < margin {
            margin = smallest;
            witness = xi.clone();
        }
    }
    let verdict = if margin > tolerance {
        EllipticityVerdict::NoCounterexample
    } else {
        EllipticityVerdict::Falsified
    };
    Ok(EllipticityReport { margin, witness, verdict, samples: samples.len(), tolerance })
}

#[derive(Debug, Clone)]
pub struct CancelingReport {
    /// Dimension of the intersection of the sampled ranges.
    pub defect: usize,
    /// Orthonormal spanning set of the final intersection.
    pub basis: Vec<DVector<Complex64>>,
    /// Some principal angle fell inside the tolerance window; the defect
    /// at this tolerance is not clearly decided.
    pub indeterminate: bool,
    pub samples: usize,
    pub tolerance: f64,
}

/// Orthonormal basis of the column space, rank-revealed at `tolerance`
/// relative to the largest singular value.
fn range_basis(m: &DMatrix<Complex64>, tolerance: f64) -> DMatrix<Complex64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > tolerance * sigma_max && s > 0.0).count();
    u.columns(0, rank).into_owned()
}

/// Intersection of two orthonormal column spaces via principal angles:
/// the singular values of `U^H V` are the cosines, and directions with
/// cosine 1 (within tolerance) span the intersection. Returns the basis
/// and whether any cosine fell in the indeterminacy window.
fn intersect_ranges(
    u: &DMatrix<Complex64>,
    v: &DMatrix<Complex64>,
    tolerance: f64,
) -> (DMatrix<Complex64>, bool) {
    if u.ncols() == 0 || v.ncols() == 0 {
        return (DMatrix::zeros(u.nrows(), 0), false);
    }
    let m = u.adjoint() * v;
    let svd = m.svd(true, false);
    let cu = svd.u.expect("left vectors requested");
    let sv = &svd.singular_values;
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] >= 1.0 - tolerance).collect();
    let indeterminate = sv
        .iter()
        .any(|&s| s >= 1.0 - 100.0 * tolerance && s < 1.0 - tolerance / 100.0);
    if keep.is_empty() {
        return (DMatrix::zeros(u.nrows(), 0), indeterminate);
    }
    let mut basis = DMatrix::<Complex64>::zeros(u.nrows(), keep.len());
    for (out_col, &i) in keep.iter().enumerate() {
        let dir = u * cu.column(i);
        basis.set_column(out_col, &dir);
    }
    // Re-orthonormalize to keep later principal-angle rounds stable.
    (range_basis(&basis, tolerance), indeterminate)
}

/// Iteratively intersects the ranges `A(xi)[E]` over the samples.
/// Defect 0 is consistent with canceling; a positive defect reports a
/// spanning basis of the common subspace found across the samples.
pub fn canceling_defect(a: &OperatorSymbol, samples: &[Vec<f64>], tolerance: f64) -> Result<CancelingReport> {
    if samples.len() < 2 {
        return Err(Error::param("need at least two sphere samples"));
    }
    let mut current = range_basis(&a.evaluate(&samples[0]), tolerance);
    let mut indeterminate = false;
    for xi in &samples[1..] {
        if current.ncols() == 0 {
            break;
        }
        let r = range_basis(&a.evaluate(xi), tolerance);
        let (next, flag) = intersect_ranges(&current, &r, tolerance);
        indeterminate |= flag;
        current = next;
    }
    let basis: Vec<DVector<Complex64>> =
        (0..current.ncols()).map(|j| current.column(j).into_owned()).collect();
    Ok(CancelingReport {
        defect: basis.len(),
        basis,
        indeterminate,
        samples: samples.len(),
        tolerance,
    })
}

/// Combined classification summary.
#[derive(Debug, Clone)]
pub struct SymbolDiagnostics {
    pub ellipticity: EllipticityReport,
    pub canceling: CancelingReport,
    pub seed: u64,
}

pub fn classify(a: &OperatorSymbol, config: &SampleConfig) -> Result<SymbolDiagnostics> {
    let samples = sphere_samples(a.dim(), config);
    let ellipticity = ellipticity_margin(a, &samples, config.tolerance)?;
    let canceling = canceling_defect(a, &samples, config.tolerance)?;
    Ok(SymbolDiagnostics { ellipticity, canceling, seed: config.seed })
}

/// Largest violation of the weak identity
/// `<A(D) phi, psi> = <phi, A*(D) psi>` over compactly supported test
/// pairs `phi = x^beta w e_i`, `psi = x^gamma w f_j` with monomial
/// degrees up to `degree` and cutoff `w = (1 - |x|^2)^(order+1)`.
/// Both pairings are exact integrals of polynomials over the unit ball.
pub fn adjoint_weak_identity_residual(a: &OperatorSymbol, degree: u32) -> f64 {
    let n = a.dim();
    let adj = a.adjoint();
    let w = ball_cutoff(n, a.order() + 1);
    let monomials = multi_indices_up_to(n, degree);

    let apply = |op: &OperatorSymbol, input: &[Poly]| -> Vec<Poly> {
        let mut out = vec![Poly::zero(n); op.dim_f()];
        for (alpha, c) in op.coefficients() {
            for (i, p) in input.iter().enumerate() {
                let dp = p.derive_multi(alpha);
                for (j, out_j) in out.iter_mut().enumerate() {
                    let coeff = c[(j, i)];
                    if coeff.norm_sqr() > 0.0 {
                        *out_j = out_j.add(&dp.scale(coeff));
                    }
                }
            }
        }
        out
    };

    let mut worst = 0.0f64;
    for beta in &monomials {
        let phi_poly = Poly::monomial(beta.clone(), Complex64::ONE).mul(&w);
        for gamma in &monomials {
            let psi_poly = Poly::monomial(gamma.clone(), Complex64::ONE).mul(&w);
            for i in 0..a.dim_e() {
                let mut phi = vec![Poly::zero(n); a.dim_e()];
                phi[i] = phi_poly.clone();
                let a_phi = apply(a, &phi);
                for j in 0..a.dim_f() {
                    let mut psi = vec![Poly::zero(n); a.dim_f()];
                    psi[j] = psi_poly.clone();
                    let adj_psi = apply(&adj, &psi);
                    let lhs = a_phi[j].mul(&psi[j].conj()).integral_unit_ball();
                    let rhs = phi[i].mul(&adj_psi[i].conj()).integral_unit_ball();
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    worst
}

/// Built-in operators selectable by name: `gradient`, `laplacian`,
/// `partial1`.
pub fn builtin_symbol(name: &str, n: usize) -> Result<OperatorSymbol> {
    if n == 0 {
        return Err(Error::param("ambient dimension must be >= 1"));
    }
    match name {
        "gradient" => {
            let mut coeffs = BTreeMap::new();
            for i in 0..n {
                let mut alpha = vec![0u32; n];
                alpha[i] = 1;
                let mut c = DMatrix::<Complex64>::zeros(n, 1);
                c[(i, 0)] = Complex64::ONE;
                coeffs.insert(alpha, c);
            }
            OperatorSymbol::new(n, 1, 1, n, coeffs)
        }
        "laplacian" => {
            let mut coeffs = BTreeMap::new();
            for i in 0..n {
                let mut alpha = vec![0u32; n];
                alpha[i] = 2;
                coeffs.insert(alpha, DMatrix::from_element(1, 1, Complex64::ONE));
            }
            OperatorSymbol::new(n, 2, 1, 1, coeffs)
        }
        "partial1" => {
            let mut alpha = vec![0u32; n];
            alpha[0] = 1;
            let coeffs =
                BTreeMap::from([(alpha, DMatrix::from_element(1, 1, Complex64::ONE))]);
            OperatorSymbol::new(n, 1, 1, 1, coeffs)
        }
        other => Err(Error::param(format!(
            "unknown operator {other:?}; built-ins are gradient, laplacian, partial1"
        ))),
    }
}

pub fn write_symbol<W: Write>(a: &OperatorSymbol, mut w: W) -> Result<()> {
    writeln!(
        w,
        "SYMB n={} m={} dimE={} dimF={}",
        a.dim(),
        a.order(),
        a.dim_e(),
        a.dim_f()
    )?;
    for (alpha, c) in a.coefficients() {
        for row in 0..c.nrows() {
            for col in 0..c.ncols() {
                let z = c[(row, col)];
                if z.norm_sqr() == 0.0 {
                    continue;
                }
                let alpha_txt: Vec<String> = alpha.iter().map(u32::to_string).collect();
                writeln!(
                    w,
                    "{} {} {} {} {}",
                    alpha_txt.join(" "),
                    row,
                    col,
                    fmt_f64(z.re),
                    fmt_f64(z.im)
                )?;
            }
        }
    }
    Ok(())
}

pub fn read_symbol<R: BufRead>(r: R) -> Result<OperatorSymbol> {
    let mut header: Option<(usize, u32, usize, usize)> = None;
    let mut coeffs: BTreeMap<Vec<u32>, DMatrix<Complex64>> = BTreeMap::new();
    for (idx, raw) in r.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw?;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => &raw[..],
        };
        let line = stripped.trim();
        if line.is_empty() {
            continue;
        }
        match header {
            None => {
                let mut toks = line.split_whitespace();
                if toks.next() != Some("SYMB") {
                    return Err(Error::Parse { line: line_no, msg: "expected SYMB header".into() });
                }
                let mut get = |key: &str| -> Result<usize> {
                    toks.next()
                        .and_then(|t| t.strip_prefix(key))
                        .and_then(|t| t.strip_prefix('='))
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::Parse {
                            line: line_no,
                            msg: format!("expected {key}=<int>"),
                        })
                };
                let n = get("n")?;
                let m = get("m")? as u32;
                let dim_e = get("dimE")?;
                let dim_f = get("dimF")?;
                header = Some((n, m, dim_e, dim_f));
            }
            Some((n, _, dim_e, dim_f)) => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != n + 4 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected {} fields, got {}", n + 4, toks.len()),
                    });
                }
                let alpha: Vec<u32> = toks[..n]
                    .iter()
                    .map(|t| {
                        t.parse().map_err(|_| Error::Parse {
                            line: line_no,
                            msg: format!("bad multi-index entry {t:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                let parse_idx = |t: &str| -> Result<usize> {
                    t.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad matrix index {t:?}"),
                    })
                };
                let row = parse_idx(toks[n])?;
                let col = parse_idx(toks[n + 1])?;
                let parse_num = |t: &str| -> Result<f64> {
                    let v: f64 = t.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad number {t:?}"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("non-finite number {t:?}"),
                        });
                    }
                    Ok(v)
                };
                let re = parse_num(toks[n + 2])?;
                let im = parse_num(toks[n + 3])?;
                if row >= dim_f || col >= dim_e {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("matrix index ({row},{col}) out of {dim_f}x{dim_e}"),
                    });
                }
                let c = coeffs
                    .entry(alpha)
                    .or_insert_with(|| DMatrix::zeros(dim_f, dim_e));
                if c[(row, col)].norm_sqr() > 0.0 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("duplicate coefficient entry at ({row},{col})"),
                    });
                }
                c[(row, col)] = Complex64::new(re, im);
            }
        }
    }
    let (n, m, dim_e, dim_f) =
        header.ok_or(Error::Parse { line: 0, msg: "missing SYMB header".into() })?;
    OperatorSymbol::new(n, m, dim_e, dim_f, coeffs)
}

pub fn save_symbol(a: &OperatorSymbol, path: impl AsRef<Path>) -> Result<()> {
    write_symbol(a, BufWriter::new(File::create(path)?))
}

pub fn load_symbol(path: impl AsRef<Path>) -> Result<OperatorSymbol> {
    read_symbol(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config() -> SampleConfig {
        SampleConfig::default()
    }

    #[test]
    fn gradient_symbol_is_xi() {
        let a = builtin_symbol("gradient", 2).unwrap();
        let m = a.evaluate(&[0.3, -0.7]);
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.ncols(), 1);
        assert_eq!(m[(0, 0)], Complex64::new(0.3, 0.0));
        assert_eq!(m[(1, 0)], Complex64::new(-0.7, 0.0));
    }

    #[test]
    fn laplacian_symbol_is_norm_squared() {
        let a = builtin_symbol("laplacian", 3).unwrap();
        let m = a.evaluate(&[1.0, 2.0, -2.0]);
        assert_eq!(m[(0, 0)], Complex64::new(9.0, 0.0));
    }

    #[test]
    fn zero_frequency_gives_zero_matrix() {
        let a = builtin_symbol("gradient", 2).unwrap();
        let m = a.evaluate(&[0.0, 0.0]);
        assert!(m.iter().all(|z| *z == Complex64::ZERO));
    }

    #[test]
    fn homogeneity_of_degree_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in ["gradient", "laplacian", "partial1"] {
            let a = builtin_symbol(name, 2).unwrap();
            for _ in 0..20 {
                let xi = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                for t in [2.0, 0.5, -1.0] {
                    let scaled: Vec<f64> = xi.iter().map(|x| t * x).collect();
                    let lhs = a.evaluate(&scaled);
                    let rhs = a.evaluate(&xi) * Complex64::new(t.powi(a.order() as i32), 0.0);
                    assert!((lhs - rhs).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_margin_is_one_and_defect_zero() {
        for n in [2usize, 3] {
            let a = builtin_symbol("gradient", n).unwrap();
            let d = classify(&a, &config()).unwrap();
            assert!((d.ellipticity.margin - 1.0).abs() <= 1e-9, "margin {}", d.ellipticity.margin);
            assert_eq!(d.ellipticity.verdict, EllipticityVerdict::NoCounterexample);
            assert_eq!(d.canceling.defect, 0);
            assert!(!d.canceling.indeterminate);
        }
    }

    #[test]
    fn laplacian_margin_one_but_not_canceling() {
        let a = builtin_symbol("laplacian", 2).unwrap();
        let d = classify(&a, &config()).unwrap();
        assert!((d.ellipticity.margin - 1.0).abs() <= 1e-9);
        assert_eq!(d.canceling.defect, 1);
    }

    #[test]
    fn partial_derivative_is_not_elliptic() {
        let a = builtin_symbol("partial1", 2).unwrap();
        let d = classify(&a, &config()).unwrap();
        assert!(d.ellipticity.margin < 1e-8);
        assert_eq!(d.ellipticity.verdict, EllipticityVerdict::Falsified);
        // The witness is an axis direction orthogonal to the first.
        assert!(d.ellipticity.witness[0].abs() < 1e-8);
        assert_relative_eq!(d.ellipticity.witness[1].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_gradient_degenerates() {
        // A single direction leaves the whole line in the intersection.
        let a = builtin_symbol("gradient", 1).unwrap();
        let samples = sphere_samples(1, &config());
        let rep = canceling_defect(&a, &samples, RANK_TOLERANCE).unwrap();
        assert_eq!(rep.defect, 1);
    }

    #[test]
    fn wide_symbol_is_dimension_obstructed() {
        // E = R^2 -> F = R of order 1: injectivity impossible.
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![1, 0], DMatrix::from_row_slice(1, 2, &[Complex64::ONE, Complex64::ZERO]));
        let a = OperatorSymbol::new(2, 1, 2, 1, coeffs).unwrap();
        let rep = ellipticity_margin(&a, &sphere_samples(2, &config()), RANK_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, EllipticityVerdict::DimensionObstruction);
    }

    #[test]
    fn defect_is_monotone_in_samples() {
        let a = builtin_symbol("laplacian", 2).unwrap();
        let samples = sphere_samples(2, &config());
        let few = canceling_defect(&a, &samples[..4], RANK_TOLERANCE).unwrap();
        let many = canceling_defect(&a, &samples, RANK_TOLERANCE).unwrap();
        assert!(many.defect <= few.defect);
    }

    #[test]
    fn margin_invariant_under_unitary_change_of_basis() {
        use nalgebra::DMatrix;
        let a = builtin_symbol("gradient", 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut rand_c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let m_f = DMatrix::from_fn(2, 2, |_, _| rand_c());
        let qr = m_f.qr();
        let u_f = qr.q();
        let coeffs = a
            .coefficients()
            .iter()
            .map(|(alpha, c)| (alpha.clone(), &u_f * c))
            .collect();
        let transformed = OperatorSymbol::new(2, 1, 1, 2, coeffs).unwrap();
        let samples = sphere_samples(2, &config());
        let r1 = ellipticity_margin(&a, &samples, RANK_TOLERANCE).unwrap();
        let r2 = ellipticity_margin(&transformed, &samples, RANK_TOLERANCE).unwrap();
        assert!((r1.margin - r2.margin).abs() <= 1e-10);
    }

    #[test]
    fn neg_gradient_adjoint_is_divergence() {
        // With the convention A(D) = -grad the adjoint is exactly div.
        let grad = builtin_symbol("gradient", 3).unwrap();
        let neg: BTreeMap<_, _> = grad
            .coefficients()
            .iter()
            .map(|(alpha, c)| (alpha.clone(), -c))
            .collect();
        let neg_grad = OperatorSymbol::new(3, 1, 1, 3, neg).unwrap();
        let adj = neg_grad.adjoint();
        assert_eq!(adj.dim_e(), 3);
        assert_eq!(adj.dim_f(), 1);
        for i in 0..3 {
            let mut alpha = vec![0u32; 3];
            alpha[i] = 1;
            let c = &adj.coefficients()[&alpha];
            assert_eq!(c[(0, i)], Complex64::ONE);
        }
    }

    #[test]
    fn double_adjoint_is_identity() {
        for name in ["gradient", "laplacian", "partial1"] {
            let a = builtin_symbol(name, 2).unwrap();
            assert_eq!(a.adjoint().adjoint(), a);
        }
    }

    #[test]
    fn laplacian_is_self_adjoint() {
        let a = builtin_symbol("laplacian", 3).unwrap();
        assert_eq!(a.adjoint(), a);
    }

    #[test]
    fn weak_identity_holds_on_monomials() {
        for (name, n) in [("gradient", 2), ("partial1", 2), ("laplacian", 2), ("gradient", 3)] {
            let a = builtin_symbol(name, n).unwrap();
            let residual = adjoint_weak_identity_residual(&a, a.order() + 2);
            assert!(residual <= 1e-12, "{name}: residual {residual}");
        }
    }

    #[test]
    fn weak_identity_detects_a_wrong_sign() {
        // The first-order transfer <d_x u, v> = -<u, d_x v> holds exactly
        // and is non-vacuous, so an adjoint missing the sign would fail.
        let w = ball_cutoff(2, 2);
        let u = Poly::monomial(vec![2, 0], Complex64::ONE).mul(&w);
        let v = Poly::monomial(vec![1, 0], Complex64::ONE).mul(&w);
        let lhs = u.partial_derivative(0).mul(&v.conj()).integral_unit_ball();
        let rhs = u.mul(&v.partial_derivative(0).conj()).integral_unit_ball();
        assert!((lhs + rhs).norm() <= 1e-14);
        assert!(lhs.norm() > 1e-3, "pairing is vacuous: {lhs}");
    }

    #[test]
    fn symbol_file_roundtrip() {
        let a = builtin_symbol("gradient", 3).unwrap();
        let mut buf = Vec::new();
        write_symbol(&a, &mut buf).unwrap();
        let back = read_symbol(buf.as_slice()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn symbol_file_rejects_inhomogeneous_entries() {
        let text = "SYMB n=2 m=2 dimE=1 dimF=1\n1 0 0 0 1.0 0.0\n";
        assert!(read_symbol(text.as_bytes()).is_err());
    }
}
