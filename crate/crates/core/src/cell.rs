//! Periodic cell problem, effective matrix and weighted constants.

use serde::Serialize;

use crate::error::{HomogError, Result};
use crate::fiber;
use crate::fields::{BlochSymbol, CoefficientField, FieldFlags};
use crate::linalg::{self, CMat};

/// Corrector data in Fourier form over a set of modes.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub m: usize,
    pub n: usize,
    pub cutoff: usize,
    /// Modes carrying the corrector; the zero mode is first.
    pub modes: Vec<Vec<i64>>,
    /// `Λ̂(p)`, `n × m`; zero at the zero mode.
    pub lambda_hat: Vec<CMat>,
    /// `g̃̂(p)`, `m × m`.
    pub g_tilde_hat: Vec<CMat>,
    pub g0: CMat,
    /// Relative residual of the truncated equation.
    pub residual: f64,
}

impl CellSolution {
    fn zero_index(&self) -> usize {
        self.modes.iter().position(|p| p.iter().all(|&c| c == 0)).expect("zero mode present")
    }

    /// `mean Λ`, which is zero by construction.
    pub fn lambda_mean(&self) -> &CMat {
        &self.lambda_hat[self.zero_index()]
    }

    /// `mean(h Λ)` for an `n × n` field `h`, by Parseval over the stored modes.
    pub fn weighted_lambda_mean(&self, h: &CoefficientField) -> CMat {
        let mut acc = CMat::zeros(h.rows(), self.m);
        for (p, lam) in self.modes.iter().zip(&self.lambda_hat) {
            let neg: Vec<i64> = p.iter().map(|c| -c).collect();
            acc += h.coefficient(&neg) * lam;
        }
        acc
    }
}

/// Solve `b(D)* g (b(D) Λ + 1) = 0` with zero mean on the coupling class of
/// the zero mode inside `[-N, N]^d`.
pub fn solve_cell(g: &CoefficientField, b: &BlochSymbol, cutoff: usize) -> Result<CellSolution> {
    if g.rows() != b.m || g.cols() != b.m || g.dim() != b.d {
        return Err(HomogError::Dimension("g must be m x m for the symbol".into()));
    }
    let (m, n, d) = (b.m, b.n, b.d);
    let lat = g.lattice();
    let blocks = fiber::coupling_blocks(&[g.support()], d, cutoff);
    let modes = blocks.into_iter().next().expect("at least one block");
    let nonzero: Vec<Vec<i64>> = modes.iter().filter(|p| p.iter().any(|&c| c != 0)).cloned().collect();
    let zero = vec![0.0; d];

    let mut lambda_nz: Vec<CMat> = Vec::new();
    let mut residual = 0.0;
    if !nonzero.is_empty() {
        let op = fiber::assemble_block(g, b, &zero, &nonzero, cutoff, None, None)?;
        let mut rhs = CMat::zeros(n * nonzero.len(), m);
        for (i, p) in nonzero.iter().enumerate() {
            let bp = b.eval(&lat.dual_point(p));
            let block = -(bp.adjoint() * g.coefficient(p));
            rhs.view_mut((i * n, 0), (n, m)).copy_from(&block);
        }
        let chol = nalgebra::Cholesky::new(op.matrix.clone()).ok_or_else(|| {
            let v = linalg::herm_eigenvalues(&op.matrix).unwrap_or_default();
            let condition = match (v.first(), v.last()) {
                (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
                _ => f64::INFINITY,
            };
            HomogError::SingularCell { condition }
        })?;
        let sol = chol.solve(&rhs);
        let res = &op.matrix * &sol - &rhs;
        residual = linalg::max_abs(&res) / g.sup_norm().max(1e-300);
        lambda_nz = (0..nonzero.len()).map(|i| sol.view((i * n, 0), (n, m)).into_owned()).collect();
    }

    let mut lambda_hat = Vec::with_capacity(modes.len());
    let mut it = lambda_nz.into_iter();
    for p in &modes {
        if p.iter().all(|&c| c == 0) {
            lambda_hat.push(CMat::zeros(n, m));
        } else {
            lambda_hat.push(it.next().expect("one block per nonzero mode"));
        }
    }
    let g_tilde_hat = corrected_coefficients(g, b, &modes, &lambda_hat);
    let zi = modes.iter().position(|p| p.iter().all(|&c| c == 0)).unwrap();
    let g0_raw = g_tilde_hat[zi].clone();
    let defect = linalg::hermitian_defect(&g0_raw);
    if defect > 1e-8 * linalg::max_abs(&g0_raw) {
        return Err(HomogError::Linalg(format!("effective matrix is not Hermitian (defect {defect:e})")));
    }
    Ok(CellSolution {
        m,
        n,
        cutoff,
        modes,
        lambda_hat,
        g_tilde_hat,
        g0: linalg::hermitian_part(&g0_raw),
        residual,
    })
}

/// `ĝ(p) + Σ_{p'} ĝ(p - p') b(p') Λ̂(p')` for every stored mode.
fn corrected_coefficients(g: &CoefficientField, b: &BlochSymbol, modes: &[Vec<i64>], lambda_hat: &[CMat]) -> Vec<CMat> {
    let lat = g.lattice();
    let y: Vec<CMat> = modes.iter().zip(lambda_hat).map(|(p, l)| b.eval(&lat.dual_point(p)) * l).collect();
    let conv = fiber::convolution_matrix(g, modes);
    let m = b.m;
    let mut stacked = CMat::zeros(m * modes.len(), m);
    for (i, yi) in y.iter().enumerate() {
        stacked.view_mut((i * m, 0), (m, m)).copy_from(yi);
    }
    let prod = conv * stacked;
    modes
        .iter()
        .enumerate()
        .map(|(i, p)| prod.view((i * m, 0), (m, m)).into_owned() + g.coefficient(p))
        .collect()
}

/// `(underline g, overline g)`: harmonic and arithmetic means.
pub fn voigt_reuss(g: &CoefficientField) -> Result<(CMat, CMat)> {
    Ok((linalg::hermitian_part(&g.harmonic_mean()?), linalg::hermitian_part(&g.mean())))
}

/// Smallest eigenvalue of `upper - lower`; nonnegative means `lower <= upper`.
pub fn psd_slack(lower: &CMat, upper: &CMat) -> Result<f64> {
    Ok(linalg::herm_eigenvalues(&linalg::hermitian_part(&(upper - lower)))?[0])
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedConstants {
    #[serde(skip)]
    pub q_bar: CMat,
    #[serde(skip)]
    pub f0: CMat,
    /// `Λ_Q - Λ`, constant.
    #[serde(skip)]
    pub lambda_q0: CMat,
    /// `mean(Q Λ_Q)`, zero up to roundoff.
    pub weighted_mean_defect: f64,
}

/// `Q̄`, `f0 = Q̄^{-1/2}` and the shift making `Q Λ_Q` mean-free.
pub fn weighted_constants(cell: &CellSolution, q: &CoefficientField) -> Result<WeightedConstants> {
    if q.rows() != cell.n || q.cols() != cell.n {
        return Err(HomogError::Dimension("Q must be n x n".into()));
    }
    let q_bar = linalg::hermitian_part(&q.mean());
    let f0 = linalg::hpd_inv_sqrt(&q_bar)?;
    let q_lambda = cell.weighted_lambda_mean(q);
    let lambda_q0 = -(linalg::hpd_inverse(&q_bar)? * &q_lambda);
    let defect = linalg::max_abs(&(q_lambda + &q_bar * &lambda_q0));
    Ok(WeightedConstants { q_bar, f0, lambda_q0, weighted_mean_defect: defect })
}

/// Cell solution for coefficients varying along the first lattice direction
/// only, from the closed-form one-dimensional relations evaluated on the
/// grid of `g`.
///
/// With `b1 = b(b_1)` and `h = b1* g b1`, the flux `b1* g (b1 Λ' + 1)` is a
/// constant `C`, which the mean-free condition fixes as
/// `C = (mean h^{-1})^{-1} mean(h^{-1} b1* g)`.
pub fn layered_oracle_1d(g: &CoefficientField, b: &BlochSymbol) -> Result<CellSolution> {
    if g.band().iter().skip(1).any(|bw| *bw != Some(0)) {
        return Err(HomogError::Parameter("layered oracle needs a field depending on the first coordinate only".into()));
    }
    let (m, n, d) = (b.m, b.n, b.d);
    let lat = g.lattice().clone();
    let b1 = b.eval(&lat.dual_basis[0]);
    let b1a = b1.adjoint();
    let none = FieldFlags::NONE;
    let h_inv = |gj: &CMat| linalg::inverse(&(&b1a * gj * &b1));
    let mean_h_inv = g.map(n, n, none, |gj| h_inv(gj))?.mean();
    let mean_flux = g.map(n, m, none, |gj| Ok(h_inv(gj)? * &b1a * gj))?.mean();
    let c = linalg::inverse(&mean_h_inv)? * mean_flux;
    let deriv = g.map(n, m, none, |gj| Ok(h_inv(gj)? * (&c - &b1a * gj)))?;
    let g_tilde = g.map(m, m, none, |gj| {
        let lp = h_inv(gj)? * (&c - &b1a * gj);
        Ok(gj * (&b1 * lp + CMat::identity(m, m)))
    })?;
    let top = ((g.grid()[0] - 1) / 2) as i64;
    let mut modes = vec![vec![0i64; d]];
    for k in 1..=top {
        for s in [k, -k] {
            let mut p = vec![0i64; d];
            p[0] = s;
            modes.push(p);
        }
    }
    let lambda_hat: Vec<CMat> = modes
        .iter()
        .map(|p| if p[0] == 0 { CMat::zeros(n, m) } else { deriv.coefficient(p).unscale(p[0] as f64) })
        .collect();
    let g_tilde_hat: Vec<CMat> = modes.iter().map(|p| g_tilde.coefficient(p)).collect();
    let g0 = linalg::hermitian_part(&g_tilde.mean());
    Ok(CellSolution {
        m,
        n,
        cutoff: top as usize,
        modes,
        lambda_hat,
        g_tilde_hat,
        g0,
        residual: linalg::max_abs(&deriv.mean()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::lattice::Lattice;
    use crate::linalg::re;

    #[test]
    fn constant_field_needs_no_corrector() {
        let lat = Lattice::cubic(2);
        let g0 = linalg::from_real_rows(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = CoefficientField::constant(&lat, g0.clone(), FieldFlags::REAL_SPD).unwrap();
        let cell = solve_cell(&g, &BlochSymbol::gradient(2).unwrap(), 4).unwrap();
        assert!((cell.g0 - g0).norm() < 1e-14);
        assert!(cell.lambda_hat.iter().all(|l| l.norm() < 1e-14));
    }

    #[test]
    fn one_dimensional_scalar_gives_harmonic_mean() {
        let case = gallery::layered_scalar().unwrap();
        let cell = solve_cell(&case.bundle.g, &case.bundle.symbol, 32).unwrap();
        assert!((cell.g0[(0, 0)].re - 3f64.sqrt()).abs() < 1e-10, "{}", cell.g0[(0, 0)]);
    }

    #[test]
    fn two_phase_voigt_reuss() {
        let lat = Lattice::cubic(1);
        let g = CoefficientField::from_closure(&lat, 1, 1, &[64], vec![None], FieldFlags::REAL_SPD, |x| {
            CMat::from_element(1, 1, re(if x[0] < std::f64::consts::PI { 1.0 } else { 4.0 }))
        })
        .unwrap();
        let (lo, hi) = voigt_reuss(&g).unwrap();
        assert!((hi[(0, 0)].re - 2.5).abs() < 1e-12);
        assert!((lo[(0, 0)].re - 1.6).abs() < 1e-12);
    }

    #[test]
    fn layered_elasticity_effective_matrix() {
        let case = gallery::layered_elasticity().unwrap();
        let cell = solve_cell(&case.bundle.g, &case.bundle.symbol, 64).unwrap();
        let want = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![re(1.0), re(4.0), re(1.0)]));
        assert!((&cell.g0 - &want).norm() < 1e-8, "{}", cell.g0);
        let oracle = layered_oracle_1d(&case.bundle.g, &case.bundle.symbol).unwrap();
        assert!((&oracle.g0 - &want).norm() < 1e-8, "{}", oracle.g0);
    }

    #[test]
    fn unit_density_leaves_corrector_unshifted() {
        let case = gallery::layered_scalar().unwrap();
        let cell = solve_cell(&case.bundle.g, &case.bundle.symbol, 16).unwrap();
        let q = CoefficientField::constant(case.bundle.lattice(), CMat::identity(1, 1), FieldFlags::REAL_SPD).unwrap();
        let w = weighted_constants(&cell, &q).unwrap();
        assert!(w.lambda_q0.norm() < 1e-14);
        assert!((w.f0[(0, 0)].re - 1.0).abs() < 1e-14);
    }
}
