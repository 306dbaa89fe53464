//! Direction-wise threshold data: germ, its generalized spectrum, the
//! third-order operator and its cluster split, and fits against band data.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cell::{CellSolution, WeightedConstants};
use crate::error::{HomogError, Result};
use crate::fiber;
use crate::fields::{BlochSymbol, FieldBundle};
use crate::lattice::check_unit;
use crate::linalg::{self, CMat};

/// Relative gap below which germ eigenvalues count as one cluster.
pub const GERM_GAP_TOL: f64 = 1e-6;
/// Coupling norm above which two clusters interact.
pub const INTERACTION_TOL: f64 = 1e-10;

/// `b(θ)* g0 b(θ)`.
pub fn germ_matrix(g0: &CMat, b: &BlochSymbol, theta: &[f64]) -> Result<CMat> {
    check_unit(theta, b.d)?;
    let bt = b.eval(theta);
    Ok(linalg::hermitian_part(&(bt.adjoint() * g0 * &bt)))
}

#[derive(Debug, Clone)]
pub struct GermSpectrum {
    pub gammas: Vec<f64>,
    /// `Q̄`-orthonormal eigenvectors as columns.
    pub zetas: CMat,
    pub clusters: Vec<usize>,
    /// Some gap lies within a factor 10 of the clustering threshold.
    pub ambiguous: bool,
}

/// Solve `S ζ = γ Q̄ ζ` (`Q̄ = I` when absent).
pub fn generalized_spectrum(s: &CMat, q_bar: Option<&CMat>, gap_tol: f64) -> Result<GermSpectrum> {
    let (gammas, zetas) = match q_bar {
        Some(q) => {
            let e = linalg::gen_herm_eigen(s, q)?;
            (e.values, e.vectors)
        }
        None => {
            let e = linalg::herm_eigen(s)?;
            (e.values, e.vectors)
        }
    };
    let clusters = linalg::cluster_labels(&gammas, gap_tol);
    let scale = gammas.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let ambiguous = gammas.windows(2).any(|w| {
        let gap = (w[1] - w[0]).abs() / scale;
        gap >= 0.1 * gap_tol && gap < 10.0 * gap_tol
    });
    Ok(GermSpectrum { gammas, zetas, clusters, ambiguous })
}

/// `L(θ) = mean(Λ* b(θ)* g̃ + g̃* b(θ) Λ)`, plus the constant shift terms when
/// `lambda_q0` is given.
pub fn matrix_l(cell: &CellSolution, b: &BlochSymbol, theta: &[f64], lambda_q0: Option<&CMat>) -> Result<CMat> {
    check_unit(theta, b.d)?;
    let bt = b.eval(theta);
    let bta = bt.adjoint();
    let mut l = CMat::zeros(cell.m, cell.m);
    for (lam, gt) in cell.lambda_hat.iter().zip(&cell.g_tilde_hat) {
        let term = lam.adjoint() * &bta * gt;
        l += &term + term.adjoint();
    }
    if let Some(shift) = lambda_q0 {
        let term = &cell.g0 * &bt * shift;
        l += &term + term.adjoint();
    }
    Ok(l)
}

/// The third-order operator with its split along germ clusters.
#[derive(Debug, Clone)]
pub struct NSplit {
    pub n_op: CMat,
    pub n0: CMat,
    pub nstar: CMat,
    /// Threshold coefficients in germ order (ascending inside a cluster).
    pub mus: Vec<f64>,
    /// Germ eigenvectors rotated inside each cluster to diagonalize `N`.
    pub adapted_zetas: CMat,
    pub clusters: Vec<usize>,
    /// `+∞` when no pair of clusters interacts.
    pub c_circ: f64,
}

/// Split `N = b(θ)* L b(θ)` along the clusters of `spec`.
pub fn operator_n(l: &CMat, b: &BlochSymbol, theta: &[f64], spec: &GermSpectrum, q_bar: Option<&CMat>, c_star: f64) -> Result<NSplit> {
    check_unit(theta, b.d)?;
    let n = b.n;
    let bt = b.eval(theta);
    let n_op = linalg::hermitian_part(&(bt.adjoint() * l * &bt));
    let q = q_bar.cloned().unwrap_or_else(|| linalg::identity(n));
    let groups: Vec<Vec<usize>> = {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &c) in spec.clusters.iter().enumerate() {
            if out.len() <= c {
                out.push(Vec::new());
            }
            out[c].push(i);
        }
        out
    };
    let mut projections = Vec::with_capacity(groups.len());
    let mut mus = Vec::with_capacity(n);
    let mut adapted = CMat::zeros(n, n);
    for idx in &groups {
        let z = spec.zetas.select_columns(idx.iter());
        projections.push(&z * z.adjoint() * &q);
        let block = linalg::hermitian_part(&(z.adjoint() * &n_op * &z));
        let e = linalg::herm_eigen(&block)?;
        let rotated = &z * &e.vectors;
        for (j, &col) in idx.iter().enumerate() {
            adapted.set_column(col, &rotated.column(j));
        }
        mus.extend(e.values);
    }
    let mut n0 = CMat::zeros(n, n);
    for p in &projections {
        n0 += p.adjoint() * &n_op * p;
    }
    let nstar = &n_op - &n0;
    let mut c_circ = f64::INFINITY;
    for (j, pj) in projections.iter().enumerate() {
        for (k, pk) in projections.iter().enumerate() {
            if j >= k {
                continue;
            }
            if linalg::op_norm(&(pj.adjoint() * &n_op * pk)) > INTERACTION_TOL {
                let gj = spec.gammas[groups[j][0]];
                let gk = spec.gammas[groups[k][0]];
                c_circ = c_circ.min(c_star.min((gj - gk).abs() / n as f64));
            }
        }
    }
    Ok(NSplit { n_op, n0, nstar, mus, adapted_zetas: adapted, clusters: spec.clusters.clone(), c_circ })
}

/// Everything computed for one direction.
#[derive(Debug, Clone)]
pub struct GermPackage {
    pub theta: Vec<f64>,
    pub s: CMat,
    pub q_bar: Option<CMat>,
    pub spectrum: GermSpectrum,
    pub l: CMat,
    /// Unweighted `N̂(θ)`.
    pub n_hat: CMat,
    /// Split of the weighted operator (of `N̂` itself when no density is present).
    pub split: NSplit,
}

pub fn germ_package(
    bundle: &FieldBundle,
    cell: &CellSolution,
    weights: Option<&WeightedConstants>,
    theta: &[f64],
) -> Result<GermPackage> {
    let b = &bundle.symbol;
    let s = germ_matrix(&cell.g0, b, theta)?;
    let q_bar = weights.map(|w| w.q_bar.clone());
    let spectrum = generalized_spectrum(&s, q_bar.as_ref(), GERM_GAP_TOL)?;
    let l = matrix_l(cell, b, theta, None)?;
    let bt = b.eval(theta);
    let n_hat = linalg::hermitian_part(&(bt.adjoint() * &l * &bt));
    let l_split = match weights {
        Some(w) => matrix_l(cell, b, theta, Some(&w.lambda_q0))?,
        None => l.clone(),
    };
    let split = operator_n(&l_split, b, theta, &spectrum, q_bar.as_ref(), bundle.c_star())?;
    Ok(GermPackage { theta: theta.to_vec(), s, q_bar, spectrum, l, n_hat, split })
}

/// Row of a germ sweep report.
#[derive(Debug, Clone, Serialize)]
pub struct GermRecord {
    pub theta: Vec<f64>,
    pub gammas: Vec<f64>,
    pub mus: Vec<f64>,
    pub clusters: Vec<usize>,
    pub n_norm: f64,
    pub n0_norm: f64,
    pub nstar_norm: f64,
    pub c_circ: Option<f64>,
    pub ambiguous: bool,
}

impl GermPackage {
    pub fn record(&self) -> GermRecord {
        GermRecord {
            theta: self.theta.clone(),
            gammas: self.spectrum.gammas.clone(),
            mus: self.split.mus.clone(),
            clusters: self.split.clusters.clone(),
            n_norm: linalg::op_norm(&self.split.n_op),
            n0_norm: linalg::op_norm(&self.split.n0),
            nstar_norm: linalg::op_norm(&self.split.nstar),
            c_circ: self.split.c_circ.is_finite().then_some(self.split.c_circ),
            ambiguous: self.spectrum.ambiguous,
        }
    }
}

/// Fit of `λ_l(t)/t² = γ + μ t + c t²` for each of the lowest `n` branches.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdFit {
    pub theta: Vec<f64>,
    pub t_samples: Vec<f64>,
    /// Branch values `λ_l(t)`, branch-major.
    pub branches: Vec<Vec<f64>>,
    pub gamma_fit: Vec<f64>,
    pub mu_fit: Vec<f64>,
    /// Largest relative residual of the quadratic model for `λ/t²`.
    pub fit_residual: f64,
    /// `pairing[i]` is the germ index matched to branch `i`.
    pub pairing: Vec<usize>,
    pub gamma_error: f64,
    pub mu_error: f64,
}

/// Fit threshold coefficients from the lowest bands along `θ` and pair them with
/// the germ data `(gammas, mus)`.
pub fn threshold_fit(
    bundle: &FieldBundle,
    theta: &[f64],
    t_samples: &[f64],
    cutoff: usize,
    gammas: &[f64],
    mus: &[f64],
) -> Result<ThresholdFit> {
    let b = &bundle.symbol;
    check_unit(theta, b.d)?;
    if t_samples.len() < 4 {
        return Err(HomogError::Parameter("threshold fit needs at least 4 t values".into()));
    }
    let r0 = bundle.lattice().r0;
    if t_samples.iter().any(|&t| !(t > 0.0 && t <= 0.5 * r0 * (1.0 + 1e-12))) {
        return Err(HomogError::OutOfZone { t: t_samples.iter().cloned().fold(0.0, f64::max), r0 });
    }
    let n = b.n;
    let blocks = fiber::bundle_blocks(bundle, cutoff);
    let modes = &blocks[0];
    let mut branches: Vec<Vec<f64>> = vec![Vec::with_capacity(t_samples.len()); n];
    let mut prev: Option<CMat> = None;
    for &t in t_samples {
        let k: Vec<f64> = theta.iter().map(|c| c * t).collect();
        let spec = fiber::factored_spectrum(&bundle.g, b, &k, modes, cutoff, bundle.q.as_ref())?;
        let vecs = spec.vectors.columns(0, n).into_owned();
        let order: Vec<usize> = match &prev {
            None => (0..n).collect(),
            Some(pv) => {
                let overlap = match &spec.mass {
                    Some(m) => pv.adjoint() * m * &vecs,
                    None => pv.adjoint() * &vecs,
                };
                let mut best: Option<(f64, Vec<usize>)> = None;
                for perm in (0..n).permutations(n) {
                    let score = perm.iter().enumerate().map(|(i, &j)| overlap[(i, j)].norm()).fold(f64::INFINITY, f64::min);
                    if best.as_ref().map(|(s, _)| score > *s).unwrap_or(true) {
                        best = Some((score, perm));
                    }
                }
                let (score, perm) = best.expect("n >= 1");
                if score < 0.5 {
                    return Err(HomogError::BranchTracking { t });
                }
                perm
            }
        };
        let mut next = CMat::zeros(vecs.nrows(), n);
        for (i, &j) in order.iter().enumerate() {
            branches[i].push(spec.values[j]);
            next.set_column(i, &vecs.column(j));
        }
        prev = Some(next);
    }

    let design = DMatrix::from_fn(t_samples.len(), 3, |i, j| t_samples[i].powi(j as i32));
    let mut gamma_fit = Vec::with_capacity(n);
    let mut mu_fit = Vec::with_capacity(n);
    let mut fit_residual = 0.0_f64;
    for br in &branches {
        let y = DVector::from_iterator(t_samples.len(), br.iter().zip(t_samples).map(|(l, t)| l / (t * t)));
        let coef = linalg::lstsq_real(&design, &y)?;
        let res = &design * &coef - &y;
        fit_residual = fit_residual.max(res.amax() / y.amax().max(1e-300));
        gamma_fit.push(coef[0]);
        mu_fit.push(coef[1]);
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| (gamma_fit[i] - gammas[j]).abs() / gammas[j].abs().max(1e-300) + (mu_fit[i] - mus[j]).abs())
            .sum();
        if best.as_ref().map(|(c, _)| cost < *c).unwrap_or(true) {
            best = Some((cost, perm));
        }
    }
    let pairing = best.expect("n >= 1").1;
    let gamma_error = pairing
        .iter()
        .enumerate()
        .map(|(i, &j)| (gamma_fit[i] - gammas[j]).abs() / gammas[j].abs())
        .fold(0.0, f64::max);
    let mu_error = pairing.iter().enumerate().map(|(i, &j)| (mu_fit[i] - mus[j]).abs()).fold(0.0, f64::max);
    Ok(ThresholdFit {
        theta: theta.to_vec(),
        t_samples: t_samples.to_vec(),
        branches,
        gamma_fit,
        mu_fit,
        fit_residual,
        pairing,
        gamma_error,
        mu_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::solve_cell;
    use crate::gallery;

    #[test]
    fn layered_elasticity_germ_and_split() {
        let case = gallery::layered_elasticity().unwrap();
        let cell = solve_cell(&case.bundle.g, &case.bundle.symbol, 32).unwrap();
        let pkg = germ_package(&case.bundle, &cell, None, &[0.0, 1.0]).unwrap();
        assert_eq!(pkg.split.clusters, vec![0, 0]);
        assert!((pkg.split.mus[0] + 0.125).abs() < 1e-8, "{:?}", pkg.split.mus);
        assert!((pkg.split.mus[1] - 0.125).abs() < 1e-8);
        assert!(pkg.split.nstar.norm() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pkg = germ_package(&case.bundle, &cell, None, &[h, h]).unwrap();
        assert!((pkg.spectrum.gammas[0] - 0.5).abs() < 1e-8);
        assert!((pkg.spectrum.gammas[1] - 1.5).abs() < 1e-8);
        assert!(linalg::op_norm(&pkg.split.n0) < 1e-10);
    }

    #[test]
    fn acoustics_third_order_coefficient() {
        let c = 0.2;
        let case = gallery::acoustics_complex(c).unwrap();
        let cell = solve_cell(&case.bundle.g, &case.bundle.symbol, 32).unwrap();
        let pkg = germ_package(&case.bundle, &cell, None, &[0.0, 1.0]).unwrap();
        let want = 1.5 * c * c * c;
        assert!((pkg.n_hat[(0, 0)].re - want).abs() < 1e-5 * want, "{} vs {want}", pkg.n_hat[(0, 0)]);
    }
}
