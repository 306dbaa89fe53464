//! Truncated Fourier realization of the fiber operators `b(D+k)* g b(D+k)`.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{HomogError, Result};
use crate::fields::{BlochSymbol, CoefficientField, FieldBundle};
use crate::lattice::Lattice;
use crate::linalg::{self, re, CMat};

/// Negative eigenvalues down to `-PSD_CLAMP * |A|` are treated as zero.
pub const PSD_CLAMP: f64 = 1e-8;
/// Default relative gap below which neighbouring eigenvalues share a cluster.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberKind {
    Plain,
    Effective,
    Sandwiched,
    WeightedMass,
}

/// Integer frequencies in `[-N, N]^d`, axis 0 varying fastest.
pub fn mode_box(d: usize, cutoff: usize) -> Vec<Vec<i64>> {
    let mut out = crate::lattice::integer_box(d, cutoff as i64);
    let zero_at = out.partition_point(|m| {
        let rev: Vec<i64> = m.iter().rev().copied().collect();
        rev < vec![0; d]
    });
    out.insert(zero_at, vec![0; d]);
    out
}

fn box_index(m: &[i64], cutoff: usize) -> Option<usize> {
    let side = 2 * cutoff as i64 + 1;
    let mut idx = 0i64;
    let mut stride = 1i64;
    for &c in m {
        if c.abs() > cutoff as i64 {
            return None;
        }
        idx += (c + cutoff as i64) * stride;
        stride *= side;
    }
    Some(idx as usize)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Partition the mode box into classes that no coefficient in `supports` couples.
///
/// The operator is block diagonal over these classes. The class holding the
/// zero mode comes first; modes keep box order inside a class.
pub fn coupling_blocks(supports: &[&[Vec<i64>]], d: usize, cutoff: usize) -> Vec<Vec<Vec<i64>>> {
    let modes = mode_box(d, cutoff);
    let mut parent: Vec<usize> = (0..modes.len()).collect();
    let shifts: HashSet<Vec<i64>> = supports
        .iter()
        .flat_map(|s| s.iter())
        .filter(|s| s.iter().any(|&c| c != 0))
        .cloned()
        .collect();
    for (i, p) in modes.iter().enumerate() {
        for s in &shifts {
            let q: Vec<i64> = p.iter().zip(s).map(|(a, b)| a + b).collect();
            if let Some(j) = box_index(&q, cutoff) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let zero = box_index(&vec![0; d], cutoff).expect("zero is in the box");
    let zero_root = find(&mut parent, zero);
    let mut groups: HashMap<usize, Vec<Vec<i64>>> = HashMap::new();
    let mut order = Vec::new();
    for (i, p) in modes.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_insert_with(|| {
            order.push(r);
            Vec::new()
        });
        groups.get_mut(&r).unwrap().push(p.clone());
    }
    order.sort_by_key(|&r| (r != zero_root, r));
    order.into_iter().map(|r| groups.remove(&r).unwrap()).collect()
}

/// Coupling blocks for every field of a bundle.
pub fn bundle_blocks(bundle: &FieldBundle, cutoff: usize) -> Vec<Vec<Vec<i64>>> {
    let mut supports: Vec<&[Vec<i64>]> = vec![bundle.g.support()];
    if let Some(f) = &bundle.f {
        supports.push(f.support());
    }
    if let Some(q) = &bundle.q {
        supports.push(q.support());
    }
    coupling_blocks(&supports, bundle.symbol.d, cutoff)
}

#[derive(Debug, Clone)]
pub struct FiberOperator {
    pub k: Vec<f64>,
    pub cutoff: usize,
    /// Components per Fourier mode.
    pub n: usize,
    pub modes: Vec<Vec<i64>>,
    pub matrix: CMat,
    /// Mass matrix of the generalized pair, when a density is present.
    pub mass: Option<CMat>,
    pub kind: FiberKind,
}

impl FiberOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Hermitian and positive semidefinite up to roundoff.
    pub fn check_invariants(&self) -> Result<()> {
        let scale = linalg::max_abs(&self.matrix).max(1e-300);
        let defect = linalg::hermitian_defect(&self.matrix);
        if defect > 1e-10 * scale {
            return Err(HomogError::Linalg(format!("fiber matrix not Hermitian (defect {defect:e})")));
        }
        let values = match &self.mass {
            Some(m) => linalg::gen_herm_eigen(&self.matrix, m)?.values,
            None => linalg::herm_eigenvalues(&self.matrix)?,
        };
        let top = values.last().copied().unwrap_or(0.0).abs();
        if let Some(&low) = values.first() {
            if low < -PSD_CLAMP * top {
                return Err(HomogError::NotPsd { value: low, clamp: -PSD_CLAMP * top });
            }
        }
        Ok(())
    }
}

/// Convolution matrix `[ĥ(p_i - p_j)]` of a field over `modes`.
pub fn convolution_matrix(h: &CoefficientField, modes: &[Vec<i64>]) -> CMat {
    let (r, c) = (h.rows(), h.cols());
    let support: HashSet<&Vec<i64>> = h.support().iter().collect();
    let mut out = CMat::zeros(r * modes.len(), c * modes.len());
    let mut cache: HashMap<Vec<i64>, CMat> = HashMap::new();
    for (i, p) in modes.iter().enumerate() {
        for (j, q) in modes.iter().enumerate() {
            let diff: Vec<i64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
            if !support.contains(&diff) {
                continue;
            }
            let block = cache.entry(diff.clone()).or_insert_with(|| h.coefficient(&diff));
            out.view_mut((i * r, j * c), (r, c)).copy_from(block);
        }
    }
    out
}

fn shifted_symbols(lat: &Lattice, b: &BlochSymbol, k: &[f64], modes: &[Vec<i64>]) -> Vec<CMat> {
    modes
        .iter()
        .map(|p| {
            let xi: Vec<f64> = lat.dual_point(p).iter().zip(k).map(|(a, c)| a + c).collect();
            b.eval(&xi)
        })
        .collect()
}

fn check_k(lat: &Lattice, k: &[f64]) -> Result<()> {
    if k.len() != lat.dim {
        return Err(HomogError::Dimension(format!("k has length {} but d = {}", k.len(), lat.dim)));
    }
    Ok(())
}

/// Matrix of `b(D+k)* g b(D+k)` restricted to `modes`.
pub fn assemble_block(
    g: &CoefficientField,
    b: &BlochSymbol,
    k: &[f64],
    modes: &[Vec<i64>],
    cutoff: usize,
    f: Option<&CoefficientField>,
    q: Option<&CoefficientField>,
) -> Result<FiberOperator> {
    let lat = g.lattice();
    check_k(lat, k)?;
    if cutoff == 0 {
        return Err(HomogError::Parameter("cutoff must be at least 1".into()));
    }
    g.check_resolves(2 * cutoff, cutoff)?;
    for w in [f, q].into_iter().flatten() {
        w.check_resolves(2 * cutoff, cutoff)?;
    }
    let n = b.n;
    let syms = shifted_symbols(lat, b, k, modes);
    let support: HashSet<&Vec<i64>> = g.support().iter().collect();
    let size = n * modes.len();
    let mut a = CMat::zeros(size, size);
    let mut cache: HashMap<Vec<i64>, CMat> = HashMap::new();
    let left: Vec<CMat> = syms.iter().map(|s| s.adjoint()).collect();
    for (i, p) in modes.iter().enumerate() {
        for (j, pp) in modes.iter().enumerate() {
            let diff: Vec<i64> = p.iter().zip(pp).map(|(x, y)| x - y).collect();
            if !support.contains(&diff) {
                continue;
            }
            let gh = cache.entry(diff.clone()).or_insert_with(|| g.coefficient(&diff));
            let block = &left[i] * (&*gh * &syms[j]);
            debug_assert_eq!(block.nrows(), n);
            a.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    let mut kind = FiberKind::Plain;
    if let Some(f) = f {
        let fm = convolution_matrix(f, modes);
        a = fm.adjoint() * &a * &fm;
        kind = FiberKind::Sandwiched;
    }
    let mass = match q {
        Some(q) if f.is_none() => {
            kind = FiberKind::WeightedMass;
            Some(linalg::hermitian_part(&convolution_matrix(q, modes)))
        }
        _ => None,
    };
    Ok(FiberOperator {
        k: k.to_vec(),
        cutoff,
        n,
        modes: modes.to_vec(),
        matrix: linalg::hermitian_part(&a),
        mass,
        kind,
    })
}

/// Spectrum of `b(D+k)* g b(D+k)` on `modes` (generalized with the mass of `q`)
/// from the singular values of `L* X(k)`, where `L L*` is the convolution
/// matrix of `g` and `X(k) = diag b(p+k)`. Small eigenvalues keep their
/// relative accuracy, which the assembled matrix loses to roundoff of size
/// `|A(k)|`.
pub fn factored_spectrum(
    g: &CoefficientField,
    b: &BlochSymbol,
    k: &[f64],
    modes: &[Vec<i64>],
    cutoff: usize,
    q: Option<&CoefficientField>,
) -> Result<FiberSpectrum> {
    let lat = g.lattice();
    check_k(lat, k)?;
    g.check_resolves(2 * cutoff, cutoff)?;
    if let Some(q) = q {
        q.check_resolves(2 * cutoff, cutoff)?;
    }
    let (m, n) = (b.m, b.n);
    let syms = shifted_symbols(lat, b, k, modes);
    let mut x = CMat::zeros(m * modes.len(), n * modes.len());
    for (i, s) in syms.iter().enumerate() {
        x.view_mut((i * m, i * n), (m, n)).copy_from(s);
    }
    let chol = |h: &CoefficientField| {
        nalgebra::Cholesky::new(linalg::hermitian_part(&convolution_matrix(h, modes)))
            .map(|c| c.l())
            .ok_or_else(|| HomogError::Linalg("convolution matrix is not positive definite".into()))
    };
    let mut y = chol(g)?.adjoint() * x;
    let mut back = None;
    if let Some(q) = q {
        // Y R^{-*} with M = R R*
        let r = chol(q)?;
        let rinv_adj = r
            .solve_lower_triangular(&CMat::identity(r.nrows(), r.nrows()))
            .ok_or_else(|| HomogError::Linalg("triangular solve failed".into()))?
            .adjoint();
        y = y * &rinv_adj;
        back = Some(rinv_adj);
    }
    let (sv, vt) = linalg::svd_right(&y)?;
    let size = n * modes.len();
    let mut values: Vec<f64> = (0..size).map(|i| sv.get(i).map(|s| s * s).unwrap_or(0.0)).collect();
    values.reverse();
    let v = vt.adjoint();
    let mut vectors = CMat::from_fn(size, size, |r, c| v[(r, size - 1 - c)]);
    if let Some(rinv_adj) = back {
        vectors = rinv_adj * vectors;
    }
    let clusters = linalg::cluster_labels(&values, DEFAULT_GAP_TOL);
    let mass = q.map(|q| linalg::hermitian_part(&convolution_matrix(q, modes)));
    Ok(FiberSpectrum { values, vectors, mass, clusters })
}

/// Matrix over the full mode box `[-N, N]^d`.
pub fn assemble(
    g: &CoefficientField,
    b: &BlochSymbol,
    k: &[f64],
    cutoff: usize,
    f: Option<&CoefficientField>,
    q: Option<&CoefficientField>,
) -> Result<FiberOperator> {
    let modes = mode_box(b.d, cutoff);
    assemble_block(g, b, k, &modes, cutoff, f, q)
}

/// Block-diagonal operator `b(p+k)* g0 b(p+k)` over `modes`, optionally
/// sandwiched by `f0` or paired with the constant mass `qbar`.
pub fn effective_fiber(
    lat: &Lattice,
    g0: &CMat,
    b: &BlochSymbol,
    k: &[f64],
    modes: &[Vec<i64>],
    f0: Option<&CMat>,
    qbar: Option<&CMat>,
) -> Result<FiberOperator> {
    check_k(lat, k)?;
    let n = b.n;
    let syms = shifted_symbols(lat, b, k, modes);
    let size = n * modes.len();
    let mut a = CMat::zeros(size, size);
    let mut mass = qbar.map(|_| CMat::zeros(size, size));
    for (i, s) in syms.iter().enumerate() {
        let mut block = s.adjoint() * g0 * s;
        if let Some(f0) = f0 {
            block = f0.adjoint() * block * f0;
        }
        a.view_mut((i * n, i * n), (n, n)).copy_from(&block);
        if let (Some(mm), Some(qb)) = (mass.as_mut(), qbar) {
            mm.view_mut((i * n, i * n), (n, n)).copy_from(qb);
        }
    }
    let kind = if mass.is_some() { FiberKind::WeightedMass } else { FiberKind::Effective };
    Ok(FiberOperator {
        k: k.to_vec(),
        cutoff: modes.iter().flat_map(|m| m.iter()).map(|c| c.unsigned_abs() as usize).max().unwrap_or(0),
        n,
        modes: modes.to_vec(),
        matrix: linalg::hermitian_part(&a),
        mass,
        kind,
    })
}

/// Diagonal of `R(k, ε)^{s/2}`: `ε^s (|p + k|² + ε²)^{-s/2}` per mode, repeated `n` times.
pub fn smoothing(lat: &Lattice, k: &[f64], eps: f64, s: f64, modes: &[Vec<i64>], n: usize) -> Result<Vec<f64>> {
    if !(eps > 0.0) || !(s >= 0.0) {
        return Err(HomogError::Parameter(format!("smoothing needs eps > 0 and s >= 0 (got {eps}, {s})")));
    }
    let mut out = Vec::with_capacity(n * modes.len());
    for p in modes {
        let bp = lat.dual_point(p);
        let t2: f64 = bp.iter().zip(k).map(|(a, c)| (a + c) * (a + c)).sum();
        let r = eps.powf(s) * (t2 + eps * eps).powf(-0.5 * s);
        out.extend(std::iter::repeat(r).take(n));
    }
    Ok(out)
}

/// Eigen-data of a fiber, for the plain or generalized problem.
#[derive(Debug, Clone)]
pub struct FiberSpectrum {
    pub values: Vec<f64>,
    /// Orthonormal (or mass-orthonormal) eigenvectors as columns.
    pub vectors: CMat,
    pub mass: Option<CMat>,
    pub clusters: Vec<usize>,
}

pub fn eigendecompose(op: &FiberOperator, gap_tol: f64) -> Result<FiberSpectrum> {
    let (values, vectors) = match &op.mass {
        Some(m) => {
            let e = linalg::gen_herm_eigen(&op.matrix, m)?;
            (e.values, e.vectors)
        }
        None => {
            let e = linalg::herm_eigen(&op.matrix)?;
            (e.values, e.vectors)
        }
    };
    let clusters = linalg::cluster_labels(&values, gap_tol);
    Ok(FiberSpectrum { values, vectors, mass: op.mass.clone(), clusters })
}

impl FiberSpectrum {
    /// Eigenvalues with roundoff negatives set to zero.
    pub fn clamped_values(&self) -> Result<Vec<f64>> {
        let top = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.values
            .iter()
            .map(|&v| {
                if v >= 0.0 {
                    Ok(v)
                } else if v >= -PSD_CLAMP * top {
                    Ok(0.0)
                } else {
                    Err(HomogError::NotPsd { value: v, clamp: -PSD_CLAMP * top })
                }
            })
            .collect()
    }

    /// `φ(A)` for `φ` given on eigenvalues: `V φ(Λ) V*` (times the mass on the right
    /// for generalized pairs, giving `φ(M^{-1} A)`).
    pub fn apply(&self, phi: impl Fn(f64) -> f64) -> Result<CMat> {
        let vals = self.clamped_values()?;
        let d: Vec<_> = vals.iter().map(|&v| re(phi(v))).collect();
        let out = linalg::reassemble(&self.vectors, &d, &self.vectors);
        Ok(match &self.mass {
            Some(m) => out * m,
            None => out,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `cos(τ A^{1/2})`.
pub fn operator_cosine(spec: &FiberSpectrum, tau: f64) -> Result<CMat> {
    spec.apply(|l| (tau * l.sqrt()).cos())
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    linalg::op_norm(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldFlags;

    fn unit_field(d: usize) -> CoefficientField {
        CoefficientField::constant(&Lattice::cubic(d), CMat::identity(d, d), FieldFlags::REAL_SPD).unwrap()
    }

    #[test]
    fn mode_box_has_zero_and_right_size() {
        let m = mode_box(2, 2);
        assert_eq!(m.len(), 25);
        assert_eq!(m.iter().filter(|p| p.iter().all(|&c| c == 0)).count(), 1);
        assert_eq!(box_index(&m[7], 2), Some(7));
    }

    #[test]
    fn constant_one_dimensional_fiber_is_diagonal() {
        let g = unit_field(1);
        let b = BlochSymbol::gradient(1).unwrap();
        let op = assemble(&g, &b, &[0.3], 2, None, None).unwrap();
        for (i, p) in op.modes.iter().enumerate() {
            let want = (p[0] as f64 + 0.3).powi(2);
            assert!((op.matrix[(i, i)].re - want).abs() < 1e-14);
        }
        assert!((op.matrix.clone() - CMat::from_diagonal(&op.matrix.diagonal())).norm() < 1e-14);
    }

    #[test]
    fn blocks_split_layered_fields_by_second_index() {
        let lat = Lattice::cubic(2);
        let g = CoefficientField::from_trig(
            &lat,
            1,
            1,
            &[(vec![0, 0], CMat::identity(1, 1)), (vec![1, 0], CMat::identity(1, 1).scale(0.1)), (vec![-1, 0], CMat::identity(1, 1).scale(0.1))],
            FieldFlags::REAL_SPD,
        )
        .unwrap();
        let blocks = coupling_blocks(&[g.support()], 2, 3);
        assert_eq!(blocks.len(), 7);
        assert!(blocks[0].iter().all(|p| p[1] == 0));
        assert_eq!(blocks[0].len(), 7);
    }

    #[test]
    fn smoothing_formula() {
        let lat = Lattice::cubic(1);
        let r = smoothing(&lat, &[0.0], 0.1, 2.0, &[vec![0], vec![1]], 1).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        assert!((r[1] - 0.01 / 1.01).abs() < 1e-15);
    }

    #[test]
    fn cosine_of_scalar() {
        let op = FiberOperator {
            k: vec![0.0],
            cutoff: 1,
            n: 1,
            modes: vec![vec![0]],
            matrix: CMat::from_element(1, 1, re(4.0)),
            mass: None,
            kind: FiberKind::Plain,
        };
        let s = eigendecompose(&op, DEFAULT_GAP_TOL).unwrap();
        let c = operator_cosine(&s, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((c[(0, 0)].re + 1.0).abs() < 1e-15);
        let id = operator_cosine(&s, 0.0).unwrap();
        assert!((id[(0, 0)].re - 1.0).abs() < 1e-15);
    }
}
