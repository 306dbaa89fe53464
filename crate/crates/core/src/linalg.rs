//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SVD};
use openblas_src as _;
use num_complex::Complex64;

use crate::error::{HomogError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const MAX_SWEEPS: usize = 100_000;

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[inline]
pub fn im(x: f64) -> Complex64 {
    Complex64::new(0.0, x)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Build a complex matrix from a real row-major slice.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| re(data[i * cols + j]))
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Largest absolute entry.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Max-entry deviation from Hermitian symmetry, relative to the max entry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(a - a.adjoint())) / scale
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn herm_eigen(a: &CMat) -> Result<HermEigen> {
    let (values, vectors) = heevd(a, true)?;
    Ok(HermEigen { values, vectors })
}

pub fn herm_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    Ok(heevd(a, false)?.0)
}

/// LAPACK divide-and-conquer solver on the Hermitian part of `a`; eigenvalues ascend.
fn heevd(a: &CMat, want_vectors: bool) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((vec![], CMat::zeros(0, 0)));
    }
    let mut h = hermitian_part(a);
    let ni = i32::try_from(n).map_err(|_| HomogError::Linalg(format!("matrix too large (n = {n})")))?;
    let jobz = if want_vectors { b'V' } else { b'N' };
    let mut w = vec![0.0; n];
    let mut info = 0;
    let (mut work, mut rwork, mut iwork) = (vec![Complex64::new(0.0, 0.0)], vec![0.0], vec![0]);
    // SAFETY: every slice is sized per the LAPACK workspace contract; the first
    // call is a workspace query.
    unsafe {
        lapack::zheevd(jobz, b'U', ni, h.as_mut_slice(), ni, &mut w, &mut work, -1, &mut rwork, -1, &mut iwork, -1, &mut info);
    }
    if info != 0 {
        return Err(HomogError::Linalg(format!("zheevd workspace query failed (info = {info})")));
    }
    let lwork = work[0].re as usize;
    let lrwork = rwork[0] as usize;
    let liwork = iwork[0] as usize;
    work = vec![Complex64::new(0.0, 0.0); lwork.max(1)];
    rwork = vec![0.0; lrwork.max(1)];
    iwork = vec![0; liwork.max(1)];
    unsafe {
        lapack::zheevd(
            jobz,
            b'U',
            ni,
            h.as_mut_slice(),
            ni,
            &mut w,
            &mut work,
            lwork as i32,
            &mut rwork,
            lrwork as i32,
            &mut iwork,
            liwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(HomogError::Linalg(format!("Hermitian eigensolver failed (info = {info}, n = {n})")));
    }
    Ok((w, if want_vectors { h } else { CMat::zeros(0, 0) }))
}

/// Singular values (descending) and the full `V*` of `a = U Σ V*`, by LAPACK.
pub fn svd_right(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok((vec![], CMat::identity(n, n)));
    }
    let mut a = a.clone();
    let (mi, ni) = (m as i32, n as i32);
    let mut s = vec![0.0; m.min(n)];
    let mut vt = CMat::zeros(n, n);
    let mut u = vec![Complex64::new(0.0, 0.0); 1];
    let mut rwork = vec![0.0; 5 * m.min(n)];
    let mut work = vec![Complex64::new(0.0, 0.0)];
    let mut info = 0;
    // SAFETY: slices are sized per the LAPACK contract; U is not referenced
    // with jobu = 'N'. The first call is a workspace query.
    unsafe {
        lapack::zgesvd(b'N', b'A', mi, ni, a.as_mut_slice(), mi, &mut s, &mut u, 1, vt.as_mut_slice(), ni, &mut work, -1, &mut rwork, &mut info);
    }
    if info != 0 {
        return Err(HomogError::Linalg(format!("zgesvd workspace query failed (info = {info})")));
    }
    let lwork = (work[0].re as usize).max(1);
    work = vec![Complex64::new(0.0, 0.0); lwork];
    unsafe {
        lapack::zgesvd(b'N', b'A', mi, ni, a.as_mut_slice(), mi, &mut s, &mut u, 1, vt.as_mut_slice(), ni, &mut work, lwork as i32, &mut rwork, &mut info);
    }
    if info != 0 {
        return Err(HomogError::Linalg(format!("SVD failed to converge (info = {info})")));
    }
    Ok((s, vt))
}

/// Largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    match SVD::try_new(a.clone(), false, false, f64::EPSILON, MAX_SWEEPS) {
        Some(svd) => svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s)),
        None => {
            // Fall back on the Gram matrix when bidiagonal QR stalls.
            let gram = a.adjoint() * a;
            herm_eigenvalues(&gram).map(|v| v.last().copied().unwrap_or(0.0).max(0.0).sqrt()).unwrap_or(f64::NAN)
        }
    }
}

/// Smallest singular value.
pub fn min_singular_value(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let svd = SVD::new(a.clone(), false, false);
    svd.singular_values.iter().fold(f64::INFINITY, |m, &s| m.min(s))
}

/// V f(Λ) V* for a Hermitian matrix.
pub fn herm_fn(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let e = herm_eigen(a)?;
    Ok(reassemble(&e.vectors, &e.values.iter().map(|&x| re(f(x))).collect::<Vec<_>>(), &e.vectors))
}

/// V diag(d) W*.
pub fn reassemble(v: &CMat, d: &[Complex64], w: &CMat) -> CMat {
    let mut vd = v.clone();
    for (j, &dj) in d.iter().enumerate() {
        for z in vd.column_mut(j).iter_mut() { *z *= dj; }
    }
    vd * w.adjoint()
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| HomogError::Linalg("matrix is singular".into()))
}

fn check_positive(values: &[f64]) -> Result<()> {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let Some(&min) = values.first() {
        if min <= 1e-14 * max.max(f64::MIN_POSITIVE) {
            return Err(HomogError::Linalg(format!("matrix not positive definite (min eigenvalue {min:e})")));
        }
    }
    Ok(())
}

pub fn hpd_sqrt(a: &CMat) -> Result<CMat> {
    let e = herm_eigen(a)?;
    check_positive(&e.values)?;
    Ok(reassemble(&e.vectors, &e.values.iter().map(|&x| re(x.sqrt())).collect::<Vec<_>>(), &e.vectors))
}

pub fn hpd_inv_sqrt(a: &CMat) -> Result<CMat> {
    let e = herm_eigen(a)?;
    check_positive(&e.values)?;
    Ok(reassemble(&e.vectors, &e.values.iter().map(|&x| re(1.0 / x.sqrt())).collect::<Vec<_>>(), &e.vectors))
}

pub fn hpd_inverse(a: &CMat) -> Result<CMat> {
    let e = herm_eigen(a)?;
    check_positive(&e.values)?;
    Ok(reassemble(&e.vectors, &e.values.iter().map(|&x| re(1.0 / x)).collect::<Vec<_>>(), &e.vectors))
}

/// Generalized Hermitian-definite problem A v = λ M v.
///
/// `vectors` are M-orthonormal: V* M V = I.
#[derive(Debug, Clone)]
pub struct GenEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn gen_herm_eigen(a: &CMat, mass: &CMat) -> Result<GenEigen> {
    let chol = nalgebra::Cholesky::new(hermitian_part(mass))
        .ok_or_else(|| HomogError::Linalg("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&CMat::identity(l.nrows(), l.nrows()))
        .ok_or_else(|| HomogError::Linalg("triangular solve failed".into()))?;
    let c = &linv * a * linv.adjoint();
    let e = herm_eigen(&c)?;
    let vectors = linv.adjoint() * e.vectors;
    Ok(GenEigen { values: e.values, vectors })
}

/// Labels for maximal runs of ascending values whose consecutive gaps are
/// below `rel_tol * scale`, scale being the largest magnitude (or 1).
pub fn cluster_labels(values: &[f64], rel_tol: f64) -> Vec<usize> {
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut labels = Vec::with_capacity(values.len());
    let mut current = 0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 && (v - values[i - 1]).abs() >= rel_tol * scale {
            current += 1;
        }
        labels.push(current);
    }
    labels
}

/// Least-squares solution of an overdetermined real system via normal equations
/// in QR form.
pub fn lstsq_real(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = design.clone().qr();
    let qt_b = qr.q().transpose() * rhs;
    qr.r()
        .solve_upper_triangular(&qt_b)
        .ok_or_else(|| HomogError::Linalg("rank-deficient least-squares design".into()))
}

/// Slope and intercept of the least-squares line through (x, y).
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_orthonormal() {
        let a = CMat::from_fn(6, 6, |i, j| Complex64::new((i + j) as f64, i as f64 - j as f64));
        let e = herm_eigen(&a).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let g = e.vectors.adjoint() * &e.vectors;
        assert!((g - identity(6)).norm() < 1e-12);
    }

    #[test]
    fn generalized_eigen_is_mass_orthonormal() {
        let a = CMat::from_fn(4, 4, |i, j| if i == j { re(1.0 + i as f64) } else { im(0.1 * (i as f64 - j as f64)) });
        let m = CMat::from_fn(4, 4, |i, j| if i == j { re(2.0) } else { re(0.3) });
        let e = gen_herm_eigen(&a, &m).unwrap();
        let g = e.vectors.adjoint() * &m * &e.vectors;
        assert!((g - identity(4)).norm() < 1e-12);
        for (j, &l) in e.values.iter().enumerate() {
            let v = e.vectors.column(j);
            let r = &a * v - (&m * v) * re(l);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn norm_of_diag() {
        let a = from_real_rows(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((op_norm(&a) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn clusters_split_on_gaps() {
        let l = cluster_labels(&[1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0], 1e-6);
        assert_eq!(l, vec![0, 0, 1, 2, 2]);
    }
}
