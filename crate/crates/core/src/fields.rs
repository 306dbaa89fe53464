//! Periodic coefficient fields and Bloch symbols.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};
use crate::lattice::Lattice;
use crate::linalg::{self, re, CMat};

/// Homogeneous first-order symbol `b(ξ) = Σ_l B_l ξ_l` with `m × n` blocks.
#[derive(Debug, Clone)]
pub struct BlochSymbol {
    pub name: String,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub coeffs: Vec<CMat>,
    pub alpha0: f64,
    pub alpha1: f64,
}

impl BlochSymbol {
    pub fn eval(&self, xi: &[f64]) -> CMat {
        let mut out = CMat::zeros(self.m, self.n);
        for (bl, &x) in self.coeffs.iter().zip(xi) {
            if x != 0.0 {
                out += bl.scale(x);
            }
        }
        out
    }

    /// `b(D) = D`, the gradient: `m = d`, `n = 1`.
    pub fn gradient(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(HomogError::Dimension("gradient symbol needs d >= 1".into()));
        }
        let coeffs = (0..d).map(|l| CMat::from_fn(d, 1, |i, _| re(if i == l { 1.0 } else { 0.0 }))).collect();
        Ok(BlochSymbol { name: "gradient".into(), d, m: d, n: 1, coeffs, alpha0: 1.0, alpha1: 1.0 })
    }

    /// Symmetrized gradient acting on displacements, `m = d(d+1)/2`, `n = d`.
    pub fn elasticity(d: usize) -> Result<Self> {
        // Each row: list of (xi index, column, weight).
        let rows: Vec<Vec<(usize, usize, f64)>> = match d {
            2 => vec![vec![(0, 0, 1.0)], vec![(1, 0, 0.5), (0, 1, 0.5)], vec![(1, 1, 1.0)]],
            3 => vec![
                vec![(0, 0, 1.0)],
                vec![(1, 0, 0.5), (0, 1, 0.5)],
                vec![(1, 1, 1.0)],
                vec![(2, 1, 0.5), (1, 2, 0.5)],
                vec![(2, 2, 1.0)],
                vec![(2, 0, 0.5), (0, 2, 0.5)],
            ],
            _ => return Err(HomogError::Dimension(format!("elasticity symbol supports d = 2, 3 (got {d})"))),
        };
        Ok(Self::from_rows("elasticity", d, d, &rows, 0.25, 1.0))
    }

    /// Symbol of the Hill factorization: divergence row followed by the
    /// antisymmetric rows, `m = 1 + d(d-1)/2`, `n = d`.
    pub fn hill(d: usize) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(HomogError::Dimension(format!("Hill symbol supports d = 2, 3 (got {d})")));
        }
        let mut rows: Vec<Vec<(usize, usize, f64)>> = vec![(0..d).map(|j| (j, j, 1.0)).collect()];
        for j in 0..d {
            for l in (j + 1)..d {
                rows.push(vec![(l, j, 1.0), (j, l, -1.0)]);
            }
        }
        Ok(Self::from_rows("hill", d, d, &rows, 1.0, 1.0))
    }

    fn from_rows(name: &str, d: usize, n: usize, rows: &[Vec<(usize, usize, f64)>], alpha0: f64, alpha1: f64) -> Self {
        let m = rows.len();
        let mut coeffs = vec![CMat::zeros(m, n); d];
        for (r, entries) in rows.iter().enumerate() {
            for &(xi, col, w) in entries {
                coeffs[xi][(r, col)] += re(w);
            }
        }
        BlochSymbol { name: name.into(), d, m, n, coeffs, alpha0, alpha1 }
    }

    /// Extreme eigenvalues of `b(θ)* b(θ)` over the given directions.
    pub fn ellipticity_on(&self, thetas: &[Vec<f64>]) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for th in thetas {
            let b = self.eval(th);
            let v = linalg::herm_eigenvalues(&(b.adjoint() * &b))?;
            lo = lo.min(v[0]);
            hi = hi.max(*v.last().unwrap());
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct FieldFlags {
    pub hermitian: bool,
    pub positive: bool,
    pub real_entries: bool,
}

impl FieldFlags {
    pub const NONE: FieldFlags = FieldFlags { hermitian: false, positive: false, real_entries: false };
    pub const HERMITIAN_POSITIVE: FieldFlags = FieldFlags { hermitian: true, positive: true, real_entries: false };
    pub const REAL_SPD: FieldFlags = FieldFlags { hermitian: true, positive: true, real_entries: true };
}

/// Relative threshold below which a Fourier coefficient counts as absent.
pub const SUPPORT_TOL: f64 = 1e-14;
const FLAG_TOL: f64 = 1e-12;

/// A periodic matrix-valued function stored as grid samples plus its DFT.
///
/// Samples live on the grid `u_j = i_j / N_j` in fractional cell coordinates,
/// axis 0 varying fastest. An axis may declare an exact bandwidth, in which case
/// Fourier coefficients beyond it are zero regardless of the grid.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    lattice: Lattice,
    rows: usize,
    cols: usize,
    grid: Vec<usize>,
    band: Vec<Option<usize>>,
    samples: Vec<Vec<Complex64>>,
    spectrum: Vec<Vec<Complex64>>,
    flags: FieldFlags,
    support: Vec<Vec<i64>>,
}

fn strides(grid: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(grid.len());
    let mut acc = 1;
    for &g in grid {
        s.push(acc);
        acc *= g;
    }
    s
}

fn multi_index(mut flat: usize, grid: &[usize]) -> Vec<usize> {
    grid.iter()
        .map(|&g| {
            let i = flat % g;
            flat /= g;
            i
        })
        .collect()
}

/// In-place multi-dimensional DFT (forward uses `e^{-i}`), unnormalized.
fn nd_fft(data: &mut [Complex64], grid: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let st = strides(grid);
    let total: usize = grid.iter().product();
    for (axis, &len) in grid.iter().enumerate() {
        if len <= 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        let stride = st[axis];
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        for base in 0..total {
            if (base / stride) % len != 0 {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[base + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[base + i * stride] = *v;
            }
        }
    }
}

impl CoefficientField {
    /// Sample `sampler` (a function of the Cartesian point) on the grid.
    pub fn from_closure(
        lattice: &Lattice,
        rows: usize,
        cols: usize,
        grid: &[usize],
        band: Vec<Option<usize>>,
        flags: FieldFlags,
        sampler: impl Fn(&[f64]) -> CMat,
    ) -> Result<Self> {
        let d = lattice.dim;
        if grid.len() != d || band.len() != d {
            return Err(HomogError::Dimension(format!("grid/band must have {d} axes")));
        }
        for (j, (&g, b)) in grid.iter().zip(&band).enumerate() {
            let varies = g > 1;
            if !varies && *b != Some(0) {
                return Err(HomogError::Parameter(format!("axis {j} has grid 1 but does not declare bandwidth 0")));
            }
            if varies && g < 4 {
                return Err(HomogError::Parameter(format!("grid size {g} on axis {j} is below 4")));
            }
            if let Some(bw) = b {
                if 2 * bw + 1 > g {
                    return Err(HomogError::Aliasing { axis: j, grid: g, needed: *bw, cutoff: *bw });
                }
            }
        }
        let total: usize = grid.iter().product();
        let mut samples = vec![vec![Complex64::new(0.0, 0.0); total]; rows * cols];
        for flat in 0..total {
            let idx = multi_index(flat, grid);
            let u: Vec<f64> = idx.iter().zip(grid).map(|(&i, &g)| i as f64 / g as f64).collect();
            let x = lattice.cell_point(&u);
            let m = sampler(&x);
            if m.nrows() != rows || m.ncols() != cols {
                return Err(HomogError::Dimension(format!(
                    "sampler returned {}x{} instead of {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for r in 0..rows {
                for c in 0..cols {
                    samples[r * cols + c][flat] = m[(r, c)];
                }
            }
        }
        Self::from_samples(lattice, rows, cols, grid.to_vec(), band, flags, samples)
    }

    fn from_samples(
        lattice: &Lattice,
        rows: usize,
        cols: usize,
        grid: Vec<usize>,
        band: Vec<Option<usize>>,
        flags: FieldFlags,
        samples: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let total: usize = grid.iter().product();
        let mut spectrum = samples.clone();
        for s in spectrum.iter_mut() {
            nd_fft(s, &grid, false);
            s.iter_mut().for_each(|v| *v /= total as f64);
        }
        // Zero coefficients outside declared bands so that they are exact.
        for flat in 0..total {
            let idx = multi_index(flat, &grid);
            let outside = idx.iter().zip(&grid).zip(&band).any(|((&i, &g), b)| {
                let f = signed_freq(i, g);
                matches!(b, Some(bw) if f.unsigned_abs() as usize > *bw)
            });
            if outside {
                spectrum.iter_mut().for_each(|s| s[flat] = Complex64::new(0.0, 0.0));
            }
        }
        let mut field = CoefficientField {
            lattice: lattice.clone(),
            rows,
            cols,
            grid,
            band,
            samples,
            spectrum,
            flags,
            support: Vec::new(),
        };
        field.verify_flags()?;
        field.support = field.compute_support();
        Ok(field)
    }

    /// Trigonometric polynomial with exact coefficients.
    pub fn from_trig(lattice: &Lattice, rows: usize, cols: usize, terms: &[(Vec<i64>, CMat)], flags: FieldFlags) -> Result<Self> {
        let d = lattice.dim;
        let mut band = vec![0usize; d];
        for (m, c) in terms {
            if m.len() != d || c.nrows() != rows || c.ncols() != cols {
                return Err(HomogError::Dimension("trig term has wrong shape".into()));
            }
            for (b, &mj) in band.iter_mut().zip(m) {
                *b = (*b).max(mj.unsigned_abs() as usize);
            }
        }
        let grid: Vec<usize> = band.iter().map(|&b| if b == 0 { 1 } else { (8 * b + 2).next_power_of_two().max(64) }).collect();
        let lat = lattice.clone();
        let terms_owned: Vec<(Vec<f64>, CMat)> = terms.iter().map(|(m, c)| (lat.dual_point(m), c.clone())).collect();
        let sampler = move |x: &[f64]| {
            let mut out = CMat::zeros(rows, cols);
            for (b, c) in &terms_owned {
                let phase: f64 = b.iter().zip(x).map(|(p, q)| p * q).sum();
                out += c * Complex64::from_polar(1.0, phase);
            }
            out
        };
        Self::from_closure(lattice, rows, cols, &grid, band.into_iter().map(Some).collect(), flags, sampler)
    }

    pub fn constant(lattice: &Lattice, value: CMat, flags: FieldFlags) -> Result<Self> {
        let d = lattice.dim;
        let (r, c) = (value.nrows(), value.ncols());
        Self::from_closure(lattice, r, c, &vec![1; d], vec![Some(0); d], flags, move |_| value.clone())
    }

    /// Pointwise map of the samples into a new field; axes with bandwidth 0 stay flat.
    pub fn map(&self, rows: usize, cols: usize, flags: FieldFlags, f: impl Fn(&CMat) -> Result<CMat>) -> Result<Self> {
        let total = self.total();
        let mut samples = vec![vec![Complex64::new(0.0, 0.0); total]; rows * cols];
        for flat in 0..total {
            let m = f(&self.sample(flat))?;
            for r in 0..rows {
                for c in 0..cols {
                    samples[r * cols + c][flat] = m[(r, c)];
                }
            }
        }
        let band = self.band.iter().map(|b| if *b == Some(0) { Some(0) } else { None }).collect();
        Self::from_samples(&self.lattice, rows, cols, self.grid.clone(), band, flags, samples)
    }

    /// Pointwise inverse.
    pub fn inverse(&self) -> Result<Self> {
        self.map(self.rows, self.cols, self.flags, |m| linalg::inverse(m))
    }

    fn total(&self) -> usize {
        self.grid.iter().product()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn band(&self) -> &[Option<usize>] {
        &self.band
    }

    pub fn flags(&self) -> FieldFlags {
        self.flags
    }

    pub fn is_band_limited(&self) -> bool {
        self.band.iter().all(|b| b.is_some())
    }

    pub fn num_samples(&self) -> usize {
        self.total()
    }

    /// Grid sample with flat index `flat`.
    pub fn sample(&self, flat: usize) -> CMat {
        CMat::from_fn(self.rows, self.cols, |r, c| self.samples[r * self.cols + c][flat])
    }

    /// Fractional coordinates of grid sample `flat`.
    pub fn sample_coords(&self, flat: usize) -> Vec<f64> {
        multi_index(flat, &self.grid).iter().zip(&self.grid).map(|(&i, &g)| i as f64 / g as f64).collect()
    }

    /// Largest frequency on `axis` whose coefficient is resolved exactly or by the grid.
    pub fn resolved_frequency(&self, axis: usize) -> usize {
        match self.band[axis] {
            Some(_) => usize::MAX,
            None => (self.grid[axis] - 1) / 2,
        }
    }

    /// Fail unless every frequency with `|m_j| <= freq` is resolved.
    pub fn check_resolves(&self, freq: usize, cutoff: usize) -> Result<()> {
        for axis in 0..self.dim() {
            if freq > self.resolved_frequency(axis) {
                return Err(HomogError::Aliasing { axis, grid: self.grid[axis], needed: freq, cutoff });
            }
        }
        Ok(())
    }

    /// Fourier coefficient at integer frequency `m`.
    pub fn coefficient(&self, m: &[i64]) -> CMat {
        match self.flat_of_freq(m) {
            Some(flat) => CMat::from_fn(self.rows, self.cols, |r, c| self.spectrum[r * self.cols + c][flat]),
            None => CMat::zeros(self.rows, self.cols),
        }
    }

    fn flat_of_freq(&self, m: &[i64]) -> Option<usize> {
        let mut flat = 0;
        let mut stride = 1;
        for ((&mj, &g), b) in m.iter().zip(&self.grid).zip(&self.band) {
            let a = mj.unsigned_abs() as usize;
            if let Some(bw) = b {
                if a > *bw {
                    return None;
                }
            }
            if 2 * a + 1 > g {
                return None;
            }
            flat += (mj.rem_euclid(g as i64) as usize) * stride;
            stride *= g;
        }
        Some(flat)
    }

    /// Frequencies whose coefficients exceed `SUPPORT_TOL` times the largest one.
    pub fn support(&self) -> &[Vec<i64>] {
        &self.support
    }

    fn compute_support(&self) -> Vec<Vec<i64>> {
        let total = self.total();
        let mags: Vec<f64> = (0..total)
            .map(|flat| self.spectrum.iter().fold(0.0_f64, |m, s| m.max(s[flat].norm())))
            .collect();
        let top = mags.iter().fold(0.0_f64, |m, &v| m.max(v));
        let mut out = Vec::new();
        for (flat, &mag) in mags.iter().enumerate() {
            if mag > SUPPORT_TOL * top && mag > 0.0 {
                let idx = multi_index(flat, &self.grid);
                let freq: Vec<i64> = idx.iter().zip(&self.grid).map(|(&i, &g)| signed_freq(i, g)).collect();
                if freq.iter().zip(&self.grid).all(|(&f, &g)| 2 * f.unsigned_abs() as usize + 1 <= g) {
                    out.push(freq);
                }
            }
        }
        out
    }

    /// Grid average, i.e. the zero Fourier coefficient.
    pub fn mean(&self) -> CMat {
        self.coefficient(&vec![0; self.dim()])
    }

    /// `(mean g^{-1})^{-1}`.
    pub fn harmonic_mean(&self) -> Result<CMat> {
        let total = self.total();
        let mut acc = CMat::zeros(self.rows, self.cols);
        for flat in 0..total {
            acc += linalg::inverse(&self.sample(flat))?;
        }
        linalg::inverse(&acc.unscale(total as f64))
    }

    /// `max_x |g(x)|`.
    pub fn sup_norm(&self) -> f64 {
        (0..self.total()).map(|f| linalg::op_norm(&self.sample(f))).fold(0.0, f64::max)
    }

    /// `max_x |g(x)^{-1}|`.
    pub fn inverse_sup_norm(&self) -> f64 {
        (0..self.total())
            .map(|f| 1.0 / linalg::min_singular_value(&self.sample(f)))
            .fold(0.0, f64::max)
    }

    /// Rebuild grid samples from the cached coefficients.
    pub fn resample(&self) -> Vec<CMat> {
        let total = self.total();
        let mut data = self.spectrum.clone();
        for s in data.iter_mut() {
            nd_fft(s, &self.grid, true);
        }
        (0..total)
            .map(|flat| CMat::from_fn(self.rows, self.cols, |r, c| data[r * self.cols + c][flat]))
            .collect()
    }

    /// Largest relative deviation between samples and their Fourier resynthesis.
    pub fn round_trip_error(&self) -> f64 {
        let back = self.resample();
        let scale = (0..self.total()).map(|f| linalg::max_abs(&self.sample(f))).fold(0.0, f64::max).max(1e-300);
        back.iter()
            .enumerate()
            .map(|(f, m)| linalg::max_abs(&(m - self.sample(f))))
            .fold(0.0, f64::max)
            / scale
    }

    fn verify_flags(&self) -> Result<()> {
        for flat in 0..self.total() {
            let s = self.sample(flat);
            let scale = linalg::max_abs(&s).max(1.0);
            if self.flags.hermitian {
                if s.nrows() != s.ncols() || linalg::max_abs(&(&s - s.adjoint())) > FLAG_TOL * scale {
                    return Err(HomogError::FieldCheck(format!("sample {flat} is not Hermitian")));
                }
            }
            if self.flags.real_entries && s.iter().any(|z| z.im.abs() > FLAG_TOL * scale) {
                return Err(HomogError::FieldCheck(format!("sample {flat} has complex entries")));
            }
            if self.flags.positive {
                let v = linalg::herm_eigenvalues(&s)?;
                if !(v[0] > 0.0) {
                    return Err(HomogError::FieldCheck(format!(
                        "sample {flat} at {:?} is not positive definite (min eigenvalue {:e})",
                        self.sample_coords(flat),
                        v[0]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Symbol plus coefficient fields of one operator `f* b(D)* g b(D) f`.
///
/// The weight may be given as `f` or as `Q = (f f*)^{-1}`; whichever is absent is
/// derived pointwise.
#[derive(Debug, Clone)]
pub struct FieldBundle {
    pub symbol: BlochSymbol,
    pub g: CoefficientField,
    pub f: Option<CoefficientField>,
    pub q: Option<CoefficientField>,
}

impl FieldBundle {
    pub fn new(symbol: BlochSymbol, g: CoefficientField) -> Result<Self> {
        if symbol.d != g.dim() || g.rows() != symbol.m || g.cols() != symbol.m {
            return Err(HomogError::Dimension(format!(
                "g is {}x{} in d = {}, symbol needs {}x{} in d = {}",
                g.rows(),
                g.cols(),
                g.dim(),
                symbol.m,
                symbol.m,
                symbol.d
            )));
        }
        if !(g.flags().hermitian && g.flags().positive) {
            return Err(HomogError::FieldCheck("g must be declared Hermitian positive".into()));
        }
        Ok(FieldBundle { symbol, g, f: None, q: None })
    }

    /// Attach the density `Q`; `f = Q^{-1/2}` is derived.
    pub fn with_density(mut self, q: CoefficientField) -> Result<Self> {
        self.check_weight(&q)?;
        let f = q.map(q.rows(), q.cols(), q.flags(), linalg::hpd_inv_sqrt)?;
        self.q = Some(q);
        self.f = Some(f);
        Ok(self)
    }

    /// Attach the sandwich factor `f`; `Q = (f f*)^{-1}` is derived.
    pub fn with_sandwich(mut self, f: CoefficientField) -> Result<Self> {
        if f.rows() != self.symbol.n || f.cols() != self.symbol.n || f.dim() != self.symbol.d {
            return Err(HomogError::Dimension("f must be n x n".into()));
        }
        let q = f.map(f.rows(), f.cols(), FieldFlags { hermitian: true, positive: true, real_entries: f.flags().real_entries }, |m| {
            linalg::inverse(&(m * m.adjoint())).map(|x| linalg::hermitian_part(&x))
        })?;
        self.q = Some(q);
        self.f = Some(f);
        Ok(self)
    }

    fn check_weight(&self, q: &CoefficientField) -> Result<()> {
        if q.rows() != self.symbol.n || q.cols() != self.symbol.n || q.dim() != self.symbol.d {
            return Err(HomogError::Dimension("Q must be n x n".into()));
        }
        if !(q.flags().hermitian && q.flags().positive) {
            return Err(HomogError::FieldCheck("Q must be declared Hermitian positive".into()));
        }
        Ok(())
    }

    pub fn lattice(&self) -> &Lattice {
        self.g.lattice()
    }

    pub fn is_weighted(&self) -> bool {
        self.q.is_some()
    }

    /// `α0 |f^{-1}|^{-2} |g^{-1}|^{-1}`, with sup norms taken over grid samples.
    pub fn c_star(&self) -> f64 {
        let f_inv_sq = self.q.as_ref().map(|q| q.sup_norm()).unwrap_or(1.0);
        self.symbol.alpha0 / (f_inv_sq * self.g.inverse_sup_norm())
    }

    /// True when symbol, `g` and weight all have real entries.
    pub fn is_real(&self) -> bool {
        let sym = self.symbol.coeffs.iter().all(|c| c.iter().all(|z| z.im == 0.0));
        sym && self.g.flags().real_entries && self.q.as_ref().map(|q| q.flags().real_entries).unwrap_or(true)
    }
}

fn signed_freq(i: usize, g: usize) -> i64 {
    if 2 * i < g + 1 {
        i as i64
    } else {
        i as i64 - g as i64
    }
}

/// Random Hermitian positive trigonometric polynomial.
///
/// Frequencies range over `[-max_freq, max_freq]` on the axes flagged in
/// `active_axes`; positivity comes from a diagonal shift exceeding the total
/// oscillation amplitude.
pub fn random_trig_field<R: Rng>(
    lattice: &Lattice,
    size: usize,
    max_freq: i64,
    active_axes: &[bool],
    real: bool,
    rng: &mut R,
) -> Result<CoefficientField> {
    let d = lattice.dim;
    let mut freqs: Vec<Vec<i64>> = Vec::new();
    for m in crate::lattice::integer_box(d, max_freq) {
        if m.iter().zip(active_axes).any(|(&x, &a)| x != 0 && !a) {
            continue;
        }
        // keep one representative of each ±m pair
        let first = m.iter().find(|&&x| x != 0).copied().unwrap_or(0);
        if first > 0 {
            freqs.push(m);
        }
    }
    let mut terms: Vec<(Vec<i64>, CMat)> = Vec::new();
    let mut amplitude = 0.0;
    for m in freqs {
        let decay = 0.6_f64.powi(m.iter().map(|x| x.abs() as i32).sum::<i32>());
        let c = CMat::from_fn(size, size, |_, _| {
            let a = rng.gen_range(-1.0..1.0) * decay;
            let b = if real { 0.0 } else { rng.gen_range(-1.0..1.0) * decay };
            Complex64::new(a, b)
        });
        // real fields need c_{-m} = conj(c_m) and symmetric samples: use c_m real symmetric
        let c = if real { (&c + c.transpose()).map(|z| Complex64::new(z.re * 0.5, 0.0)) } else { c };
        amplitude += 2.0 * linalg::op_norm(&c);
        let neg: Vec<i64> = m.iter().map(|x| -x).collect();
        terms.push((neg, c.adjoint()));
        terms.push((m, c));
    }
    let base = CMat::from_fn(size, size, |i, j| {
        if i == j {
            re(rng.gen_range(0.5..1.5))
        } else if real {
            re(0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut c0 = base;
    for i in 0..size {
        c0[(i, i)] += re(amplitude + 0.2);
    }
    terms.push((vec![0; d], c0));
    let flags = if real { FieldFlags::REAL_SPD } else { FieldFlags::HERMITIAN_POSITIVE };
    CoefficientField::from_trig(lattice, size, size, &terms, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    #[test]
    fn elasticity_rows_match_displayed_matrix() {
        let b = BlochSymbol::elasticity(2).unwrap();
        let m = b.eval(&[1.0, 0.0]);
        let want = linalg::from_real_rows(3, 2, &[1.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
        assert!((m - want).norm() < 1e-15);
        assert!(b.eval(&[0.0, 0.0]).norm() == 0.0);
    }

    #[test]
    fn elasticity_three_dimensional_column_pattern() {
        let b = BlochSymbol::elasticity(3).unwrap();
        let m = b.eval(&[0.0, 1.0, 0.0]);
        let want = linalg::from_real_rows(
            6,
            3,
            &[0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        );
        assert!((m - want).norm() < 1e-15);
    }

    #[test]
    fn hill_rows() {
        let b = BlochSymbol::hill(2).unwrap();
        let m = b.eval(&[2.0, 3.0]);
        let want = linalg::from_real_rows(2, 2, &[2.0, 3.0, 3.0, -2.0]);
        assert!((m - want).norm() < 1e-15);
        assert!(BlochSymbol::hill(4).is_err());
    }

    #[test]
    fn constant_field_has_single_coefficient() {
        let lat = Lattice::cubic(2);
        let f = CoefficientField::constant(&lat, CMat::identity(2, 2), FieldFlags::REAL_SPD).unwrap();
        assert_eq!(f.support().len(), 1);
        assert!((f.mean() - CMat::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn shifted_sine_has_three_coefficients() {
        let lat = Lattice::cubic(1);
        let f = CoefficientField::from_closure(&lat, 1, 1, &[16], vec![None], FieldFlags::REAL_SPD, |x| {
            CMat::from_element(1, 1, re(2.0 + x[0].sin()))
        })
        .unwrap();
        let mut s: Vec<i64> = f.support().iter().map(|m| m[0]).collect();
        s.sort();
        assert_eq!(s, vec![-1, 0, 1]);
        assert!((f.coefficient(&[1])[(0, 0)] - Complex64::new(0.0, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn positivity_violation_rejected() {
        let lat = Lattice::cubic(1);
        let r = CoefficientField::from_closure(&lat, 1, 1, &[16], vec![None], FieldFlags::REAL_SPD, |x| {
            CMat::from_element(1, 1, re(x[0].sin()))
        });
        assert!(matches!(r, Err(HomogError::FieldCheck(_))));
    }
}
