//! Operator error estimates for the cosine propagator: fiber discrepancies,
//! their supremum over quasimomenta, rate fits and the sharpness probe.

pub mod cauchy;

use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{self, CellSolution};
use crate::error::{HomogError, Result};
use crate::fiber::{self, FiberSpectrum};
use crate::fields::FieldBundle;
use crate::lattice::{KGrid, Lattice};
use crate::linalg::{self, re, CMat};

/// Largest tolerated phase error `ε^{-1}|τ| Δ√λ` in radians.
pub const PHASE_TOL: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSample {
    pub k: Vec<f64>,
    pub eps: f64,
    pub tau: f64,
    pub s: f64,
    pub fiber_error: f64,
    pub cutoff: usize,
}

/// Effective data shared by all error evaluations for one bundle and cutoff.
#[derive(Debug, Clone)]
pub struct ErrorContext {
    pub bundle: FieldBundle,
    pub cutoff: usize,
    pub g0: CMat,
    pub q_bar: Option<CMat>,
    blocks: Vec<Vec<Vec<i64>>>,
    /// Upper bound for the norm of a cosine difference.
    norm_bound: f64,
}

/// Spectral data of one coupling block at fixed `k`.
struct BlockData {
    spectrum: FiberSpectrum,
    /// `|p + k|²` per mode.
    shifted_sq: Vec<f64>,
    /// Per-mode generalized eigenpairs of the effective symbol.
    effective: Vec<(Vec<f64>, CMat, Option<CMat>)>,
}

/// Fibers at one quasimomentum, decomposed block by block on demand.
pub struct KFiber<'a> {
    ctx: &'a ErrorContext,
    pub k: Vec<f64>,
    blocks: Vec<Option<BlockData>>,
    min_shift_sq: Vec<f64>,
}

fn sq_dist(lat: &Lattice, p: &[i64], k: &[f64]) -> f64 {
    lat.dual_point(p).iter().zip(k).map(|(a, c)| (a + c) * (a + c)).sum()
}

impl ErrorContext {
    /// Uses the Galerkin cell solution at the same cutoff for `g0`.
    pub fn new(bundle: &FieldBundle, cutoff: usize) -> Result<Self> {
        let cell = cell::solve_cell(&bundle.g, &bundle.symbol, cutoff)?;
        Self::from_cell(bundle, cutoff, &cell)
    }

    pub fn from_cell(bundle: &FieldBundle, cutoff: usize, cell: &CellSolution) -> Result<Self> {
        Self::with_g0(bundle, cutoff, cell.g0.clone())
    }

    pub fn with_g0(bundle: &FieldBundle, cutoff: usize, g0: CMat) -> Result<Self> {
        bundle.g.check_resolves(2 * cutoff, cutoff)?;
        let q_bar = bundle.q.as_ref().map(|q| linalg::hermitian_part(&q.mean()));
        let norm_bound = match (&bundle.q, &q_bar) {
            (Some(q), Some(qb)) => {
                let kq = (q.sup_norm() * q.inverse_sup_norm()).sqrt();
                let kb = (linalg::op_norm(qb) * linalg::op_norm(&linalg::hpd_inverse(qb)?)).sqrt();
                kq + kb
            }
            _ => 2.0,
        };
        let blocks = fiber::bundle_blocks(bundle, cutoff);
        Ok(ErrorContext { bundle: bundle.clone(), cutoff, g0, q_bar, blocks, norm_bound })
    }

    pub fn lattice(&self) -> &Lattice {
        self.bundle.lattice()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn at(&self, k: &[f64]) -> Result<KFiber<'_>> {
        if k.len() != self.lattice().dim {
            return Err(HomogError::Dimension("k has wrong length".into()));
        }
        let lat = self.lattice();
        let min_shift_sq = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|p| sq_dist(lat, p, k)).fold(f64::INFINITY, f64::min))
            .collect();
        Ok(KFiber { ctx: self, k: k.to_vec(), blocks: (0..self.blocks.len()).map(|_| None).collect(), min_shift_sq })
    }

    pub fn fiber_error(&self, k: &[f64], eps: f64, tau: f64, s: f64) -> Result<ErrorSample> {
        let mut f = self.at(k)?;
        let e = f.error(eps, tau, s, 0.0)?;
        Ok(ErrorSample { k: k.to_vec(), eps, tau, s, fiber_error: e, cutoff: self.cutoff })
    }

    /// Phase error of the lowest `n + 2` eigenvalues at a probe point, estimated
    /// against a finer cutoff. Fails when it exceeds `PHASE_TOL`.
    pub fn check_phase_resolution(&self, eps: f64, tau: f64) -> Result<f64> {
        let phase = self.phase_error(eps, tau)?;
        if phase > PHASE_TOL {
            return Err(HomogError::PhaseResolution { phase, suggested: 2 * self.cutoff });
        }
        Ok(phase)
    }

    pub fn phase_error(&self, eps: f64, tau: f64) -> Result<f64> {
        let lat = self.lattice();
        let theta = lat.directions(8).into_iter().nth(1).unwrap_or_else(|| vec![1.0]);
        let k: Vec<f64> = theta.iter().map(|c| c * 0.5 * lat.r0).collect();
        let count = self.bundle.symbol.n + 2;
        let coarse = self.lowest(&k, self.cutoff, count)?;
        let fine_cutoff = self.finer_cutoff();
        let fine = self.lowest(&k, fine_cutoff, count)?;
        let delta = coarse.iter().zip(&fine).map(|(a, b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).abs()).fold(0.0, f64::max);
        Ok(tau.abs() / eps * delta)
    }

    fn finer_cutoff(&self) -> usize {
        let b = &self.bundle;
        let axes = (0..b.symbol.d).map(|a| b.g.resolved_frequency(a));
        let mut limit = axes.min().unwrap_or(usize::MAX);
        for w in [&b.f, &b.q].into_iter().flatten() {
            limit = limit.min((0..b.symbol.d).map(|a| w.resolved_frequency(a)).min().unwrap_or(usize::MAX));
        }
        (2 * self.cutoff).min(limit / 2).max(self.cutoff + 1)
    }

    fn lowest(&self, k: &[f64], cutoff: usize, count: usize) -> Result<Vec<f64>> {
        let blocks = fiber::bundle_blocks(&self.bundle, cutoff);
        let mut vals = Vec::new();
        let lat = self.lattice();
        for b in &blocks {
            // only blocks whose lowest symbol value could enter the lowest `count`
            let low = b.iter().map(|p| sq_dist(lat, p, k)).fold(f64::INFINITY, f64::min);
            if low > 4.0 * lat.r0 * lat.r0 + 1.0 && vals.len() >= count {
                continue;
            }
            let op = fiber::assemble_block(&self.bundle.g, &self.bundle.symbol, k, b, cutoff, None, self.bundle.q.as_ref())?;
            let spec = fiber::eigendecompose(&op, fiber::DEFAULT_GAP_TOL)?;
            vals.extend(spec.values.into_iter().take(count));
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.truncate(count);
        Ok(vals)
    }
}

impl<'a> KFiber<'a> {
    fn block(&mut self, i: usize) -> Result<&BlockData> {
        if self.blocks[i].is_none() {
            let ctx = self.ctx;
            let b = &ctx.bundle;
            let modes = &ctx.blocks[i];
            let op = fiber::assemble_block(&b.g, &b.symbol, &self.k, modes, ctx.cutoff, None, b.q.as_ref())?;
            let spectrum = fiber::eigendecompose(&op, fiber::DEFAULT_GAP_TOL)?;
            let lat = ctx.lattice();
            let shifted_sq = modes.iter().map(|p| sq_dist(lat, p, &self.k)).collect();
            let mut effective = Vec::with_capacity(modes.len());
            for p in modes {
                let xi: Vec<f64> = lat.dual_point(p).iter().zip(&self.k).map(|(a, c)| a + c).collect();
                let bp = b.symbol.eval(&xi);
                let a0 = linalg::hermitian_part(&(bp.adjoint() * &ctx.g0 * &bp));
                effective.push(match &ctx.q_bar {
                    Some(qb) => {
                        let e = linalg::gen_herm_eigen(&a0, qb)?;
                        (e.values, e.vectors, Some(qb.clone()))
                    }
                    None => {
                        let e = linalg::herm_eigen(&a0)?;
                        (e.values, e.vectors, None)
                    }
                });
            }
            self.blocks[i] = Some(BlockData { spectrum, shifted_sq, effective });
        }
        Ok(self.blocks[i].as_ref().unwrap())
    }

    /// `max_blocks |(cos(ε⁻¹τ A^{1/2}) − cos(ε⁻¹τ A0^{1/2})) R^{s/2}|`.
    ///
    /// Blocks whose smoothing weight cannot beat `floor` are skipped; pass 0 for
    /// an exact value.
    pub fn error(&mut self, eps: f64, tau: f64, s: f64, floor: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(HomogError::Parameter("eps must be positive".into()));
        }
        if tau == 0.0 {
            return Ok(0.0);
        }
        let n = self.ctx.bundle.symbol.n;
        let phase = tau / eps;
        let mut best = floor;
        let mut exact = 0.0_f64;
        let mut order: Vec<usize> = (0..self.blocks.len()).collect();
        order.sort_by(|&a, &b| self.min_shift_sq[a].partial_cmp(&self.min_shift_sq[b]).unwrap());
        for i in order {
            let max_r = eps.powf(s) * (self.min_shift_sq[i] + eps * eps).powf(-0.5 * s);
            if self.ctx.norm_bound * max_r <= best {
                continue;
            }
            let data = self.block(i)?;
            let c = data.spectrum.apply(|l| (phase * l.sqrt()).cos())?;
            let mut diff = c;
            for (j, (vals, vecs, mass)) in data.effective.iter().enumerate() {
                let cosv: Vec<_> = vals.iter().map(|&l| re((phase * l.max(0.0).sqrt()).cos())).collect();
                let mut c0 = linalg::reassemble(vecs, &cosv, vecs);
                if let Some(m) = mass {
                    c0 = c0 * m;
                }
                let mut view = diff.view_mut((j * n, j * n), (n, n));
                view -= c0;
            }
            for (j, t2) in data.shifted_sq.iter().enumerate() {
                let r = eps.powf(s) * (t2 + eps * eps).powf(-0.5 * s);
                for c in 0..n {
                    let mut col = diff.column_mut(j * n + c);
                    col *= re(r);
                }
            }
            let e = linalg::op_norm(&diff);
            exact = exact.max(e);
            best = best.max(e);
        }
        Ok(exact)
    }
}

/// Supremum estimate over a k-set.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalError {
    pub eps: f64,
    pub tau: f64,
    pub s: f64,
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Maximum over the grid before local refinement.
    pub grid_value: f64,
    pub evaluations: usize,
}

/// Point evaluation helper that folds every probe into the zone.
fn eval_points(ctx: &ErrorContext, points: &[Vec<f64>], eps: &[f64], taus: &[f64], s: f64) -> Result<Vec<Vec<f64>>> {
    let lat = ctx.lattice();
    points
        .par_iter()
        .map(|k| {
            let k = lat.fold(k);
            let mut f = ctx.at(&k)?;
            eps.iter().zip(taus).map(|(&e, &t)| f.error(e, t, s, 0.0)).collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Grid maximum followed by local refinement in polar coordinates.
pub fn global_error(ctx: &ErrorContext, kgrid: &KGrid, eps: f64, tau: f64, s: f64) -> Result<GlobalError> {
    Ok(global_errors(ctx, kgrid, &[eps], &[tau], s)?.remove(0))
}

/// `global_error` for several `(ε, τ)` pairs sharing the k sweep.
pub fn global_errors(ctx: &ErrorContext, kgrid: &KGrid, eps: &[f64], taus: &[f64], s: f64) -> Result<Vec<GlobalError>> {
    if eps.len() != taus.len() {
        return Err(HomogError::Parameter("eps and tau lists differ in length".into()));
    }
    let points = kgrid.all_points();
    let values = eval_points(ctx, &points, eps, taus, s)?;
    let mut out = Vec::with_capacity(eps.len());
    for (i, (&e, &t)) in eps.iter().zip(taus).enumerate() {
        let (best_idx, grid_value) = values
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v[i]))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (argmax, value, evals) = refine(ctx, &points[best_idx], grid_value, e, t, s)?;
        out.push(GlobalError { eps: e, tau: t, s, value, argmax, grid_value, evaluations: points.len() + evals });
    }
    Ok(out)
}

fn polar(k: &[f64]) -> (f64, f64) {
    match k.len() {
        1 => (k[0].abs(), if k[0] < 0.0 { std::f64::consts::PI } else { 0.0 }),
        _ => ((k[0] * k[0] + k[1] * k[1]).sqrt(), k[1].atan2(k[0])),
    }
}

fn from_polar(template: &[f64], t: f64, angle: f64) -> Vec<f64> {
    match template.len() {
        1 => vec![t * angle.cos().signum()],
        _ => {
            let mut out = template.to_vec();
            out[0] = t * angle.cos();
            out[1] = t * angle.sin();
            out
        }
    }
}

fn refine(ctx: &ErrorContext, start: &[f64], start_value: f64, eps: f64, tau: f64, s: f64) -> Result<(Vec<f64>, f64, usize)> {
    let lat = ctx.lattice();
    let mut best_k = lat.fold(start);
    let mut best = start_value;
    let mut evals = 0;
    let (mut t, mut angle) = polar(&best_k);
    if t == 0.0 {
        return Ok((best_k, best, 0));
    }
    let mut dt = 0.25 * t;
    let mut da = if start.len() > 1 { 0.1 } else { 0.0 };
    for _ in 0..4 {
        let mut cands: Vec<(f64, f64)> = vec![(t + dt, angle), ((t - dt).max(1e-12), angle)];
        if da > 0.0 {
            cands.push((t, angle + da));
            cands.push((t, angle - da));
        }
        let pts: Vec<Vec<f64>> = cands.iter().map(|&(tt, aa)| from_polar(&best_k, tt, aa)).collect();
        let vals = eval_points(ctx, &pts, &[eps], &[tau], s)?;
        evals += pts.len();
        for ((tt, aa), v) in cands.iter().zip(&vals) {
            if v[0] > best {
                best = v[0];
                t = *tt;
                angle = *aa;
                best_k = lat.fold(&from_polar(&best_k, t, angle));
            }
        }
        dt *= 0.5;
        da *= 0.5;
    }
    Ok((best_k, best, evals))
}

/// Sampling used by sweeps: uniform zone grid plus geometric rays.
pub fn default_kgrid(lat: &Lattice, resolution: usize, directions: usize, t_min: f64, ray_points: usize) -> KGrid {
    let dirs = lat.directions(directions);
    lat.brillouin_grid(resolution).with_geometric_rays(lat, &dirs, t_min, ray_points)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub s: f64,
    pub tau: f64,
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    pub argmax: Vec<Vec<f64>>,
    pub slope: f64,
    pub intercept: f64,
    pub expected_min_slope: Option<f64>,
    pub expected_max_slope: Option<f64>,
    pub pass: bool,
}

/// Slope requirement on a log-log fit.
#[derive(Debug, Clone, Copy)]
pub enum SlopeCheck {
    AtLeast(f64),
    AtMost(f64),
    Within(f64, f64),
}

/// Fit `log E(ε)` against `log ε`; `taus` gives τ per ε.
pub fn rate_experiment(ctx: &ErrorContext, s: f64, taus: &[f64], eps: &[f64], kgrid: &KGrid, check: SlopeCheck) -> Result<RateReport> {
    if eps.len() < 4 {
        return Err(HomogError::Parameter("rate fit needs at least 4 eps values".into()));
    }
    let span = eps.iter().cloned().fold(0.0, f64::max) / eps.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 4.0 * (1.0 - 1e-12) {
        return Err(HomogError::Parameter("eps values must span at least two octaves".into()));
    }
    let results = global_errors(ctx, kgrid, eps, taus, s)?;
    let errors: Vec<f64> = results.iter().map(|r| r.value).collect();
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let (slope, intercept) = linalg::fit_line(&lx, &ly);
    let (lo, hi, pass) = match check {
        SlopeCheck::AtLeast(x) => (Some(x), None, slope >= x),
        SlopeCheck::AtMost(x) => (None, Some(x), slope <= x),
        SlopeCheck::Within(a, b) => (Some(a), Some(b), slope >= a && slope <= b),
    };
    Ok(RateReport {
        s,
        tau: taus.first().copied().unwrap_or(0.0),
        eps: eps.to_vec(),
        errors,
        argmax: results.into_iter().map(|r| r.argmax).collect(),
        slope,
        intercept,
        expected_min_slope: lo,
        expected_max_slope: hi,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessRow {
    pub index: u64,
    pub eps: f64,
    pub t: f64,
    /// Probe point after folding into the zone.
    pub k: Vec<f64>,
    pub error: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessReport {
    pub theta: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
    pub tau: f64,
    pub s: f64,
    pub rows: Vec<SharpnessRow>,
    /// `q` at the last index over `q` at the first.
    pub growth: f64,
    /// `max q / min q`.
    pub ratio: f64,
}

/// Evaluate `q_j = error(t_j θ, ε_j) / ε_j` along `ε_j = γ^{3/2}|τ| / (2π j² |μ|)`,
/// `t_j = γ / (|μ| j)`, the sequence on which the phases of the two cosines
/// separate by `2πj`.
pub fn sharpness_probe(ctx: &ErrorContext, theta: &[f64], gamma: f64, mu: f64, tau: f64, s: f64, indices: &[u64]) -> Result<SharpnessReport> {
    if mu.abs() < 1e-12 * gamma.abs().max(1.0) {
        return Err(HomogError::SharpnessInapplicable);
    }
    if tau == 0.0 || indices.is_empty() {
        return Err(HomogError::Parameter("sharpness probe needs tau != 0 and at least one index".into()));
    }
    let lat = ctx.lattice();
    let mut rows = Vec::with_capacity(indices.len());
    for &j in indices {
        let jf = j as f64;
        let eps = gamma.powf(1.5) * tau.abs() / (2.0 * std::f64::consts::PI * jf * jf * mu.abs());
        let t = gamma / (mu.abs() * jf);
        let raw: Vec<f64> = theta.iter().map(|c| c * t).collect();
        let k = lat.fold(&raw);
        let error = ctx.at(&k)?.error(eps, tau, s, 0.0)?;
        rows.push(SharpnessRow { index: j, eps, t, k, error, q: error / eps });
    }
    let qs: Vec<f64> = rows.iter().map(|r| r.q).collect();
    let qmax = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let qmin = qs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SharpnessReport {
        theta: theta.to_vec(),
        gamma,
        mu,
        tau,
        s,
        growth: qs[qs.len() - 1] / qs[0],
        ratio: qmax / qmin,
        rows,
    })
}

/// Lowest bands along a ray, one row per `t`.
pub fn band_functions(bundle: &FieldBundle, theta: &[f64], ts: &[f64], cutoff: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    let blocks = fiber::bundle_blocks(bundle, cutoff);
    let lat = bundle.lattice();
    ts.iter()
        .map(|&t| {
            let k: Vec<f64> = theta.iter().map(|c| c * t).collect();
            let mut vals = Vec::new();
            for b in &blocks {
                let low = b.iter().map(|p| sq_dist(lat, p, &k)).fold(f64::INFINITY, f64::min);
                if vals.len() >= count && low > 4.0 {
                    continue;
                }
                let op = fiber::assemble_block(&bundle.g, &bundle.symbol, &k, b, cutoff, None, bundle.q.as_ref())?;
                vals.extend(fiber::eigendecompose(&op, fiber::DEFAULT_GAP_TOL)?.values.into_iter().take(count));
            }
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.truncate(count);
            Ok(vals)
        })
        .collect()
}
