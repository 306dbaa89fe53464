//! Lattice geometry: generating and dual bases, Brillouin zone membership and
//! quasimomentum sampling.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HomogError, Result};

/// Integer coordinates in `[-ZONE_BOX, ZONE_BOX]^d` are used for zone tests.
pub const ZONE_BOX: i64 = 3;
const ZONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    /// Generating vectors `a_j`.
    pub basis: Vec<Vec<f64>>,
    /// Dual vectors `b_l` with `<b_l, a_j> = 2π δ_lj`.
    pub dual_basis: Vec<Vec<f64>>,
    pub cell_volume: f64,
    pub dual_cell_volume: f64,
    /// Half the length of the shortest nonzero dual vector.
    pub r0: f64,
    #[serde(skip)]
    zone_vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// All integer vectors in `[-r, r]^d` except the origin.
pub fn integer_box(d: usize, r: i64) -> Vec<Vec<i64>> {
    let side = (2 * r + 1) as usize;
    let total = side.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut v = vec![0i64; d];
        for c in v.iter_mut() {
            *c = (rem % side) as i64 - r;
            rem /= side;
        }
        if v.iter().any(|&c| c != 0) {
            out.push(v);
        }
    }
    out
}

impl Lattice {
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self> {
        let d = basis.len();
        if d == 0 || basis.iter().any(|a| a.len() != d) {
            return Err(HomogError::Dimension(format!("basis must be {d} vectors of length {d}")));
        }
        let a = DMatrix::from_fn(d, d, |i, j| basis[j][i]);
        let det = a.determinant();
        let scale: f64 = basis.iter().map(|v| norm(v)).product();
        if !(det.abs() > 1e-12 * scale) {
            return Err(HomogError::DegenerateLattice { det });
        }
        let ainv = a.clone().try_inverse().ok_or(HomogError::DegenerateLattice { det })?;
        // Columns of 2π A^{-T} are the dual vectors.
        let bmat = ainv.transpose() * (2.0 * PI);
        let dual_basis: Vec<Vec<f64>> = (0..d).map(|l| (0..d).map(|i| bmat[(i, l)]).collect()).collect();
        let cell_volume = det.abs();
        let dual_cell_volume = bmat.determinant().abs();
        let mut lat = Lattice {
            dim: d,
            basis,
            dual_basis,
            cell_volume,
            dual_cell_volume,
            r0: 0.0,
            zone_vectors: Vec::new(),
        };
        lat.zone_vectors = integer_box(d, ZONE_BOX).iter().map(|m| lat.dual_point(m)).collect();
        let shortest = lat.zone_vectors.iter().map(|b| norm(b)).fold(f64::INFINITY, f64::min);
        lat.r0 = 0.5 * shortest;
        Ok(lat)
    }

    /// The lattice `(2πZ)^d`, whose dual is `Z^d`.
    pub fn cubic(d: usize) -> Self {
        let basis = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 2.0 * PI } else { 0.0 }).collect())
            .collect();
        Lattice::new(basis).expect("cubic lattice is regular")
    }

    /// Dual-lattice vector with integer coordinates `m`.
    pub fn dual_point(&self, m: &[i64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (l, &ml) in m.iter().enumerate() {
            for i in 0..self.dim {
                out[i] += ml as f64 * self.dual_basis[l][i];
            }
        }
        out
    }

    /// `Σ u_l b_l` for real coordinates.
    pub fn dual_point_frac(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (l, &ul) in u.iter().enumerate() {
            for i in 0..self.dim {
                out[i] += ul * self.dual_basis[l][i];
            }
        }
        out
    }

    /// Cartesian point `Σ u_j a_j` of the cell for fractional coordinates `u`.
    pub fn cell_point(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, &uj) in u.iter().enumerate() {
            for i in 0..self.dim {
                out[i] += uj * self.basis[j][i];
            }
        }
        out
    }

    /// Dual coordinates `u_l = <k, a_l> / 2π`.
    pub fn dual_coords(&self, k: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|a| dot(k, a) / (2.0 * PI)).collect()
    }

    /// Nonzero dual vectors used for zone tests.
    pub fn zone_vectors(&self) -> &[Vec<f64>] {
        &self.zone_vectors
    }

    /// Membership in the closed central Brillouin zone.
    pub fn in_zone(&self, k: &[f64]) -> bool {
        let nk = norm(k);
        self.zone_vectors.iter().all(|b| {
            let diff: Vec<f64> = k.iter().zip(b).map(|(x, y)| x - y).collect();
            nk <= norm(&diff) + ZONE_TOL
        })
    }

    /// Translate `k` by a dual vector into the closed zone.
    pub fn fold(&self, k: &[f64]) -> Vec<f64> {
        let u = self.dual_coords(k);
        let shift: Vec<f64> = u.iter().map(|x| x.round()).collect();
        let mut cur: Vec<f64> = k.iter().zip(self.dual_point_frac(&shift)).map(|(x, y)| x - y).collect();
        loop {
            let nk = norm(&cur);
            let mut best: Option<(f64, usize)> = None;
            for (i, b) in self.zone_vectors.iter().enumerate() {
                let diff: Vec<f64> = cur.iter().zip(b).map(|(x, y)| x - y).collect();
                let nd = norm(&diff);
                if nd < nk - 1e-14 && best.map_or(true, |(v, _)| nd < v) {
                    best = Some((nd, i));
                }
            }
            match best {
                Some((_, i)) => {
                    let b = &self.zone_vectors[i];
                    cur.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
                }
                None => return cur,
            }
        }
    }

    /// Largest `t` with `tθ` in the closed zone.
    pub fn zone_extent(&self, theta: &[f64]) -> f64 {
        self.zone_vectors
            .iter()
            .filter_map(|b| {
                let p = dot(theta, b);
                (p > 0.0).then(|| dot(b, b) / (2.0 * p))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniform grid over the dual cell, folded into the zone; always contains `k = 0`.
    pub fn brillouin_grid(&self, resolution: usize) -> KGrid {
        let r = resolution.max(1);
        let coords: Vec<f64> = if r == 1 {
            vec![0.0]
        } else {
            (0..r).map(|i| -0.5 + i as f64 / (r - 1) as f64).collect()
        };
        let total = r.pow(self.dim as u32);
        let mut points = Vec::with_capacity(total + 1);
        for idx in 0..total {
            let mut rem = idx;
            let u: Vec<f64> = (0..self.dim)
                .map(|_| {
                    let c = coords[rem % r];
                    rem /= r;
                    c
                })
                .collect();
            points.push(self.fold(&self.dual_point_frac(&u)));
        }
        if !points.iter().any(|k| norm(k) < 1e-15) {
            points.push(vec![0.0; self.dim]);
        }
        KGrid { points, includes_zero: true, rays: Vec::new() }
    }

    /// `count` uniformly spaced points `tθ`, `t ∈ (0, t_max]`.
    pub fn radial_samples(&self, theta: &[f64], t_max: f64, count: usize) -> Result<Vec<Vec<f64>>> {
        check_unit(theta, self.dim)?;
        if !(t_max > 0.0) || t_max > self.r0 * (1.0 + 1e-14) {
            return Err(HomogError::OutOfZone { t: t_max, r0: self.r0 });
        }
        if count == 0 {
            return Err(HomogError::Parameter("radial sample count must be positive".into()));
        }
        Ok((1..=count)
            .map(|i| {
                let t = t_max * i as f64 / count as f64;
                theta.iter().map(|x| x * t).collect()
            })
            .collect())
    }

    /// `count` equally spaced unit directions; in 2D they sweep the full circle,
    /// in 3D a Fibonacci sphere is used.
    pub fn directions(&self, count: usize) -> Vec<Vec<f64>> {
        unit_directions(self.dim, count)
    }
}

pub fn check_unit(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(HomogError::Dimension(format!("direction has length {} but d = {d}", theta.len())));
    }
    if (norm(theta) - 1.0).abs() > 1e-12 {
        return Err(HomogError::Parameter(format!("direction is not a unit vector (|θ| = {})", norm(theta))));
    }
    Ok(())
}

pub fn unit_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    let mut v = vec![rad * a.cos(), rad * a.sin(), z];
                    v.resize(d, 0.0);
                    let n = norm(&v);
                    v.iter().map(|x| x / n).collect()
                })
                .collect()
        }
    }
}

/// A ray `{tθ}` with explicit `t` values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ray {
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KGrid {
    pub points: Vec<Vec<f64>>,
    pub includes_zero: bool,
    pub rays: Vec<Ray>,
}

impl KGrid {
    /// Add rays along `directions` with `count` geometrically spaced `t` from
    /// `t_min` up to the zone boundary.
    pub fn with_geometric_rays(mut self, lat: &Lattice, directions: &[Vec<f64>], t_min: f64, count: usize) -> Self {
        for theta in directions {
            let t_max = lat.zone_extent(theta);
            let ratio = (t_max / t_min).ln();
            let t = (0..count)
                .map(|i| t_min * (ratio * i as f64 / (count.max(2) - 1) as f64).exp())
                .collect();
            self.rays.push(Ray { theta: theta.clone(), t });
        }
        self
    }

    /// Grid points followed by all ray points.
    pub fn all_points(&self) -> Vec<Vec<f64>> {
        let mut out = self.points.clone();
        for ray in &self.rays {
            for &t in &ray.t {
                out.push(ray.theta.iter().map(|x| x * t).collect());
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len() + self.rays.iter().map(|r| r.t.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
