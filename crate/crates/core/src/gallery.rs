//! Named example operators with their reference values.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{HomogError, Result};
use crate::fields::{BlochSymbol, CoefficientField, FieldBundle, FieldFlags};
use crate::lattice::Lattice;
use crate::linalg::{self, im, re, CMat};

/// Where a reference number comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Printed in the source publication.
    Published,
    /// Follows from a closed-form expression evaluated here.
    ClosedForm,
    /// Established by an independent numerical computation.
    Computed,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Published => "published",
            Provenance::ClosedForm => "closed-form",
            Provenance::Computed => "computed",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub key: String,
    pub value: f64,
    pub tolerance: f64,
    pub provenance: Provenance,
}

impl Reference {
    fn new(key: &str, value: f64, tolerance: f64, provenance: Provenance) -> Self {
        Reference { key: key.into(), value, tolerance, provenance }
    }
}

#[derive(Debug, Clone)]
pub struct ExampleCase {
    pub name: String,
    pub bundle: FieldBundle,
    pub references: Vec<Reference>,
}

impl ExampleCase {
    pub fn reference(&self, key: &str) -> Option<&Reference> {
        self.references.iter().find(|r| r.key == key)
    }
}

pub const EXAMPLE_NAMES: [&str; 6] = [
    "acoustics-complex",
    "layered-elasticity",
    "isotropic-elasticity",
    "hill-body",
    "layered-scalar",
    "acoustics-weighted",
];

/// Default amplitude of the complex acoustics example.
pub const ACOUSTICS_DEFAULT_C: f64 = 0.2;

/// Look up an example by name with default parameters.
pub fn by_name(name: &str) -> Result<ExampleCase> {
    match name {
        "acoustics-complex" => acoustics_complex(ACOUSTICS_DEFAULT_C),
        "layered-elasticity" => layered_elasticity(),
        "isotropic-elasticity" => isotropic_elasticity(),
        "hill-body" => hill_body(2, |x| 2.0 + x.sin(), 1.0),
        "layered-scalar" => layered_scalar(),
        "acoustics-weighted" => acoustics_weighted(),
        other => Err(HomogError::UnknownExample(other.to_string())),
    }
}

fn scalar(x: f64) -> CMat {
    CMat::from_element(1, 1, re(x))
}

/// `g = [[1, iβ'], [-iβ', 1]]` with `β(x1) = c (sin x1 + cos 2x1)`.
pub fn acoustics_complex(c: f64) -> Result<ExampleCase> {
    if !(c > 0.0 && c < 1.0 / 3.0) {
        return Err(HomogError::Parameter(format!("acoustics amplitude c = {c} must lie in (0, 1/3)")));
    }
    let lat = Lattice::cubic(2);
    // β' = c (cos x1 - 2 sin 2x1) as a trigonometric polynomial in e^{i m x1}.
    let mut terms: Vec<(Vec<i64>, CMat)> = vec![(vec![0, 0], linalg::identity(2))];
    let beta_prime: [(i64, Complex64); 4] = [
        (1, re(0.5 * c)),
        (-1, re(0.5 * c)),
        (2, Complex64::new(0.0, c)),
        (-2, Complex64::new(0.0, -c)),
    ];
    for (m, coef) in beta_prime {
        let mut mat = CMat::zeros(2, 2);
        mat[(0, 1)] = im(1.0) * coef;
        mat[(1, 0)] = im(-1.0) * coef;
        terms.push((vec![m, 0], mat));
    }
    let g = CoefficientField::from_trig(&lat, 2, 2, &terms, FieldFlags::HERMITIAN_POSITIVE)?;
    let bundle = FieldBundle::new(BlochSymbol::gradient(2)?, g)?;
    let alpha = -1.5 * PI * c.powi(3);
    Ok(ExampleCase {
        name: "acoustics-complex".into(),
        bundle,
        references: vec![
            Reference::new("alpha", alpha, 1e-12, Provenance::Published),
            Reference::new("n_hat_theta_0_1", -alpha / PI, 1e-5 * alpha.abs() / PI, Provenance::ClosedForm),
        ],
    })
}

/// `g = diag(1, 4 (1 + sin x1 / 2)^{-1}, 1 + cos x1 / 2)` with the 2D elasticity symbol.
pub fn layered_elasticity() -> Result<ExampleCase> {
    let lat = Lattice::cubic(2);
    let g = CoefficientField::from_closure(&lat, 3, 3, &[512, 1], vec![None, Some(0)], FieldFlags::REAL_SPD, |x| {
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = re(1.0);
        m[(1, 1)] = re(4.0 / (1.0 + 0.5 * x[0].sin()));
        m[(2, 2)] = re(1.0 + 0.5 * x[0].cos());
        m
    })?;
    let bundle = FieldBundle::new(BlochSymbol::elasticity(2)?, g)?;
    Ok(ExampleCase {
        name: "layered-elasticity".into(),
        bundle,
        references: vec![
            Reference::new("g2_harmonic_mean", 4.0, 1e-8, Provenance::Published),
            Reference::new("g3_mean", 1.0, 1e-12, Provenance::Published),
            Reference::new("g0_11", 1.0, 1e-8, Provenance::Published),
            Reference::new("g0_22", 4.0, 1e-8, Provenance::Published),
            Reference::new("g0_33", 1.0, 1e-8, Provenance::Published),
            // Λ22 = -i cos x1, so mean(Λ22 g3) = -i/4
            Reference::new("mu", 0.125, 1e-8, Provenance::ClosedForm),
        ],
    })
}

/// Closed-form data for the two-dimensional isotropic layered medium with
/// `K(x1) = a -/+ jump` and `μ(x1) = 1 + c cos² x1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IsotropicLayered {
    pub jump: f64,
    pub c: f64,
}

impl Default for IsotropicLayered {
    fn default() -> Self {
        IsotropicLayered { jump: 100.0, c: 624.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IsotropicConstants {
    pub a: f64,
    pub root_residual: f64,
    pub big_a: f64,
    pub big_b: f64,
    pub big_c: f64,
    pub big_e: f64,
    pub theta1_sq: f64,
    /// Imaginary parts of the purely imaginary integrals S and T.
    pub s_imag: f64,
    pub t_imag: f64,
    pub mu_hat: f64,
}

impl IsotropicLayered {
    fn q(&self, a: f64) -> f64 {
        let b = self.jump;
        ((a - b + self.c + 1.0) * (a - b + 1.0)).sqrt()
    }

    fn r(&self, a: f64) -> f64 {
        let b = self.jump;
        ((a + b + self.c + 1.0) * (a + b + 1.0)).sqrt()
    }

    pub fn big_a(&self, a: f64) -> f64 {
        1.0 / (0.25 / self.q(a) + 0.75 / self.r(a))
    }

    pub fn big_b(&self, a: f64) -> f64 {
        let (b, q, r) = (self.jump, self.q(a), self.r(a));
        (6.0 * (a + b) * q + 2.0 * (a - b) * r - 4.0 * q * r) / (r + 3.0 * q)
    }

    pub fn big_c(&self) -> f64 {
        4.0 * (self.c + 1.0).sqrt()
    }

    pub fn big_e(&self, a: f64) -> f64 {
        let (b, q, r) = (self.jump, self.q(a), self.r(a));
        (6.0 * b * r - 6.0 * b * q - 12.0 * b * b + 4.0 * q * r) / (r + 3.0 * q)
    }

    /// `B(a) + C/4`, whose root makes the germ degenerate.
    pub fn root_function(&self, a: f64) -> f64 {
        self.big_b(a) + 0.25 * self.big_c()
    }

    /// Bisection for the root on `[lo, hi]`.
    pub fn root(&self, lo: f64, hi: f64) -> Result<f64> {
        let (mut lo, mut hi) = (lo, hi);
        let (flo, fhi) = (self.root_function(lo), self.root_function(hi));
        if flo.signum() == fhi.signum() {
            return Err(HomogError::Parameter(format!("no sign change on [{lo}, {hi}]")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.root_function(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn bulk(&self, a: f64, x1: f64) -> f64 {
        let x = x1.rem_euclid(2.0 * PI);
        if x < 0.5 * PI {
            a - self.jump
        } else {
            a + self.jump
        }
    }

    pub fn shear(&self, x1: f64) -> f64 {
        1.0 + self.c * x1.cos().powi(2)
    }

    /// Imaginary part of the corrector entry Λ22 on `[0, 2π]`; requires `c = 624`
    /// so that the harmonic mean of μ is 25.
    pub fn lambda22_imag(&self, x1: f64) -> f64 {
        let x = x1.rem_euclid(2.0 * PI);
        let s = (self.c + 1.0).sqrt();
        let shift = if x < 0.5 * PI {
            0.0
        } else if x < 1.5 * PI {
            2.0 * PI
        } else {
            4.0 * PI
        };
        2.0 * (x.tan() / s).atan() - 2.0 * x + shift
    }

    /// Mean over `[0, 2π]` of `f`, which is smooth on each piece between the
    /// breakpoints `0, π/2, 3π/2, 2π`.
    fn piecewise_mean(f: impl Fn(f64) -> f64) -> f64 {
        let pieces = [(0.0, 0.5 * PI), (0.5 * PI, 1.5 * PI), (1.5 * PI, 2.0 * PI)];
        let mut total = 0.0;
        for (a, b) in pieces {
            total += simpson(&f, a, b, 200_000);
        }
        total / (2.0 * PI)
    }

    pub fn constants(&self) -> Result<IsotropicConstants> {
        let a = self.root(130.0, 150.0)?;
        let (big_a, big_b, big_c, big_e) = (self.big_a(a), self.big_b(a), self.big_c(), self.big_e(a));
        let theta1_sq = (big_e - 0.25 * big_c) / (big_a + big_e - 0.5 * big_c);
        // mean((K - μ)/(K + μ)) by the same quadrature
        let ratio = |x: f64| {
            let (k, m) = (self.bulk(a, x), self.shear(x));
            (k - m) / (k + m)
        };
        let ratio_mean = Self::piecewise_mean(ratio);
        let s_imag = big_a * Self::piecewise_mean(|x| ratio(x) * self.lambda22_imag(x));
        let t_imag = Self::piecewise_mean(|x| {
            let y = x;
            let (k, m) = (self.bulk(a, y), self.shear(y));
            (4.0 * k * m / (k + m) + ratio(y) * ratio_mean * big_a) * self.lambda22_imag(y)
        });
        let theta2_sq = 1.0 - theta1_sq;
        let mu_hat = 0.5 * theta2_sq.sqrt() * (s_imag * theta1_sq - t_imag * theta2_sq).abs();
        Ok(IsotropicConstants {
            a,
            root_residual: self.root_function(a),
            big_a,
            big_b,
            big_c,
            big_e,
            theta1_sq,
            s_imag,
            t_imag,
            mu_hat,
        })
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        // interior evaluation keeps each piece on its own branch
        let x = if i == 0 {
            a + 1e-7 * h
        } else if i == n {
            b - 1e-7 * h
        } else {
            a + i as f64 * h
        };
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * f(x);
    }
    s * h / 3.0
}

/// Isotropic layered medium at the degenerate root `a`.
pub fn isotropic_elasticity() -> Result<ExampleCase> {
    isotropic_elasticity_with_grid(1024)
}

pub fn isotropic_elasticity_with_grid(grid: usize) -> Result<ExampleCase> {
    let model = IsotropicLayered::default();
    let consts = model.constants()?;
    let a = consts.a;
    let lat = Lattice::cubic(2);
    let h = 2.0 * PI / grid as f64;
    let g = CoefficientField::from_closure(&lat, 3, 3, &[grid, 1], vec![None, Some(0)], FieldFlags::REAL_SPD, move |x| {
        let x1 = x[0].rem_euclid(2.0 * PI);
        let m = model.shear(x1);
        // grid points on a jump take the mean of the one-sided values
        let on_jump = x1 < 0.25 * h || (x1 - 0.5 * PI).abs() < 0.25 * h || x1 > 2.0 * PI - 0.25 * h;
        let k = if on_jump { a } else { model.bulk(a, x1) };
        linalg::from_real_rows(3, 3, &[k + m, 0.0, k - m, 0.0, 4.0 * m, 0.0, k - m, 0.0, k + m])
    })?;
    let bundle = FieldBundle::new(BlochSymbol::elasticity(2)?, g)?;
    Ok(ExampleCase {
        name: "isotropic-elasticity".into(),
        bundle,
        references: vec![
            Reference::new("a", 145.6581, 5e-4, Provenance::Published),
            Reference::new("C", 100.0, 1e-12, Provenance::Published),
            Reference::new("theta1_sq", 0.5394, 5e-4, Provenance::Published),
            Reference::new("S_abs", 65.6650, 5e-3, Provenance::Published),
            Reference::new("T_abs", 76.2833, 5e-3, Provenance::Published),
            Reference::new("mu_hat", 0.09850, 5e-4, Provenance::Published),
        ],
    })
}

/// Hill body: `g = diag(β(x1), μ0/2, ...)` with the divergence/rotation symbol.
pub fn hill_body(d: usize, beta: impl Fn(f64) -> f64 + 'static, mu0: f64) -> Result<ExampleCase> {
    if !(mu0 > 0.0) {
        return Err(HomogError::Parameter("shear modulus must be positive".into()));
    }
    let symbol = BlochSymbol::hill(d)?;
    let m = symbol.m;
    let lat = Lattice::cubic(d);
    let mut grid = vec![1; d];
    grid[0] = 256;
    let mut band = vec![Some(0); d];
    band[0] = None;
    let g = CoefficientField::from_closure(&lat, m, m, &grid, band, FieldFlags::REAL_SPD, move |x| {
        let mut out = CMat::identity(m, m).scale(0.5 * mu0);
        out[(0, 0)] = re(beta(x[0]));
        out
    })?;
    let beta_field = g.map(1, 1, FieldFlags::REAL_SPD, |s| Ok(scalar(s[(0, 0)].re)))?;
    let beta_harmonic = beta_field.harmonic_mean()?[(0, 0)].re;
    let bundle = FieldBundle::new(symbol, g)?;
    Ok(ExampleCase {
        name: "hill-body".into(),
        bundle,
        references: vec![
            Reference::new("beta_harmonic_mean", beta_harmonic, 1e-12, Provenance::Computed),
            Reference::new("half_shear", 0.5 * mu0, 1e-12, Provenance::ClosedForm),
        ],
    })
}

/// One-dimensional scalar medium `g = 2 + sin x`.
pub fn layered_scalar() -> Result<ExampleCase> {
    let lat = Lattice::cubic(1);
    let terms = vec![
        (vec![0], scalar(2.0)),
        (vec![1], CMat::from_element(1, 1, Complex64::new(0.0, -0.5))),
        (vec![-1], CMat::from_element(1, 1, Complex64::new(0.0, 0.5))),
    ];
    let g = CoefficientField::from_trig(&lat, 1, 1, &terms, FieldFlags::REAL_SPD)?;
    let bundle = FieldBundle::new(BlochSymbol::gradient(1)?, g)?;
    Ok(ExampleCase {
        name: "layered-scalar".into(),
        bundle,
        references: vec![Reference::new("g0", 3f64.sqrt(), 1e-10, Provenance::ClosedForm)],
    })
}

/// Acoustics with density: `g = (1 + sin x1 / 2) I`, `Q = 1 + cos x1 / 2`.
pub fn acoustics_weighted() -> Result<ExampleCase> {
    let lat = Lattice::cubic(2);
    let half_sin = |sign: f64| CMat::identity(2, 2).map(|z| z * Complex64::new(0.0, -0.25 * sign));
    let g = CoefficientField::from_trig(
        &lat,
        2,
        2,
        &[(vec![0, 0], linalg::identity(2)), (vec![1, 0], half_sin(1.0)), (vec![-1, 0], half_sin(-1.0))],
        FieldFlags::REAL_SPD,
    )?;
    let q = CoefficientField::from_trig(
        &lat,
        1,
        1,
        &[(vec![0, 0], scalar(1.0)), (vec![1, 0], scalar(0.25)), (vec![-1, 0], scalar(0.25))],
        FieldFlags::REAL_SPD,
    )?;
    let bundle = FieldBundle::new(BlochSymbol::gradient(2)?, g)?.with_density(q)?;
    Ok(ExampleCase {
        name: "acoustics-weighted".into(),
        bundle,
        references: vec![
            Reference::new("q_mean", 1.0, 1e-12, Provenance::ClosedForm),
            Reference::new("f0", 1.0, 1e-12, Provenance::ClosedForm),
        ],
    })
}
