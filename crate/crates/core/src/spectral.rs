//! Linearizations, small eigenproblems and the stability boundary.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FcmsError, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Matrix2(pub [[f64; 2]; 2]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Matrix3(pub [[f64; 3]; 3]);

impl Matrix2 {
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Matrix3 {
    pub fn diagonal(a: f64, b: f64, c: f64) -> Self {
        Self([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    /// Coefficients `(a, b, c)` of `lambda^3 + a lambda^2 + b lambda + c`.
    pub fn characteristic(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let tr = m[0][0] + m[1][1] + m[2][2];
        let minors = (m[0][0] * m[1][1] - m[0][1] * m[1][0])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        (-tr, minors, -det)
    }
}

/// Linearization of the reduced (S, d) map at the origin:
/// `[[1 - gamma, beta], [-4 eta beta, 1 - eta alpha]]`.
pub fn reduced_jacobian(p: &ModelParams) -> Result<Matrix2> {
    let alpha = p.homogeneous_damping()?;
    Ok(Matrix2([
        [1.0 - p.gamma(), p.beta()],
        [-4.0 * p.eta() * p.beta(), 1.0 - p.eta() * alpha],
    ]))
}

/// Linearization of the full (x1, x2, S) map, with per-agent damping.
pub fn full_jacobian(p: &ModelParams) -> Result<Matrix3> {
    if p.alpha().len() > 2 {
        return Err(FcmsError::DimensionMismatch(format!(
            "two-agent Jacobian takes at most 2 damping entries, got {}",
            p.alpha().len()
        )));
    }
    let (b, e) = (p.beta(), p.eta());
    Ok(Matrix3([
        [1.0 - e * p.damping(0), 0.0, -2.0 * e * b],
        [0.0, 1.0 - e * p.damping(1), 2.0 * e * b],
        [b, -b, 1.0 - p.gamma()],
    ]))
}

/// Roots of `lambda^2 - tr lambda + det`, sorted by modulus (descending)
/// then phase (ascending). Triangular input returns its diagonal exactly.
pub fn eig2(m: &Matrix2) -> [Complex64; 2] {
    let mut roots = if m.0[0][1] == 0.0 || m.0[1][0] == 0.0 {
        [
            Complex64::new(m.0[0][0], 0.0),
            Complex64::new(m.0[1][1], 0.0),
        ]
    } else {
        quadratic_roots(m.trace(), m.det())
    };
    sort_eigenvalues(&mut roots);
    roots
}

fn quadratic_roots(tr: f64, det: f64) -> [Complex64; 2] {
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let big = 0.5 * (tr + sq.copysign(tr));
        let small = if big != 0.0 {
            det / big
        } else {
            0.5 * (tr - sq.copysign(tr))
        };
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let re = 0.5 * tr;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

const CUBIC_BUDGET: usize = 100;

/// Eigenvalues of a 3x3 matrix from its characteristic cubic.
///
/// One real root is found by safeguarded Newton iteration inside the Cauchy
/// bracket, the remaining pair comes from the deflated quadratic, and every
/// root gets one Newton polish on the full cubic. Triangular input returns
/// its diagonal exactly.
pub fn eig_small(m: &Matrix3) -> Result<[Complex64; 3]> {
    let t = &m.0;
    let upper = t[1][0] == 0.0 && t[2][0] == 0.0 && t[2][1] == 0.0;
    let lower = t[0][1] == 0.0 && t[0][2] == 0.0 && t[1][2] == 0.0;
    if (upper || lower) && t.iter().flatten().all(|v| v.is_finite()) {
        let mut roots = [0, 1, 2].map(|i| Complex64::new(t[i][i], 0.0));
        sort_eigenvalues(&mut roots);
        return Ok(roots);
    }
    let (a, b, c) = m.characteristic();
    let fail = || FcmsError::NoConvergence { matrix: m.0 };
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(fail());
    }
    let poly = |x: f64| ((x + a) * x + b) * x + c;
    let deriv = |x: f64| (3.0 * x + 2.0 * a) * x + b;

    let bound = 1.0 + a.abs().max(b.abs()).max(c.abs());
    let (mut lo, mut hi) = (-bound, bound);
    let mut x = 0.0;
    let mut converged = false;
    for _ in 0..CUBIC_BUDGET {
        let fx = poly(x);
        if fx == 0.0 {
            converged = true;
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dfx = deriv(x);
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            x = next;
            converged = true;
            break;
        }
        x = next;
    }
    if !converged && (hi - lo) > 8.0 * f64::EPSILON * x.abs().max(1.0) {
        return Err(fail());
    }

    let q1 = a + x;
    let q0 = b + x * q1;
    let [r1, r2] = quadratic_roots(-q1, q0);
    let mut roots = [Complex64::new(x, 0.0), r1, r2];
    for r in roots.iter_mut().skip(1) {
        *r = polish(*r, a, b, c);
    }
    sort_eigenvalues(&mut roots);
    Ok(roots)
}

fn polish(z: Complex64, a: f64, b: f64, c: f64) -> Complex64 {
    let p = ((z + a) * z + b) * z + c;
    let dp = (3.0 * z + 2.0 * a) * z + b;
    if dp.norm() == 0.0 {
        return z;
    }
    let cand = z - p / dp;
    let pc = ((cand + a) * cand + b) * cand + c;
    if pc.norm() < p.norm() {
        cand
    } else {
        z
    }
}

fn sort_eigenvalues(v: &mut [Complex64]) {
    v.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then_with(|| x.arg().total_cmp(&y.arg()))
    });
}

pub fn spectral_radius(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `4 eta beta^2 < gamma`, decided without rounding.
pub fn stability_criterion(p: &ModelParams) -> bool {
    criterion_sign(p.beta(), p.gamma(), p.eta()) < 0.0
}

/// Exact sign of `4 eta beta^2 - gamma` via error-free products and an
/// expansion sum.
fn criterion_sign(beta: f64, gamma: f64, eta: f64) -> f64 {
    let q = 4.0 * eta;
    let (h, l) = two_product(beta, beta);
    let (a1, a2) = two_product(q, h);
    let (b1, b2) = two_product(q, l);
    let mut expansion: Vec<f64> = Vec::with_capacity(6);
    for term in [a2, b2, b1, a1, -gamma] {
        grow_expansion(&mut expansion, term);
    }
    expansion
        .iter()
        .rev()
        .find(|v| **v != 0.0)
        .copied()
        .unwrap_or(0.0)
}

fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Shewchuk's GROW-EXPANSION: adds `b` to a nonoverlapping expansion kept in
/// increasing order of magnitude.
fn grow_expansion(e: &mut Vec<f64>, b: f64) {
    let mut q = b;
    for comp in e.iter_mut() {
        let (s, err) = two_sum(q, *comp);
        *comp = err;
        q = s;
    }
    e.push(q);
}

/// `sqrt(gamma / (4 eta))`.
pub fn critical_beta(p: &ModelParams) -> f64 {
    (p.gamma() / (4.0 * p.eta())).sqrt()
}

/// Spectral radius of the reduced Jacobian at each coupling in `betas`.
pub fn lambda_curve(p: &ModelParams, betas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if betas.is_empty() {
        return Err(FcmsError::Precondition("empty coupling grid".into()));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(FcmsError::Precondition(
            "coupling grid must be ascending".into(),
        ));
    }
    betas
        .par_iter()
        .map(|&b| {
            let pb = p.with_beta(b)?;
            Ok((b, spectral_radius(&eig2(&reduced_jacobian(&pb)?))))
        })
        .collect()
}

/// Asymptotic e-folding recovery time `-1 / ln rho`.
pub fn recovery_time_theory(p: &ModelParams) -> Result<f64> {
    let rho = spectral_radius(&eig2(&reduced_jacobian(p)?));
    tau_from_rho(rho).ok_or(FcmsError::NotStable {
        rho,
        context: "recovery time is undefined",
    })
}

pub(crate) fn tau_from_rho(rho: f64) -> Option<f64> {
    (rho < 1.0).then(|| -1.0 / rho.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub phase: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(z: Complex64) -> Self {
        Self {
            re: z.re,
            im: z.im,
            modulus: z.norm(),
            phase: z.arg(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Eigenvalue>,
    pub rho: f64,
    pub stable: bool,
    pub criterion_satisfied: bool,
    pub beta_c: f64,
    pub tau_theory: Option<f64>,
}

/// Spectrum of the reduced Jacobian, or of the full (x1, x2, S) Jacobian
/// when the damping is heterogeneous.
pub fn spectral_report(p: &ModelParams) -> Result<SpectralReport> {
    let eigs: Vec<Complex64> = match p.homogeneous_damping() {
        Ok(_) => eig2(&reduced_jacobian(p)?).to_vec(),
        Err(_) => eig_small(&full_jacobian(p)?)?.to_vec(),
    };
    let rho = spectral_radius(&eigs);
    Ok(SpectralReport {
        eigenvalues: eigs.into_iter().map(Eigenvalue::from).collect(),
        rho,
        stable: rho < 1.0,
        criterion_satisfied: stability_criterion(p),
        beta_c: critical_beta(p),
        tau_theory: tau_from_rho(rho),
    })
}
