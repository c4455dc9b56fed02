//! Points of `𝕊^m × ℝ`, the norm cone `𝒦`, its polar and their tangent sets.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{ConeError, Result};
use crate::gauge::{self, GaugeSpec};
use crate::spectral::{
    default_block_tol, eig_desc, eig_sym_unchecked, gauge_grad_vector, spectral_hess_quad,
    symmetrize, EigenDecomp,
};

/// Default absolute tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// A point `z = (A, s)` with `A` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    pub a: DMatrix<f64>,
    pub s: f64,
}

impl ConePoint {
    /// Validates symmetry and finiteness; small asymmetry is averaged away.
    pub fn new(a: DMatrix<f64>, s: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(ConeError::InvalidInput("scalar part is not finite".into()));
        }
        Ok(ConePoint { a: symmetrize(&a)?, s })
    }

    pub fn zeros(m: usize) -> Self {
        ConePoint { a: DMatrix::zeros(m, m), s: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `⟨z, z'⟩ = Tr(A A') + s s'`.
    pub fn inner(&self, other: &ConePoint) -> f64 {
        self.a.dot(&other.a) + self.s * other.s
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scale(&self, c: f64) -> ConePoint {
        ConePoint { a: &self.a * c, s: self.s * c }
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &ConePoint) -> ConePoint {
        ConePoint { a: &self.a + &other.a * c, s: self.s + c * other.s }
    }

    /// Coordinates in the orthonormal basis `{E_ii, (E_ij + E_ji)/√2, (0,1)}`.
    pub fn to_svec(&self) -> DVector<f64> {
        let m = self.dim();
        let mut out = DVector::zeros(svec_len(m));
        let mut k = 0;
        for j in 0..m {
            for i in 0..=j {
                out[k] = if i == j { self.a[(i, i)] } else { self.a[(i, j)] * std::f64::consts::SQRT_2 };
                k += 1;
            }
        }
        out[k] = self.s;
        out
    }

    pub fn from_svec(m: usize, v: &DVector<f64>) -> ConePoint {
        let mut a = DMatrix::zeros(m, m);
        let mut k = 0;
        for j in 0..m {
            for i in 0..=j {
                if i == j {
                    a[(i, i)] = v[k];
                } else {
                    let x = v[k] / std::f64::consts::SQRT_2;
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
                k += 1;
            }
        }
        ConePoint { a, s: v[k] }
    }
}

/// Dimension of `𝕊^m × ℝ`.
pub fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2 + 1
}

impl Add for &ConePoint {
    type Output = ConePoint;
    fn add(self, rhs: &ConePoint) -> ConePoint {
        ConePoint { a: &self.a + &rhs.a, s: self.s + rhs.s }
    }
}

impl Sub for &ConePoint {
    type Output = ConePoint;
    fn sub(self, rhs: &ConePoint) -> ConePoint {
        ConePoint { a: &self.a - &rhs.a, s: self.s - rhs.s }
    }
}

impl Neg for &ConePoint {
    type Output = ConePoint;
    fn neg(self) -> ConePoint {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &ConePoint {
    type Output = ConePoint;
    fn mul(self, c: f64) -> ConePoint {
        self.scale(c)
    }
}

/// Where a point sits relative to `𝒦` and `𝒦°`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    InteriorK,
    InteriorPolar,
    BoundaryK,
    BoundaryPolar,
    Outside,
    Origin,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::InteriorK => "interior_k",
            RegionLabel::InteriorPolar => "interior_polar",
            RegionLabel::BoundaryK => "boundary_k",
            RegionLabel::BoundaryPolar => "boundary_polar",
            RegionLabel::Outside => "outside",
            RegionLabel::Origin => "origin",
        }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `N(A) = (ψ∘λ)(A)`.
pub fn norm_value(g: GaugeSpec, a: &DMatrix<f64>) -> Result<f64> {
    let e = eig_desc(a)?;
    Ok(gauge::value_unchecked(g, &e.values))
}

/// `N_*(A)`, the dual norm.
pub fn dual_norm_value(g: GaugeSpec, a: &DMatrix<f64>) -> Result<f64> {
    norm_value(g.dual(), a)
}

/// `N(A) ≤ s + tol`.
pub fn in_cone(g: GaugeSpec, z: &ConePoint, tol: f64) -> bool {
    let e = eig_sym_unchecked(&z.a);
    gauge::value_unchecked(g, &e.values) <= z.s + tol
}

/// `N_*(A) ≤ -s + tol`.
pub fn in_polar(g: GaugeSpec, z: &ConePoint, tol: f64) -> bool {
    let e = eig_sym_unchecked(&z.a);
    gauge::value_unchecked(g.dual(), &e.values) <= -z.s + tol
}

/// Region of `z`; boundaries are detected with `|N(A) - s| ≤ tol(1 + |s|)`.
pub fn classify(g: GaugeSpec, z: &ConePoint, tol: f64) -> RegionLabel {
    let e = eig_sym_unchecked(&z.a);
    classify_eig(g, &e, z.s, tol)
}

pub(crate) fn classify_eig(g: GaugeSpec, e: &EigenDecomp, s: f64, tol: f64) -> RegionLabel {
    if (e.frob_norm.powi(2) + s * s).sqrt() <= tol {
        return RegionLabel::Origin;
    }
    let band = tol * (1.0 + s.abs());
    let n = gauge::value_unchecked(g, &e.values);
    if (n - s).abs() <= band {
        return RegionLabel::BoundaryK;
    }
    if n < s {
        return RegionLabel::InteriorK;
    }
    let nd = gauge::value_unchecked(g.dual(), &e.values);
    if (nd + s).abs() <= band {
        RegionLabel::BoundaryPolar
    } else if nd < -s {
        RegionLabel::InteriorPolar
    } else {
        RegionLabel::Outside
    }
}

/// Answer of a membership oracle.
///
/// `value` is the quantity compared against the tolerance (`≤ tol` means member);
/// it is `None` when the set is the whole space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub contained: bool,
    pub value: Option<f64>,
}

impl Membership {
    fn everything() -> Self {
        Membership { contained: true, value: None }
    }

    fn from_value(value: f64, tol: f64) -> Self {
        Membership { contained: value <= tol, value: Some(value) }
    }
}

fn require_member(g: GaugeSpec, z: &ConePoint, tol: f64) -> Result<(EigenDecomp, RegionLabel)> {
    let e = eig_desc(&z.a)?;
    let region = classify_eig(g, &e, z.s, tol);
    match region {
        RegionLabel::InteriorK | RegionLabel::BoundaryK | RegionLabel::Origin => Ok((e, region)),
        other => Err(ConeError::Precondition(format!("point is not in the cone (region {other})"))),
    }
}

/// Principal submatrix `P_Jᵀ X P_J` for the eigenvector columns `J`.
fn compress(e: &EigenDecomp, x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let p = e.vectors.select_columns(cols);
    p.transpose() * x * p
}

fn sym_eigenvalues(x: &DMatrix<f64>) -> Vec<f64> {
    if x.nrows() == 0 {
        return vec![];
    }
    eig_sym_unchecked(&((x + x.transpose()) * 0.5)).values
}

/// Directional derivative `N'(A; D)` at a nonzero `A`.
fn norm_dir_deriv(g: GaugeSpec, e: &EigenDecomp, d: &DMatrix<f64>) -> Result<f64> {
    let lam = &e.values;
    let tol = e.block_tol();
    match g {
        GaugeSpec::P(_) => {
            let grad = gauge_grad_vector(g, lam, tol)?;
            Ok(e.lift(&grad).dot(d))
        }
        GaugeSpec::P1 => {
            let (alpha, beta, gamma) = sign_sets(lam, tol);
            let tr = |cols: &[usize]| compress(e, d, cols).trace();
            let nuc: f64 = sym_eigenvalues(&compress(e, d, &beta)).iter().map(|v| v.abs()).sum();
            Ok(tr(&alpha) - tr(&gamma) + nuc)
        }
        GaugeSpec::PInf => {
            let (plus, minus) = extreme_sets(lam, tol);
            let up = sym_eigenvalues(&compress(e, d, &plus)).first().copied();
            let down = sym_eigenvalues(&compress(e, d, &minus)).last().map(|v| -v);
            Ok(up.into_iter().chain(down).fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

fn sign_sets(lam: &[f64], tol: f64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut sets = (vec![], vec![], vec![]);
    for (i, &v) in lam.iter().enumerate() {
        if v > tol {
            sets.0.push(i);
        } else if v < -tol {
            sets.2.push(i);
        } else {
            sets.1.push(i);
        }
    }
    sets
}

/// Indices with `λ_i = ‖λ‖∞` and `λ_i = -‖λ‖∞` within `tol`.
fn extreme_sets(lam: &[f64], tol: f64) -> (Vec<usize>, Vec<usize>) {
    let top = lam.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let plus = (0..lam.len()).filter(|&i| lam[i] >= top - tol).collect();
    let minus = (0..lam.len()).filter(|&i| lam[i] <= -top + tol).collect();
    (plus, minus)
}

/// Membership of `d` in `T_𝒦(z)` with the linearized inequality value.
pub fn tangent_test(g: GaugeSpec, z: &ConePoint, d: &ConePoint, tol: f64) -> Result<Membership> {
    let (e, region) = require_member(g, z, tol)?;
    Ok(match region {
        RegionLabel::InteriorK => Membership::everything(),
        RegionLabel::Origin => Membership::from_value(norm_value(g, &d.a)? - d.s, tol),
        _ => Membership::from_value(norm_dir_deriv(g, &e, &d.a)? - d.s, tol),
    })
}

pub fn tangent_contains(g: GaugeSpec, z: &ConePoint, d: &ConePoint, tol: f64) -> Result<bool> {
    Ok(tangent_test(g, z, d, tol)?.contained)
}

/// Membership of `v` in `N_𝒦(z)`; `value` is the largest violated condition.
pub fn normal_test(g: GaugeSpec, z: &ConePoint, v: &ConePoint, tol: f64) -> Result<Membership> {
    let (_, region) = require_member(g, z, tol)?;
    match region {
        RegionLabel::InteriorK => Ok(Membership::from_value(v.norm(), tol)),
        RegionLabel::Origin => {
            let nd = dual_norm_value(g, &v.a)?;
            Ok(Membership::from_value(nd + v.s, tol))
        }
        _ => {
            let alpha = -v.s;
            if alpha <= tol {
                // Only the zero vector has a nonpositive scale.
                return Ok(Membership::from_value(v.norm().max(-alpha), tol));
            }
            let y = &v.a / alpha;
            let nd = dual_norm_value(g, &y)?;
            let a_hat = &z.a / z.s;
            let align = (y.dot(&a_hat) - 1.0).abs();
            let fan = crate::spectral::fan_gap(&y, &a_hat)?;
            Ok(Membership::from_value((nd - 1.0).abs().max(align).max(fan), tol))
        }
    }
}

pub fn normal_contains(g: GaugeSpec, z: &ConePoint, v: &ConePoint, tol: f64) -> Result<bool> {
    Ok(normal_test(g, z, v, tol)?.contained)
}

/// Membership of `ξ` in the outer second-order tangent set `T²_𝒦(z, d)`.
///
/// `value` is the second-order directional derivative of `N(A) - s` along `(d, ξ)`.
pub fn tangent2_test(
    g: GaugeSpec,
    z: &ConePoint,
    d: &ConePoint,
    xi: &ConePoint,
    tol: f64,
) -> Result<Membership> {
    if let GaugeSpec::P(p) = g {
        if p < 2.0 {
            return Err(ConeError::UnsupportedSmoothness(format!(
                "second-order tangent sets are only available for p >= 2, got p = {p}"
            )));
        }
    }
    let first = tangent_test(g, z, d, tol)?;
    if !first.contained {
        return Err(ConeError::Precondition("direction is not tangent to the cone".into()));
    }
    let Some(margin) = first.value else {
        return Ok(Membership::everything());
    };
    let (e, region) = require_member(g, z, tol)?;
    if region == RegionLabel::Origin {
        return Ok(Membership::from_value(norm_value(g, &xi.a)? - xi.s, tol));
    }
    if margin < -tol {
        return Ok(Membership::everything());
    }
    let value = match g {
        GaugeSpec::P(_) => {
            let grad = gauge_grad_vector(g, &e.values, e.block_tol())?;
            let lin = e.lift(&grad).dot(&xi.a);
            lin + spectral_hess_quad(g, &e, &e.blocks(), &d.a)?
        }
        GaugeSpec::P1 => nuclear_second_order(&e, &d.a, &xi.a, tol),
        GaugeSpec::PInf => spectral_second_order(&e, z.s, &d.a, d.s, &xi.a, tol),
    };
    Ok(Membership::from_value(value - xi.s, tol))
}

pub fn tangent2_contains(
    g: GaugeSpec,
    z: &ConePoint,
    d: &ConePoint,
    xi: &ConePoint,
    tol: f64,
) -> Result<bool> {
    Ok(tangent2_test(g, z, d, xi, tol)?.contained)
}

/// `(A - μI)†` through the eigenbasis, with singular threshold `1e-10·‖A‖_F`.
fn shifted_pinv(e: &EigenDecomp, mu: f64) -> DMatrix<f64> {
    let cut = 1e-10 * e.frob_norm.max(f64::MIN_POSITIVE);
    let d: Vec<f64> = e
        .values
        .iter()
        .map(|&l| if (l - mu).abs() > cut { 1.0 / (l - mu) } else { 0.0 })
        .collect();
    e.lift(&d)
}

/// `ξ - 2 D (A - μI)† D`.
fn curvature_corrected(e: &EigenDecomp, d: &DMatrix<f64>, xi: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    xi - d * shifted_pinv(e, mu) * d * 2.0
}

/// Orthonormal eigenvector groups of a small symmetric matrix split by the sign of the eigenvalue.
fn split_by_sign(x: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = x.nrows();
    if n == 0 {
        let empty = DMatrix::zeros(0, 0);
        return (empty.clone(), empty.clone(), empty);
    }
    let inner = eig_sym_unchecked(&((x + x.transpose()) * 0.5));
    let pick = |f: &dyn Fn(f64) -> bool| {
        let cols: Vec<usize> = (0..n).filter(|&i| f(inner.values[i])).collect();
        inner.vectors.select_columns(&cols)
    };
    (pick(&|v| v > tol), pick(&|v| v.abs() <= tol), pick(&|v| v < -tol))
}

fn nuclear_second_order(e: &EigenDecomp, d: &DMatrix<f64>, xi: &DMatrix<f64>, tol: f64) -> f64 {
    let blocks = e.blocks();
    let mut total = 0.0;
    let mut beta: Vec<usize> = vec![];
    for (k, r) in blocks.ranges.iter().enumerate() {
        let mu = blocks.values[k];
        let cols: Vec<usize> = r.clone().collect();
        if mu.abs() <= blocks.tol {
            beta = cols;
            continue;
        }
        let tr = compress(e, &curvature_corrected(e, d, xi, mu), &cols).trace();
        total += mu.signum() * tr;
    }
    if !beta.is_empty() {
        let inner_tol = tol.max(1e-8 * d.amax().max(1.0));
        let (plus, zero, minus) = split_by_sign(&compress(e, d, &beta), inner_tol);
        let w = compress(e, &curvature_corrected(e, d, xi, 0.0), &beta);
        let side = |q: &DMatrix<f64>| (q.transpose() * &w * q).trace();
        total += side(&plus) - side(&minus);
        let mid = zero.transpose() * &w * &zero;
        total += sym_eigenvalues(&mid).iter().map(|v| v.abs()).sum::<f64>();
    }
    total
}

fn spectral_second_order(
    e: &EigenDecomp,
    s: f64,
    d: &DMatrix<f64>,
    d_s: f64,
    xi: &DMatrix<f64>,
    tol: f64,
) -> f64 {
    let lam = &e.values;
    let (plus, minus) = extreme_sets(lam, default_block_tol(lam));
    let inner_tol = tol.max(1e-8 * d.amax().max(d_s.abs()).max(1.0));
    let mut best = f64::NEG_INFINITY;
    if !plus.is_empty() {
        let inner = eig_sym_unchecked(&compress(e, d, &plus));
        let star: Vec<usize> =
            (0..plus.len()).filter(|&i| (inner.values[i] - d_s).abs() <= inner_tol).collect();
        if !star.is_empty() {
            let q = inner.vectors.select_columns(&star);
            let w = compress(e, &curvature_corrected(e, d, xi, s), &plus);
            let top = sym_eigenvalues(&(q.transpose() * w * &q));
            best = best.max(top[0]);
        }
    }
    if !minus.is_empty() {
        let inner = eig_sym_unchecked(&compress(e, d, &minus));
        let star: Vec<usize> =
            (0..minus.len()).filter(|&i| (inner.values[i] + d_s).abs() <= inner_tol).collect();
        if !star.is_empty() {
            let q = inner.vectors.select_columns(&star);
            let w = compress(e, &curvature_corrected(e, d, xi, -s), &minus);
            let low = sym_eigenvalues(&(q.transpose() * w * &q));
            best = best.max(-low[low.len() - 1]);
        }
    }
    best
}
