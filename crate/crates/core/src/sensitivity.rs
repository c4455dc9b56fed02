//! Derivatives of `Π_𝒦`: Fréchet derivative on the open regions, directional
//! derivatives and elements of the B-subdifferential.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::cones::{classify_eig, svec_len, ConePoint, RegionLabel};
use crate::error::{ConeError, Result};
use crate::gauge::{self, hess_block_params, BlockCoeffs, GaugeSpec};
use crate::projection::{project_cone, project_epi_vec, CLASSIFY_TOL};
use crate::spectral::{
    block_partition, eig_desc, gauge_grad_vector, hess_apply_hat, EigenDecomp,
};

/// Largest `m` for which [`ProjectorDerivative::to_dense`] materializes a matrix.
pub const DENSE_LIMIT: usize = 6;

/// The six point classes distinguished by the derivative formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivativeCase {
    InteriorK,
    InteriorPolar,
    Outside,
    BoundaryK,
    BoundaryPolar,
    Origin,
}

impl DerivativeCase {
    pub fn from_region(r: RegionLabel) -> Self {
        match r {
            RegionLabel::InteriorK => DerivativeCase::InteriorK,
            RegionLabel::InteriorPolar => DerivativeCase::InteriorPolar,
            RegionLabel::Outside => DerivativeCase::Outside,
            RegionLabel::BoundaryK => DerivativeCase::BoundaryK,
            RegionLabel::BoundaryPolar => DerivativeCase::BoundaryPolar,
            RegionLabel::Origin => DerivativeCase::Origin,
        }
    }

    /// Roman numeral `(i)` … `(vi)`.
    pub fn label(&self) -> &'static str {
        match self {
            DerivativeCase::InteriorK => "(i)",
            DerivativeCase::InteriorPolar => "(ii)",
            DerivativeCase::Outside => "(iii)",
            DerivativeCase::BoundaryK => "(iv)",
            DerivativeCase::BoundaryPolar => "(v)",
            DerivativeCase::Origin => "(vi)",
        }
    }
}

impl fmt::Display for DerivativeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Eigenvalue-space data of `DΠ_𝒦(z)` at a point outside both cones.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlockData {
    /// Eigenvectors shared by `A` and `X(z)`.
    pub basis: DMatrix<f64>,
    /// Eigenvalues `u(z)` of `X(z)`.
    pub u: Vec<f64>,
    pub mu: f64,
    pub coeffs: BlockCoeffs,
    /// `M(z) = I + μ∇²ψ(u)`.
    pub m_mat: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
    /// `ℬ(z)`: `π_{k(i)k(j)}` off the diagonal, zero on it.
    pub b_table: DMatrix<f64>,
    pub grad_vec: Vec<f64>,
    /// `M(z)⁻¹ ∇ψ(u)`.
    pub m_inv_grad: Vec<f64>,
    pub beta: f64,
}

impl SpectralBlockData {
    fn to_hat(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        self.basis.transpose() * h * &self.basis
    }

    fn from_hat(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        &self.basis * h * self.basis.transpose()
    }

    /// `G(z)⁻¹` acting in the eigenbasis.
    fn g_inverse_hat(&self, h_hat: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.u.len();
        let diag = &self.m_inv * DVector::from_iterator(m, (0..m).map(|i| h_hat[(i, i)]));
        DMatrix::from_fn(m, m, |i, j| if i == j { diag[i] } else { self.b_table[(i, j)] * h_hat[(i, j)] })
    }

    fn apply(&self, h: &ConePoint) -> ConePoint {
        let h_hat = self.to_hat(&h.a);
        let mut y = self.g_inverse_hat(&h_hat);
        let m = self.u.len();
        let proj: f64 = (0..m).map(|i| self.m_inv_grad[i] * h_hat[(i, i)]).sum();
        let kappa = self.beta * (proj - h.s);
        for i in 0..m {
            y[(i, i)] -= kappa * self.m_inv_grad[i];
        }
        ConePoint { a: self.from_hat(&y), s: h.s + kappa }
    }
}

/// A self-adjoint linear map on `𝕊^m × ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivativeMap {
    Identity,
    Zero,
    Spectral(Box<SpectralBlockData>),
    /// `h ↦ h - L(h)`.
    Complement(Box<DerivativeMap>),
    /// `h ↦ [h if identity] + coeff·⟨v, h⟩ v`.
    RankOne { identity: bool, coeff: f64, v: ConePoint },
    /// `(H, τ) ↦ ½((1+r)H - r⟨Â,H⟩Â + τÂ, ⟨Â,H⟩ + τ)` with `‖Â‖_F = 1`.
    Frobenius { a_unit: DMatrix<f64>, ratio: f64 },
}

impl DerivativeMap {
    pub fn apply(&self, h: &ConePoint) -> ConePoint {
        match self {
            DerivativeMap::Identity => h.clone(),
            DerivativeMap::Zero => ConePoint::zeros(h.dim()),
            DerivativeMap::Spectral(data) => data.apply(h),
            DerivativeMap::Complement(inner) => h - &inner.apply(h),
            DerivativeMap::RankOne { identity, coeff, v } => {
                let base = if *identity { h.clone() } else { ConePoint::zeros(h.dim()) };
                base.axpy(coeff * v.inner(h), v)
            }
            DerivativeMap::Frobenius { a_unit, ratio } => {
                let ah = a_unit.dot(&h.a);
                let a = (&h.a * (1.0 + ratio) - a_unit * (ratio * ah) + a_unit * h.s) * 0.5;
                ConePoint { a, s: 0.5 * (ah + h.s) }
            }
        }
    }
}

/// A derivative map tagged with the point class that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorDerivative {
    pub case: DerivativeCase,
    pub map: DerivativeMap,
    pub m: usize,
}

impl ProjectorDerivative {
    pub fn apply(&self, h: &ConePoint) -> ConePoint {
        self.map.apply(h)
    }

    /// Matrix of the map in the orthonormal `svec` basis (for `m ≤ 6`).
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.m > DENSE_LIMIT {
            return Err(ConeError::DimensionCap { m: self.m, limit: DENSE_LIMIT });
        }
        let n = svec_len(self.m);
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let col = self.apply(&ConePoint::from_svec(self.m, &e)).to_svec();
            out.set_column(k, &col);
        }
        Ok(out)
    }

    pub fn spectral_data(&self) -> Option<&SpectralBlockData> {
        match &self.map {
            DerivativeMap::Spectral(d) => Some(d),
            _ => None,
        }
    }
}

fn spectral_data(g: GaugeSpec, e: &EigenDecomp, s: f64) -> Result<SpectralBlockData> {
    let sol = project_epi_vec(g, &e.values, s)?;
    let u = sol.w;
    let mu = sol.mu;
    // DΠ is invariant under positive scaling of z, so ties are judged relative to ‖u‖∞.
    let top = u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let blocks = block_partition(&u, 1e-8 * top);
    let coeffs = hess_block_params(g, &u, &blocks, mu)?;
    let m = u.len();
    let m_mat = DMatrix::identity(m, m) + coeffs.dense_hessian() * mu;
    let m_inv = m_mat
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| m_mat.clone().try_inverse())
        .ok_or_else(|| ConeError::Internal("M(z) is singular".into()))?;
    let owner = coeffs.owners();
    let b_table =
        DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { coeffs.pi[(owner[i], owner[j])] });
    let grad_vec = gauge::gauge_grad(g, &u)?;
    let m_inv_grad: Vec<f64> = (&m_inv * DVector::from_column_slice(&grad_vec)).iter().copied().collect();
    let quad: f64 = grad_vec.iter().zip(&m_inv_grad).map(|(a, b)| a * b).sum();
    Ok(SpectralBlockData {
        basis: e.vectors.clone(),
        u,
        mu,
        coeffs,
        m_mat,
        m_inv,
        b_table,
        grad_vec,
        m_inv_grad,
        beta: 1.0 / (1.0 + quad),
    })
}

/// `Y = G(z)⁻¹ H`.
pub fn g_inverse_apply(d: &ProjectorDerivative, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let data = require_spectral(d)?;
    Ok(data.from_hat(&data.g_inverse_hat(&data.to_hat(h))))
}

/// `G(z)Y = Y + μ∇²(ψ∘λ)(X(z))[Y]`.
pub fn g_apply(d: &ProjectorDerivative, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let data = require_spectral(d)?;
    let y_hat = data.to_hat(y);
    let out = &y_hat + hess_apply_hat(&data.coeffs, &y_hat) * data.mu;
    Ok(data.from_hat(&out))
}

/// `β(z) = (1 + ∇ψ(u)ᵀ M(z)⁻¹ ∇ψ(u))⁻¹`.
pub fn beta_of(d: &ProjectorDerivative) -> Result<f64> {
    Ok(require_spectral(d)?.beta)
}

fn require_spectral(d: &ProjectorDerivative) -> Result<&SpectralBlockData> {
    d.spectral_data().ok_or_else(|| {
        ConeError::Precondition("map was not built from eigenvalue-space block data".into())
    })
}

/// Fréchet derivative of `Π_𝒦` at a point of an open region.
pub fn dproj(g: GaugeSpec, z: &ConePoint) -> Result<ProjectorDerivative> {
    dproj_with_tol(g, z, CLASSIFY_TOL)
}

pub fn dproj_with_tol(g: GaugeSpec, z: &ConePoint, tol: f64) -> Result<ProjectorDerivative> {
    dproj_impl(g, z, tol, true)
}

/// Like [`dproj`] but never uses the Frobenius closed form.
pub fn dproj_spectral(g: GaugeSpec, z: &ConePoint) -> Result<ProjectorDerivative> {
    dproj_impl(g, z, CLASSIFY_TOL, false)
}

fn dproj_impl(g: GaugeSpec, z: &ConePoint, tol: f64, closed_form: bool) -> Result<ProjectorDerivative> {
    let e = eig_desc(&z.a)?;
    let region = classify_eig(g, &e, z.s, tol);
    let case = DerivativeCase::from_region(region);
    let map = match region {
        RegionLabel::InteriorK => DerivativeMap::Identity,
        RegionLabel::InteriorPolar => DerivativeMap::Zero,
        RegionLabel::Outside => outside_map(g, z, &e, closed_form)?,
        other => {
            return Err(ConeError::NotDifferentiable(format!(
                "projector is not differentiable at a point of class {other}; use dirderiv or bsubdiff"
            )))
        }
    };
    Ok(ProjectorDerivative { case, map, m: z.dim() })
}

fn outside_map(g: GaugeSpec, z: &ConePoint, e: &EigenDecomp, closed_form: bool) -> Result<DerivativeMap> {
    match g {
        GaugeSpec::P(p) if p == 2.0 && closed_form => {
            let n = e.frob_norm;
            Ok(DerivativeMap::Frobenius { a_unit: &z.a / n, ratio: z.s / n })
        }
        GaugeSpec::P(p) if p >= 2.0 => Ok(DerivativeMap::Spectral(Box::new(spectral_data(g, e, z.s)?))),
        GaugeSpec::P(_) => {
            // Π_𝒦(z) = z + Π_{𝒦_*}(-z), so DΠ_𝒦(z) = I - DΠ_{𝒦_*}(-z).
            let neg: Vec<f64> = e.values.iter().rev().map(|v| -v).collect();
            let mut flipped = e.vectors.clone();
            let m = neg.len();
            for j in 0..m {
                flipped.set_column(j, &e.vectors.column(m - 1 - j));
            }
            let e_neg = EigenDecomp { vectors: flipped, values: neg, frob_norm: e.frob_norm };
            let inner = spectral_data(g.dual(), &e_neg, -z.s)?;
            Ok(DerivativeMap::Complement(Box::new(DerivativeMap::Spectral(Box::new(inner)))))
        }
        _ => Err(ConeError::UnsupportedSmoothness(format!(
            "derivative outside the cones is not available for p = {g}"
        ))),
    }
}

/// Directional derivative together with the point class used.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalDerivative {
    pub value: ConePoint,
    pub case: DerivativeCase,
}

/// `Π'_𝒦(z; d)`.
pub fn dirderiv(g: GaugeSpec, z: &ConePoint, d: &ConePoint) -> Result<DirectionalDerivative> {
    dirderiv_with_tol(g, z, d, CLASSIFY_TOL)
}

pub fn dirderiv_with_tol(
    g: GaugeSpec,
    z: &ConePoint,
    d: &ConePoint,
    tol: f64,
) -> Result<DirectionalDerivative> {
    if d.dim() != z.dim() {
        return Err(ConeError::InvalidInput("direction and point differ in dimension".into()));
    }
    let e = eig_desc(&z.a)?;
    let region = classify_eig(g, &e, z.s, tol);
    let case = DerivativeCase::from_region(region);
    let value = match region {
        RegionLabel::InteriorK => d.clone(),
        RegionLabel::InteriorPolar => ConePoint::zeros(d.dim()),
        RegionLabel::Outside => dproj_with_tol(g, z, tol)?.apply(d),
        RegionLabel::Origin => project_cone(g, d)?.point,
        RegionLabel::BoundaryK => {
            let (v, nn) = boundary_normal(g, &e, -1.0)?;
            let c = v.inner(d).max(0.0);
            d.axpy(-c / nn, &v)
        }
        RegionLabel::BoundaryPolar => {
            let (v, nn) = boundary_normal(g.dual(), &e, 1.0)?;
            let c = v.inner(d).max(0.0);
            ConePoint::zeros(d.dim()).axpy(c / nn, &v)
        }
    };
    Ok(DirectionalDerivative { value, case })
}

/// `v = (∇N(A), sign)` and `‖v‖² = 1 + ‖∇N(A)‖²`.
fn boundary_normal(g: GaugeSpec, e: &EigenDecomp, sign: f64) -> Result<(ConePoint, f64)> {
    let grad = gauge_grad_vector(g, &e.values, e.block_tol())?;
    let v = ConePoint { a: e.lift(&grad), s: sign };
    let nn = v.inner(&v);
    Ok((v, nn))
}

/// How to sample `∂_B Π_𝒦(0)` beyond the two trivial elements.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum OriginSampling {
    #[default]
    None,
    /// Frobenius cone only: the family indexed by `a ∈ [0, 1]` and unit `Y`.
    FrobeniusFamily { a_grid: Vec<f64>, directions: Vec<DMatrix<f64>> },
    /// Points `z₀` outside both cones; `DΠ` is constant along `t z₀`, so
    /// `DΠ(z₀)` is the limit along `t_k z₀ → 0`.
    Approach(Vec<ConePoint>),
}

/// Elements of the B-subdifferential of `Π_𝒦` at `z`.
pub fn bsubdiff(g: GaugeSpec, z: &ConePoint, sampling: &OriginSampling) -> Result<Vec<ProjectorDerivative>> {
    bsubdiff_with_tol(g, z, sampling, CLASSIFY_TOL)
}

pub fn bsubdiff_with_tol(
    g: GaugeSpec,
    z: &ConePoint,
    sampling: &OriginSampling,
    tol: f64,
) -> Result<Vec<ProjectorDerivative>> {
    let e = eig_desc(&z.a)?;
    let region = classify_eig(g, &e, z.s, tol);
    let case = DerivativeCase::from_region(region);
    let m = z.dim();
    let tag = |map| ProjectorDerivative { case, map, m };
    Ok(match region {
        RegionLabel::InteriorK => vec![tag(DerivativeMap::Identity)],
        RegionLabel::InteriorPolar => vec![tag(DerivativeMap::Zero)],
        RegionLabel::Outside => vec![dproj_with_tol(g, z, tol)?],
        RegionLabel::BoundaryK => {
            let (v, nn) = boundary_normal(g, &e, -1.0)?;
            vec![
                tag(DerivativeMap::Identity),
                tag(DerivativeMap::RankOne { identity: true, coeff: -1.0 / nn, v }),
            ]
        }
        RegionLabel::BoundaryPolar => {
            let (v, nn) = boundary_normal(g.dual(), &e, 1.0)?;
            vec![
                tag(DerivativeMap::Zero),
                tag(DerivativeMap::RankOne { identity: false, coeff: 1.0 / nn, v }),
            ]
        }
        RegionLabel::Origin => {
            let mut out = vec![tag(DerivativeMap::Zero), tag(DerivativeMap::Identity)];
            match sampling {
                OriginSampling::None => {}
                OriginSampling::FrobeniusFamily { a_grid, directions } => {
                    if g != GaugeSpec::P(2.0) {
                        return Err(ConeError::InvalidInput(
                            "the closed-form origin family exists only for p = 2".into(),
                        ));
                    }
                    for y in directions {
                        if y.nrows() != m || y.ncols() != m {
                            return Err(ConeError::InvalidInput("family direction has wrong size".into()));
                        }
                        let y = crate::spectral::symmetrize(y)?;
                        let n = y.norm();
                        if n == 0.0 {
                            return Err(ConeError::InvalidInput("family direction is zero".into()));
                        }
                        for &a in a_grid {
                            if !(0.0..=1.0).contains(&a) {
                                return Err(ConeError::InvalidInput(format!(
                                    "family parameter must lie in [0, 1], got {a}"
                                )));
                            }
                            out.push(tag(DerivativeMap::Frobenius { a_unit: &y / n, ratio: 2.0 * a - 1.0 }));
                        }
                    }
                }
                OriginSampling::Approach(points) => {
                    for z0 in points {
                        let d = dproj_with_tol(g, z0, tol).map_err(|err| match err {
                            ConeError::NotDifferentiable(_) => ConeError::InvalidInput(
                                "approach points must lie outside both cones".into(),
                            ),
                            other => other,
                        })?;
                        out.push(ProjectorDerivative { case, ..d });
                    }
                }
            }
            out
        }
    })
}
