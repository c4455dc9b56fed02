//! Schatten generators: the symmetric gauge functions `ψ = ‖·‖_p` on ℝ^m.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{ConeError, Result};
use crate::spectral::BlockPartition;

/// Which symmetric gauge is in force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaugeSpec {
    /// ℓ1, the nuclear norm generator.
    P1,
    /// ℓp with a finite exponent `p > 1`.
    P(f64),
    /// ℓ∞, the spectral norm generator.
    PInf,
}

impl GaugeSpec {
    /// Builds a spec from a numeric exponent, mapping 1 and +∞ to the endpoint kinds.
    pub fn from_exponent(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(GaugeSpec::P1)
        } else if p == f64::INFINITY {
            Ok(GaugeSpec::PInf)
        } else if p.is_finite() && p > 1.0 {
            Ok(GaugeSpec::P(p))
        } else {
            Err(ConeError::InvalidInput(format!("exponent must lie in [1, inf], got {p}")))
        }
    }

    /// The exponent `p`, with `f64::INFINITY` for `PInf`.
    pub fn exponent(&self) -> f64 {
        match *self {
            GaugeSpec::P1 => 1.0,
            GaugeSpec::P(p) => p,
            GaugeSpec::PInf => f64::INFINITY,
        }
    }

    /// The conjugate exponent `p_*` with `1/p + 1/p_* = 1`.
    pub fn dual_exponent(&self) -> f64 {
        self.dual().exponent()
    }

    /// The dual gauge.
    pub fn dual(&self) -> Self {
        dual_exponent(*self)
    }

    /// True for the finite-exponent kind.
    pub fn is_smooth_kind(&self) -> bool {
        matches!(self, GaugeSpec::P(_))
    }

    fn require_smooth(&self, what: &str) -> Result<f64> {
        match *self {
            GaugeSpec::P(p) => Ok(p),
            _ => Err(ConeError::UnsupportedSmoothness(format!(
                "{what} needs a finite exponent p > 1, got {self}"
            ))),
        }
    }

    fn require_hessian(&self, what: &str) -> Result<f64> {
        let p = self.require_smooth(what)?;
        if p < 2.0 {
            return Err(ConeError::UnsupportedSmoothness(format!(
                "{what} needs p >= 2, got p = {p}; use the dual exponent"
            )));
        }
        Ok(p)
    }
}

impl fmt::Display for GaugeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeSpec::P1 => write!(f, "1"),
            GaugeSpec::P(p) => write!(f, "{p}"),
            GaugeSpec::PInf => write!(f, "inf"),
        }
    }
}

impl FromStr for GaugeSpec {
    type Err = ConeError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(GaugeSpec::PInf);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| ConeError::InvalidInput(format!("cannot parse exponent {s:?}")))?;
        GaugeSpec::from_exponent(p)
    }
}

/// P1 ↔ PInf and `P(p) ↦ P(p/(p-1))`.
pub fn dual_exponent(g: GaugeSpec) -> GaugeSpec {
    match g {
        GaugeSpec::P1 => GaugeSpec::PInf,
        GaugeSpec::PInf => GaugeSpec::P1,
        GaugeSpec::P(p) => GaugeSpec::P(conjugate(p)),
    }
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn check_finite(y: &[f64]) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ConeError::InvalidInput("vector has non-finite entries".into()))
    }
}

fn max_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `ψ(y)`, computed as `‖y‖∞ · ψ(y/‖y‖∞)` to avoid overflow.
pub fn gauge_value(g: GaugeSpec, y: &[f64]) -> Result<f64> {
    check_finite(y)?;
    Ok(value_unchecked(g, y))
}

pub(crate) fn value_unchecked(g: GaugeSpec, y: &[f64]) -> f64 {
    let scale = max_abs(y);
    if scale == 0.0 {
        return 0.0;
    }
    match g {
        GaugeSpec::P1 => y.iter().map(|v| v.abs()).sum(),
        GaugeSpec::PInf => scale,
        GaugeSpec::P(p) => {
            let sum: f64 = y.iter().map(|v| (v.abs() / scale).powf(p)).sum();
            scale * sum.powf(1.0 / p)
        }
    }
}

/// `∇φ_p(y) = (|y|/φ_p(y))^{p-1} ∘ sgn(y)`.
pub fn gauge_grad(g: GaugeSpec, y: &[f64]) -> Result<Vec<f64>> {
    let p = g.require_smooth("gauge_grad")?;
    check_finite(y)?;
    let phi = value_unchecked(g, y);
    if phi == 0.0 {
        return Err(ConeError::Domain("gauge is not differentiable at 0".into()));
    }
    Ok(grad_with(p, phi, y))
}

pub(crate) fn grad_with(p: f64, phi: f64, y: &[f64]) -> Vec<f64> {
    y.iter()
        .map(|&v| (v.abs() / phi).powf(p - 1.0) * sign(v))
        .collect()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `∇²φ_p(y) = (p-1)/φ · [Diag((|y|/φ)^{p-2}) - ∇φ ∇φᵀ]` for `p ≥ 2`.
pub fn gauge_hess(g: GaugeSpec, y: &[f64]) -> Result<DMatrix<f64>> {
    let p = g.require_hessian("gauge_hess")?;
    check_finite(y)?;
    let phi = value_unchecked(g, y);
    if phi == 0.0 {
        return Err(ConeError::Domain("gauge Hessian is undefined at 0".into()));
    }
    Ok(hess_with(p, phi, y))
}

pub(crate) fn hess_with(p: f64, phi: f64, y: &[f64]) -> DMatrix<f64> {
    let m = y.len();
    let grad = grad_with(p, phi, y);
    let coef = (p - 1.0) / phi;
    DMatrix::from_fn(m, m, |i, j| {
        let diag = if i == j { curvature_weight(p, y[i].abs() / phi) } else { 0.0 };
        coef * (diag - grad[i] * grad[j])
    })
}

/// `x^{p-2}` with the continuous extension `0^{p-2} = 0` for `p > 2` and `1` at `p = 2`.
fn curvature_weight(p: f64, x: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        x.powf(p - 2.0)
    }
}

/// Componentwise shrinkage `[|y| - μ]_+ ∘ sgn(y)`.
pub fn soft_threshold(y: &[f64], mu: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0) {
        return Err(ConeError::InvalidInput(format!("threshold must be >= 0, got {mu}")));
    }
    Ok(y.iter().map(|&v| (v.abs() - mu).max(0.0) * sign(v)).collect())
}

/// Per-block coefficients of `∇²φ_p` and of the resolvent weights `π = (1 + μδ)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCoeffs {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub delta: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    pub block_sizes: Vec<usize>,
}

impl BlockCoeffs {
    pub fn num_blocks(&self) -> usize {
        self.b.len()
    }

    /// Rebuilds the m×m Hessian from the block template
    /// `a_kl 1 1ᵀ` off the diagonal blocks and `a_kk 1 1ᵀ + b_k I` on them.
    pub fn dense_hessian(&self) -> DMatrix<f64> {
        let owner = self.owners();
        let m = owner.len();
        DMatrix::from_fn(m, m, |i, j| {
            let (k, l) = (owner[i], owner[j]);
            self.a[(k, l)] + if i == j { self.b[k] } else { 0.0 }
        })
    }

    /// Block index of each coordinate.
    pub fn owners(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat(k).take(n))
            .collect()
    }
}

/// Block coefficients of `∇²φ_p` at a vector `w` that is constant on each block.
pub fn hess_block_params(
    g: GaugeSpec,
    w: &[f64],
    blocks: &BlockPartition,
    mu: f64,
) -> Result<BlockCoeffs> {
    let p = g.require_hessian("hess_block_params")?;
    check_finite(w)?;
    if !(mu >= 0.0) {
        return Err(ConeError::InvalidInput(format!("multiplier must be >= 0, got {mu}")));
    }
    let covered: usize = blocks.ranges.iter().map(|r| r.len()).sum();
    if covered != w.len() {
        return Err(ConeError::InvalidPartition(format!(
            "partition covers {covered} indices, vector has {}",
            w.len()
        )));
    }
    let phi = value_unchecked(g, w);
    if phi == 0.0 {
        return Err(ConeError::Domain("block coefficients are undefined at w = 0".into()));
    }
    let slack = blocks.tol.max(1e-12 * max_abs(w));
    let mut vals = Vec::with_capacity(blocks.ranges.len());
    for r in &blocks.ranges {
        let seg = &w[r.clone()];
        let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > slack {
            return Err(ConeError::InvalidPartition(format!(
                "block {r:?} mixes values {lo} and {hi}"
            )));
        }
        vals.push(seg.iter().sum::<f64>() / seg.len() as f64);
    }
    let r = vals.len();
    let coef = (p - 1.0) / phi;
    let c: Vec<f64> = vals.iter().map(|&v| (v.abs() / phi).powf(p - 1.0) * sign(v)).collect();
    let b: Vec<f64> = vals.iter().map(|&v| coef * curvature_weight(p, v.abs() / phi)).collect();
    let a = DMatrix::from_fn(r, r, |k, l| -coef * c[k] * c[l]);
    let delta = DMatrix::from_fn(r, r, |k, l| {
        if k == l {
            b[k]
        } else {
            (c[k] - c[l]) / (vals[k] - vals[l])
        }
    });
    let pi = delta.map(|d| 1.0 / (1.0 + mu * d));
    Ok(BlockCoeffs {
        a,
        b,
        c,
        delta,
        pi,
        block_sizes: blocks.ranges.iter().map(|r| r.len()).collect(),
    })
}
