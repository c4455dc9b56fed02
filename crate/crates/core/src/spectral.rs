//! Ordered eigendecomposition, eigenvalue blocks and the calculus of `ψ∘λ`.

use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ConeError, Result};
use crate::gauge::{self, hess_block_params, BlockCoeffs, GaugeSpec};

/// Relative asymmetry accepted (and averaged away) on input matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// `A = P Diag(λ) Pᵀ` with `λ` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
    pub frob_norm: f64,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `P Diag(d) Pᵀ`.
    pub fn lift(&self, d: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, &dj) in d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(dj);
        }
        exact_sym(&scaled * self.vectors.transpose())
    }

    /// `Pᵀ H P`.
    pub fn to_eigenbasis(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        self.vectors.transpose() * h * &self.vectors
    }

    /// `P Ĥ Pᵀ`.
    pub fn from_eigenbasis(&self, h_hat: &DMatrix<f64>) -> DMatrix<f64> {
        exact_sym(&self.vectors * h_hat * self.vectors.transpose())
    }

    /// Default grouping tolerance for the eigenvalues.
    pub fn block_tol(&self) -> f64 {
        default_block_tol(&self.values)
    }

    pub fn blocks(&self) -> BlockPartition {
        block_partition(&self.values, self.block_tol())
    }
}

/// Removes the rounding asymmetry of a product that is symmetric in exact arithmetic.
fn exact_sym(mut x: DMatrix<f64>) -> DMatrix<f64> {
    let m = x.nrows();
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}

/// Checks finiteness and symmetry, returning the symmetrized matrix.
pub fn symmetrize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(ConeError::InvalidInput(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(ConeError::InvalidInput("matrix has non-finite entries".into()));
    }
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * a.amax().max(1.0) {
        return Err(ConeError::InvalidInput(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Ordered eigendecomposition with deterministic column signs.
pub fn eig_desc(a: &DMatrix<f64>) -> Result<EigenDecomp> {
    let sym = symmetrize(a)?;
    Ok(eig_sym_unchecked(&sym))
}

pub(crate) fn eig_sym_unchecked(sym: &DMatrix<f64>) -> EigenDecomp {
    let m = sym.nrows();
    let frob_norm = sym.norm();
    if m == 0 {
        return EigenDecomp { vectors: DMatrix::zeros(0, 0), values: vec![], frob_norm };
    }
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let mut vectors = DMatrix::zeros(m, m);
    let mut values = Vec::with_capacity(m);
    for (col, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        let lead = v.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(1.0);
        if lead < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
        values.push(eig.eigenvalues[src]);
    }
    EigenDecomp { vectors, values, frob_norm }
}

/// Contiguous groups of (numerically) equal eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub ranges: Vec<Range<usize>>,
    /// Mean eigenvalue of each block.
    pub values: Vec<f64>,
    pub tol: f64,
}

impl BlockPartition {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Block index of each coordinate.
    pub fn owners(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (k, r) in self.ranges.iter().enumerate() {
            out.extend(std::iter::repeat(k).take(r.len()));
        }
        out
    }
}

/// `1e-8 · max(1, ‖λ‖∞)`.
pub fn default_block_tol(lambda: &[f64]) -> f64 {
    1e-8 * lambda.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()))
}

/// Greedy grouping: a new block starts when `λ_i - λ_{i+1} > tol`.
pub fn block_partition(lambda: &[f64], tol: f64) -> BlockPartition {
    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 1..=lambda.len() {
        if i == lambda.len() || lambda[i - 1] - lambda[i] > tol {
            ranges.push(start..i);
            start = i;
        }
    }
    let values = ranges
        .iter()
        .map(|r| lambda[r.clone()].iter().sum::<f64>() / r.len() as f64)
        .collect();
    BlockPartition { ranges, values, tol }
}

/// `(ψ∘λ)(A)`.
pub fn spectral_value(g: GaugeSpec, e: &EigenDecomp) -> f64 {
    gauge::value_unchecked(g, &e.values)
}

/// `∇(ψ∘λ)(A) = P Diag(∇ψ(λ)) Pᵀ`.
///
/// For P1 this requires `λ` to have no zero entry, for PInf the largest `|λ_i|`
/// must be attained once.
pub fn spectral_grad(g: GaugeSpec, e: &EigenDecomp) -> Result<DMatrix<f64>> {
    let d = gauge_grad_vector(g, &e.values, e.block_tol())?;
    Ok(e.lift(&d))
}

pub(crate) fn gauge_grad_vector(g: GaugeSpec, lam: &[f64], tol: f64) -> Result<Vec<f64>> {
    if lam.iter().all(|&v| v == 0.0) {
        return Err(ConeError::UnsupportedSmoothness("norm is not differentiable at 0".into()));
    }
    match g {
        GaugeSpec::P(_) => gauge::gauge_grad(g, lam),
        GaugeSpec::P1 => {
            if lam.iter().any(|v| v.abs() <= tol) {
                return Err(ConeError::UnsupportedSmoothness(
                    "nuclear norm is not differentiable at a singular matrix".into(),
                ));
            }
            Ok(lam.iter().map(|v| v.signum()).collect())
        }
        GaugeSpec::PInf => {
            let top = lam.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let hits: Vec<usize> = (0..lam.len()).filter(|&i| top - lam[i].abs() <= tol).collect();
            if hits.len() != 1 {
                return Err(ConeError::UnsupportedSmoothness(
                    "spectral norm is not differentiable when its maximum is attained twice".into(),
                ));
            }
            let mut d = vec![0.0; lam.len()];
            d[hits[0]] = lam[hits[0]].signum();
            Ok(d)
        }
    }
}

fn block_coeffs(g: GaugeSpec, e: &EigenDecomp, blocks: &BlockPartition) -> Result<BlockCoeffs> {
    if e.values.iter().all(|&v| v == 0.0) {
        return Err(ConeError::Domain("Hessian of the norm is undefined at 0".into()));
    }
    hess_block_params(g, &e.values, blocks, 0.0)
}

/// `∇²(ψ∘λ)(A)[H]` via the block formula, in the eigenbasis of `A`.
pub fn spectral_hess_apply(
    g: GaugeSpec,
    e: &EigenDecomp,
    blocks: &BlockPartition,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let bc = block_coeffs(g, e, blocks)?;
    let h_hat = e.to_eigenbasis(h);
    Ok(e.from_eigenbasis(&hess_apply_hat(&bc, &h_hat)))
}

/// The block formula acting on `Ĥ = PᵀHP`.
pub(crate) fn hess_apply_hat(bc: &BlockCoeffs, h_hat: &DMatrix<f64>) -> DMatrix<f64> {
    let owner = bc.owners();
    let traces = block_traces(&owner, bc.num_blocks(), h_hat);
    let m = owner.len();
    DMatrix::from_fn(m, m, |i, j| {
        let (k, l) = (owner[i], owner[j]);
        let mut v = bc.delta[(k, l)] * h_hat[(i, j)];
        if i == j {
            v += (0..traces.len()).map(|q| bc.a[(k, q)] * traces[q]).sum::<f64>();
        }
        v
    })
}

fn block_traces(owner: &[usize], r: usize, h_hat: &DMatrix<f64>) -> Vec<f64> {
    let mut t = vec![0.0; r];
    for (i, &k) in owner.iter().enumerate() {
        t[k] += h_hat[(i, i)];
    }
    t
}

/// `∇²(ψ∘λ)(A)[H, H] = Σ a_kl Tr_k Tr_l + Σ_ij δ_{k(i)k(j)} Ĥ_ij²`.
pub fn spectral_hess_quad(
    g: GaugeSpec,
    e: &EigenDecomp,
    blocks: &BlockPartition,
    h: &DMatrix<f64>,
) -> Result<f64> {
    let bc = block_coeffs(g, e, blocks)?;
    let h_hat = e.to_eigenbasis(h);
    Ok(hess_quad_hat(&bc, &h_hat))
}

pub(crate) fn hess_quad_hat(bc: &BlockCoeffs, h_hat: &DMatrix<f64>) -> f64 {
    let owner = bc.owners();
    let r = bc.num_blocks();
    let traces = block_traces(&owner, r, h_hat);
    let mut q = 0.0;
    for k in 0..r {
        for l in 0..r {
            q += bc.a[(k, l)] * traces[k] * traces[l];
        }
    }
    let m = owner.len();
    for i in 0..m {
        for j in 0..m {
            q += bc.delta[(owner[i], owner[j])] * h_hat[(i, j)].powi(2);
        }
    }
    q
}

/// `λ(Y)ᵀλ(Z) - ⟨Y, Z⟩`, nonnegative by Fan's inequality.
pub fn fan_gap(y: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<f64> {
    let ey = eig_desc(y)?;
    let ez = eig_desc(z)?;
    let dot: f64 = ey.values.iter().zip(&ez.values).map(|(a, b)| a * b).sum();
    Ok(dot - y.dot(z))
}
