//! Slow reference implementations used to check the solvers.
//!
//! Nothing here calls into the gauge, spectral or projection kernels; the eigen
//! solver is used directly and the norms are recomputed from scratch.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cones::{svec_len, ConePoint};
use crate::error::{ConeError, Result};
use crate::gauge::GaugeSpec;
use crate::projection::project_cone;

/// Largest matrix size accepted by the oracles.
pub const ORACLE_DIM_LIMIT: usize = 6;

/// A reference value with the oracle's own quality measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport<T> {
    pub value: T,
    pub residual: f64,
    pub effort: usize,
}

fn check_dim(m: usize) -> Result<()> {
    if m > ORACLE_DIM_LIMIT {
        Err(ConeError::DimensionCap { m, limit: ORACLE_DIM_LIMIT })
    } else {
        Ok(())
    }
}

/// Eigenpairs sorted by decreasing eigenvalue.
fn eigh(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let m = a.nrows();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vecs, idx.iter().map(|&i| eig.eigenvalues[i]).collect())
}

fn lift(p: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    p * DMatrix::from_diagonal(&DVector::from_column_slice(d)) * p.transpose()
}

fn norm_of(g: GaugeSpec, v: &[f64]) -> f64 {
    match g {
        GaugeSpec::P1 => v.iter().map(|x| x.abs()).sum(),
        GaugeSpec::PInf => v.iter().map(|x| x.abs()).fold(0.0, f64::max),
        GaugeSpec::P(p) => {
            let top = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if top == 0.0 {
                return 0.0;
            }
            top * v.iter().map(|x| (x.abs() / top).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

fn dual_of(g: GaugeSpec) -> GaugeSpec {
    match g {
        GaugeSpec::P1 => GaugeSpec::PInf,
        GaugeSpec::PInf => GaugeSpec::P1,
        GaugeSpec::P(p) => GaugeSpec::P(p / (p - 1.0)),
    }
}

/// Solves `v + ν v^{p-1} = l` on `[0, l]` by safeguarded Newton.
fn scalar_root(p: f64, nu: f64, l: f64) -> f64 {
    if l == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, l);
    let mut v = l;
    for _ in 0..100 {
        let f = v + nu * v.powf(p - 1.0) - l;
        if f > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let df = 1.0 + nu * (p - 1.0) * v.powf(p - 2.0);
        let mut next = v - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-17 * l || hi - lo <= 1e-16 * l {
            v = next;
            break;
        }
        v = next;
    }
    v
}

/// Projection of `x` onto `{y : ψ(y) ≤ t}`.
fn ball_project(g: GaugeSpec, x: &[f64], t: f64) -> Vec<f64> {
    if t <= 0.0 {
        return vec![0.0; x.len()];
    }
    if norm_of(g, x) <= t {
        return x.to_vec();
    }
    match g {
        GaugeSpec::PInf => x.iter().map(|v| v.clamp(-t, t)).collect(),
        GaugeSpec::P1 => {
            let shrink = |nu: f64| -> Vec<f64> {
                x.iter().map(|v| v.signum() * (v.abs() - nu).max(0.0)).collect()
            };
            let (mut lo, mut hi) = (0.0, x.iter().map(|v| v.abs()).fold(0.0, f64::max));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if shrink(mid).iter().map(|v| v.abs()).sum::<f64>() > t {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            shrink(0.5 * (lo + hi))
        }
        GaugeSpec::P(p) => {
            let solve = |nu: f64| -> Vec<f64> {
                x.iter().map(|v| v.signum() * scalar_root(p, nu, v.abs())).collect()
            };
            let mut hi = 1.0;
            while norm_of(g, &solve(hi)) > t {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if norm_of(g, &solve(mid)) > t {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            solve(0.5 * (lo + hi))
        }
    }
}

/// Derivative of `t ↦ ½dist(λ, t·B)² + ½(t - s)²`, which is nondecreasing.
fn profile_slope(g: GaugeSpec, lam: &[f64], s: f64, t: f64) -> (f64, Vec<f64>) {
    let w = ball_project(g, lam, t);
    let pull: f64 = lam.iter().zip(&w).map(|(l, x)| (l - x) * x).sum();
    ((t - s) - pull / t, w)
}

/// Brute-force `Π_𝒦(z)` by bisection on the epigraph height `t`, with an
/// inner ball projection for each trial height.
pub fn project_bruteforce(
    g: GaugeSpec,
    z: &ConePoint,
    max_iter: usize,
    tol: f64,
) -> Result<OracleReport<ConePoint>> {
    let m = z.dim();
    check_dim(m)?;
    let (p, lam) = eigh(&z.a);
    let n = norm_of(g, &lam);
    if n <= z.s {
        return Ok(OracleReport { value: z.clone(), residual: 0.0, effort: 0 });
    }
    if norm_of(dual_of(g), &lam) <= -z.s {
        return Ok(OracleReport { value: ConePoint::zeros(m), residual: 0.0, effort: 0 });
    }
    let (mut lo, mut hi) = (0.0, n);
    let mut effort = 0;
    while effort < max_iter && hi - lo > tol * n {
        let mid = 0.5 * (lo + hi);
        if profile_slope(g, &lam, z.s, mid).0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        effort += 1;
    }
    let t = 0.5 * (lo + hi);
    let (slope, w) = profile_slope(g, &lam, z.s, t);
    Ok(OracleReport {
        value: ConePoint { a: lift(&p, &w), s: t },
        residual: slope.abs().max(hi - lo),
        effort,
    })
}

/// Bisection on `θ(μ) = Σ[|a_i| - μ]_+ - μ - s` over `(0, max(‖a‖₁, -s) + 1)`.
pub fn theta_bisection(a: &[f64], s: f64) -> f64 {
    let theta = |mu: f64| a.iter().map(|v| (v.abs() - mu).max(0.0)).sum::<f64>() - mu - s;
    let l1: f64 = a.iter().map(|v| v.abs()).sum();
    let (mut lo, mut hi) = (0.0, l1.max(-s) + 1.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if theta(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided difference `(Π(z + td) - Π(z))/t`.
pub fn fd_dirderiv(g: GaugeSpec, z: &ConePoint, d: &ConePoint, t: f64) -> Result<ConePoint> {
    if !(t > 0.0) {
        return Err(ConeError::InvalidInput(format!("step must be positive, got {t}")));
    }
    let base = project_cone(g, z)?.point;
    let moved = project_cone(g, &z.axpy(t, d))?.point;
    Ok((&moved - &base).scale(1.0 / t))
}

/// Central difference `(Π(z + td) - Π(z - td))/2t`.
pub fn fd_dirderiv_central(g: GaugeSpec, z: &ConePoint, d: &ConePoint, t: f64) -> Result<ConePoint> {
    if !(t > 0.0) {
        return Err(ConeError::InvalidInput(format!("step must be positive, got {t}")));
    }
    let fwd = project_cone(g, &z.axpy(t, d))?.point;
    let bwd = project_cone(g, &z.axpy(-t, d))?.point;
    Ok((&fwd - &bwd).scale(0.5 / t))
}

/// Richardson extrapolation of one-sided differences over the steps `ts`
/// (a geometric sequence, largest first).
pub fn fd_dirderiv_richardson(
    g: GaugeSpec,
    z: &ConePoint,
    d: &ConePoint,
    ts: &[f64],
) -> Result<ConePoint> {
    if ts.len() < 2 {
        return Err(ConeError::InvalidInput("need at least two steps".into()));
    }
    let ratio = ts[0] / ts[1];
    let mut table: Vec<ConePoint> =
        ts.iter().map(|&t| fd_dirderiv(g, z, d, t)).collect::<Result<_>>()?;
    let mut factor = ratio;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (&w[1].scale(factor) - &w[0]).scale(1.0 / (factor - 1.0)))
            .collect();
        factor *= ratio;
    }
    Ok(table.pop().expect("nonempty table"))
}

fn grad_of(p: f64, y: &[f64]) -> Vec<f64> {
    let phi = norm_of(GaugeSpec::P(p), y);
    y.iter().map(|v| v.signum() * (v.abs() / phi).powf(p - 1.0)).collect()
}

/// Second partials of `φ_p`, written out from `φ = (Σ|y|^p)^{1/p}`.
fn hess_of(p: f64, y: &[f64]) -> DMatrix<f64> {
    let phi = norm_of(GaugeSpec::P(p), y);
    let g = grad_of(p, y);
    let m = y.len();
    DMatrix::from_fn(m, m, |i, j| {
        let own = if i == j {
            let r = y[i].abs() / phi;
            (p - 1.0) / phi * if p == 2.0 { 1.0 } else { r.powf(p - 2.0) }
        } else {
            0.0
        };
        own - (p - 1.0) / phi * g[i] * g[j]
    })
}

/// Dense matrix of `∇²(ψ∘λ)(A)` in the orthonormal `svec` basis of `𝕊^m`,
/// built from `P[Diag(∇²ψ diag Ĥ) + 𝒜∘Ĥ]Pᵀ`.
pub fn dense_hess(g: GaugeSpec, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    check_dim(m)?;
    let p = match g {
        GaugeSpec::P(p) if p >= 2.0 => p,
        _ => return Err(ConeError::UnsupportedSmoothness(format!("dense Hessian needs p >= 2, got {g}"))),
    };
    let (vecs, lam) = eigh(a);
    if lam.iter().all(|&v| v == 0.0) {
        return Err(ConeError::Domain("Hessian is undefined at 0".into()));
    }
    let grad = grad_of(p, &lam);
    let hess = hess_of(p, &lam);
    let tie = 1e-8 * lam.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let cal_a = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else if (lam[i] - lam[j]).abs() > tie {
            (grad[i] - grad[j]) / (lam[i] - lam[j])
        } else {
            hess[(i, i)] - hess[(i, j)]
        }
    });
    let n = svec_len(m) - 1;
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = DVector::zeros(n + 1);
        e[k] = 1.0;
        let h = ConePoint::from_svec(m, &e).a;
        let h_hat = vecs.transpose() * &h * &vecs;
        let dvec = &hess * DVector::from_iterator(m, (0..m).map(|i| h_hat[(i, i)]));
        let mut inner = cal_a.component_mul(&h_hat);
        for i in 0..m {
            inner[(i, i)] += dvec[i];
        }
        let col = ConePoint { a: &vecs * inner * vecs.transpose(), s: 0.0 }.to_svec();
        out.set_column(k, &col.rows(0, n).into_owned());
    }
    Ok(out)
}

/// Residual of `λ - w ∈ μ∂ψ(w)`, `ψ(w) = μ + s` at `z = (A, s)`, with `w` in
/// the order of the decreasing eigenvalues of `A`.
pub fn kkt_residual(g: GaugeSpec, z: &ConePoint, w: &[f64], mu: f64) -> Result<f64> {
    let (_, lam) = eigh(&z.a);
    if w.len() != lam.len() {
        return Err(ConeError::InvalidInput("eigenvalue vector has the wrong length".into()));
    }
    let r: Vec<f64> = lam.iter().zip(w).map(|(l, x)| l - x).collect();
    let stationarity = match g {
        GaugeSpec::P(p) => {
            if w.iter().all(|&x| x == 0.0) {
                // ∂ψ(0) is the dual unit ball.
                (norm_of(dual_of(g), &r) - mu).max(0.0)
            } else {
                let grad = grad_of(p, w);
                r.iter().zip(&grad).map(|(ri, gi)| (ri - mu * gi).powi(2)).sum::<f64>().sqrt()
            }
        }
        GaugeSpec::P1 => r
            .iter()
            .zip(w)
            .map(|(&ri, &wi)| if wi != 0.0 { ri - mu * wi.signum() } else { (ri.abs() - mu).max(0.0) })
            .map(|e| e * e)
            .sum::<f64>()
            .sqrt(),
        GaugeSpec::PInf => linf_stationarity(&r, w, mu),
    };
    let feas = norm_of(g, w) - mu - z.s;
    Ok((stationarity.powi(2) + feas.powi(2)).sqrt())
}

/// Distance from `r` to `μ · conv{sgn(w_i) e_i : |w_i| = ‖w‖∞}`.
fn linf_stationarity(r: &[f64], w: &[f64], mu: f64) -> f64 {
    let top = w.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if top == 0.0 {
        return (r.iter().map(|x| x.abs()).sum::<f64>() - mu).max(0.0);
    }
    let cut = 1e-10 * top.max(1.0);
    let mut off = 0.0;
    let mut y = Vec::new();
    for (&ri, &wi) in r.iter().zip(w) {
        if top - wi.abs() <= cut {
            y.push(ri * wi.signum());
        } else {
            off += ri * ri;
        }
    }
    let proj = simplex_project(&y, mu);
    let on: f64 = y.iter().zip(&proj).map(|(a, b)| (a - b).powi(2)).sum();
    (off + on).sqrt()
}

/// Projection onto `{x ≥ 0, Σx = c}`.
fn simplex_project(y: &[f64], c: f64) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut shift = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        acc += v;
        let cand = (acc - c) / (k as f64 + 1.0);
        if v - cand > 0.0 {
            shift = cand;
        }
    }
    y.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Estimate of the operator norm of a self-adjoint map on `𝕊^m × ℝ` by power
/// iteration on its square.
pub fn power_iteration_norm(m: usize, map: &dyn Fn(&ConePoint) -> ConePoint, iters: usize) -> f64 {
    let n = svec_len(m);
    let mut v = DVector::from_fn(n, |k, _| 1.0 + 0.37 * ((k as f64 + 1.0) * 1.618).sin());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..iters {
        let once = map(&ConePoint::from_svec(m, &v)).to_svec();
        let twice = map(&ConePoint::from_svec(m, &once)).to_svec();
        let nn = twice.norm();
        est = once.norm();
        if nn == 0.0 {
            return 0.0;
        }
        v = twice / nn;
    }
    est.max(map(&ConePoint::from_svec(m, &v)).to_svec().norm())
}
