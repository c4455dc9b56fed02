//! Metric projection onto `𝒦` and `𝒦°`.
//!
//! Everything reduces to the eigenvalue vector: outside both cones the projection
//! is `(P Diag(w) Pᵀ, s + μ)` where `(w, μ)` solves `μ∇ψ(w) + w = λ(A)`,
//! `ψ(w) = s + μ`. Exponents in `(1, 2)` and `∞` go through the dual cone.

use nalgebra::{DMatrix, DVector};

use crate::cones::{classify_eig, ConePoint, RegionLabel};
use crate::error::{ConeError, Result};
use crate::gauge::{self, soft_threshold, GaugeSpec};
use crate::spectral::{eig_desc, EigenDecomp};

/// Classification tolerance applied before projecting.
pub const CLASSIFY_TOL: f64 = 1e-10;
/// Iteration cap of the Newton solver.
pub const MAX_NEWTON_ITER: usize = 200;

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_STAGNATION_TOL: f64 = 1e-11;
const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const BOUNDARY_FRACTION: f64 = 0.99;
const MAX_STALLS: usize = 3;

/// Result of [`project_cone`] or [`project_polar`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: ConePoint,
    pub multiplier: f64,
    pub region: RegionLabel,
    /// Eigenvalues of the projected matrix, in the order of `λ(A)`.
    pub w: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Projection of `(a, s)` onto `epi ψ` in ℝ^m × ℝ.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiProjection {
    pub w: Vec<f64>,
    pub t: f64,
    pub mu: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Solution of the smooth KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub w: Vec<f64>,
    pub mu: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Projects `(a, s)` onto `epi ψ`, assuming it lies outside `epi ψ` and its polar.
pub fn project_epi_vec(g: GaugeSpec, a: &[f64], s: f64) -> Result<EpiProjection> {
    epi_capped(g, a, s, MAX_NEWTON_ITER)
}

fn epi_capped(g: GaugeSpec, a: &[f64], s: f64, max_iter: usize) -> Result<EpiProjection> {
    if a.iter().any(|v| !v.is_finite()) || !s.is_finite() {
        return Err(ConeError::InvalidInput("non-finite input".into()));
    }
    let n = gauge::value_unchecked(g, a);
    let nd = gauge::value_unchecked(g.dual(), a);
    if n <= s || nd <= -s {
        return Err(ConeError::Precondition(
            "point lies in the epigraph or in its polar".into(),
        ));
    }
    let mut out = match g {
        GaugeSpec::P1 => {
            let mu = theta_root(a, s)?;
            let w = soft_threshold(a, mu)?;
            let t = s + mu;
            let residual = (w.iter().map(|v| v.abs()).sum::<f64>() - t).abs();
            EpiProjection { w, t, mu, iterations: 1, residual }
        }
        GaugeSpec::P(p) if p >= 2.0 => {
            let sol = newton_solve_f_capped(g, a, s, max_iter)?;
            EpiProjection { t: s + sol.mu, w: sol.w, mu: sol.mu, iterations: sol.iterations, residual: sol.residual }
        }
        GaugeSpec::P(_) | GaugeSpec::PInf => {
            // Π(u) = u + Π_{epi ψ_*}(-u).
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            let dual = epi_capped(g.dual(), &neg, -s, max_iter)?;
            let w: Vec<f64> = a.iter().zip(&dual.w).map(|(x, y)| x + y).collect();
            let t = s + dual.t;
            let mu = dual.t;
            let residual = match g {
                GaugeSpec::P(p) => smooth_residual(p, a, s, &w, mu),
                _ => dual.residual,
            };
            EpiProjection { w, t, mu, iterations: dual.iterations, residual }
        }
    };
    enforce_order(a, &mut out.w);
    Ok(out)
}

/// `‖F(w, μ)‖` for `F = [μ∇φ_p(w) + w - λ; φ_p(w) - μ - s]`.
fn smooth_residual(p: f64, lam: &[f64], s: f64, w: &[f64], mu: f64) -> f64 {
    let phi = gauge::value_unchecked(GaugeSpec::P(p), w);
    if phi == 0.0 {
        let r: f64 = lam.iter().map(|v| v * v).sum();
        return (r + (mu + s).powi(2)).sqrt();
    }
    let grad = gauge::grad_with(p, phi, w);
    let top: f64 = (0..w.len()).map(|i| (mu * grad[i] + w[i] - lam[i]).powi(2)).sum();
    (top + (phi - mu - s).powi(2)).sqrt()
}

/// Keeps `w` in the order of `a`: equal entries of `a` share one value and
/// `a_i ≥ a_j` implies `w_i ≥ w_j`.
fn enforce_order(a: &[f64], w: &mut [f64]) {
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
    let mut k = 0;
    while k < idx.len() {
        let mut e = k + 1;
        while e < idx.len() && a[idx[e]] == a[idx[k]] {
            e += 1;
        }
        if e - k > 1 {
            let mean = idx[k..e].iter().map(|&i| w[i]).sum::<f64>() / (e - k) as f64;
            for &i in &idx[k..e] {
                w[i] = mean;
            }
        }
        k = e;
    }
    for pair in 1..idx.len() {
        let (prev, cur) = (idx[pair - 1], idx[pair]);
        if w[cur] > w[prev] {
            w[cur] = w[prev];
        }
    }
}

/// Root of `θ(μ) = Σ[|a_i| - μ]_+ - μ - s` on its active linear piece.
pub fn theta_root(a: &[f64], s: f64) -> Result<f64> {
    let mut x: Vec<f64> = a.iter().map(|v| v.abs()).collect();
    x.sort_by(|u, v| v.total_cmp(u));
    let m = x.len();
    let top = x.first().copied().unwrap_or(0.0);
    let l1: f64 = x.iter().sum();
    if l1 <= s || top <= -s {
        return Err(ConeError::Internal(format!(
            "theta has no positive root for ‖a‖₁ = {l1}, ‖a‖∞ = {top}, s = {s}"
        )));
    }
    let mut partial = 0.0;
    for k in 1..=m {
        partial += x[k - 1];
        let mu = (partial - s) / (k as f64 + 1.0);
        let next = if k < m { x[k] } else { 0.0 };
        if mu >= next {
            if mu <= 0.0 {
                break;
            }
            return Ok(mu);
        }
    }
    Err(ConeError::Internal("no active segment found for theta".into()))
}

/// Solves `μ∇φ_p(w) + w = λ`, `φ_p(w) = μ + s` by damped Newton (`p ≥ 2`).
pub fn newton_solve_f(g: GaugeSpec, lam: &[f64], s: f64) -> Result<NewtonOutcome> {
    newton_solve_f_capped(g, lam, s, MAX_NEWTON_ITER)
}

/// [`newton_solve_f`] with an explicit iteration cap.
pub fn newton_solve_f_capped(
    g: GaugeSpec,
    lam: &[f64],
    s: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let p = match g {
        GaugeSpec::P(p) if p >= 2.0 => p,
        _ => {
            return Err(ConeError::UnsupportedSmoothness(format!(
                "Newton solver needs p >= 2, got {g}"
            )))
        }
    };
    let support: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] != 0.0).collect();
    let scale = lam.iter().fold(s.abs(), |acc, v| acc.max(v.abs()));
    if support.is_empty() || scale == 0.0 {
        return Err(ConeError::Precondition("point lies in the cone or its polar".into()));
    }
    let ell: Vec<f64> = support.iter().map(|&i| lam[i].abs() / scale).collect();
    let s_hat = s / scale;
    let sol = match solve_reduced(p, &ell, s_hat, max_iter) {
        Ok(sol) => sol,
        Err(Fallback::Stalled(iters)) | Err(Fallback::Exhausted(iters)) => {
            let (v0, mu0) = bisection_solve(p, &ell, s_hat);
            match solve_from(p, &ell, s_hat, v0.clone(), mu0, max_iter) {
                Ok(mut polished) => {
                    polished.iterations += iters;
                    polished
                }
                Err(_) => {
                    let residual = reduced_residual(p, &ell, s_hat, &v0, mu0).norm();
                    if residual > NEWTON_STAGNATION_TOL {
                        return Err(ConeError::SolverFailure { iterations: iters + max_iter, residual: residual * scale });
                    }
                    Reduced { v: v0, mu: mu0, iterations: iters + max_iter }
                }
            }
        }
    };
    let mut w = vec![0.0; lam.len()];
    for (k, &i) in support.iter().enumerate() {
        w[i] = sol.v[k] * scale * lam[i].signum();
    }
    let mu = sol.mu * scale;
    enforce_order(lam, &mut w);
    let residual = smooth_residual(p, lam, s, &w, mu);
    Ok(NewtonOutcome { w, mu, iterations: sol.iterations, residual })
}

struct Reduced {
    v: Vec<f64>,
    mu: f64,
    iterations: usize,
}

enum Fallback {
    Stalled(usize),
    Exhausted(usize),
}

/// Residual of the reduced system on `v > 0`.
fn reduced_residual(p: f64, ell: &[f64], s: f64, v: &[f64], mu: f64) -> DVector<f64> {
    let n = ell.len();
    let phi = gauge::value_unchecked(GaugeSpec::P(p), v);
    let grad = gauge::grad_with(p, phi, v);
    let mut f = DVector::zeros(n + 1);
    for i in 0..n {
        f[i] = mu * grad[i] + v[i] - ell[i];
    }
    f[n] = phi - mu - s;
    f
}

fn solve_reduced(p: f64, ell: &[f64], s: f64, max_iter: usize) -> std::result::Result<Reduced, Fallback> {
    let phi0 = gauge::value_unchecked(GaugeSpec::P(p), ell);
    let g0 = gauge::grad_with(p, phi0, ell);
    let gnorm2: f64 = g0.iter().map(|v| v * v).sum();
    let mu0 = (phi0 - s).max(1e-12) / (1.0 + gnorm2);
    // Near the polar side the solution is small and points along ∇φ_q(ℓ).
    let q = p / (p - 1.0);
    let dual = gauge::value_unchecked(GaugeSpec::P(q), ell);
    let radius = (dual + s).max(1e-12 * dual);
    let polar_v: Vec<f64> = gauge::grad_with(q, dual, ell).iter().map(|u| radius * u).collect();
    let near = reduced_residual(p, ell, s, &polar_v, dual).norm();
    if polar_v.iter().all(|&x| x > 0.0) && near < reduced_residual(p, ell, s, ell, mu0).norm() {
        return solve_from(p, ell, s, polar_v, dual, max_iter);
    }
    solve_from(p, ell, s, ell.to_vec(), mu0, max_iter)
}

fn solve_from(
    p: f64,
    ell: &[f64],
    s: f64,
    mut v: Vec<f64>,
    mut mu: f64,
    max_iter: usize,
) -> std::result::Result<Reduced, Fallback> {
    let n = ell.len();
    let mut f = reduced_residual(p, ell, s, &v, mu);
    let mut stalls = 0;
    for it in 0..max_iter {
        let fnorm = f.norm();
        if fnorm <= NEWTON_TOL {
            return Ok(Reduced { v, mu, iterations: it });
        }
        let phi = gauge::value_unchecked(GaugeSpec::P(p), &v);
        let grad = gauge::grad_with(p, phi, &v);
        let hess = gauge::hess_with(p, phi, &v);
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = mu * hess[(i, j)] + if i == j { 1.0 } else { 0.0 };
            }
            jac[(i, n)] = grad[i];
            jac[(n, i)] = grad[i];
        }
        jac[(n, n)] = -1.0;
        let Some(step) = jac.lu().solve(&(-&f)) else {
            return Err(Fallback::Stalled(it));
        };
        let mut alpha_max: f64 = 1.0;
        for i in 0..n {
            if step[i] < 0.0 {
                alpha_max = alpha_max.min(BOUNDARY_FRACTION * (-v[i] / step[i]));
            }
        }
        if step[n] < 0.0 {
            alpha_max = alpha_max.min(BOUNDARY_FRACTION * (-mu / step[n]));
        }
        let merit = 0.5 * fnorm * fnorm;
        let mut alpha = alpha_max;
        let mut accepted = None;
        while alpha > 1e-14 {
            let v_try: Vec<f64> = (0..n).map(|i| v[i] + alpha * step[i]).collect();
            let mu_try = mu + alpha * step[n];
            let f_try = reduced_residual(p, ell, s, &v_try, mu_try);
            let m_try = 0.5 * f_try.norm_squared();
            if m_try <= (1.0 - 2.0 * ARMIJO_SLOPE * alpha) * merit {
                accepted = Some((v_try, mu_try, f_try));
                break;
            }
            alpha *= BACKTRACK;
        }
        match accepted {
            Some((v_new, mu_new, f_new)) => {
                v = v_new;
                mu = mu_new;
                f = f_new;
            }
            None => {
                if fnorm <= NEWTON_STAGNATION_TOL {
                    return Ok(Reduced { v, mu, iterations: it });
                }
                stalls += 1;
                if stalls >= MAX_STALLS {
                    return Err(Fallback::Stalled(it));
                }
            }
        }
    }
    let fnorm = f.norm();
    if fnorm <= NEWTON_STAGNATION_TOL {
        return Ok(Reduced { v, mu, iterations: max_iter });
    }
    Err(Fallback::Exhausted(max_iter))
}

/// Globalization fallback: bisection on `μ ↦ φ(prox_{μφ}(ℓ)) - μ - s`, which is decreasing.
pub(crate) fn bisection_solve(p: f64, ell: &[f64], s: f64) -> (Vec<f64>, f64) {
    let phi_ell = gauge::value_unchecked(GaugeSpec::P(p), ell);
    let (mut lo, mut hi) = (0.0, (phi_ell - s).max(0.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = prox_lp(p, ell, mid);
        if gauge::value_unchecked(GaugeSpec::P(p), &v) - mid - s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    (prox_lp(p, ell, mu), mu)
}

/// `prox_{μφ_p}(ℓ)` for `ℓ ≥ 0`: with `v = ρy`, solve `μy^{p-1} + ρy = ℓ_i` and `φ_p(y) = 1`.
fn prox_lp(p: f64, ell: &[f64], mu: f64) -> Vec<f64> {
    if mu == 0.0 {
        return ell.to_vec();
    }
    let y_of = |rho: f64| -> Vec<f64> {
        ell.iter()
            .map(|&l| {
                let mut hi = (l / mu).powf(1.0 / (p - 1.0));
                if rho > 0.0 {
                    hi = hi.min(l / rho);
                }
                let mut lo = 0.0;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mu * mid.powf(p - 1.0) + rho * mid > l {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    };
    let gp = GaugeSpec::P(p);
    if gauge::value_unchecked(gp, &y_of(0.0)) <= 1.0 {
        return vec![0.0; ell.len()];
    }
    let (mut lo, mut hi) = (0.0, gauge::value_unchecked(gp, ell));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gauge::value_unchecked(gp, &y_of(mid)) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    y_of(rho).into_iter().map(|y| rho * y).collect()
}

/// `Π_𝒦(z)`.
pub fn project_cone(g: GaugeSpec, z: &ConePoint) -> Result<ProjectionResult> {
    let e = eig_desc(&z.a)?;
    project_with_eig(g, &e, z)
}

/// [`project_cone`] with an explicit classification tolerance and Newton iteration cap.
pub fn project_cone_with(g: GaugeSpec, z: &ConePoint, tol: f64, max_iter: usize) -> Result<ProjectionResult> {
    if !(tol >= 0.0) || max_iter == 0 {
        return Err(ConeError::InvalidInput("tolerance must be >= 0 and the iteration cap positive".into()));
    }
    let e = eig_desc(&z.a)?;
    project_with_eig_opts(g, &e, z, tol, max_iter)
}

pub(crate) fn project_with_eig(g: GaugeSpec, e: &EigenDecomp, z: &ConePoint) -> Result<ProjectionResult> {
    project_with_eig_opts(g, e, z, CLASSIFY_TOL, MAX_NEWTON_ITER)
}

fn project_with_eig_opts(
    g: GaugeSpec,
    e: &EigenDecomp,
    z: &ConePoint,
    tol: f64,
    max_iter: usize,
) -> Result<ProjectionResult> {
    if !z.s.is_finite() {
        return Err(ConeError::InvalidInput("scalar part is not finite".into()));
    }
    let region = classify_eig(g, e, z.s, tol);
    let m = z.dim();
    let trivial = |point: ConePoint, w: Vec<f64>| ProjectionResult {
        point,
        multiplier: 0.0,
        region,
        w,
        iterations: 0,
        residual: 0.0,
    };
    Ok(match region {
        RegionLabel::InteriorK | RegionLabel::BoundaryK => trivial(z.clone(), e.values.clone()),
        RegionLabel::InteriorPolar | RegionLabel::BoundaryPolar | RegionLabel::Origin => {
            trivial(ConePoint::zeros(m), vec![0.0; m])
        }
        RegionLabel::Outside => {
            let sol = epi_capped(g, &e.values, z.s, max_iter)?;
            ProjectionResult {
                point: ConePoint { a: e.lift(&sol.w), s: sol.t },
                multiplier: sol.mu,
                region,
                w: sol.w,
                iterations: sol.iterations,
                residual: sol.residual,
            }
        }
    })
}

/// `Π_𝒦°(z) = z - Π_𝒦(z)`.
pub fn project_polar(g: GaugeSpec, z: &ConePoint) -> Result<ProjectionResult> {
    let e = eig_desc(&z.a)?;
    let onto_k = project_with_eig(g, &e, z)?;
    let w = e.values.iter().zip(&onto_k.w).map(|(l, x)| l - x).collect();
    Ok(ProjectionResult { point: z - &onto_k.point, w, ..onto_k })
}

/// Closed form for the Frobenius cone:
/// `Π(A, s) = (‖A‖+s)/2 · (A/‖A‖, 1)` when `|s| < ‖A‖`.
pub fn project_frobenius_closed_form(z: &ConePoint) -> ConePoint {
    let n = z.a.norm();
    if n <= z.s {
        return z.clone();
    }
    if n <= -z.s {
        return ConePoint::zeros(z.dim());
    }
    let c = 0.5 * (n + z.s);
    ConePoint { a: &z.a * (c / n), s: c }
}
