//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints its verdict line; the process exits nonzero if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use normcone::cones::{
    dual_norm_value, norm_value, normal_contains, tangent2_test, tangent_contains,
    tangent_test, MEMBERSHIP_TOL,
};
use normcone::oracle::{
    dense_hess, fd_dirderiv_central, fd_dirderiv_richardson, kkt_residual, power_iteration_norm,
    project_bruteforce, theta_bisection,
};
use normcone::projection::{project_cone, project_frobenius_closed_form, theta_root};
use normcone::sensitivity::{bsubdiff, dirderiv, dproj, dproj_spectral};
use normcone::spectral::{eig_desc, fan_gap, spectral_grad, spectral_hess_apply};
use normcone::{ConePoint, DerivativeCase, GaugeSpec, OriginSampling, ProjectorDerivative, RegionLabel};
use rand::Rng;

/// Verdict of one criterion plus a short summary of the worst observed values.
struct Outcome {
    pass: bool,
    detail: String,
}

/// Tracks the worst ratio `observed / allowed` over a family of checks.
#[derive(Default)]
struct Worst {
    ratio: f64,
    failures: usize,
    checks: usize,
    first_failure: Option<String>,
}

impl Worst {
    fn check(&mut self, observed: f64, allowed: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        let r = observed / allowed;
        if !(r <= 1.0) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(format!("{} (observed {observed:.3e}, allowed {allowed:.3e})", what()));
            }
        }
        if r > self.ratio || r.is_nan() {
            self.ratio = r;
        }
    }

    fn flag(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.check(if ok { 0.0 } else { 2.0 }, 1.0, what);
    }

    fn ok(&self) -> bool {
        self.failures == 0
    }

    fn summary(&self, name: &str) -> String {
        let mut s = format!("{name}: {} checks, worst/allowed {:.2e}", self.checks, self.ratio);
        if let Some(f) = &self.first_failure {
            s += &format!(", {} failed, first: {f}", self.failures);
        }
        s
    }
}

fn outcome(parts: &[(&str, &Worst)]) -> Outcome {
    Outcome {
        pass: parts.iter().all(|(_, w)| w.ok()),
        detail: parts.iter().map(|(n, w)| w.summary(n)).collect::<Vec<_>>().join("; "),
    }
}

fn dense_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn unit_direction(rng: &mut impl Rng, m: usize) -> ConePoint {
    let d = random_direction(rng, m);
    let n = d.norm();
    d.scale(1.0 / n)
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let mut split = Worst::default();
    let mut orth = Worst::default();
    let mut rng = rng(101);
    for g in KINDS {
        for m in [1, 2, 3, 4, 6] {
            for case in 0..1000 {
                let z = if case % 4 == 0 { random_outside(&mut rng, g, m, 0.0) } else { random_point(&mut rng, g, m) };
                let pk = project_cone(g, &z).unwrap().point;
                // 𝒦° = -𝒦_*, so Π_𝒦°(z) = -Π_𝒦_*(-z), solved separately.
                let po = project_cone(g.dual(), &z.scale(-1.0)).unwrap().point.scale(-1.0);
                let zn = z.norm();
                split.check((&(&z - &pk) - &po).norm(), 1e-9 * (1.0 + zn), || format!("{g} m={m} case {case}"));
                orth.check(pk.inner(&po).abs(), 1e-9 * (1.0 + zn * zn), || format!("{g} m={m} case {case}"));
            }
        }
    }
    outcome(&[("decomposition", &split), ("orthogonality", &orth)])
}

fn criterion_2() -> Outcome {
    let mut kkt = Worst::default();
    let mut rng = rng(202);
    let (mut newton_cases, mut newton_fast) = (0usize, 0usize);
    let kinds = [GaugeSpec::P1, GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0), GaugeSpec::PInf];
    for g in kinds {
        for m in 1..=6 {
            for case in 0..300 {
                let z = random_outside(&mut rng, g, m, 0.01);
                let r = project_cone(g, &z).unwrap();
                if r.region != RegionLabel::Outside {
                    continue;
                }
                let res = kkt_residual(g, &z, &r.w, r.multiplier).unwrap();
                kkt.check(res, 1e-10, || format!("{g} m={m} case {case}"));
                if matches!(g, GaugeSpec::P(_)) {
                    newton_cases += 1;
                    newton_fast += usize::from(r.iterations <= 50);
                }
            }
        }
    }
    let mut iters = Worst::default();
    let frac = newton_fast as f64 / newton_cases as f64;
    iters.check(0.99 - frac + 1.0, 1.0, || format!("only {:.2}% within 50 iterations", 100.0 * frac));
    let mut out = outcome(&[("kkt residual", &kkt), ("newton iterations", &iters)]);
    out.detail += &format!("; {:.2}% of {newton_cases} Newton solves within 50 iterations", 100.0 * frac);
    out
}

fn criterion_3() -> Outcome {
    let mut rng = rng(303);
    let mut frob = Worst::default();
    for case in 0..500 {
        let m = 1 + case % 6;
        let z = random_outside(&mut rng, GaugeSpec::P(2.0), m, 0.01);
        let newton = project_cone(GaugeSpec::P(2.0), &z).unwrap().point;
        let closed = project_frobenius_closed_form(&z);
        frob.check((&newton - &closed).norm(), 1e-10, || format!("case {case}"));
    }
    let mut nuc = Worst::default();
    for case in 0..500 {
        let m = 1 + case % 6;
        let a: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
        let l1: f64 = a.iter().map(|v| v.abs()).sum();
        let linf = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let s = -linf + rng.random_range(0.01..0.99) * (l1 + linf);
        let mu = theta_root(&a, s).unwrap();
        nuc.check((mu - theta_bisection(&a, s)).abs(), 1e-12, || format!("case {case}"));
    }
    let mut linf = Worst::default();
    let g = GaugeSpec::PInf;
    for case in 0..500 {
        let m = 1 + case % 6;
        let z = random_outside(&mut rng, g, m, 0.01);
        let pk = project_cone(g, &z).unwrap().point;
        let po = &z - &pk;
        let what = || format!("case {case}");
        linf.check((norm_value(g, &pk.a).unwrap() - pk.s).max(0.0), 1e-9, what);
        linf.check((dual_norm_value(g, &po.a).unwrap() + po.s).max(0.0), 1e-9, what);
        linf.check(pk.inner(&po).abs(), 1e-9, what);
    }
    outcome(&[("p=2 closed form", &frob), ("p=1 multiplier", &nuc), ("p=inf membership", &linf)])
}

fn criterion_4() -> Outcome {
    let mut rng = rng(404);
    let mut w = Worst::default();
    for g in KINDS {
        for case in 0..200 {
            let m = 1 + case % 4;
            let z = if case % 2 == 0 { random_outside(&mut rng, g, m, 0.0) } else { random_point(&mut rng, g, m) };
            let fast = project_cone(g, &z).unwrap().point;
            let slow = project_bruteforce(g, &z, 200, 0.0).unwrap().value;
            w.check(dist(&fast, &slow), 1e-5, || format!("{g} m={m} case {case}"));
        }
    }
    outcome(&[("brute force", &w)])
}

fn criterion_5() -> Outcome {
    let mut rng = rng(505);
    let mut fd = Worst::default();
    let kinds = [GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0)];
    for case in 0..2000 {
        let g = kinds[case % 4];
        let m = 1 + (case / 4) % 5;
        let z = random_outside(&mut rng, g, m, 0.05);
        let d = unit_direction(&mut rng, m);
        let an = dproj(g, &z).unwrap().apply(&d);
        let num = fd_dirderiv_central(g, &z, &d, 1e-5).unwrap();
        fd.check((&an - &num).norm() / d.norm(), 1e-4, || format!("{g} m={m} case {case}"));
    }
    let mut closed = Worst::default();
    let g = GaugeSpec::P(2.0);
    for case in 0..200 {
        let m = 1 + case % 6;
        let z = random_outside(&mut rng, g, m, 0.01);
        let a = dproj(g, &z).unwrap().to_dense().unwrap();
        let b = dproj_spectral(g, &z).unwrap().to_dense().unwrap();
        closed.check(dense_gap(&a, &b), 1e-9, || format!("m={m} case {case}"));
    }
    outcome(&[("finite differences", &fd), ("Frobenius specialization", &closed)])
}

fn criterion_6() -> Outcome {
    let mut rng = rng(606);
    let ts = [1e-4, 1e-5, 1e-6];
    let mut per_case: Vec<(DerivativeCase, Worst)> = [
        DerivativeCase::InteriorK,
        DerivativeCase::InteriorPolar,
        DerivativeCase::Outside,
        DerivativeCase::BoundaryK,
        DerivativeCase::BoundaryPolar,
        DerivativeCase::Origin,
    ]
    .into_iter()
    .map(|c| (c, Worst::default()))
    .collect();
    let mut regimes = [0usize; 4];
    let mut record = |g: GaugeSpec, z: &ConePoint, d: &ConePoint, expect: DerivativeCase, tag: &str| {
        let r = dirderiv(g, z, d).unwrap();
        if let Err(e) = fd_dirderiv_richardson(g, z, d, &ts) {
            panic!("{g} {tag}: {e:?}\nz={z:?}\nd={d:?}");
        }
        let slot = per_case.iter_mut().find(|(c, _)| *c == expect).unwrap();
        slot.1.flag(r.case == expect, || format!("{g} {tag}: classified as {:?}", r.case));
        let num = fd_dirderiv_richardson(g, z, d, &ts).unwrap();
        slot.1.check((&r.value - &num).norm(), 1e-3 * (1.0 + d.norm()), || format!("{g} {tag}"));
    };
    for g in [GaugeSpec::P1, GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0), GaugeSpec::PInf] {
        let smooth = matches!(g, GaugeSpec::P(_));
        for case in 0..40 {
            let m = 1 + case % 5;
            let tag = format!("m={m} case {case}");
            let d = random_direction(&mut rng, m);
            let a = random_sym(&mut rng, m);
            let n = norm_value(g, &a).unwrap();
            let nd = dual_norm_value(g, &a).unwrap();
            record(g, &point(a.clone(), n + 1.0), &d, DerivativeCase::InteriorK, &tag);
            record(g, &point(a.clone(), -nd - 1.0), &d, DerivativeCase::InteriorPolar, &tag);
            record(g, &ConePoint::zeros(m), &d, DerivativeCase::Origin, &tag);
            if !smooth {
                continue;
            }
            record(g, &random_outside(&mut rng, g, m, 0.05), &d, DerivativeCase::Outside, &tag);
            // Boundary of 𝒦: both signs of ∇N(A)•d_A - d_s.
            let zb = point(a.clone(), n);
            let grad = spectral_grad(g, &eig_desc(&a).unwrap()).unwrap();
            let slope = grad.dot(&d.a);
            for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
                let db = point(d.a.clone(), slope - sign * (0.2 + rng.random::<f64>()));
                regimes[k] += 1;
                record(g, &zb, &db, DerivativeCase::BoundaryK, &format!("{tag} sign {sign}"));
            }
            // Boundary of 𝒦°: both signs of ∇N_*(A)•d_A + d_s.
            let zp = point(a.clone(), -nd);
            let gd = spectral_grad(g.dual(), &eig_desc(&a).unwrap()).unwrap();
            let slope = gd.dot(&d.a);
            for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
                let dp = point(d.a.clone(), -slope + sign * (0.2 + rng.random::<f64>()));
                regimes[2 + k] += 1;
                record(g, &zp, &dp, DerivativeCase::BoundaryPolar, &format!("{tag} sign {sign}"));
            }
        }
    }
    let parts: Vec<(String, &Worst)> = per_case.iter().map(|(c, w)| (format!("case {}", c.label()), w)).collect();
    let refs: Vec<(&str, &Worst)> = parts.iter().map(|(n, w)| (n.as_str(), *w)).collect();
    let mut out = outcome(&refs);
    out.detail += &format!("; kink regimes exercised {regimes:?}");
    out
}

/// `DΠ` at `z + εv` for `ε = 2^{-k}`, general path, dense.
fn approach(g: GaugeSpec, z: &ConePoint, v: &ConePoint, k: i32) -> Option<DMatrix<f64>> {
    let zk = z.axpy(2f64.powi(-k), v);
    dproj_spectral(g, &zk).ok()?.to_dense().ok()
}

/// Distance from `elem` to the closest limit among the approach directions.
fn realized(g: GaugeSpec, z: &ConePoint, elem: &ProjectorDerivative, dirs: &[ConePoint]) -> (f64, f64) {
    let target = elem.to_dense().unwrap();
    let mut best = (f64::INFINITY, f64::INFINITY);
    for v in dirs {
        let (Some(coarse), Some(fine)) = (approach(g, z, v, 12), approach(g, z, v, 24)) else {
            continue;
        };
        let e = dense_gap(&fine, &target);
        if e < best.0 {
            best = (e, dense_gap(&coarse, &target));
        }
    }
    best
}

fn criterion_7() -> Outcome {
    let mut rng = rng(707);
    let mut kb = Worst::default();
    let mut pb = Worst::default();
    for g in [GaugeSpec::P(2.0), GaugeSpec::P(3.0)] {
        for case in 0..100 {
            let m = 1 + case % 4;
            let z = random_boundary(&mut rng, g, m);
            let grad = spectral_grad(g, &eig_desc(&z.a).unwrap()).unwrap();
            let dirs = [point(DMatrix::zeros(m, m), 1.0), point(grad, -1.0)];
            let elems = bsubdiff(g, &z, &OriginSampling::None).unwrap();
            kb.flag(elems.len() == 2, || format!("{g} case {case}: {} elements", elems.len()));
            for el in &elems {
                let (fine, coarse) = realized(g, &z, el, &dirs);
                kb.check(fine, 1e-5, || format!("{g} m={m} case {case}"));
                kb.flag(fine <= coarse + 1e-12, || format!("{g} case {case}: no convergence"));
            }
            let z = random_polar_boundary(&mut rng, g, m);
            let grad = spectral_grad(g.dual(), &eig_desc(&z.a).unwrap()).unwrap();
            let dirs = [point(DMatrix::zeros(m, m), -1.0), point(grad, 1.0)];
            let elems = bsubdiff(g, &z, &OriginSampling::None).unwrap();
            pb.flag(elems.len() == 2, || format!("{g} case {case}: {} elements", elems.len()));
            for el in &elems {
                let (fine, coarse) = realized(g, &z, el, &dirs);
                pb.check(fine, 1e-5, || format!("{g} m={m} case {case}"));
                pb.flag(fine <= coarse + 1e-12, || format!("{g} case {case}: no convergence"));
            }
        }
    }
    // Origin of the Frobenius cone: the member indexed by (a, Y) is the limit
    // along t(Y, 2a - 1) with t → 0, pushed off the boundary when a ∈ {0, 1}.
    let mut origin = Worst::default();
    let g = GaugeSpec::P(2.0);
    let grid = [0.0, 0.5, 1.0];
    for m in [2, 3] {
        let dirs: Vec<DMatrix<f64>> = (0..3)
            .map(|_| {
                let y = random_sym(&mut rng, m);
                let n = y.norm();
                y / n
            })
            .collect();
        let sampling = OriginSampling::FrobeniusFamily { a_grid: grid.to_vec(), directions: dirs.clone() };
        let elems = bsubdiff(g, &ConePoint::zeros(m), &sampling).unwrap();
        origin.flag(elems.len() == 2 + 9, || format!("m={m}: {} elements", elems.len()));
        for (i, y) in dirs.iter().enumerate() {
            for (j, &a) in grid.iter().enumerate() {
                let target = elems[2 + 3 * i + j].to_dense().unwrap();
                // Shrink the scale slower than the ratio offset so the points stay
                // clear of the boundary classification tolerance.
                let at = |k: i32| {
                    let (t, off) = (2f64.powf(-k as f64 / 4.0), 2f64.powi(-k));
                    let s = (2.0 * a - 1.0) * (1.0 - off);
                    dproj_spectral(g, &point(y * t, s * t)).unwrap().to_dense().unwrap()
                };
                let fine = dense_gap(&at(24), &target);
                origin.check(fine, 1e-5, || format!("m={m} a={a} Y#{i}"));
                origin.flag(fine <= dense_gap(&at(12), &target) + 1e-12, || format!("m={m} a={a}: no convergence"));
            }
        }
    }
    outcome(&[("boundary K", &kb), ("boundary polar", &pb), ("origin family", &origin)])
}

fn criterion_8() -> Outcome {
    let mut rng = rng(808);
    let mut grad = Worst::default();
    let mut hess = Worst::default();
    let mut block = Worst::default();
    let mut equi = Worst::default();
    let mut fan = Worst::default();
    let kinds = [GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0)];
    for case in 0..400 {
        let g = kinds[case % 4];
        let m = 1 + (case / 4) % 6;
        let a = random_sym(&mut rng, m);
        let h = random_sym(&mut rng, m);
        let e = eig_desc(&a).unwrap();
        let gr = spectral_grad(g, &e).unwrap();
        let step = 1e-6;
        let fd = (norm_value(g, &(&a + &h * step)).unwrap() - norm_value(g, &(&a - &h * step)).unwrap()) / (2.0 * step);
        let an = gr.dot(&h);
        grad.check((fd - an).abs() / an.abs().max(h.norm() * 1e-2), 1e-4, || format!("{g} m={m} case {case}"));
        if matches!(g, GaugeSpec::P(p) if p >= 2.0) {
            let hv = spectral_hess_apply(g, &e, &e.blocks(), &h).unwrap();
            let step = 1e-5;
            let up = spectral_grad(g, &eig_desc(&(&a + &h * step)).unwrap()).unwrap();
            let dn = spectral_grad(g, &eig_desc(&(&a - &h * step)).unwrap()).unwrap();
            let fd = (up - dn) / (2.0 * step);
            let scale = hv.norm().max(1e-2 * h.norm() / e.frob_norm);
            hess.check((&fd - &hv).norm() / scale, 1e-4, || format!("{g} m={m} case {case}"));
        }
        let q = random_orthogonal(&mut rng, m);
        let rot = |x: &DMatrix<f64>| &q * x * q.transpose();
        let er = eig_desc(&rot(&a)).unwrap();
        equi.check(dense_gap(&spectral_grad(g, &er).unwrap(), &rot(&gr)), 1e-9, || format!("{g} grad case {case}"));
        if matches!(g, GaugeSpec::P(p) if p >= 2.0) {
            let hv = spectral_hess_apply(g, &e, &e.blocks(), &h).unwrap();
            let hr = spectral_hess_apply(g, &er, &er.blocks(), &rot(&h)).unwrap();
            equi.check(dense_gap(&hr, &rot(&hv)), 1e-9, || format!("{g} hess case {case}"));
        }
    }
    // Block form against the dense 𝒜-matrix form, including repeated eigenvalues.
    for case in 0..300 {
        let g = [GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0)][case % 3];
        let m = 1 + (case / 3) % 5;
        let a = if case % 2 == 0 {
            random_sym(&mut rng, m)
        } else {
            let vals: Vec<f64> = (0..m).map(|i| [1.3, -0.4, 0.0][(i + case / 6) % 3]).collect();
            if vals.iter().all(|&v| v == 0.0) {
                continue;
            }
            with_spectrum(&mut rng, &vals)
        };
        let e = eig_desc(&a).unwrap();
        let dense = dense_hess(g, &a).unwrap();
        let n = dense.nrows();
        let mut ours = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut v = DVector::zeros(n + 1);
            v[k] = 1.0;
            let basis = ConePoint::from_svec(m, &v);
            let col = ConePoint { a: spectral_hess_apply(g, &e, &e.blocks(), &basis.a).unwrap(), s: 0.0 }.to_svec();
            ours.set_column(k, &col.rows(0, n));
        }
        block.check(dense_gap(&ours, &dense), 1e-10, || format!("{g} m={m} case {case}"));
    }
    for case in 0..1000 {
        let m = 1 + case % 6;
        let y = random_sym(&mut rng, m);
        let z = if case % 3 == 0 {
            // Shared eigenbasis: the inequality is tight.
            let e = eig_desc(&y).unwrap();
            let vals: Vec<f64> = (0..m).map(|i| 2.0 - i as f64).collect();
            e.lift(&vals)
        } else {
            random_sym(&mut rng, m)
        };
        let gap = fan_gap(&y, &z).unwrap();
        fan.check(-gap, 1e-10, || format!("pair {case}"));
    }
    outcome(&[
        ("gradient", &grad),
        ("Hessian apply", &hess),
        ("block vs dense", &block),
        ("equivariance", &equi),
        ("Fan gap", &fan),
    ])
}

/// A random element of `∂N(A)` for the given kind, at a nonzero `A = P Diag(λ) Pᵀ`.
fn random_subgradient(rng: &mut impl Rng, g: GaugeSpec, p: &DMatrix<f64>, lam: &[f64]) -> DMatrix<f64> {
    let m = lam.len();
    let top = lam.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut inner = DMatrix::zeros(m, m);
    match g {
        GaugeSpec::P(q) => {
            let phi = lam.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q);
            for i in 0..m {
                inner[(i, i)] = lam[i].signum() * (lam[i].abs() / phi).powf(q - 1.0);
            }
        }
        GaugeSpec::P1 => {
            let zero: Vec<usize> = (0..m).filter(|&i| lam[i].abs() <= 1e-12 * top).collect();
            for i in 0..m {
                if !zero.contains(&i) {
                    inner[(i, i)] = lam[i].signum();
                }
            }
            if !zero.is_empty() {
                let k = zero.len();
                let w = random_sym(rng, k);
                let radius = w.clone().symmetric_eigenvalues().amax();
                let w = w * (rng.random::<f64>() / radius);
                for (a, &i) in zero.iter().enumerate() {
                    for (b, &j) in zero.iter().enumerate() {
                        inner[(i, j)] = w[(a, b)];
                    }
                }
            }
        }
        GaugeSpec::PInf => {
            let ext: Vec<usize> = (0..m).filter(|&i| lam[i].abs() >= top * (1.0 - 1e-12)).collect();
            let k = ext.len();
            // PSD blocks on each extreme set with total trace one.
            let b = DMatrix::from_fn(k, k, |_, _| normal(rng));
            let mut w = &b * b.transpose();
            let tr = w.trace();
            w /= tr;
            for (a, &i) in ext.iter().enumerate() {
                for (c, &j) in ext.iter().enumerate() {
                    let same = lam[i].signum() == lam[j].signum();
                    inner[(i, j)] = if same { lam[i].signum() * w[(a, c)] } else { 0.0 };
                }
            }
            // Cross terms between the two extreme sets are not allowed; rescale.
            let nuc: f64 = inner.clone().symmetric_eigenvalues().iter().map(|v| v.abs()).sum();
            inner /= nuc;
        }
    }
    p * inner * p.transpose()
}

fn polarity_samples(rng: &mut impl Rng, out: &mut Worst, members: &mut Worst) {
    for g in KINDS {
        for case in 0..60 {
            let m = 2 + case % 4;
            let lam: Vec<f64> = match (g, case % 3) {
                (GaugeSpec::P1, 0) => (0..m).map(|i| if i % 2 == 1 { 0.0 } else { 1.0 - 0.6 * i as f64 }).collect(),
                (GaugeSpec::PInf, 0) => (0..m).map(|i| [1.0, 1.0, -1.0, 0.2, -0.5][i]).collect(),
                _ => (0..m).map(|_| normal(rng)).collect(),
            };
            let q = random_orthogonal(rng, m);
            let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&lam)) * q.transpose();
            let z = point(a.clone(), norm_value(g, &a).unwrap());
            let normals: Vec<ConePoint> = (0..4)
                .map(|_| {
                    let y = random_subgradient(rng, g, &q, &lam);
                    point(y, -1.0).scale(0.1 + 2.0 * rng.random::<f64>())
                })
                .collect();
            for v in &normals {
                members.flag(normal_contains(g, &z, v, MEMBERSHIP_TOL).unwrap(), || format!("{g} case {case}: normal rejected"));
            }
            for _ in 0..8 {
                let da = random_sym(rng, m);
                let slope = tangent_test(g, &z, &point(da.clone(), 0.0), MEMBERSHIP_TOL).unwrap().value.unwrap();
                let lift = if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random::<f64>() };
                let d = point(da, slope + lift);
                members.flag(tangent_contains(g, &z, &d, MEMBERSHIP_TOL).unwrap(), || format!("{g} case {case}: tangent rejected"));
                for v in &normals {
                    out.check(v.inner(&d), 1e-8, || format!("{g} m={m} case {case}"));
                }
            }
        }
        // At the origin the tangent cone is 𝒦 and the normal cone is 𝒦°.
        for case in 0..30 {
            let m = 1 + case % 4;
            let z = ConePoint::zeros(m);
            let d = random_boundary(rng, g, m).axpy(rng.random::<f64>(), &point(DMatrix::zeros(m, m), 1.0));
            let v = random_polar_boundary(rng, g, m).axpy(-rng.random::<f64>(), &point(DMatrix::zeros(m, m), 1.0));
            members.flag(tangent_contains(g, &z, &d, MEMBERSHIP_TOL).unwrap(), || format!("{g} origin tangent"));
            members.flag(normal_contains(g, &z, &v, MEMBERSHIP_TOL).unwrap(), || format!("{g} origin normal"));
            out.check(v.inner(&d), 1e-8, || format!("{g} origin case {case}"));
        }
    }
}

/// Boundary point and active tangent direction for the second-order tests.
fn second_order_setup(rng: &mut impl Rng, g: GaugeSpec, case: usize) -> (ConePoint, ConePoint) {
    let (lam, block): (Vec<f64>, Option<(Vec<usize>, Vec<f64>)>) = match g {
        GaugeSpec::P1 => {
            let c = [[0.7, 0.0], [0.5, -0.3], [0.0, 0.0], [-0.4, -0.9]][case % 4];
            (vec![2.0, 1.0, 0.0, 0.0, -1.0], Some((vec![2, 3], c.to_vec())))
        }
        GaugeSpec::PInf => {
            let c = [[0.4, -0.2], [0.4, 0.4], [0.1, -0.5], [0.0, 0.0]][case % 4];
            (vec![1.0, 1.0, 0.3, -1.0], Some((vec![0, 1], c.to_vec())))
        }
        _ => {
            let m = 2 + case % 3;
            ((0..m).map(|_| normal(rng)).collect(), None)
        }
    };
    let m = lam.len();
    let q = random_orthogonal(rng, m);
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&lam)) * q.transpose();
    let mut d_hat = random_sym(rng, m);
    if let Some((idx, vals)) = block {
        // Prescribe the spectrum of the compressed direction on the special block.
        let r = random_orthogonal(rng, idx.len());
        let sub = &r * DMatrix::from_diagonal(&DVector::from_column_slice(&vals)) * r.transpose();
        for (x, &i) in idx.iter().enumerate() {
            for (y, &j) in idx.iter().enumerate() {
                d_hat[(i, j)] = sub[(x, y)];
            }
        }
        if g == GaugeSpec::PInf && case % 2 == 0 {
            // Make the bottom extreme set active as well.
            d_hat[(3, 3)] = -vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let da = &q * d_hat * q.transpose();
    let z = point(a.clone(), norm_value(g, &a).unwrap());
    let slope = tangent_test(g, &z, &point(da.clone(), 0.0), MEMBERSHIP_TOL).unwrap().value.unwrap();
    (z, point(da, slope))
}

fn lipschitz_of_gauge(g: GaugeSpec, m: usize) -> f64 {
    let mf = m as f64;
    match g {
        GaugeSpec::P1 => mf.sqrt(),
        GaugeSpec::PInf => 1.0,
        GaugeSpec::P(p) => mf.powf((1.0 / p - 0.5).max(0.0)),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = rng(909);
    let mut pol = Worst::default();
    let mut members = Worst::default();
    polarity_samples(&mut rng, &mut pol, &mut members);

    let mut inside = Worst::default();
    let mut outside = Worst::default();
    let mut limit = Worst::default();
    let eta = 0.5;
    for g in [GaugeSpec::P1, GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::PInf] {
        for case in 0..24 {
            let (z, d) = second_order_setup(&mut rng, g, case);
            let m = z.dim();
            let xi_a = random_sym(&mut rng, m);
            let tau = tangent2_test(g, &z, &d, &point(xi_a.clone(), 0.0), MEMBERSHIP_TOL).unwrap().value.unwrap();
            let lip = (lipschitz_of_gauge(g, m).powi(2) + 1.0).sqrt();
            for (shift, member) in [(eta, true), (-eta, false)] {
                let xi = point(xi_a.clone(), tau + shift);
                let verdict = tangent2_test(g, &z, &d, &xi, MEMBERSHIP_TOL).unwrap().contained;
                let what = || format!("{g} case {case} member={member}");
                members.flag(verdict == member, what);
                let ratios: Vec<f64> = (0..12)
                    .map(|k| {
                        let t = 1e-2 * 0.5f64.powi(k);
                        let x = z.axpy(t, &d).axpy(0.5 * t * t, &xi);
                        let proj = project_bruteforce(g, &x, 200, 0.0).unwrap().value;
                        dist(&x, &proj) / (t * t)
                    })
                    .collect();
                let last = ratios[ratios.len() - 1];
                let prev = ratios[ratios.len() - 2];
                if member {
                    inside.check(last, 1e-6, what);
                } else {
                    outside.check(0.25 * eta / lip, last, what);
                    limit.check((last - prev).abs(), 0.1 * last, what);
                }
            }
        }
    }
    outcome(&[
        ("polarity", &pol),
        ("oracle verdicts", &members),
        ("second order members", &inside),
        ("second order non-members", &outside),
        ("distance-curve limit", &limit),
    ])
}

fn criterion_10() -> Outcome {
    let mut rng = rng(1010);
    let mut lip = Worst::default();
    for g in KINDS {
        for case in 0..1000 {
            let m = 1 + case % 6;
            let z1 = random_point(&mut rng, g, m);
            let step = [1e-6, 1e-3, 1.0][case % 3];
            let z2 = z1.axpy(step, &random_direction(&mut rng, m));
            let p1 = project_cone(g, &z1).unwrap().point;
            let p2 = project_cone(g, &z2).unwrap().point;
            let dz = dist(&z1, &z2);
            lip.check(dist(&p1, &p2), dz + 1e-12 * (1.0 + dz), || format!("{g} m={m} pair {case}"));
        }
    }
    let mut op = Worst::default();
    let mut check = |d: &ProjectorDerivative, what: String| {
        let n = power_iteration_norm(d.m, &|h| d.apply(h), 100);
        op.check(n, 1.0 + 1e-8, || what);
    };
    for g in [GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0)] {
        for case in 0..60 {
            let m = 1 + case % 5;
            let z = random_outside(&mut rng, g, m, 0.01);
            check(&dproj(g, &z).unwrap(), format!("{g} outside case {case}"));
            check(&dproj_spectral(g, &z).unwrap(), format!("{g} outside general case {case}"));
            for el in bsubdiff(g, &random_boundary(&mut rng, g, m), &OriginSampling::None).unwrap() {
                check(&el, format!("{g} boundary case {case}"));
            }
            for el in bsubdiff(g, &random_polar_boundary(&mut rng, g, m), &OriginSampling::None).unwrap() {
                check(&el, format!("{g} polar boundary case {case}"));
            }
        }
    }
    let sampling = OriginSampling::FrobeniusFamily {
        a_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        directions: (0..4).map(|_| random_sym(&mut rng, 3)).collect(),
    };
    for el in bsubdiff(GaugeSpec::P(2.0), &ConePoint::zeros(3), &sampling).unwrap() {
        check(&el, "origin family".into());
    }
    outcome(&[("Lipschitz", &lip), ("operator norm", &op)])
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let start = Instant::now();
    let results: Vec<(usize, Outcome, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(n, f)| {
                scope.spawn(move || {
                    let t = Instant::now();
                    let out = std::panic::catch_unwind(f).unwrap_or_else(|e| Outcome {
                        pass: false,
                        detail: format!(
                            "panicked: {}",
                            e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
                        ),
                    });
                    (n, out, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });
    let mut failed = 0;
    for (n, out, secs) in &results {
        let tag = if out.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!out.pass);
        println!("[{tag}] criterion {n} ({secs:.1} s): {}", out.detail);
    }
    println!("acceptance: {} passed, {failed} failed in {:.1} s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
