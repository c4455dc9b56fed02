//! The `check` and `bench` commands.

use std::time::Instant;

use nalgebra::DMatrix;
use normcone::cones::{dual_norm_value, in_cone, in_polar, norm_value};
use normcone::oracle::{fd_dirderiv_central, fd_dirderiv_richardson, kkt_residual, project_bruteforce};
use normcone::projection::project_cone;
use normcone::sensitivity::{dirderiv, dproj};
use normcone::spectral::{eig_desc, spectral_grad};
use normcone::{ConePoint, GaugeSpec, RegionLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::io::num;

const KINDS: [GaugeSpec; 5] = [GaugeSpec::P1, GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::PInf];
const SMOOTH: [GaugeSpec; 4] = [GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0)];

fn sym(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

fn random_point(rng: &mut ChaCha8Rng, g: GaugeSpec, m: usize) -> ConePoint {
    let a = sym(rng, m);
    let span = 1.5 * norm_value(g, &a).unwrap().max(dual_norm_value(g, &a).unwrap());
    let s = rng.random_range(-span..=span);
    ConePoint { a, s }
}

fn random_outside(rng: &mut ChaCha8Rng, g: GaugeSpec, m: usize) -> ConePoint {
    let a = sym(rng, m);
    let n = norm_value(g, &a).unwrap();
    let nd = dual_norm_value(g, &a).unwrap();
    let s = -nd + rng.random_range(0.05..0.95) * (n + nd);
    ConePoint { a, s }
}

fn direction(rng: &mut ChaCha8Rng, m: usize) -> ConePoint {
    ConePoint { a: sym(rng, m), s: rng.sample(StandardNormal) }
}

type Case = fn(&mut ChaCha8Rng, usize) -> bool;

fn moreau(rng: &mut ChaCha8Rng, k: usize) -> bool {
    let g = KINDS[k % KINDS.len()];
    let z = random_point(rng, g, 1 + k % 6);
    let Ok(pk) = project_cone(g, &z) else { return false };
    let Ok(pd) = project_cone(g.dual(), &z.scale(-1.0)) else { return false };
    let po = pd.point.scale(-1.0);
    let n = z.norm();
    (&(&z - &pk.point) - &po).norm() <= 1e-9 * (1.0 + n)
        && pk.point.inner(&po).abs() <= 1e-9 * (1.0 + n * n)
        && in_cone(g, &pk.point, 1e-9)
        && in_polar(g, &po, 1e-9)
}

fn kkt(rng: &mut ChaCha8Rng, k: usize) -> bool {
    let g = KINDS[k % KINDS.len()];
    let z = random_outside(rng, g, 1 + k % 6);
    match project_cone(g, &z) {
        Ok(r) if r.region == RegionLabel::Outside => {
            kkt_residual(g, &z, &r.w, r.multiplier).is_ok_and(|res| res <= 1e-10) && r.iterations <= 50
        }
        Ok(_) => true,
        Err(_) => false,
    }
}

fn nonexpansive(rng: &mut ChaCha8Rng, k: usize) -> bool {
    let g = KINDS[k % KINDS.len()];
    let m = 1 + k % 6;
    let z1 = random_point(rng, g, m);
    let z2 = z1.axpy([1e-6, 1e-3, 1.0][k % 3], &direction(rng, m));
    let (Ok(p1), Ok(p2)) = (project_cone(g, &z1), project_cone(g, &z2)) else { return false };
    let dz = (&z1 - &z2).norm();
    (&p1.point - &p2.point).norm() <= dz + 1e-12 * (1.0 + dz)
}

fn derivative(rng: &mut ChaCha8Rng, k: usize) -> bool {
    let g = SMOOTH[k % SMOOTH.len()];
    let m = 1 + k % 5;
    let z = random_outside(rng, g, m);
    let d = direction(rng, m);
    let (Ok(map), Ok(fd)) = (dproj(g, &z), fd_dirderiv_central(g, &z, &d, 1e-5)) else { return false };
    (&map.apply(&d) - &fd).norm() <= 1e-4 * d.norm()
}

fn directional(rng: &mut ChaCha8Rng, k: usize) -> bool {
    let g = SMOOTH[k % SMOOTH.len()];
    let m = 1 + k % 5;
    let a = sym(rng, m);
    let Ok(n) = norm_value(g, &a) else { return false };
    let Ok(grad) = spectral_grad(g, &eig_desc(&a).unwrap()) else { return false };
    let mut d = direction(rng, m);
    // Alternate both sides of the kink at the boundary.
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    d.s = grad.dot(&d.a) - sign * 0.5;
    let z = ConePoint { a, s: n };
    let (Ok(an), Ok(fd)) = (dirderiv(g, &z, &d), fd_dirderiv_richardson(g, &z, &d, &[1e-4, 1e-5, 1e-6])) else {
        return false;
    };
    (&an.value - &fd).norm() <= 1e-3 * (1.0 + d.norm())
}

fn oracle(rng: &mut ChaCha8Rng, k: usize) -> bool {
    let g = KINDS[k % KINDS.len()];
    let z = random_point(rng, g, 1 + k % 4);
    let (Ok(fast), Ok(slow)) = (project_cone(g, &z), project_bruteforce(g, &z, 200, 0.0)) else { return false };
    (&fast.point - &slow.value).norm() <= 1e-5
}

/// Runs every suite with `cases` cases (the brute-force oracle uses a tenth) and
/// reports pass/fail counts. Suites run on separate threads with their own streams.
pub fn check(seed: u64, cases: usize) -> (Value, bool) {
    let suites: [(&str, Case, usize); 6] = [
        ("moreau", moreau, cases),
        ("kkt", kkt, cases),
        ("nonexpansive", nonexpansive, cases),
        ("derivative", derivative, cases),
        ("directional_derivative", directional, cases),
        ("oracle", oracle, cases.div_ceil(10)),
    ];
    let counts: Vec<(usize, usize)> = std::thread::scope(|scope| {
        let handles: Vec<_> = suites
            .iter()
            .enumerate()
            .map(|(i, &(_, case, n))| {
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                    let passed = (0..n).filter(|&k| case(&mut rng, k)).count();
                    (passed, n - passed)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite thread")).collect()
    });
    let failed: usize = counts.iter().map(|c| c.1).sum();
    let passed: usize = counts.iter().map(|c| c.0).sum();
    let rows: Vec<Value> = suites
        .iter()
        .zip(&counts)
        .map(|((name, _, _), (p, f))| json!({ "name": name, "passed": p, "failed": f }))
        .collect();
    let doc = json!({ "seed": seed, "cases": cases, "suites": rows, "passed": passed, "failed": failed });
    (doc, failed == 0)
}

/// Mean wall time of `project_cone` at random outside points across `m` and `p`.
pub fn bench(seed: u64, cases: usize, max_m: usize) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for g in KINDS {
        for m in 1..=max_m {
            let points: Vec<ConePoint> = (0..cases).map(|_| random_outside(&mut rng, g, m)).collect();
            let mut worst_iter = 0;
            let start = Instant::now();
            for z in &points {
                if let Ok(r) = project_cone(g, z) {
                    worst_iter = worst_iter.max(r.iterations);
                }
            }
            let mean = start.elapsed().as_secs_f64() / cases.max(1) as f64;
            rows.push(json!({
                "p": g.to_string(),
                "m": m,
                "cases": cases,
                "mean_us": num(mean * 1e6),
                "max_iterations": worst_iter,
            }));
        }
    }
    json!({ "seed": seed, "results": rows })
}
