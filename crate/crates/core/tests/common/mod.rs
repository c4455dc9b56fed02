#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use normcone::cones::{dual_norm_value, norm_value};
use normcone::{ConePoint, GaugeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const KINDS: [GaugeSpec; 5] =
    [GaugeSpec::P1, GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::PInf];

pub const SMOOTH: [GaugeSpec; 4] =
    [GaugeSpec::P(1.5), GaugeSpec::P(2.0), GaugeSpec::P(3.0), GaugeSpec::P(4.0)];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_sym(rng: &mut impl Rng, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| normal(rng));
    (&g + g.transpose()) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_orthogonal(rng: &mut impl Rng, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| normal(rng));
    g.qr().q()
}

/// `Q Diag(vals) Qᵀ` for a random orthogonal `Q`.
pub fn with_spectrum(rng: &mut impl Rng, vals: &[f64]) -> DMatrix<f64> {
    let q = random_orthogonal(rng, vals.len());
    &q * DMatrix::from_diagonal(&DVector::from_column_slice(vals)) * q.transpose()
}

pub fn point(a: DMatrix<f64>, s: f64) -> ConePoint {
    ConePoint::new(a, s).expect("valid point")
}

pub fn random_direction(rng: &mut impl Rng, m: usize) -> ConePoint {
    point(random_sym(rng, m), normal(rng))
}

/// A point whose scalar part is spread over all regions.
pub fn random_point(rng: &mut impl Rng, g: GaugeSpec, m: usize) -> ConePoint {
    let a = random_sym(rng, m);
    let n = norm_value(g, &a).unwrap();
    let nd = dual_norm_value(g, &a).unwrap();
    let span = 1.5 * n.max(nd);
    let s = rng.random_range(-span..span);
    point(a, s)
}

/// A point strictly between the two cones, with relative margin `margin`.
pub fn random_outside(rng: &mut impl Rng, g: GaugeSpec, m: usize, margin: f64) -> ConePoint {
    let a = random_sym(rng, m);
    let n = norm_value(g, &a).unwrap();
    let nd = dual_norm_value(g, &a).unwrap();
    let u = rng.random_range(margin..1.0 - margin);
    point(a, -nd + u * (n + nd))
}

/// A random `A` on the boundary of the cone, `s = N(A)`.
pub fn random_boundary(rng: &mut impl Rng, g: GaugeSpec, m: usize) -> ConePoint {
    let a = random_sym(rng, m);
    let n = norm_value(g, &a).unwrap();
    point(a, n)
}

/// A random `A` on the boundary of the polar cone, `s = -N_*(A)`.
pub fn random_polar_boundary(rng: &mut impl Rng, g: GaugeSpec, m: usize) -> ConePoint {
    let a = random_sym(rng, m);
    let nd = dual_norm_value(g, &a).unwrap();
    point(a, -nd)
}

pub fn dist(a: &ConePoint, b: &ConePoint) -> f64 {
    (a - b).norm()
}
