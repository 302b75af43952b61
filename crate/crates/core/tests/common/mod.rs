#![allow(dead_code)]

/// Central difference with step `h`.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Analytic `a` against finite difference `fd` of a function whose value has
/// magnitude `f_scale`: relative tolerance `rel`, absolute below `1e-8`, plus
/// the rounding floor `≈ 10 ε |f| / h` of the difference quotient itself.
pub fn fd_agrees(a: f64, fd: f64, rel: f64, f_scale: f64, h: f64) -> bool {
    let floor = 10.0 * f64::EPSILON * f_scale.abs() / h;
    let scale = a.abs().max(fd.abs());
    let err = (a - fd).abs();
    if scale < 1e-8 {
        err < 1e-8 + floor
    } else {
        err <= rel * scale + floor
    }
}

use nalgebra::Vector3;
use omni_traj::elimination::DecisionVars;
use omni_traj::flatness::VehicleParams;
use omni_traj::geometry::{Corridor, Polyhedron, VehicleShape};
use omni_traj::penalty::PenaltyConfig;
use omni_traj::problem::{Endpoint, ProblemSpec};
use rand::Rng;

/// A chain of overlapping random boxes along +x, `m` pieces in total.
pub fn random_box_problem(rng: &mut impl Rng, s: usize, m: usize) -> ProblemSpec {
    let ppp = if m % 2 == 0 && rng.gen_bool(0.5) { 2 } else { 1 };
    let boxes = m / ppp;
    let mut polys = Vec::with_capacity(boxes);
    let mut x = 0.0;
    for _ in 0..boxes {
        let len = rng.gen_range(0.8..1.6);
        let lo = Vector3::new(x - 0.3, rng.gen_range(-1.2..-0.5), rng.gen_range(-1.0..-0.4));
        let hi = Vector3::new(x + len, rng.gen_range(0.5..1.2), rng.gen_range(0.4..1.0));
        polys.push(Polyhedron::aabb(lo, hi).unwrap());
        x += len;
    }
    let corridor = Corridor::with_pieces_per_polyhedron(polys, ppp);
    let rot = |rng: &mut dyn rand::RngCore| {
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        nalgebra::Rotation3::new(axis * 0.4).into_inner()
    };
    let start = Endpoint { position: Vector3::new(0.0, 0.0, 0.0), rotation: rot(rng) };
    let end = Endpoint { position: Vector3::new(x - 0.2, 0.1, 0.0), rotation: rot(rng) };
    ProblemSpec::new(
        corridor,
        VehicleShape::cuboid(0.6, 0.5, 0.3).unwrap(),
        &start,
        &end,
        s,
        PenaltyConfig::default(),
        VehicleParams::default(),
    )
    .unwrap()
}

/// Initial guess perturbed in every coordinate.
pub fn random_vars(rng: &mut impl Rng, spec: &ProblemSpec) -> DecisionVars {
    let mut v = spec.initial_guess();
    v.xi.iter_mut().for_each(|x| *x = rng.gen_range(-1.5..1.5));
    v.q_sigma
        .iter_mut()
        .for_each(|q| *q += Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
    v.tau.iter_mut().for_each(|t| *t += rng.gen_range(-0.3..0.3));
    v
}
