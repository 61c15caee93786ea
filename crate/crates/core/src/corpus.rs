//! Seeded generators of test maps.
//!
//! Everything here is deterministic in its seed (ChaCha8), so the same
//! corpus can be regenerated by tests, benchmarks and the command line tool.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::GridFunction1D;
use crate::fmath;
use crate::space::NormedSpace;
use crate::walsh::{CubeLimits, GridFunctionCube};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fills `out` with a vector of unit norm in `space`.
pub fn random_unit_vector(space: &NormedSpace, rng: &mut impl Rng, out: &mut [f64]) {
    loop {
        for o in out.iter_mut() {
            *o = rng.gen_range(-1.0..=1.0);
        }
        let norm = space.norm_unchecked(out);
        if norm > 1e-3 {
            out.iter_mut().for_each(|o| *o /= norm);
            return;
        }
    }
}

/// A random piecewise-linear curve on `[a, b]`, sampled at level `m`, whose
/// velocity has norm at most 1 everywhere. Some segments run at full speed.
pub fn random_lipschitz_path(space: NormedSpace, a: f64, b: f64, m: u32, seed: u64) -> GridFunction1D {
    let mut rng = rng(seed);
    let d = space.dim();
    let pieces = rng.gen_range(1..=8usize);
    let mut breaks: Vec<f64> = (1..pieces).map(|_| rng.gen_range(a..b)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.push(b);
    let mut velocities = vec![0.0; pieces * d];
    for v in velocities.chunks_exact_mut(d) {
        random_unit_vector(&space, &mut rng, v);
        let speed = if rng.gen_bool(0.3) { 1.0 } else { rng.gen_range(0.0..1.0) };
        v.iter_mut().for_each(|c| *c *= speed);
    }
    let mut start = vec![0.0; d];
    for s in start.iter_mut() {
        *s = rng.gen_range(-1.0..1.0);
    }
    GridFunction1D::from_fn(space, a, b, m, |t, out| {
        out.copy_from_slice(&start);
        let mut left = a;
        for (right, v) in breaks.iter().zip(velocities.chunks_exact(d)) {
            let run = t.min(*right) - left;
            if run <= 0.0 {
                break;
            }
            for (o, c) in out.iter_mut().zip(v) {
                *o += run * c;
            }
            left = *right;
        }
    })
    .expect("valid path parameters")
}

enum Profile {
    Sine,
    Abs,
    Tent,
}

impl Profile {
    fn eval(&self, s: f64) -> f64 {
        match self {
            Profile::Sine => fmath::sin(s),
            Profile::Abs => fmath::abs(s),
            Profile::Tent => (1.0 - fmath::abs(s - fmath::round(s / 2.0) * 2.0)).max(0.0),
        }
    }
}

struct Term {
    weight: f64,
    direction: Vec<f64>,
    shift: f64,
    profile: Option<Profile>,
    value: Vec<f64>,
}

/// A random map on `origin + [0, θ]^n` that is 1-Lipschitz from the Euclidean
/// metric into `space`: a weighted sum (total weight at most 1) of ridge
/// terms `φ(⟨w, x⟩ + b) v` with 1-Lipschitz `φ`, and distance terms
/// `‖x − c‖₂ v`, where `‖w‖₂ = ‖v‖ = 1`.
pub fn random_lipschitz_cube(space: NormedSpace, origin: Vec<f64>, theta: f64, m: u32, seed: u64) -> GridFunctionCube {
    let mut rng = rng(seed);
    let n = origin.len();
    let d = space.dim();
    let euclid = NormedSpace::euclidean(n).expect("positive dimension");
    let count = rng.gen_range(1..=4usize);
    let mut weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let scale = rng.gen_range(0.5..=1.0) / total;
    weights.iter_mut().for_each(|w| *w *= scale);
    let terms: Vec<Term> = weights
        .into_iter()
        .map(|weight| {
            let mut direction = vec![0.0; n];
            random_unit_vector(&euclid, &mut rng, &mut direction);
            let profile = match rng.gen_range(0..4) {
                0 => Some(Profile::Sine),
                1 => Some(Profile::Abs),
                2 => Some(Profile::Tent),
                _ => None,
            };
            if profile.is_none() {
                // Distance term: `direction` becomes the center offset.
                for (c, o) in direction.iter_mut().zip(&origin) {
                    *c = o + rng.gen_range(0.0..=theta);
                }
            }
            let shift = rng.gen_range(-2.0..2.0) * theta;
            let mut value = vec![0.0; d];
            random_unit_vector(&space, &mut rng, &mut value);
            Term { weight, direction, shift, profile, value }
        })
        .collect();
    let mut diff = vec![0.0; n];
    GridFunctionCube::from_fn_with_limits(space, origin, theta, m, CubeLimits::unbounded(), |x, out| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for term in &terms {
            let s = match &term.profile {
                Some(profile) => {
                    let dot: f64 = term.direction.iter().zip(x).map(|(w, xi)| w * xi).sum();
                    profile.eval((dot + term.shift) * 4.0 / theta) * theta / 4.0
                }
                None => {
                    for ((t, xi), c) in diff.iter_mut().zip(x).zip(&term.direction) {
                        *t = xi - c;
                    }
                    euclid.norm_unchecked(&diff)
                }
            };
            for (o, v) in out.iter_mut().zip(&term.value) {
                *o += term.weight * s * v;
            }
        }
    })
    .expect("valid cube parameters")
}

/// Arbitrary lattice values in `[-1, 1]` on a cube with random origin and side.
pub fn random_grid_cube(space: NormedSpace, n: usize, m: u32, seed: u64) -> GridFunctionCube {
    let mut rng = rng(seed);
    let origin: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let theta = rng.gen_range(0.25..2.0);
    GridFunctionCube::from_fn_with_limits(space, origin, theta, m, CubeLimits::unbounded(), |_, out| {
        for o in out.iter_mut() {
            *o = rng.gen_range(-1.0..=1.0);
        }
    })
    .expect("valid cube parameters")
}
