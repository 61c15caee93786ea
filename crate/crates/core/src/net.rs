//! `δ`-nets of the unit ball of `ℓ_q^n`.
//!
//! Construction: greedy farthest-point insertion over a body-centred cubic
//! lattice in `[−1,1]^n` (points outside the ball are pulled radially onto the sphere),
//! starting from the origin, followed by a repair pass over
//! seeded random ball points (any point farther than `δ` from the net is
//! pushed towards the middle of its hole and joins it), repeated until a whole round adds nothing. Every inserted point is farther than `δ` from all earlier ones, so
//! separation holds by construction; covering is then tested on an
//! independent random sample.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus;
use crate::error::{Error, Result};
use crate::fmath;
use crate::space::{NormKind, NormedSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetOptions {
    /// Random ball points used to patch holes left by the lattice.
    pub repair_samples: usize,
    /// Independent random ball points the covering is tested on.
    pub covering_samples: usize,
    /// Largest lattice (points of `[−1,1]^n`) that will be built.
    pub max_lattice: usize,
    /// Soft limit on the dimension.
    pub max_dim: usize,
}

impl Default for NetOptions {
    fn default() -> Self {
        NetOptions { repair_samples: 200_000, covering_samples: 10_000, max_lattice: 2_000_000, max_dim: 6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetResult {
    pub delta: f64,
    /// Row-major, `n` coordinates per point.
    pub points: Vec<f64>,
    pub dim: usize,
    /// Smallest pairwise distance (`+∞` for a single point).
    pub min_separation: f64,
    pub separation_ok: bool,
    pub covering_checked: usize,
    /// Largest distance from a test point to the net.
    pub max_covering_distance: f64,
    pub covering_ok: bool,
}

impl NetResult {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

const REPAIR_STREAM: u64 = 1;
const CHECK_STREAM: u64 = 2;
/// Repair rounds stop after the first one that adds nothing.
const MAX_REPAIR_ROUNDS: usize = 20;
const DEEPEN_STEPS: usize = 40;

/// A `δ`-net of the unit ball of `space`, which must be an `ℓ_q^n`.
pub fn delta_net(space: NormedSpace, delta: f64, seed: u64) -> Result<NetResult> {
    delta_net_with(space, delta, seed, NetOptions::default())
}

pub fn delta_net_with(space: NormedSpace, delta: f64, seed: u64, options: NetOptions) -> Result<NetResult> {
    let (q, n) = match space.kind() {
        NormKind::Lq { q, dim } => (q, dim),
        NormKind::MixedL2Lq { .. } => return Err(Error::invalid("nets are built for ℓ_q^n balls")),
    };
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("need δ ∈ (0, 1], got {delta}")));
    }
    if n > options.max_dim {
        return Err(Error::ResourceLimit(format!("dimension {n} exceeds {}", options.max_dim)));
    }

    // Lattice spacing h with ‖h·(1,…,1)‖_q = δ, shrunk so that 2/h is even
    // (which puts the origin on the lattice).
    let h = if q.is_infinite() { delta } else { delta / fmath::pow(n as f64, 1.0 / q) };
    let mut side = fmath::ceil(2.0 / h * (1.0 - 1e-12));
    if side % 2.0 != 0.0 {
        side += 1.0;
    }
    let total = fmath::pow(side + 1.0, n as f64) + fmath::pow(side, n as f64);
    if total > options.max_lattice as f64 {
        return Err(Error::ResourceLimit(format!("lattice of {total} points exceeds {}", options.max_lattice)));
    }
    let side = side as usize;
    let h = 2.0 / side as f64;

    let mut lattice = Vec::new();
    let mut push = |p: &[f64]| {
        let norm = space.norm_unchecked(p);
        if norm <= 1.0 + 1e-12 {
            lattice.extend_from_slice(p);
        } else {
            lattice.extend(p.iter().map(|v| v / norm));
        }
    };
    let mut multi = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut centre = vec![0.0; n];
    'outer: loop {
        for (xi, k) in x.iter_mut().zip(&multi) {
            *xi = -1.0 + *k as f64 * h;
        }
        push(&x);
        if multi.iter().all(|&k| k < side) {
            for (c, xi) in centre.iter_mut().zip(&x) {
                *c = xi + 0.5 * h;
            }
            push(&centre);
        }
        for slot in multi.iter_mut().rev() {
            *slot += 1;
            if *slot <= side {
                continue 'outer;
            }
            *slot = 0;
        }
        break;
    }

    let mut net = vec![0.0; n];
    let count = lattice.len() / n;
    let mut gap: Vec<f64> = lattice.chunks_exact(n).map(|p| space.norm_unchecked(p)).collect();
    loop {
        let mut far = 0usize;
        for i in 1..count {
            if gap[i] > gap[far] {
                far = i;
            }
        }
        if count == 0 || gap[far] <= delta {
            break;
        }
        let chosen = lattice[far * n..(far + 1) * n].to_vec();
        for (g, p) in gap.iter_mut().zip(lattice.chunks_exact(n)) {
            *g = g.min(space.distance_unchecked(p, &chosen));
        }
        net.extend_from_slice(&chosen);
    }

    let mut index = Buckets::new(n, delta);
    for (i, p) in net.chunks_exact(n).enumerate() {
        index.insert(p, i);
    }
    let mut rng = corpus::rng(seed);
    rng.set_stream(REPAIR_STREAM);
    for _ in 0..MAX_REPAIR_ROUNDS {
        let before = net.len();
        for _ in 0..options.repair_samples {
            random_ball_point(&space, &mut rng, &mut x);
            let gap = index.nearest(&space, &net, &x, delta);
            if gap > delta {
                deepen(&space, &net, &mut rng, &mut x, gap, delta);
                index.insert(&x, net.len() / n);
                net.extend_from_slice(&x);
            }
        }
        if net.len() == before {
            break;
        }
    }

    let mut min_separation = f64::INFINITY;
    for (i, a) in net.chunks_exact(n).enumerate() {
        for b in net.chunks_exact(n).skip(i + 1) {
            min_separation = min_separation.min(space.distance_unchecked(a, b));
        }
    }

    let mut rng = corpus::rng(seed);
    rng.set_stream(CHECK_STREAM);
    let mut max_covering_distance = 0.0f64;
    for _ in 0..options.covering_samples {
        random_ball_point(&space, &mut rng, &mut x);
        max_covering_distance = max_covering_distance.max(index.nearest(&space, &net, &x, delta));
    }

    Ok(NetResult {
        delta,
        points: net,
        dim: n,
        min_separation,
        separation_ok: min_separation >= delta,
        covering_checked: options.covering_samples,
        max_covering_distance,
        covering_ok: max_covering_distance <= delta,
    })
}

/// Net points bucketed by cubic cells of side at least `δ`, so that every
/// net point within `δ` of `x` lies in a cell adjacent to that of `x`.
struct Buckets {
    dim: usize,
    cells: usize,
    width: f64,
    slots: Vec<Vec<usize>>,
}

const MAX_BUCKETS: f64 = 4e6;

impl Buckets {
    fn new(dim: usize, delta: f64) -> Self {
        let cells = (fmath::floor(2.0 / delta) as usize).max(1);
        let slots = if fmath::pow(cells as f64, dim as f64) <= MAX_BUCKETS {
            vec![Vec::new(); cells.pow(dim as u32)]
        } else {
            Vec::new()
        };
        Buckets { dim, cells, width: 2.0 / cells as f64, slots }
    }

    fn cell(&self, v: f64) -> usize {
        (fmath::floor((v + 1.0) / self.width).max(0.0) as usize).min(self.cells - 1)
    }

    fn insert(&mut self, p: &[f64], i: usize) {
        if self.slots.is_empty() {
            return;
        }
        let key = p.iter().fold(0, |acc, v| acc * self.cells + self.cell(*v));
        self.slots[key].push(i);
    }

    /// Distance from `x` to the net; exact, with the adjacent cells searched
    /// first and the full scan only when nothing lies within `δ`.
    fn nearest(&self, space: &NormedSpace, net: &[f64], x: &[f64], delta: f64) -> f64 {
        if self.slots.is_empty() {
            return nearest(space, net, x);
        }
        let home: Vec<usize> = x.iter().map(|v| self.cell(*v)).collect();
        let mut offset = vec![0usize; self.dim];
        let mut best = f64::INFINITY;
        'cells: loop {
            let mut key = 0;
            let mut inside = true;
            for (h, o) in home.iter().zip(&offset) {
                let c = (*h + *o).wrapping_sub(1);
                inside &= c < self.cells;
                key = key * self.cells + c.min(self.cells - 1);
            }
            if inside {
                for &i in &self.slots[key] {
                    best = best.min(space.distance_unchecked(&net[i * self.dim..(i + 1) * self.dim], x));
                }
            }
            for o in offset.iter_mut().rev() {
                *o += 1;
                if *o < 3 {
                    continue 'cells;
                }
                *o = 0;
            }
            break;
        }
        if best <= delta {
            best
        } else {
            nearest(space, net, x)
        }
    }
}

fn nearest(space: &NormedSpace, net: &[f64], x: &[f64]) -> f64 {
    net.chunks_exact(x.len())
        .map(|p| space.distance_unchecked(p, x))
        .fold(f64::INFINITY, f64::min)
}

/// Random local search moving an uncovered `x` towards the middle of its
/// hole, so that the inserted point covers as much of it as possible.
fn deepen(space: &NormedSpace, net: &[f64], rng: &mut ChaCha8Rng, x: &mut [f64], mut gap: f64, delta: f64) {
    let mut step = 0.5 * delta;
    let mut trial = x.to_vec();
    for _ in 0..DEEPEN_STEPS {
        for (t, xi) in trial.iter_mut().zip(x.iter()) {
            *t = xi + step * rng.gen_range(-1.0..=1.0);
        }
        let norm = space.norm_unchecked(&trial);
        if norm > 1.0 {
            trial.iter_mut().for_each(|t| *t /= norm);
        }
        let d = nearest(space, net, &trial);
        if d > gap {
            gap = d;
            x.copy_from_slice(&trial);
        } else {
            step *= 0.9;
        }
    }
}

/// Uniform point of the unit ball by rejection from the cube.
fn random_ball_point(space: &NormedSpace, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        for o in out.iter_mut() {
            *o = rng.gen_range(-1.0..=1.0);
        }
        if space.norm_unchecked(out) <= 1.0 {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linf(n: usize) -> NormedSpace {
        NormedSpace::lq(f64::INFINITY, n).unwrap()
    }

    /// Smallest δ-net of [−1, 1] among subsets of the lattice (1/8)ℤ ∩ [−1, 1].
    fn brute_force_interval(delta: f64) -> usize {
        let lattice: Vec<f64> = (0..=16).map(|i| -1.0 + i as f64 / 8.0).collect();
        let probes: Vec<f64> = (0..=1600).map(|i| -1.0 + i as f64 / 800.0).collect();
        for size in 1..=lattice.len() {
            let mut pick: Vec<usize> = (0..size).collect();
            loop {
                if probes.iter().all(|t| pick.iter().any(|&i| (lattice[i] - t).abs() <= delta)) {
                    return size;
                }
                // Next combination in lexicographic order.
                let mut i = size;
                while i > 0 && pick[i - 1] == lattice.len() - size + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                pick[i - 1] += 1;
                for j in i..size {
                    pick[j] = pick[j - 1] + 1;
                }
            }
        }
        lattice.len()
    }

    #[test]
    fn interval_examples() {
        let net = delta_net(linf(1), 1.0, 0).unwrap();
        assert_eq!(net.points, vec![0.0]);
        assert!(net.covering_ok && net.separation_ok);

        let net = delta_net(linf(1), 0.5, 0).unwrap();
        assert_eq!(net.points, vec![0.0, -1.0, 1.0]);
        assert!(net.covering_ok && net.separation_ok);
        let optimum = brute_force_interval(0.5);
        assert_eq!(optimum, 2);
        assert!(net.len() <= 2 * optimum);
    }

    #[test]
    fn euclidean_nets() {
        for n in 1..=4 {
            for delta in [0.25, 0.5] {
                let net = delta_net(NormedSpace::euclidean(n).unwrap(), delta, 7).unwrap();
                assert!(net.separation_ok, "n={n} δ={delta}: {}", net.min_separation);
                assert!(net.covering_ok, "n={n} δ={delta}: {}", net.max_covering_distance);
                assert_eq!(net.covering_checked, 10_000);
            }
        }
    }

    #[test]
    fn other_norms_and_limits() {
        let net = delta_net(NormedSpace::lq(1.0, 3).unwrap(), 0.5, 1).unwrap();
        assert!(net.separation_ok && net.covering_ok, "{} {}", net.min_separation, net.max_covering_distance);
        assert!(delta_net(NormedSpace::mixed(2, 2.0, 2).unwrap(), 0.5, 0).is_err());
        assert!(delta_net(linf(1), 0.0, 0).is_err());
        assert!(matches!(delta_net(linf(7), 0.5, 0), Err(Error::ResourceLimit(_))));
        assert!(matches!(delta_net(linf(6), 0.01, 0), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn seeded_runs_repeat() {
        let space = NormedSpace::euclidean(2).unwrap();
        assert_eq!(delta_net(space, 0.5, 3).unwrap(), delta_net(space, 0.5, 3).unwrap());
    }
}
