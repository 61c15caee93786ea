//! The two-scale line energy
//!
//! ```text
//! H^θ_{m,k}(f)(x) = 2^{-m(n-1)} Σ_j Σ_{y ∈ {0,…,2^m−1}^n, y_j = 0} E_k^{0,θ}(t ↦ f(x + θ2^{-m}y + t e_j))
//! ```
//!
//! i.e. the level-`k` energies of the axis-parallel segments of length `θ`
//! starting on a level-`m` lattice of the faces of `x + [0,θ]^n`, averaged
//! over the face lattice and summed over axes. It satisfies the exact
//! self-similarity
//!
//! ```text
//! H^θ_{α,β+γ}(f)(x) = 2^{-βn} Σ_{z ∈ {0,…,2^β−1}^n} H^{θ/2^β}_{α−β,γ}(f)(x + θ2^{-β}z)
//! ```
//!
//! whenever `α ≥ β`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::fmath;
use crate::sampler::Sampler;

#[derive(Debug, Clone, PartialEq)]
pub struct HQuery {
    pub theta: f64,
    /// Face lattice level.
    pub m: u32,
    /// Energy level along each segment.
    pub k: u32,
    /// Base corner.
    pub x: Vec<f64>,
    pub p: f64,
}

const MAX_LEVEL: u32 = 30;

fn validate(q: &HQuery) -> Result<()> {
    if !(q.theta > 0.0 && q.theta.is_finite()) {
        return Err(Error::invalid("θ must be positive and finite"));
    }
    if q.m > MAX_LEVEL || q.k > MAX_LEVEL {
        return Err(Error::ResourceLimit(format!("levels m = {}, k = {} too large", q.m, q.k)));
    }
    if !(q.p >= 1.0 && q.p.is_finite()) {
        return Err(Error::invalid("p must be finite and at least 1"));
    }
    Ok(())
}

/// `H^θ_{m,k}(f)(x)`; sums run over axes, then face points in row-major
/// order, then segment steps, all ascending.
pub fn h_value<S: Sampler + ?Sized>(f: &S, q: &HQuery) -> Result<f64> {
    validate(q)?;
    let n = f.domain_dim();
    check_dim(n, q.x.len())?;
    let d = f.target().dim();
    let face_side = 1usize << q.m;
    let face_step = q.theta * fmath::pow2i(-(q.m as i32));
    let steps = 1usize << q.k;
    let seg = q.theta * fmath::pow2i(-(q.k as i32));

    let mut start = vec![0.0; n];
    let mut point = vec![0.0; n];
    let (mut prev, mut next) = (vec![0.0; d], vec![0.0; d]);
    let mut face = vec![0usize; n];
    let mut total = 0.0;
    for axis in 0..n {
        face.iter_mut().for_each(|v| *v = 0);
        loop {
            for ((s, x), y) in start.iter_mut().zip(&q.x).zip(&face) {
                *s = x + *y as f64 * face_step;
            }
            point.copy_from_slice(&start);
            f.sample(&point, &mut prev)?;
            let mut energy = 0.0;
            for l in 1..=steps {
                point[axis] = start[axis] + l as f64 * seg;
                f.sample(&point, &mut next)?;
                energy += fmath::pow(f.target().distance_unchecked(&next, &prev) / seg, q.p);
                core::mem::swap(&mut prev, &mut next);
            }
            total += energy * fmath::pow2i(-(q.k as i32));
            if !advance_face(&mut face, face_side, axis) {
                break;
            }
        }
    }
    Ok(total * fmath::pow2i(-((q.m as usize * (n - 1)) as i32)))
}

fn advance_face(face: &mut [usize], side: usize, fixed: usize) -> bool {
    for (i, slot) in face.iter_mut().enumerate().rev() {
        if i == fixed {
            continue;
        }
        *slot += 1;
        if *slot < side {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Both sides of the self-similarity identity at base point `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `|H^θ_{α,β+γ}(f)(x) − 2^{-βn} Σ_z H^{θ/2^β}_{α−β,γ}(f)(x + θ2^{-β}z)|`.
pub fn h_recursion_residual<S: Sampler + ?Sized>(
    f: &S,
    x: &[f64],
    theta: f64,
    p: f64,
    alpha: u32,
    beta: u32,
    gamma: u32,
) -> Result<RecursionCheck> {
    if beta > alpha {
        return Err(Error::invalid("need β ≤ α"));
    }
    let n = f.domain_dim();
    check_dim(n, x.len())?;
    let lhs = h_value(f, &HQuery { theta, m: alpha, k: beta + gamma, x: x.to_vec(), p })?;
    let sub = theta * fmath::pow2i(-(beta as i32));
    let side = 1usize << beta;
    let mut z = vec![0usize; n];
    let mut acc = 0.0;
    loop {
        let base: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| xi + *zi as f64 * sub).collect();
        acc += h_value(f, &HQuery { theta: sub, m: alpha - beta, k: gamma, x: base, p })?;
        if !advance_face(&mut z, side, usize::MAX) {
            break;
        }
    }
    let rhs = acc * fmath::pow2i(-((beta as usize * n) as i32));
    Ok(RecursionCheck { lhs, rhs, residual: fmath::abs(lhs - rhs) })
}
