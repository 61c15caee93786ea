//! Finite-dimensional target norms, their uniform convexity parameters, and
//! Lipschitz estimates for grid-sampled maps.

use alloc::format;

use crate::error::{check_dim, Error, Result};
use crate::fmath;

/// Shape of a norm on `ℝ^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `ℓ_q^dim`, `q ∈ [1, ∞]`.
    Lq { q: f64, dim: usize },
    /// `ℓ_2^outer(ℓ_q^inner)`: `outer` blocks of length `inner`, combined in `ℓ_2`.
    MixedL2Lq { outer: usize, q: f64, inner: usize },
}

/// Power-type uniform convexity parameters: for all `x, y`,
/// `2‖x‖^p + (2/K^p)‖y‖^p ≤ ‖x+y‖^p + ‖x−y‖^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcParams {
    pub p: f64,
    pub k: f64,
}

impl UcParams {
    pub fn new(p: f64, k: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::invalid(format!("uniform convexity power must be in [2, ∞), got {p}")));
        }
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::invalid(format!("uniform convexity constant must be in [1, ∞), got {k}")));
        }
        Ok(UcParams { p, k })
    }

    /// The `L_q` constants: `p = max{q, 2}`, `K = max{1/√(q−1), 1}`.
    pub fn for_lq(q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::invalid(format!(
                "ℓ_q is uniformly convex of power type only for q ∈ (1, ∞), got q = {q}"
            )));
        }
        let p = if q > 2.0 { q } else { 2.0 };
        let k = 1.0 / fmath::sqrt(q - 1.0);
        Ok(UcParams { p, k: if k > 1.0 { k } else { 1.0 } })
    }
}

/// A norm on `ℝ^d` together with (optionally overridden) convexity parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormedSpace {
    kind: NormKind,
    uc_override: Option<UcParams>,
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 && !q.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!("norm exponent must satisfy q ≥ 1, got {q}")))
    }
}

impl NormedSpace {
    pub fn lq(q: f64, dim: usize) -> Result<Self> {
        check_q(q)?;
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(NormedSpace { kind: NormKind::Lq { q, dim }, uc_override: None })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::lq(2.0, dim)
    }

    pub fn mixed(outer: usize, q: f64, inner: usize) -> Result<Self> {
        check_q(q)?;
        if outer == 0 || inner == 0 {
            return Err(Error::invalid("block dimensions must be positive"));
        }
        Ok(NormedSpace { kind: NormKind::MixedL2Lq { outer, q, inner }, uc_override: None })
    }

    /// Replaces the default `(p, K)` returned by [`uc_params`](Self::uc_params).
    pub fn with_uc_params(mut self, params: UcParams) -> Self {
        self.uc_override = Some(params);
        self
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn uc_override(&self) -> Option<UcParams> {
        self.uc_override
    }

    /// Total coordinate count.
    pub fn dim(&self) -> usize {
        match self.kind {
            NormKind::Lq { dim, .. } => dim,
            NormKind::MixedL2Lq { outer, inner, .. } => outer * inner,
        }
    }

    /// `(p, K)` for this norm.
    ///
    /// For `MixedL2Lq` the inner-`q` formula is used as a default: `ℓ_2(ℓ_q)`
    /// is known to be uniformly convex of power type, but no constants are
    /// pinned down here. Override with [`with_uc_params`](Self::with_uc_params).
    pub fn uc_params(&self) -> Result<UcParams> {
        if let Some(uc) = self.uc_override {
            return Ok(uc);
        }
        match self.kind {
            NormKind::Lq { q, .. } | NormKind::MixedL2Lq { q, .. } => UcParams::for_lq(q),
        }
    }

    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        Ok(self.norm_unchecked(v))
    }

    pub(crate) fn norm_unchecked(&self, v: &[f64]) -> f64 {
        match self.kind {
            NormKind::Lq { q, .. } => lq_norm(v, q),
            NormKind::MixedL2Lq { q, inner, .. } => {
                let mut largest = 0.0f64;
                for block in v.chunks_exact(inner) {
                    let b = lq_norm(block, q);
                    if b > largest {
                        largest = b;
                    }
                }
                if largest == 0.0 {
                    return 0.0;
                }
                let mut acc = 0.0;
                for block in v.chunks_exact(inner) {
                    let s = lq_norm(block, q) / largest;
                    acc += s * s;
                }
                largest * fmath::sqrt(acc)
            }
        }
    }

    /// `‖a − b‖`.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dim(self.dim(), a.len())?;
        check_dim(self.dim(), b.len())?;
        Ok(self.distance_unchecked(a, b))
    }

    pub(crate) fn distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        // Small vectors are the common case; avoid allocating for them.
        let mut stack = [0.0f64; 32];
        if a.len() <= stack.len() {
            let d = &mut stack[..a.len()];
            for ((d, x), y) in d.iter_mut().zip(a).zip(b) {
                *d = x - y;
            }
            self.norm_unchecked(d)
        } else {
            let d: alloc::vec::Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            self.norm_unchecked(&d)
        }
    }

    /// `‖x+y‖^p + ‖x−y‖^p − 2‖x‖^p − (2/K^p)‖y‖^p`, nonnegative whenever the
    /// four-point inequality holds with this space's `(p, K)`.
    pub fn uc_residual(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        let UcParams { p, k } = self.uc_params()?;
        let mut sum = alloc::vec::Vec::with_capacity(x.len());
        let mut diff = alloc::vec::Vec::with_capacity(x.len());
        for (a, b) in x.iter().zip(y) {
            sum.push(a + b);
            diff.push(a - b);
        }
        let plus = fmath::pow(self.norm_unchecked(&sum), p);
        let minus = fmath::pow(self.norm_unchecked(&diff), p);
        let nx = fmath::pow(self.norm_unchecked(x), p);
        let ny = fmath::pow(self.norm_unchecked(y), p);
        Ok(plus + minus - 2.0 * nx - 2.0 / fmath::pow(k, p) * ny)
    }

    /// Writes a norming functional of `r` into `out`: `⟨out, r⟩ = ‖r‖` and
    /// the dual norm of `out` is 1 (or `out = 0` when `r = 0`).
    pub fn dual_vector(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), r.len())?;
        check_dim(self.dim(), out.len())?;
        match self.kind {
            NormKind::Lq { q, .. } => lq_dual(r, q, out),
            NormKind::MixedL2Lq { q, inner, .. } => {
                let total = self.norm_unchecked(r);
                for (rb, ob) in r.chunks_exact(inner).zip(out.chunks_exact_mut(inner)) {
                    lq_dual(rb, q, ob);
                    let w = if total > 0.0 { lq_norm(rb, q) / total } else { 0.0 };
                    ob.iter_mut().for_each(|g| *g *= w);
                }
            }
        }
        Ok(())
    }
}

fn lq_norm(v: &[f64], q: f64) -> f64 {
    if q == 1.0 {
        return v.iter().map(|x| fmath::abs(*x)).sum();
    }
    let largest = v.iter().fold(0.0f64, |m, x| {
        let a = fmath::abs(*x);
        if a > m {
            a
        } else {
            m
        }
    });
    if q.is_infinite() || largest == 0.0 {
        return largest;
    }
    if q == 2.0 {
        let s: f64 = v
            .iter()
            .map(|x| {
                let t = x / largest;
                t * t
            })
            .sum();
        return largest * fmath::sqrt(s);
    }
    let s: f64 = v.iter().map(|x| fmath::pow(fmath::abs(*x) / largest, q)).sum();
    largest * fmath::pow(s, 1.0 / q)
}

fn lq_dual(r: &[f64], q: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|g| *g = 0.0);
    let norm = lq_norm(r, q);
    if norm == 0.0 {
        return;
    }
    if q == 1.0 {
        for (g, x) in out.iter_mut().zip(r) {
            *g = if *x > 0.0 {
                1.0
            } else if *x < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
    } else if q.is_infinite() {
        let (mut best, mut idx) = (-1.0, 0);
        for (i, x) in r.iter().enumerate() {
            if fmath::abs(*x) > best {
                best = fmath::abs(*x);
                idx = i;
            }
        }
        out[idx] = if r[idx] >= 0.0 { 1.0 } else { -1.0 };
    } else {
        for (g, x) in out.iter_mut().zip(r) {
            let mag = fmath::pow(fmath::abs(*x) / norm, q - 1.0);
            *g = if *x >= 0.0 { mag } else { -mag };
        }
    }
}

/// Metric used on the domain of a sampled map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainMetric {
    Euclidean,
    MaxNorm,
    /// An explicit norm on the domain (e.g. the source space `X`).
    SpaceNorm(NormedSpace),
}

impl DomainMetric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dim(a.len(), b.len())?;
        Ok(match self {
            DomainMetric::Euclidean => {
                fmath::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
            }
            DomainMetric::MaxNorm => a
                .iter()
                .zip(b)
                .fold(0.0, |m: f64, (x, y)| m.max(fmath::abs(x - y))),
            DomainMetric::SpaceNorm(space) => space.distance(a, b)?,
        })
    }
}

/// Which sample pairs a Lipschitz estimate looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairMode {
    /// Grid neighbours along each axis; linear in the grid size.
    #[default]
    Adjacent,
    /// Every pair; quadratic, for small grids.
    AllPairs,
}

/// A map sampled on a rectangular lattice.
pub trait GridSamples {
    fn domain_dim(&self) -> usize;
    fn target(&self) -> &NormedSpace;
    fn sample_count(&self) -> usize;
    fn point_into(&self, index: usize, out: &mut [f64]);
    fn value(&self, index: usize) -> &[f64];
    /// Calls `visit` with the index of the next grid point along each axis.
    fn forward_neighbors(&self, index: usize, visit: &mut dyn FnMut(usize));
}

/// Largest observed ratio `‖f(x)−f(y)‖_Y / d(x,y)`: a lower bound on the
/// Lipschitz constant of the underlying map.
pub fn lipschitz_estimate<G: GridSamples + ?Sized>(
    samples: &G,
    metric: DomainMetric,
    mode: PairMode,
) -> Result<f64> {
    let count = samples.sample_count();
    if count < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: count });
    }
    let n = samples.domain_dim();
    let space = samples.target();
    let mut xa = alloc::vec![0.0; n];
    let mut xb = alloc::vec![0.0; n];
    let mut best = 0.0f64;
    let mut failure = None;
    let mut consider = |i: usize, j: usize, xa: &mut [f64], xb: &mut [f64]| {
        samples.point_into(i, xa);
        samples.point_into(j, xb);
        match metric.distance(xa, xb) {
            Ok(d) if d > 0.0 => {
                let ratio = space.distance_unchecked(samples.value(i), samples.value(j)) / d;
                if ratio > best {
                    best = ratio;
                }
            }
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    };
    match mode {
        PairMode::Adjacent => {
            for i in 0..count {
                samples.forward_neighbors(i, &mut |j| consider(i, j, &mut xa, &mut xb));
            }
        }
        PairMode::AllPairs => {
            for i in 0..count {
                for j in i + 1..count {
                    consider(i, j, &mut xa, &mut xb);
                }
            }
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norm_examples() {
        let l2 = NormedSpace::euclidean(2).unwrap();
        assert_eq!(l2.norm(&[3.0, 4.0]).unwrap(), 5.0);
        let l3 = NormedSpace::lq(3.0, 2).unwrap();
        assert!((l3.norm(&[1.0, 1.0]).unwrap() - 1.259_921_049_894_873).abs() < 1e-12);
        let mixed = NormedSpace::mixed(2, 1.0, 2).unwrap();
        let v = mixed.norm(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((v - 2.0 * core::f64::consts::SQRT_2).abs() < 1e-12);
        let linf = NormedSpace::lq(f64::INFINITY, 3).unwrap();
        assert_eq!(linf.norm(&[1.0, -7.5, 2.0]).unwrap(), 7.5);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let l2 = NormedSpace::euclidean(3).unwrap();
        assert_eq!(
            l2.norm(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        );
        assert!(l2.uc_residual(&[1.0; 3], &[1.0; 2]).is_err());
    }

    #[test]
    fn invalid_spaces() {
        assert!(NormedSpace::lq(0.5, 2).is_err());
        assert!(NormedSpace::lq(2.0, 0).is_err());
        assert!(NormedSpace::mixed(0, 2.0, 3).is_err());
    }

    #[test]
    fn uc_params_examples() {
        let uc = |q| NormedSpace::lq(q, 3).unwrap().uc_params().unwrap();
        assert_eq!(uc(2.0), UcParams { p: 2.0, k: 1.0 });
        assert_eq!(uc(4.0), UcParams { p: 4.0, k: 1.0 });
        let low = uc(1.5);
        assert_eq!(low.p, 2.0);
        assert!((low.k - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(NormedSpace::lq(1.0, 3).unwrap().uc_params().is_err());
        assert!(NormedSpace::lq(f64::INFINITY, 3).unwrap().uc_params().is_err());
    }

    #[test]
    fn uc_params_override() {
        let s = NormedSpace::mixed(2, 3.0, 2).unwrap();
        assert_eq!(s.uc_params().unwrap(), UcParams { p: 3.0, k: 1.0 });
        let o = s.with_uc_params(UcParams::new(4.0, 2.0).unwrap());
        assert_eq!(o.uc_params().unwrap().k, 2.0);
        assert!(UcParams::new(1.5, 1.0).is_err());
        assert!(UcParams::new(2.0, 0.5).is_err());
    }

    #[test]
    fn parallelogram_identity_in_l2() {
        let l2 = NormedSpace::euclidean(3).unwrap();
        let r = l2.uc_residual(&[1.0, -2.0, 0.5], &[0.3, 4.0, -1.0]).unwrap();
        assert!(r.abs() < 1e-12);
        let l4 = NormedSpace::lq(4.0, 3).unwrap();
        assert_eq!(l4.uc_residual(&[1.0, -2.0, 0.5], &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn dual_vectors_norm_their_input() {
        for space in [
            NormedSpace::lq(1.0, 3).unwrap(),
            NormedSpace::lq(3.0, 3).unwrap(),
            NormedSpace::lq(f64::INFINITY, 3).unwrap(),
            NormedSpace::mixed(3, 1.5, 1).unwrap(),
        ] {
            let r = [0.5, -2.0, 1.25];
            let mut g = [0.0; 3];
            space.dual_vector(&r, &mut g).unwrap();
            let pairing: f64 = g.iter().zip(&r).map(|(a, b)| a * b).sum();
            assert!((pairing - space.norm(&r).unwrap()).abs() < 1e-12, "{space:?}");
        }
    }

    struct Line(NormedSpace, alloc::vec::Vec<f64>);

    impl GridSamples for Line {
        fn domain_dim(&self) -> usize {
            1
        }
        fn target(&self) -> &NormedSpace {
            &self.0
        }
        fn sample_count(&self) -> usize {
            self.1.len()
        }
        fn point_into(&self, index: usize, out: &mut [f64]) {
            out[0] = index as f64 / (self.1.len() - 1) as f64;
        }
        fn value(&self, index: usize) -> &[f64] {
            core::slice::from_ref(&self.1[index])
        }
        fn forward_neighbors(&self, index: usize, visit: &mut dyn FnMut(usize)) {
            if index + 1 < self.1.len() {
                visit(index + 1)
            }
        }
    }

    #[test]
    fn lipschitz_examples() {
        let r = NormedSpace::euclidean(1).unwrap();
        let constant = Line(r, alloc::vec![2.0; 5]);
        assert_eq!(lipschitz_estimate(&constant, DomainMetric::Euclidean, PairMode::Adjacent).unwrap(), 0.0);
        let identity = Line(r, (0..9).map(|i| i as f64 / 8.0).collect());
        for mode in [PairMode::Adjacent, PairMode::AllPairs] {
            let l = lipschitz_estimate(&identity, DomainMetric::MaxNorm, mode).unwrap();
            assert!((l - 1.0).abs() < 1e-12);
        }
        let single = Line(r, alloc::vec![1.0]);
        assert!(matches!(
            lipschitz_estimate(&single, DomainMetric::Euclidean, PairMode::Adjacent),
            Err(Error::TooFewSamples { .. })
        ));
    }

    fn vec_strategy(d: usize) -> impl Strategy<Value = alloc::vec::Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, d)
    }

    fn spaces() -> impl Strategy<Value = NormedSpace> {
        prop_oneof![
            (1.0f64..6.0).prop_map(|q| NormedSpace::lq(q, 4).unwrap()),
            Just(NormedSpace::lq(f64::INFINITY, 4).unwrap()),
            (1.0f64..6.0).prop_map(|q| NormedSpace::mixed(2, q, 2).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn norm_axioms(space in spaces(), x in vec_strategy(4), y in vec_strategy(4), a in -5.0f64..5.0) {
            let nx = space.norm(&x).unwrap();
            let ny = space.norm(&y).unwrap();
            let s: alloc::vec::Vec<f64> = x.iter().zip(&y).map(|(u, v)| u + v).collect();
            let scaled: alloc::vec::Vec<f64> = x.iter().map(|u| a * u).collect();
            let scale = 1.0 + nx + ny;
            prop_assert!(space.norm(&s).unwrap() <= nx + ny + 1e-12 * scale);
            prop_assert!((space.norm(&scaled).unwrap() - a.abs() * nx).abs() <= 1e-12 * (1.0 + a.abs() * nx));
            prop_assert!(nx >= 0.0);
        }

        #[test]
        fn four_point_inequality(q in prop_oneof![Just(1.5), Just(2.0), Just(3.0), Just(4.0), 1.1f64..8.0],
                                 x in vec_strategy(4), y in vec_strategy(4)) {
            let space = NormedSpace::lq(q, 4).unwrap();
            let UcParams { p, .. } = space.uc_params().unwrap();
            let scale = libm::pow(space.norm(&x).unwrap(), p) + libm::pow(space.norm(&y).unwrap(), p);
            prop_assert!(space.uc_residual(&x, &y).unwrap() >= -1e-12 * scale);
        }
    }
}
