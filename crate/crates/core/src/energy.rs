//! Dyadic energies of curves sampled on `2^m + 1` equispaced points.
//!
//! For a curve `h : [a, b] → Y` and a level `j ≤ m`,
//!
//! ```text
//! E_j(h) = 2^{-j} Σ_{k<2^j} ‖ (h(t_{k+1}) − h(t_k)) / (2^{-j}(b−a)) ‖^p,   t_k = a + k 2^{-j}(b−a)
//! ```
//!
//! `E_j` is non-decreasing in `j` (convexity of `‖·‖^p`), and in a space with
//! four-point constants `(p, K)` the growth from `E_0` to `E_m` is at least
//! `(2K)^{-p}` times the worst normalized chord deviation at level `m`.
//! That gain is what [`GridFunction1D::gain_check`] measures.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::fmath;
use crate::sampler::Sampler;
use crate::space::{GridSamples, NormedSpace, UcParams};

/// Finest supported level; `2^MAX_LEVEL + 1` samples.
pub const MAX_LEVEL: u32 = 30;

/// A curve `h : [a, b] → Y` sampled at `a + k 2^{-m}(b − a)`, `k = 0..=2^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction1D {
    space: NormedSpace,
    a: f64,
    b: f64,
    m: u32,
    values: Vec<f64>,
}

/// Energies at every level plus the uniform-convexity gain check.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `E_0, …, E_m`.
    pub energies: Vec<f64>,
    /// `‖h(b)−h(a)‖^p/(b−a)^p + (2K)^{-p} max_k ‖h(t_k) − L(t_k)‖^p/(b−a)^p`.
    pub gain_bound: f64,
    /// `max_k ‖h(t_k) − L(t_k)‖` over the level-`m` grid, unnormalized.
    pub max_deviation: f64,
    /// Whether the energies are non-decreasing within the tolerance.
    pub monotone: bool,
    /// `E_m ≥ gain_bound − tol`.
    pub pass: bool,
}

impl GridFunction1D {
    /// `values` holds `2^m + 1` vectors of `space.dim()` coordinates, back to back.
    pub fn new(space: NormedSpace, a: f64, b: f64, m: u32, values: Vec<f64>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite);
        }
        if a >= b {
            return Err(Error::invalid("interval endpoints must satisfy a < b"));
        }
        if m > MAX_LEVEL {
            return Err(Error::invalid("resolution level too large"));
        }
        check_dim(((1usize << m) + 1) * space.dim(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(GridFunction1D { space, a, b, m, values })
    }

    pub fn from_fn(
        space: NormedSpace,
        a: f64,
        b: f64,
        m: u32,
        mut f: impl FnMut(f64, &mut [f64]),
    ) -> Result<Self> {
        if m > MAX_LEVEL {
            return Err(Error::invalid("resolution level too large"));
        }
        let d = space.dim();
        let count = (1usize << m) + 1;
        let mut values = vec![0.0; count * d];
        let step = fmath::pow2i(-(m as i32));
        for (k, out) in values.chunks_exact_mut(d).enumerate() {
            f(a + (k as f64 * step) * (b - a), out);
        }
        Self::new(space, a, b, m, values)
    }

    /// Samples a one-dimensional [`Sampler`] on the level-`m` grid of `[a, b]`.
    pub fn from_sampler<S: Sampler + ?Sized>(sampler: &S, a: f64, b: f64, m: u32) -> Result<Self> {
        check_dim(1, sampler.domain_dim())?;
        let mut failure = None;
        let g = Self::from_fn(*sampler.target(), a, b, m, |t, out| {
            if let Err(e) = sampler.sample(&[t], out) {
                failure.get_or_insert(e);
            }
        });
        match failure {
            Some(e) => Err(e),
            None => g,
        }
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of samples, `2^m + 1`.
    pub fn len(&self) -> usize {
        (1usize << self.m) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `a + k 2^{-m} (b − a)`.
    pub fn point(&self, k: usize) -> f64 {
        self.a + (k as f64 * fmath::pow2i(-(self.m as i32))) * (self.b - self.a)
    }

    pub fn value(&self, k: usize) -> &[f64] {
        let d = self.space.dim();
        &self.values[k * d..(k + 1) * d]
    }

    /// The chord `L(t) = ((t−a)/(b−a)) h(b) + ((b−t)/(b−a)) h(a)`, for any real `t`.
    pub fn linear_interp(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.space.dim()];
        self.linear_interp_into(t, &mut out);
        out
    }

    pub fn linear_interp_into(&self, t: f64, out: &mut [f64]) {
        let len = self.b - self.a;
        let (wb, wa) = ((t - self.a) / len, (self.b - t) / len);
        let (ha, hb) = (self.value(0), self.value(self.len() - 1));
        for ((o, x), y) in out.iter_mut().zip(ha).zip(hb) {
            *o = wb * y + wa * x;
        }
    }

    /// `E_j` computed on the level-`j` subsample of the stored grid, summed in
    /// ascending `k`.
    pub fn energy(&self, j: u32, p: f64) -> Result<f64> {
        if j > self.m {
            return Err(Error::invalid("energy level exceeds grid resolution"));
        }
        let stride = 1usize << (self.m - j);
        let steps = 1usize << j;
        let width = fmath::pow2i(-(j as i32)) * (self.b - self.a);
        let mut acc = 0.0;
        for k in 0..steps {
            let d = self
                .space
                .distance_unchecked(self.value((k + 1) * stride), self.value(k * stride));
            acc += fmath::pow(d / width, p);
        }
        Ok(acc * fmath::pow2i(-(j as i32)))
    }

    /// `E_0, …, E_m`.
    pub fn energies(&self, p: f64) -> Vec<f64> {
        (0..=self.m).map(|j| self.energy(j, p).expect("level within range")).collect()
    }

    /// `(k, ‖h(t_k) − L(t_k)‖)` maximizing the chord deviation on the full
    /// grid; the first maximizer wins ties.
    pub fn max_chord_deviation(&self) -> (usize, f64) {
        let mut chord = vec![0.0; self.space.dim()];
        let mut best = (0, 0.0);
        for k in 0..self.len() {
            self.linear_interp_into(self.point(k), &mut chord);
            let dev = self.space.distance_unchecked(self.value(k), &chord);
            if dev > best.1 {
                best = (k, dev);
            }
        }
        best
    }

    /// Checks `E_m ≥ ‖h(b)−h(a)‖^p/(b−a)^p + (2K)^{-p} max_k ‖h(t_k)−L(t_k)‖^p/(b−a)^p`
    /// with additive slack `tol`. The inequality holds whenever the target
    /// norm satisfies the four-point inequality with `uc`.
    pub fn gain_check(&self, uc: UcParams, tol: f64) -> EnergyReport {
        let UcParams { p, k } = uc;
        let energies = self.energies(p);
        let len = self.b - self.a;
        let chord = self.space.distance_unchecked(self.value(self.len() - 1), self.value(0));
        let (_, max_deviation) = self.max_chord_deviation();
        let gain_bound = fmath::pow(chord / len, p)
            + fmath::pow(max_deviation / len, p) / fmath::pow(2.0 * k, p);
        let monotone = energies.windows(2).all(|w| w[1] >= w[0] - tol);
        let pass = energies[self.m as usize] >= gain_bound - tol;
        EnergyReport { energies, gain_bound, max_deviation, monotone, pass }
    }

    /// `E_j ≥ E_{j−1} − tol` for every `1 ≤ j ≤ m` (vacuous when `m = 0`).
    pub fn is_monotone(&self, p: f64, tol: f64) -> bool {
        self.energies(p).windows(2).all(|w| w[1] >= w[0] - tol)
    }

    /// `½ ‖h(mid) − (h(left) + h(right))/2‖` for grid indices `left < right`
    /// with `right − left` even.
    ///
    /// For every affine `A`, `h(mid) − avg = (h−A)(mid) − ((h−A)(left) + (h−A)(right))/2`,
    /// so this lower-bounds `max ‖h − A‖` over the three points, hence over
    /// any window containing them.
    pub fn midpoint_certificate(&self, left: usize, right: usize) -> Result<f64> {
        if right >= self.len() || left >= right {
            return Err(Error::invalid("certificate indices out of range"));
        }
        if (right - left) % 2 != 0 {
            return Err(Error::invalid("midpoint of the window is not a grid point"));
        }
        Ok(midpoint_certificate(
            &self.space,
            self.value(left),
            self.value((left + right) / 2),
            self.value(right),
        ))
    }
}

/// `½ ‖mid − (left + right)/2‖` for three values at collinear, equally
/// spaced points.
pub fn midpoint_certificate(space: &NormedSpace, left: &[f64], mid: &[f64], right: &[f64]) -> f64 {
    let mut stack = [0.0f64; 32];
    let mut heap;
    let buf: &mut [f64] = if mid.len() <= stack.len() {
        &mut stack[..mid.len()]
    } else {
        heap = vec![0.0; mid.len()];
        &mut heap
    };
    for (((o, l), c), r) in buf.iter_mut().zip(left).zip(mid).zip(right) {
        *o = c - 0.5 * (l + r);
    }
    0.5 * space.norm_unchecked(buf)
}

impl GridSamples for GridFunction1D {
    fn domain_dim(&self) -> usize {
        1
    }

    fn target(&self) -> &NormedSpace {
        &self.space
    }

    fn sample_count(&self) -> usize {
        self.len()
    }

    fn point_into(&self, index: usize, out: &mut [f64]) {
        out[0] = self.point(index);
    }

    fn value(&self, index: usize) -> &[f64] {
        GridFunction1D::value(self, index)
    }

    fn forward_neighbors(&self, index: usize, visit: &mut dyn FnMut(usize)) {
        if index + 1 < self.len() {
            visit(index + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::space::{lipschitz_estimate, DomainMetric, PairMode};
    use proptest::prelude::*;

    fn l2(d: usize) -> NormedSpace {
        NormedSpace::euclidean(d).unwrap()
    }

    /// The first sawtooth stage: `0, ½e₁, 0` on `[0, 1]`.
    fn first_stage() -> GridFunction1D {
        GridFunction1D::new(l2(2), 0.0, 1.0, 1, vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn interpolation_examples() {
        let h = GridFunction1D::new(l2(2), 0.0, 1.0, 0, vec![0.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(h.linear_interp(0.0), vec![0.0, 0.0]);
        assert_eq!(h.linear_interp(0.5), vec![1.0, 0.0]);
        assert_eq!(h.linear_interp(0.25), vec![0.5, 0.0]);
        // Defined off the interval as well.
        assert_eq!(h.linear_interp(2.0), vec![4.0, 0.0]);
    }

    #[test]
    fn energy_examples() {
        let h = GridFunction1D::new(l2(1), -1.0, 3.0, 0, vec![1.0, -3.0]).unwrap();
        // ‖h(b)−h(a)‖^p / (b−a)^p = 1 for p = 3.
        assert_eq!(h.energy(0, 3.0).unwrap(), 1.0);

        let v = [0.6, -0.8, 0.25];
        let space = NormedSpace::lq(3.0, 3).unwrap();
        let line = GridFunction1D::from_fn(space, 0.0, 2.0, 5, |t, out| {
            for (o, c) in out.iter_mut().zip(v) {
                *o = t * c;
            }
        })
        .unwrap();
        let expect = libm::pow(space.norm(&v).unwrap(), 3.0);
        for j in 0..=5 {
            assert!((line.energy(j, 3.0).unwrap() - expect).abs() < 1e-12);
        }

        let f1 = first_stage();
        assert_eq!(f1.energy(0, 2.0).unwrap(), 0.0);
        assert_eq!(f1.energy(1, 2.0).unwrap(), 1.0);
        assert!(f1.energy(2, 2.0).is_err());
    }

    #[test]
    fn gain_check_examples() {
        let linear = GridFunction1D::from_fn(l2(1), 0.0, 1.0, 4, |t, o| o[0] = 0.5 * t).unwrap();
        let r = linear.gain_check(UcParams::new(2.0, 1.0).unwrap(), 1e-9);
        assert!(r.pass && r.monotone);
        assert!(r.max_deviation < 1e-15);
        assert!((r.gain_bound - r.energies[4]).abs() < 1e-12);
        assert!((r.energies[0] - r.energies[4]).abs() < 1e-12);

        let tent = GridFunction1D::from_fn(l2(1), 0.0, 1.0, 1, |t, o| o[0] = t.min(1.0 - t)).unwrap();
        let r = tent.gain_check(UcParams::new(2.0, 1.0).unwrap(), 1e-9);
        assert_eq!(r.energies, vec![0.0, 1.0]);
        assert_eq!(r.max_deviation, 0.5);
        assert_eq!(r.gain_bound, 1.0 / 16.0);
        assert!(r.pass);
    }

    #[test]
    fn monotonicity_examples() {
        assert!(first_stage().is_monotone(2.0, 0.0));
        let line = GridFunction1D::from_fn(l2(1), 0.0, 1.0, 3, |t, o| o[0] = t).unwrap();
        assert!(line.is_monotone(2.0, 1e-12));
        // A curve whose energy drops is impossible, but the check must be able to fail:
        // with negative slack an equal-energy curve is rejected.
        assert!(!line.is_monotone(2.0, -1e-3));
    }

    #[test]
    fn midpoint_certificate_examples() {
        let line = GridFunction1D::from_fn(l2(1), 0.0, 1.0, 3, |t, o| o[0] = 3.0 * t - 1.0).unwrap();
        assert!(line.midpoint_certificate(0, 8).unwrap() < 1e-15);
        assert_eq!(first_stage().midpoint_certificate(0, 2).unwrap(), 0.25);
        assert!(first_stage().midpoint_certificate(0, 1).is_err());
        assert!(first_stage().midpoint_certificate(0, 4).is_err());
        assert!(first_stage().midpoint_certificate(2, 0).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(GridFunction1D::new(l2(1), 1.0, 0.0, 0, vec![0.0, 0.0]).is_err());
        assert!(GridFunction1D::new(l2(1), 0.0, 1.0, 1, vec![0.0, 0.0]).is_err());
        assert_eq!(
            GridFunction1D::new(l2(1), 0.0, 1.0, 0, vec![0.0, f64::NAN]),
            Err(Error::NonFinite)
        );
    }

    fn corpus_space() -> impl Strategy<Value = NormedSpace> {
        prop_oneof![
            Just(NormedSpace::euclidean(4).unwrap()),
            Just(NormedSpace::lq(3.0, 4).unwrap()),
            Just(NormedSpace::lq(1.5, 3).unwrap()),
            Just(NormedSpace::lq(5.0, 2).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn energies_are_monotone(space in corpus_space(), m in 0u32..=8, seed in any::<u64>()) {
            let h = corpus::random_lipschitz_path(space, 0.0, 1.0, m, seed);
            let p = space.uc_params().unwrap().p;
            prop_assert!(h.is_monotone(p, 1e-9));
        }

        #[test]
        fn gain_bound_holds(space in corpus_space(), m in 0u32..=8, seed in any::<u64>()) {
            let h = corpus::random_lipschitz_path(space, -1.0, 0.5, m, seed);
            let report = h.gain_check(space.uc_params().unwrap(), 1e-9);
            prop_assert!(report.pass, "{report:?}");
        }

        #[test]
        fn energy_bounded_by_lipschitz_constant(space in corpus_space(), m in 1u32..=7, seed in any::<u64>()) {
            let h = corpus::random_lipschitz_path(space, 0.0, 2.0, m, seed);
            let lip = lipschitz_estimate(&h, DomainMetric::Euclidean, PairMode::Adjacent).unwrap();
            let p = space.uc_params().unwrap().p;
            let bound = libm::pow(lip, p);
            for e in h.energies(p) {
                prop_assert!(e <= bound * (1.0 + 1e-12) + 1e-12);
            }
            prop_assert!(lip <= 1.0 + 1e-9);
        }
    }
}
