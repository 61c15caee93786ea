//! Maps on a cube `x + [0, θ]^n` sampled on the lattice `x + θ 2^{-m} {0,…,2^m}^n`.
//!
//! Three things are computed here:
//!
//! * the multiscale deviation: the worst distance, over all axis-parallel
//!   lattice lines, between the map and the chord through the line's
//!   endpoints, divided by `θ`;
//! * the Walsh coefficients `{v_S}` of the multilinear interpolant of the
//!   `2^n` cube vertices, `g(u) = Σ_S (Π_{i∈S} u_i) v_S` in cube-local
//!   coordinates `u ∈ [0,1]^n`;
//! * the affine map `u ↦ v_∅ + Σ_i u_i v_{i}` obtained by dropping the
//!   higher-order Walsh terms, and its error on the corner sub-cube
//!   `x + [0, √ε θ]^n`.
//!
//! Subsets `S ⊆ {1,…,n}` are bit masks: bit `i` stands for coordinate `i+1`.
//! Everything is evaluated on lattice points only.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::affinefit::AffineMap;
use crate::error::{check_dim, Error, Result};
use crate::fmath;
use crate::sampler::Sampler;
use crate::space::{GridSamples, NormedSpace};

/// Soft size limits for dense cube storage; `(2^m + 1)^n` vectors are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeLimits {
    pub max_dim: usize,
    pub max_level: u32,
}

impl Default for CubeLimits {
    fn default() -> Self {
        CubeLimits { max_dim: 4, max_level: 8 }
    }
}

impl CubeLimits {
    /// Lifts the soft limits; only overflow of the sample count is rejected.
    pub fn unbounded() -> Self {
        CubeLimits { max_dim: usize::MAX, max_level: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunctionCube {
    space: NormedSpace,
    origin: Vec<f64>,
    theta: f64,
    m: u32,
    side: usize,
    values: Vec<f64>,
}

/// Location and size of the worst axis-line deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisDeviation {
    /// `max ‖f(y + kθ2^{-m}e_j) − L(kθ2^{-m})‖ / θ`.
    pub value: f64,
    /// Axis `j` (0-based).
    pub axis: usize,
    /// Lattice multi-index of the line's start `y` (its `axis` entry is 0).
    pub start: Vec<usize>,
    /// Step `k` along the line.
    pub step: usize,
}

fn sample_count(n: usize, side: usize) -> Option<usize> {
    let mut total = 1usize;
    for _ in 0..n {
        total = total.checked_mul(side)?;
    }
    Some(total)
}

impl GridFunctionCube {
    pub fn new(space: NormedSpace, origin: Vec<f64>, theta: f64, m: u32, values: Vec<f64>) -> Result<Self> {
        Self::with_limits(space, origin, theta, m, values, CubeLimits::default())
    }

    pub fn with_limits(
        space: NormedSpace,
        origin: Vec<f64>,
        theta: f64,
        m: u32,
        values: Vec<f64>,
        limits: CubeLimits,
    ) -> Result<Self> {
        let side = Self::validate_shape(origin.len(), theta, m, limits)?;
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let count = sample_count(origin.len(), side)
            .ok_or_else(|| Error::ResourceLimit("cube sample count overflows".into()))?;
        check_dim(count * space.dim(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(GridFunctionCube { space, origin, theta, m, side, values })
    }

    fn validate_shape(n: usize, theta: f64, m: u32, limits: CubeLimits) -> Result<usize> {
        if n == 0 {
            return Err(Error::invalid("cube dimension must be positive"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid("cube side must be positive and finite"));
        }
        if n > limits.max_dim || m > limits.max_level || m > 30 {
            return Err(Error::ResourceLimit(format!(
                "cube with n = {n}, m = {m} exceeds limits n ≤ {}, m ≤ {}",
                limits.max_dim, limits.max_level
            )));
        }
        Ok((1usize << m) + 1)
    }

    pub fn from_fn(
        space: NormedSpace,
        origin: Vec<f64>,
        theta: f64,
        m: u32,
        f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self> {
        Self::from_fn_with_limits(space, origin, theta, m, CubeLimits::default(), f)
    }

    pub fn from_fn_with_limits(
        space: NormedSpace,
        origin: Vec<f64>,
        theta: f64,
        m: u32,
        limits: CubeLimits,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let n = origin.len();
        let side = Self::validate_shape(n, theta, m, limits)?;
        let count = sample_count(n, side)
            .ok_or_else(|| Error::ResourceLimit("cube sample count overflows".into()))?;
        let d = space.dim();
        let mut values = vec![0.0; count * d];
        let mut multi = vec![0usize; n];
        let mut x = vec![0.0; n];
        let step = theta * fmath::pow2i(-(m as i32));
        for out in values.chunks_exact_mut(d) {
            for i in 0..n {
                x[i] = origin[i] + multi[i] as f64 * step;
            }
            f(&x, out);
            advance(&mut multi, side);
        }
        Self::with_limits(space, origin, theta, m, values, limits)
    }

    pub fn from_sampler<S: Sampler + ?Sized>(sampler: &S, origin: Vec<f64>, theta: f64, m: u32) -> Result<Self> {
        Self::from_sampler_with_limits(sampler, origin, theta, m, CubeLimits::default())
    }

    pub fn from_sampler_with_limits<S: Sampler + ?Sized>(
        sampler: &S,
        origin: Vec<f64>,
        theta: f64,
        m: u32,
        limits: CubeLimits,
    ) -> Result<Self> {
        check_dim(sampler.domain_dim(), origin.len())?;
        let mut failure = None;
        let cube = Self::from_fn_with_limits(*sampler.target(), origin, theta, m, limits, |x, out| {
            if let Err(e) = sampler.sample(x, out) {
                failure.get_or_insert(e);
            }
        });
        match failure {
            Some(e) => Err(e),
            None => cube,
        }
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    /// Domain dimension `n`.
    pub fn n(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Lattice points per axis, `2^m + 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.space.dim()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lattice spacing `θ 2^{-m}`.
    pub fn spacing(&self) -> f64 {
        self.theta * fmath::pow2i(-(self.m as i32))
    }

    /// Row-major position of a multi-index (last coordinate fastest).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.side + k)
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.side;
            flat /= self.side;
        }
    }

    fn axis_stride(&self, axis: usize) -> usize {
        self.side.pow((self.n() - 1 - axis) as u32)
    }

    pub fn value(&self, flat: usize) -> &[f64] {
        let d = self.space.dim();
        &self.values[flat * d..(flat + 1) * d]
    }

    pub fn value_at(&self, multi: &[usize]) -> &[f64] {
        self.value(self.flat_index(multi))
    }

    /// Absolute coordinates `x + θ 2^{-m} k` of a multi-index.
    pub fn point_of(&self, multi: &[usize], out: &mut [f64]) {
        let h = self.spacing();
        for ((o, x), k) in out.iter_mut().zip(&self.origin).zip(multi) {
            *o = x + *k as f64 * h;
        }
    }

    /// Value at the cube vertex selected by `mask` (bit `i` set: coordinate
    /// `i` at the far end).
    pub fn corner(&self, mask: usize) -> &[f64] {
        let top = self.side - 1;
        let flat = (0..self.n()).fold(0, |acc, i| acc * self.side + if mask >> i & 1 == 1 { top } else { 0 });
        self.value(flat)
    }

    /// Lattice index of an absolute point, if it is one (within `1e-9` of a
    /// lattice coordinate, relative to the lattice spacing).
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.n(), x.len())?;
        let scale = fmath::pow2i(self.m as i32) / self.theta;
        let mut flat = 0usize;
        for (xi, oi) in x.iter().zip(&self.origin) {
            let t = (xi - oi) * scale;
            let k = fmath::round(t);
            if fmath::abs(t - k) > 1e-9 * (1.0 + fmath::abs(t)) || k < 0.0 || k > (self.side - 1) as f64 {
                return Err(Error::OffGrid(format!("{x:?}")));
            }
            flat = flat * self.side + k as usize;
        }
        Ok(flat)
    }

    /// The multiscale deviation together with its (lexicographically first)
    /// maximizer over `(axis, start, step)`.
    pub fn multiscale_deviation(&self) -> AxisDeviation {
        let n = self.n();
        let top = self.side - 1;
        let d = self.space.dim();
        let mut chord = vec![0.0; d];
        let mut best = AxisDeviation { value: 0.0, axis: 0, start: vec![0; n], step: 0 };
        let mut start = vec![0usize; n];
        for axis in 0..n {
            let stride = self.axis_stride(axis);
            start.iter_mut().for_each(|s| *s = 0);
            loop {
                let base = self.flat_index(&start);
                let (f0, f1) = (self.value(base), self.value(base + top * stride));
                for k in 0..=top {
                    let w = k as f64 * fmath::pow2i(-(self.m as i32));
                    for ((c, a), b) in chord.iter_mut().zip(f0).zip(f1) {
                        *c = (1.0 - w) * a + w * b;
                    }
                    let dev = self.space.distance_unchecked(self.value(base + k * stride), &chord) / self.theta;
                    if dev > best.value {
                        best = AxisDeviation { value: dev, axis, start: start.clone(), step: k };
                    }
                }
                if !advance_skipping(&mut start, self.side, axis) {
                    break;
                }
            }
        }
        best
    }
}

/// Row-major increment of a multi-index; returns false after the last one.
fn advance(multi: &mut [usize], side: usize) -> bool {
    for slot in multi.iter_mut().rev() {
        *slot += 1;
        if *slot < side {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Like [`advance`] but holds coordinate `fixed` at zero.
fn advance_skipping(multi: &mut [usize], side: usize, fixed: usize) -> bool {
    for (i, slot) in multi.iter_mut().enumerate().rev() {
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

impl Sampler for GridFunctionCube {
    fn domain_dim(&self) -> usize {
        self.n()
    }

    fn target(&self) -> &NormedSpace {
        &self.space
    }

    fn sample(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.space.dim(), out.len())?;
        let flat = self.locate(x)?;
        out.copy_from_slice(self.value(flat));
        Ok(())
    }
}

impl GridSamples for GridFunctionCube {
    fn domain_dim(&self) -> usize {
        self.n()
    }

    fn target(&self) -> &NormedSpace {
        &self.space
    }

    fn sample_count(&self) -> usize {
        self.len()
    }

    fn point_into(&self, index: usize, out: &mut [f64]) {
        let mut multi = vec![0usize; self.n()];
        self.multi_index(index, &mut multi);
        self.point_of(&multi, out);
    }

    fn value(&self, index: usize) -> &[f64] {
        GridFunctionCube::value(self, index)
    }

    fn forward_neighbors(&self, index: usize, visit: &mut dyn FnMut(usize)) {
        let mut rest = index;
        for axis in (0..self.n()).rev() {
            if rest % self.side + 1 < self.side {
                visit(index + self.axis_stride(axis));
            }
            rest /= self.side;
        }
    }
}

/// Coefficients `{v_S}` of the multilinear interpolant of a cube's vertex
/// values, in cube-local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshCoefficients {
    n: usize,
    dim: usize,
    coeffs: Vec<f64>,
}

impl WalshCoefficients {
    /// `coeffs` holds `2^n` vectors in ascending mask order.
    pub fn from_raw(n: usize, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n == 0 || n >= usize::BITS as usize {
            return Err(Error::invalid("Walsh dimension out of range"));
        }
        check_dim((1usize << n) * dim, coeffs.len())?;
        Ok(WalshCoefficients { n, dim, coeffs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, mask: usize) -> &[f64] {
        &self.coeffs[mask * self.dim..(mask + 1) * self.dim]
    }

    pub fn raw(&self) -> &[f64] {
        &self.coeffs
    }

    /// `(mask, v_S)` in ascending mask order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.coeffs.chunks_exact(self.dim).enumerate()
    }

    /// `Σ_S W_S(y) v_S` with `W_S(y) = Π_{i∈S} y_i`.
    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(y, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.n, y.len())?;
        check_dim(self.dim, out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (mask, v) in self.iter() {
            let w = walsh_weight(mask, y);
            if w != 0.0 {
                for (o, c) in out.iter_mut().zip(v) {
                    *o += w * c;
                }
            }
        }
        Ok(())
    }
}

/// `Π_{i ∈ mask} y_i`.
pub fn walsh_weight(mask: usize, y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, v)| *v)
        .product()
}

/// Walsh coefficients of the map `u ↦ f(x + θu)`, built one dimension at a
/// time: the coefficients of the two faces `u_n = 0` and `u_n = 1` combine as
/// `v_S = v⁰_S` for `n ∉ S` and `v_S = v¹_{S∖n} − v⁰_{S∖n}` for `n ∈ S`.
/// Only the `2^n` vertex values are read.
pub fn walsh_coefficients(f: &GridFunctionCube) -> WalshCoefficients {
    let n = f.n();
    let dim = f.space.dim();
    let vertices: Vec<&[f64]> = (0..1usize << n).map(|mask| f.corner(mask)).collect();
    WalshCoefficients { n, dim, coeffs: combine_faces(&vertices) }
}

fn combine_faces(vertices: &[&[f64]]) -> Vec<f64> {
    if vertices.len() == 1 {
        return vertices[0].to_vec();
    }
    let half = vertices.len() / 2;
    let low = combine_faces(&vertices[..half]);
    let high = combine_faces(&vertices[half..]);
    let mut out = low.clone();
    out.extend(high.iter().zip(&low).map(|(a, b)| a - b));
    out
}

/// Outcome of comparing a cube map with its Walsh expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshBoundsReport {
    /// Measured multiscale deviation.
    pub deviation: f64,
    /// `max_{S≠∅} (‖v_S‖/θ) / 2^{|S|−1}`.
    pub max_coeff_ratio: f64,
    /// `‖v_S‖/θ ≤ 2^{|S|−1} + tol` for every nonempty `S`.
    pub coeff_ok: bool,
    /// `max_k ‖f − g‖ / θ` over the whole lattice.
    pub approx_max: f64,
    /// `approx_max ≤ ε n + tol`.
    pub approx_ok: bool,
}

/// Checks the coefficient growth bound (which holds for maps that are
/// 1-Lipschitz in the Euclidean metric) and the lattice approximation bound
/// `εn` (which holds when the multiscale deviation is at most `ε`). Both are
/// evaluated in normalized units, i.e. for `u ↦ f(x+θu)/θ`.
pub fn walsh_bounds_check(f: &GridFunctionCube, eps: f64, tol: f64) -> WalshBoundsReport {
    let w = walsh_coefficients(f);
    let theta = f.theta;
    let mut max_coeff_ratio = 0.0f64;
    let mut coeff_ok = true;
    for (mask, v) in w.iter().skip(1) {
        let size = mask.count_ones() as i32;
        let allowed = fmath::pow2i(size - 1);
        let norm = f.space.norm_unchecked(v) / theta;
        max_coeff_ratio = max_coeff_ratio.max(norm / allowed);
        coeff_ok &= norm <= allowed + tol;
    }
    let approx_max = max_expansion_error(f, &w, |_| true) / theta;
    let n = f.n() as f64;
    WalshBoundsReport {
        deviation: f.multiscale_deviation().value,
        max_coeff_ratio,
        coeff_ok,
        approx_max,
        approx_ok: approx_max <= eps * n + tol,
    }
}

fn max_expansion_error(f: &GridFunctionCube, w: &WalshCoefficients, mut keep: impl FnMut(&[usize]) -> bool) -> f64 {
    let n = f.n();
    let unit = fmath::pow2i(-(f.m as i32));
    let mut multi = vec![0usize; n];
    let mut u = vec![0.0; n];
    let mut g = vec![0.0; f.space.dim()];
    let mut worst = 0.0f64;
    for flat in 0..f.len() {
        f.multi_index(flat, &mut multi);
        if !keep(&multi) {
            continue;
        }
        for (ui, k) in u.iter_mut().zip(&multi) {
            *ui = *k as f64 * unit;
        }
        w.eval_into(&u, &mut g).expect("dimensions agree");
        worst = worst.max(f.space.distance_unchecked(f.value(flat), &g));
    }
    worst
}

/// Affine map extracted from the first-order Walsh terms.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshAffine {
    /// `A(z) = v_∅ + Σ_i ((z_i − x_i)/θ) v_{i}` in absolute coordinates.
    pub map: AffineMap,
    /// `max ‖f − A‖` over lattice points of `x + [0, √ε θ]^n`.
    pub err_on_subcube: f64,
    /// `8 n² ε θ`.
    pub bound: f64,
}

/// Builds the first-order Walsh affine map and measures it on the corner
/// sub-cube of side `√ε θ`.
///
/// With `strict`, the resolution condition `2^m ≥ 2/ε ≥ 10n²` under which
/// `err_on_subcube ≤ bound` is guaranteed for 1-Lipschitz maps of
/// multiscale deviation at most `ε` is enforced.
pub fn affine_from_walsh(f: &GridFunctionCube, eps: f64, strict: bool) -> Result<WalshAffine> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid("ε must be finite and nonnegative"));
    }
    let n = f.n();
    if strict {
        // Relative slack absorbs the rounding in 2/ε at exact boundaries (e.g. ε = 0.05, n = 2).
        let ratio = 2.0 / eps;
        let lattice = fmath::pow2i(f.m as i32);
        let floor = 10.0 * (n * n) as f64;
        if !(eps > 0.0 && lattice >= ratio * (1.0 - 1e-12) && ratio >= floor * (1.0 - 1e-12)) {
            return Err(Error::precondition(format!(
                "need 2^m ≥ 2/ε ≥ 10n², got 2^m = {lattice}, 2/ε = {ratio}, 10n² = {floor}"
            )));
        }
    }
    let w = walsh_coefficients(f);
    let dim = f.space.dim();
    let theta = f.theta;
    let mut linear = vec![0.0; dim * n];
    let mut offset = w.get(0).to_vec();
    for i in 0..n {
        let v = w.get(1 << i);
        for r in 0..dim {
            let slope = v[r] / theta;
            linear[r * n + i] = slope;
            offset[r] -= slope * f.origin[i];
        }
    }
    let map = AffineMap::new(n, dim, linear, offset)?;

    let limit = fmath::floor(fmath::sqrt(eps) * fmath::pow2i(f.m as i32) * (1.0 + 1e-12));
    let limit = if limit > (f.side - 1) as f64 { f.side - 1 } else { limit as usize };
    let mut multi = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut a = vec![0.0; dim];
    let mut err_on_subcube = 0.0f64;
    for flat in 0..f.len() {
        f.multi_index(flat, &mut multi);
        if multi.iter().any(|k| *k > limit) {
            continue;
        }
        f.point_of(&multi, &mut x);
        map.eval_into(&x, &mut a)?;
        err_on_subcube = err_on_subcube.max(f.space.distance_unchecked(f.value(flat), &a));
    }
    Ok(WalshAffine { map, err_on_subcube, bound: 8.0 * (n * n) as f64 * eps * theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::space::{lipschitz_estimate, DomainMetric, PairMode};
    use proptest::prelude::*;

    fn scalar() -> NormedSpace {
        NormedSpace::euclidean(1).unwrap()
    }

    fn product_cube(m: u32) -> GridFunctionCube {
        GridFunctionCube::from_fn(scalar(), vec![0.0, 0.0], 1.0, m, |x, o| o[0] = x[0] * x[1]).unwrap()
    }

    /// Independent route to the Walsh coefficients: Möbius inversion over the
    /// vertex lattice, `v_S = Σ_{T⊆S} (−1)^{|S∖T|} f(T)`.
    fn mobius(f: &GridFunctionCube) -> Vec<f64> {
        let d = f.space().dim();
        let mut out = Vec::new();
        for s in 0..1usize << f.n() {
            let mut acc = vec![0.0; d];
            let mut t = s;
            loop {
                let sign = if (s & !t).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                for (a, v) in acc.iter_mut().zip(f.corner(t)) {
                    *a += sign * v;
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
            out.extend(acc);
        }
        out
    }

    #[test]
    fn indexing_round_trips() {
        let f = product_cube(2);
        assert_eq!(f.side(), 5);
        assert_eq!(f.len(), 25);
        let mut multi = [0usize; 2];
        for flat in 0..f.len() {
            f.multi_index(flat, &mut multi);
            assert_eq!(f.flat_index(&multi), flat);
        }
        assert_eq!(f.value_at(&[4, 2]), &[0.5]);
        assert_eq!(f.locate(&[0.75, 0.25]).unwrap(), f.flat_index(&[3, 1]));
        assert!(matches!(f.locate(&[0.3, 0.25]), Err(Error::OffGrid(_))));
        assert!(matches!(f.locate(&[1.25, 0.0]), Err(Error::OffGrid(_))));
    }

    #[test]
    fn size_limits() {
        let space = scalar();
        let err = GridFunctionCube::from_fn(space, vec![0.0; 5], 1.0, 1, |_, o| o[0] = 0.0);
        assert!(matches!(err, Err(Error::ResourceLimit(_))));
        let ok = GridFunctionCube::from_fn_with_limits(
            space,
            vec![0.0; 5],
            1.0,
            1,
            CubeLimits::unbounded(),
            |_, o| o[0] = 0.0,
        );
        assert_eq!(ok.unwrap().len(), 243);
    }

    #[test]
    fn deviation_examples() {
        let affine = GridFunctionCube::from_fn(NormedSpace::euclidean(2).unwrap(), vec![1.0, -1.0], 0.5, 3, |x, o| {
            o[0] = 2.0 * x[0] - x[1] + 1.0;
            o[1] = 0.25 * x[1];
        })
        .unwrap();
        assert!(affine.multiscale_deviation().value < 1e-14);
        for m in 0..5 {
            assert_eq!(product_cube(m).multiscale_deviation().value, 0.0);
        }
        // n = 1: max_k ‖f − L‖ / θ.
        let bump = GridFunctionCube::from_fn(scalar(), vec![0.0], 2.0, 2, |x, o| o[0] = x[0] * (2.0 - x[0])).unwrap();
        let dev = bump.multiscale_deviation();
        assert_eq!(dev.value, 0.5);
        assert_eq!((dev.axis, dev.step), (0, 2));
    }

    #[test]
    fn deviation_tie_break_is_lexicographic() {
        // Same bump along both axes: the first axis wins.
        let f = GridFunctionCube::from_fn(scalar(), vec![0.0, 0.0], 1.0, 2, |x, o| {
            o[0] = x[0] * (1.0 - x[0]) + x[1] * (1.0 - x[1])
        })
        .unwrap();
        let dev = f.multiscale_deviation();
        assert_eq!((dev.axis, dev.start.clone(), dev.step), (0, vec![0, 0], 2));
        assert_eq!(dev.value, 0.25);
    }

    #[test]
    fn walsh_examples() {
        let line = GridFunctionCube::from_fn(scalar(), vec![0.0], 1.0, 3, |x, o| o[0] = 3.0 - 2.0 * x[0]).unwrap();
        let w = walsh_coefficients(&line);
        assert_eq!(w.get(0), &[3.0]);
        assert_eq!(w.get(1), &[-2.0]);

        let w = walsh_coefficients(&product_cube(3));
        assert_eq!(w.raw(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(w.eval(&[0.5, 0.5]).unwrap(), vec![0.25]);

        let affine = GridFunctionCube::from_fn(scalar(), vec![0.0; 3], 1.0, 1, |x, o| {
            o[0] = 0.5 + x[0] - 2.0 * x[1] + 0.25 * x[2]
        })
        .unwrap();
        let w = walsh_coefficients(&affine);
        for (mask, v) in w.iter() {
            if mask.count_ones() >= 2 {
                assert!(v[0].abs() < 1e-15);
            }
        }
        assert!((w.eval(&[0.3, 0.7, 0.1]).unwrap()[0] - (0.5 + 0.3 - 1.4 + 0.025)).abs() < 1e-15);
    }

    #[test]
    fn bounds_check_examples() {
        let affine = GridFunctionCube::from_fn(NormedSpace::euclidean(2).unwrap(), vec![0.0, 0.0], 1.0, 4, |x, o| {
            o[0] = 0.6 * x[0];
            o[1] = 0.8 * x[1];
        })
        .unwrap();
        let r = walsh_bounds_check(&affine, 0.0, 1e-9);
        assert!(r.coeff_ok && r.approx_ok);
        assert!(r.approx_max < 1e-15);
    }

    #[test]
    fn affine_extraction_examples() {
        let f = GridFunctionCube::from_fn(scalar(), vec![2.0, -1.0], 0.5, 6, |x, o| o[0] = 0.3 * x[0] - 0.1 * x[1] + 4.0)
            .unwrap();
        let fit = affine_from_walsh(&f, 0.05, true).unwrap();
        assert!(fit.err_on_subcube < 1e-13);
        assert!((fit.bound - 8.0 * 4.0 * 0.05 * 0.5).abs() < 1e-15);
        let mut out = [0.0];
        fit.map.eval_into(&[10.0, 3.0], &mut out).unwrap();
        assert!((out[0] - (3.0 - 0.3 + 4.0)).abs() < 1e-12);

        // ε = 0 collapses the sub-cube to the origin.
        let fit = affine_from_walsh(&product_cube(4), 0.0, false).unwrap();
        assert_eq!(fit.err_on_subcube, 0.0);
        assert!(affine_from_walsh(&product_cube(4), 0.0, true).is_err());
        // 2^5 < 2/0.05.
        let coarse = GridFunctionCube::from_fn(scalar(), vec![0.0, 0.0], 1.0, 5, |_, o| o[0] = 0.0).unwrap();
        assert!(matches!(affine_from_walsh(&coarse, 0.05, true), Err(Error::Precondition(_))));
        // 2/ε = 20 < 10n².
        assert!(affine_from_walsh(&product_cube(6), 0.1, true).is_err());
        assert!(affine_from_walsh(&product_cube(6), 0.1, false).is_ok());
    }

    fn cube_space() -> impl Strategy<Value = NormedSpace> {
        prop_oneof![
            Just(NormedSpace::euclidean(3).unwrap()),
            Just(NormedSpace::lq(3.0, 2).unwrap()),
            Just(NormedSpace::mixed(2, 4.0, 2).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recursion_matches_mobius(space in cube_space(), n in 1usize..=4, seed in any::<u64>()) {
            let f = corpus::random_grid_cube(space, n, 1, seed);
            let w = walsh_coefficients(&f);
            let oracle = mobius(&f);
            for (a, b) in w.raw().iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn vertices_are_reproduced(space in cube_space(), n in 1usize..=4, seed in any::<u64>()) {
            let f = corpus::random_grid_cube(space, n, 2, seed);
            let w = walsh_coefficients(&f);
            for mask in 0..1usize << n {
                let y: Vec<f64> = (0..n).map(|i| (mask >> i & 1) as f64).collect();
                let g = w.eval(&y).unwrap();
                for (a, b) in g.iter().zip(f.corner(mask)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn coefficients_are_linear(n in 1usize..=3, s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let space = NormedSpace::euclidean(2).unwrap();
            let f = corpus::random_grid_cube(space, n, 1, s1);
            let g = corpus::random_grid_cube(space, n, 1, s2);
            let combo: Vec<f64> = f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect();
            let h = GridFunctionCube::new(space, f.origin().to_vec(), f.theta(), f.m(), combo).unwrap();
            let (wf, wg, wh) = (walsh_coefficients(&f), walsh_coefficients(&g), walsh_coefficients(&h));
            for ((x, y), z) in wf.raw().iter().zip(wg.raw()).zip(wh.raw()) {
                prop_assert!((a * x + b * y - z).abs() <= 1e-12);
            }
        }

        #[test]
        fn coefficient_growth_bound(space in cube_space(), n in 1usize..=3, theta in 0.25f64..2.0, seed in any::<u64>()) {
            let f = corpus::random_lipschitz_cube(space, vec![0.5; n], theta, 3, seed);
            let report = walsh_bounds_check(&f, f64::INFINITY, 1e-9);
            prop_assert!(report.coeff_ok, "{report:?}");
        }

        #[test]
        fn expansion_error_within_deviation_bound(space in cube_space(), n in 1usize..=3, seed in any::<u64>()) {
            let f = corpus::random_lipschitz_cube(space, vec![0.0; n], 1.0, 3, seed);
            let eps = f.multiscale_deviation().value;
            let report = walsh_bounds_check(&f, eps, 1e-9);
            prop_assert!(report.approx_ok, "{report:?}");
        }

        #[test]
        fn zero_deviation_iff_axis_affine(n in 1usize..=3, seed in any::<u64>(), bend in 0.0f64..1.0) {
            // Multilinear maps are affine along every axis; adding a product
            // of one coordinate with itself is not.
            let space = NormedSpace::euclidean(1).unwrap();
            let coeffs = corpus::random_grid_cube(space, n, 0, seed);
            let w = walsh_coefficients(&coeffs);
            let multilinear = GridFunctionCube::from_fn(space, vec![0.0; n], 1.0, 3, |x, o| {
                o[0] = w.eval(x).unwrap()[0];
            }).unwrap();
            prop_assert!(multilinear.multiscale_deviation().value < 1e-12);
            let bent = GridFunctionCube::from_fn(space, vec![0.0; n], 1.0, 3, |x, o| {
                o[0] = w.eval(x).unwrap()[0] + (bend + 0.01) * x[0] * x[0];
            }).unwrap();
            prop_assert!(bent.multiscale_deviation().value > 1e-3);
        }

        #[test]
        fn lipschitz_corpus_is_one_lipschitz(space in cube_space(), n in 1usize..=2, seed in any::<u64>()) {
            let f = corpus::random_lipschitz_cube(space, vec![-0.5; n], 1.0, 3, seed);
            let lip = lipschitz_estimate(&f, DomainMetric::Euclidean, PairMode::AllPairs).unwrap();
            prop_assert!(lip <= 1.0 + 1e-9);
        }
    }
}
