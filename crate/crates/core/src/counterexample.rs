//! Explicit maps that are far from affine on every not-too-small ball.
//!
//! [`SawtoothCurve`] is the curve `f_m : [0,1] → ℓ_p^m` whose `i`-th
//! coordinate is the tent `dist(t, 2^{1−i}ℤ) / m^{1/p}`: stage `k` of its
//! dyadic construction adds a tent of height `1/(m^{1/p} 2^k)` in direction
//! `e_k` at every odd multiple of `2^{-k}`. It is 1-Lipschitz, vanishes at
//! both ends, and on any window of length at least `4/2^m` deviates from
//! every affine map by more than `(b−a)/(16 m^{1/p})`.
//!
//! [`LocalizedSawtooth`] rescales the curve into `[−2/√n, 2/√n]` and
//! continues linearly in a fresh direction `e_{m+1}` outside it.
//! [`CoordinateProduct`] applies it to each coordinate of `ℓ_2^n`, landing in
//! `ℓ_2^n(ℓ_p^{m+1})`.
//!
//! Each `*_certificate` function returns a midpoint certificate (a lower
//! bound on the sup distance to every affine map) together with the
//! threshold it must beat.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::midpoint_certificate;
use crate::error::{check_dim, Error, Result};
use crate::fmath;
use crate::sampler::Sampler;
use crate::space::NormedSpace;

/// Parameters `(m, p, n)`: curve depth, target exponent, domain dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    pub m: u32,
    pub p: f64,
    pub n: usize,
}

impl CounterexampleSpec {
    pub fn new(m: u32, p: f64, n: usize) -> Result<Self> {
        if m == 0 || m > 52 {
            return Err(Error::invalid("depth m must be in 1..=52"));
        }
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::invalid("p must be finite and at least 2"));
        }
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        Ok(CounterexampleSpec { m, p, n })
    }

    /// `m^{1/p}`.
    pub fn root_m(&self) -> f64 {
        fmath::pow(self.m as f64, 1.0 / self.p)
    }

    /// Smallest radius covered by the localized and ball statements,
    /// `32 / (√n 2^m)`.
    pub fn min_radius(&self) -> f64 {
        32.0 / (fmath::sqrt(self.n as f64) * fmath::pow2i(self.m as i32))
    }
}

/// The dyadic rational `num / 2^level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dyadic {
    pub num: u64,
    pub level: u32,
}

impl Dyadic {
    pub fn new(num: u64, level: u32) -> Self {
        Dyadic { num, level }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 * fmath::pow2i(-(self.level as i32))
    }
}

/// `f_m : [0,1] → ℓ_p^m`; stage `k ≤ m` is available as `f_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothCurve {
    spec: CounterexampleSpec,
    scale: f64,
    target: NormedSpace,
}

impl SawtoothCurve {
    pub fn new(m: u32, p: f64) -> Result<Self> {
        Self::from_spec(CounterexampleSpec::new(m, p, 1)?)
    }

    pub fn from_spec(spec: CounterexampleSpec) -> Result<Self> {
        let target = NormedSpace::lq(spec.p, spec.m as usize)?;
        Ok(SawtoothCurve { spec, scale: 1.0 / spec.root_m(), target })
    }

    pub fn spec(&self) -> CounterexampleSpec {
        self.spec
    }

    /// `ℓ_p^m`.
    pub fn target(&self) -> &NormedSpace {
        &self.target
    }

    /// `f_m(t)`; `out` has length `m`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        self.stage_into(self.spec.m, t, out);
    }

    /// Stage `f_k(t)`: the first `k` tents, remaining coordinates zero.
    pub fn stage_into(&self, k: u32, t: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let i = i as u32 + 1;
            *o = if i <= k {
                let s = t * fmath::pow2i(i as i32 - 1);
                let frac = s - fmath::floor(s);
                frac.min(1.0 - frac) * fmath::pow2i(1 - i as i32) * self.scale
            } else {
                0.0
            };
        }
    }

    /// Stage `f_k` at a dyadic rational, with the tent distances taken in
    /// integer arithmetic.
    pub fn stage_dyadic(&self, k: u32, x: Dyadic, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let i = i as u32 + 1;
            *o = if i > k || x.level < i - 1 {
                0.0
            } else {
                let period = 1u64 << (x.level + 1 - i);
                let r = x.num % period;
                let d = r.min(period - r);
                d as f64 * fmath::pow2i(-(x.level as i32)) * self.scale
            };
        }
    }

    pub fn eval_dyadic(&self, x: Dyadic, out: &mut [f64]) {
        self.stage_dyadic(self.spec.m, x, out);
    }
}

impl Sampler for SawtoothCurve {
    fn domain_dim(&self) -> usize {
        1
    }

    fn target(&self) -> &NormedSpace {
        &self.target
    }

    fn sample(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(1, x.len())?;
        check_dim(self.target.dim(), out.len())?;
        if !(0.0..=1.0).contains(&x[0]) {
            return Err(Error::invalid(format!("sawtooth is defined on [0, 1], got {}", x[0])));
        }
        self.eval_into(x[0], out);
        Ok(())
    }
}

/// `g : ℝ → ℓ_p^{m+1}`, `g(x) = (4/√n) f_m((√n/4) x + ½)` on `|x| ≤ 2/√n`
/// and `(|x| − 2/√n) e_{m+1}` outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedSawtooth {
    curve: SawtoothCurve,
    sqrt_n: f64,
    target: NormedSpace,
}

impl LocalizedSawtooth {
    pub fn new(spec: CounterexampleSpec) -> Result<Self> {
        let curve = SawtoothCurve::from_spec(spec)?;
        let target = NormedSpace::lq(spec.p, spec.m as usize + 1)?;
        Ok(LocalizedSawtooth { curve, sqrt_n: fmath::sqrt(spec.n as f64), target })
    }

    pub fn spec(&self) -> CounterexampleSpec {
        self.curve.spec
    }

    pub fn curve(&self) -> &SawtoothCurve {
        &self.curve
    }

    /// `ℓ_p^{m+1}`.
    pub fn target(&self) -> &NormedSpace {
        &self.target
    }

    /// Half-width `2/√n` of the sawtooth window.
    pub fn half_width(&self) -> f64 {
        2.0 / self.sqrt_n
    }

    /// `out` has length `m + 1`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let m = self.curve.spec.m as usize;
        let w = self.half_width();
        if fmath::abs(x) <= w {
            self.curve.eval_into(0.25 * self.sqrt_n * x + 0.5, &mut out[..m]);
            out[..m].iter_mut().for_each(|o| *o *= 4.0 / self.sqrt_n);
            out[m] = 0.0;
        } else {
            out[..m].iter_mut().for_each(|o| *o = 0.0);
            out[m] = fmath::abs(x) - w;
        }
    }

    /// Image in `x` of the curve parameter `z ∈ [0,1]`.
    fn x_of(&self, z: f64) -> f64 {
        4.0 / self.sqrt_n * (z - 0.5)
    }
}

impl Sampler for LocalizedSawtooth {
    fn domain_dim(&self) -> usize {
        1
    }

    fn target(&self) -> &NormedSpace {
        &self.target
    }

    fn sample(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(1, x.len())?;
        check_dim(self.target.dim(), out.len())?;
        self.eval_into(x[0], out);
        Ok(())
    }
}

/// `F(x_1,…,x_n) = (g(x_1),…,g(x_n))` into `ℓ_2^n(ℓ_p^{m+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateProduct {
    g: LocalizedSawtooth,
    target: NormedSpace,
}

impl CoordinateProduct {
    pub fn new(spec: CounterexampleSpec) -> Result<Self> {
        let g = LocalizedSawtooth::new(spec)?;
        let target = NormedSpace::mixed(spec.n, spec.p, spec.m as usize + 1)?;
        Ok(CoordinateProduct { g, target })
    }

    pub fn localized(&self) -> &LocalizedSawtooth {
        &self.g
    }

    /// `ℓ_2^n(ℓ_p^{m+1})`.
    pub fn target(&self) -> &NormedSpace {
        &self.target
    }
}

impl Sampler for CoordinateProduct {
    fn domain_dim(&self) -> usize {
        self.g.curve.spec.n
    }

    fn target(&self) -> &NormedSpace {
        &self.target
    }

    fn sample(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.domain_dim(), x.len())?;
        check_dim(self.target.dim(), out.len())?;
        let block = self.g.target.dim();
        for (xi, chunk) in x.iter().zip(out.chunks_exact_mut(block)) {
            self.g.eval_into(*xi, chunk);
        }
        Ok(())
    }
}

/// A midpoint certificate and the value it has to exceed.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// `½‖h(mid) − (h(left) + h(right))/2‖` at `triple`.
    pub certificate: f64,
    pub threshold: f64,
    /// `certificate > threshold`.
    pub pass: bool,
    /// `(left, mid, right)` in the parameter of the restricted line.
    pub triple: [f64; 3],
    /// Dyadic level of the interval whose midpoint was used; `None` when the
    /// outer triple `(y−r, y, y+r)` was used.
    pub level: Option<u32>,
    /// Coordinate axis the ball certificate was restricted to.
    pub axis: Option<usize>,
}

const REL_SLACK: f64 = 1e-12;

/// Certificate on a window `[a, b] ⊆ [0, 1]` of the sawtooth: with `k` such
/// that `4/2^k ≤ b − a < 8/2^k`, a level-`(k−1)` dyadic interval fits inside
/// the window, and its midpoint deviation is `1/(m^{1/p} 2^k)`.
pub fn interval_certificate(spec: CounterexampleSpec, a: f64, b: f64) -> Result<CertificateReport> {
    let m = spec.m;
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::precondition(format!("need 0 ≤ a < b ≤ 1, got [{a}, {b}]")));
    }
    let width = b - a;
    if width < 4.0 * fmath::pow2i(-(m as i32)) * (1.0 - REL_SLACK) {
        return Err(Error::precondition(format!("window length {width} is below 4/2^m")));
    }
    let mut k = 2u32;
    while 4.0 * fmath::pow2i(-(k as i32)) > width * (1.0 + REL_SLACK) {
        k += 1;
    }
    let level = k - 1;
    let unit = fmath::pow2i(level as i32);
    let j = fmath::ceil(a * unit - REL_SLACK * unit) as u64;
    if (j + 1) as f64 / unit > b + REL_SLACK {
        return Err(Error::precondition("no dyadic interval fits the window"));
    }
    let curve = SawtoothCurve::from_spec(spec)?;
    let d = m as usize;
    let (mut l, mut c, mut r) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    curve.eval_dyadic(Dyadic::new(2 * j, k), &mut l);
    curve.eval_dyadic(Dyadic::new(2 * j + 1, k), &mut c);
    curve.eval_dyadic(Dyadic::new(2 * j + 2, k), &mut r);
    let certificate = midpoint_certificate(curve.target(), &l, &c, &r);
    let threshold = width / (16.0 * spec.root_m());
    Ok(CertificateReport {
        certificate,
        threshold,
        pass: certificate > threshold,
        triple: [Dyadic::new(2 * j, k).to_f64(), Dyadic::new(2 * j + 1, k).to_f64(), Dyadic::new(2 * j + 2, k).to_f64()],
        level: Some(level),
        axis: None,
    })
}

fn localized_triples(g: &LocalizedSawtooth, y: f64, r: f64) -> Vec<([f64; 3], Option<u32>)> {
    let mut out = Vec::new();
    let w = g.half_width();
    let (lo, hi) = ((y - r).max(-w), (y + r).min(w));
    // Window in the curve parameter z = (√n/4) x + ½.
    let za = 0.25 * g.sqrt_n * lo + 0.5;
    let zb = 0.25 * g.sqrt_n * hi + 0.5;
    for level in 0..g.curve.spec.m {
        let unit = fmath::pow2i(level as i32);
        let j = fmath::ceil(za * unit - REL_SLACK * unit);
        if (j + 1.0) / unit > zb + REL_SLACK {
            continue;
        }
        let left = g.x_of(j / unit).max(lo);
        let right = g.x_of((j + 1.0) / unit).min(hi);
        out.push(([left, 0.5 * (left + right), right], Some(level)));
    }
    // Last, so that ties go to a dyadic interval.
    out.push(([y - r, y, y + r], None));
    out
}

fn best_triple<F: FnMut(f64, &mut [f64])>(
    space: &NormedSpace,
    triples: &[([f64; 3], Option<u32>)],
    mut eval: F,
) -> (f64, [f64; 3], Option<u32>) {
    let d = space.dim();
    let (mut l, mut c, mut r) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut best = (-1.0, [0.0; 3], None);
    for (t, level) in triples {
        eval(t[0], &mut l);
        eval(t[1], &mut c);
        eval(t[2], &mut r);
        let cert = midpoint_certificate(space, &l, &c, &r);
        if cert > best.0 {
            best = (cert, *t, *level);
        }
    }
    best
}

/// Certificate for `g` on `[y − r, y + r]` with `|y| ≤ 1/√n` and
/// `r ≥ 32/(√n 2^m)`.
///
/// Up to `r ≤ 8/√n` the window meets the sawtooth part of `g` in an interval
/// of length at least `r/2`; the best midpoint over all dyadic intervals
/// lying inside it is used. Beyond that the outer triple `(y−r, y, y+r)`
/// sees `g` rise linearly on both sides while `g(y)` has no `e_{m+1}`
/// component. The outer triple is always tried as well.
pub fn localized_certificate(spec: CounterexampleSpec, y: f64, r: f64) -> Result<CertificateReport> {
    let g = LocalizedSawtooth::new(spec)?;
    let sqrt_n = g.sqrt_n;
    if !(fmath::abs(y) <= (1.0 + REL_SLACK) / sqrt_n) {
        return Err(Error::precondition(format!("need |y| ≤ 1/√n, got {y}")));
    }
    if !(r.is_finite() && r >= spec.min_radius() * (1.0 - REL_SLACK)) {
        return Err(Error::precondition(format!("need r ≥ 32/(√n 2^m) = {}, got {r}", spec.min_radius())));
    }
    let triples = if r <= 8.0 / sqrt_n {
        localized_triples(&g, y, r)
    } else {
        vec![([y - r, y, y + r], None)]
    };
    let (certificate, triple, level) = best_triple(g.target(), &triples, |x, out| g.eval_into(x, out));
    let threshold = r / (16.0 * spec.root_m());
    Ok(CertificateReport { certificate, threshold, pass: certificate > threshold, triple, level, axis: None })
}

/// Certificate for `F` on the Euclidean ball `y + rB ⊆ B`.
///
/// Some coordinate has `|y_i| < 1/√n`; along `y + t e_i` every block of `F`
/// but the `i`-th is constant, so the localized certificate for `g` at
/// `(y_i, r)` carries over, evaluated here directly on `F` in the mixed norm.
pub fn ball_certificate(spec: CounterexampleSpec, y: &[f64], r: f64) -> Result<CertificateReport> {
    check_dim(spec.n, y.len())?;
    let f = CoordinateProduct::new(spec)?;
    let norm = fmath::sqrt(y.iter().map(|v| v * v).sum::<f64>());
    if !(norm < 1.0) {
        return Err(Error::precondition(format!("need ‖y‖₂ < 1, got {norm}")));
    }
    if !(norm + r <= 1.0 + REL_SLACK) {
        return Err(Error::precondition(format!("ball of radius {r} around y leaves the unit ball")));
    }
    if !(r.is_finite() && r >= spec.min_radius() * (1.0 - REL_SLACK)) {
        return Err(Error::precondition(format!("need r ≥ 32/(√n 2^m) = {}, got {r}", spec.min_radius())));
    }
    let cutoff = 1.0 / fmath::sqrt(spec.n as f64);
    let axis = y
        .iter()
        .position(|v| fmath::abs(*v) < cutoff)
        .ok_or_else(|| Error::invalid("no coordinate with |y_i| < 1/√n"))?;
    let line = localized_certificate(spec, y[axis], r)?;
    let mut x = y.to_vec();
    let (certificate, triple, level) =
        best_triple(f.target(), &[(line.triple, line.level)], |t, out| {
            x[axis] = t;
            f.sample(&x, out).expect("dimensions agree");
        });
    Ok(CertificateReport {
        certificate,
        threshold: line.threshold,
        pass: certificate > line.threshold,
        triple,
        level,
        axis: Some(axis),
    })
}

/// Every window `[i/2^m, j/2^m]` with `j − i ≥ 4`, in lexicographic order.
pub fn grid_windows(m: u32) -> Vec<(f64, f64)> {
    let top = 1u64 << m;
    let unit = fmath::pow2i(-(m as i32));
    let mut out = Vec::new();
    for i in 0..=top {
        for j in i + 4..=top {
            out.push((i as f64 * unit, j as f64 * unit));
        }
    }
    out
}

/// Dyadic intervals `[j/2^ℓ, (j+1)/2^ℓ]` of length at least `4/2^m`.
pub fn dyadic_windows(m: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for level in 0..=m.saturating_sub(2) {
        let unit = fmath::pow2i(-(level as i32));
        for j in 0..1u64 << level {
            out.push((j as f64 * unit, (j + 1) as f64 * unit));
        }
    }
    out
}

/// Centers `y ∈ [−1/√n, 1/√n]` (`2·steps + 1` evenly spaced) crossed with
/// radii doubling from `32/(√n 2^m)` up to just past `8/√n`.
pub fn localized_cells(spec: CounterexampleSpec, steps: u32) -> Vec<(f64, f64)> {
    let reach = 1.0 / fmath::sqrt(spec.n as f64);
    let mut radii = Vec::new();
    let mut r = spec.min_radius();
    while r <= 16.0 * reach {
        radii.push(r);
        r *= 2.0;
    }
    let mut out = Vec::new();
    for s in 0..=2 * steps {
        let y = reach * (s as f64 / steps.max(1) as f64 - 1.0);
        for &r in &radii {
            out.push((y, r));
        }
    }
    out
}
