//! Closed-form radius bounds, evaluated in the base-2 log domain.
//!
//! The lower bounds for the approximability radius are doubly exponentially
//! small (`2^{-8192}` already at `n = 1, ε = ¼`), so every formula here is
//! written directly for `log₂` of the quantity and returned as a
//! [`LogScalar`].

use core::cmp::Ordering;
use core::fmt;

use alloc::format;

use crate::error::{Error, Result};
use crate::fmath;

/// A nonnegative number stored as its base-2 logarithm, with an explicit
/// flag for zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScalar {
    log2: f64,
    zero: bool,
}

/// Largest `|log₂|` for which [`LogScalar::to_f64`] converts.
pub const LINEAR_LIMIT: f64 = 900.0;

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar { log2: f64::NEG_INFINITY, zero: true };
    pub const ONE: LogScalar = LogScalar { log2: 0.0, zero: false };

    /// `2^log2`; `−∞` gives zero. `+∞` and NaN are rejected.
    pub fn from_log2(log2: f64) -> Result<Self> {
        if log2.is_nan() || log2 == f64::INFINITY {
            return Err(Error::NonFinite);
        }
        if log2 == f64::NEG_INFINITY {
            return Ok(Self::ZERO);
        }
        Ok(LogScalar { log2, zero: false })
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::invalid("LogScalar needs a finite nonnegative value"));
        }
        if x == 0.0 {
            return Ok(Self::ZERO);
        }
        Ok(LogScalar { log2: fmath::log2(x), zero: false })
    }

    /// `log₂` of the value; `−∞` for zero.
    pub fn log2(self) -> f64 {
        if self.zero {
            f64::NEG_INFINITY
        } else {
            self.log2
        }
    }

    pub fn is_zero(self) -> bool {
        self.zero
    }

    /// Linear value when `|log₂| < 900`.
    pub fn to_f64(self) -> Option<f64> {
        if self.zero {
            Some(0.0)
        } else if fmath::abs(self.log2) < LINEAR_LIMIT {
            Some(fmath::exp2(self.log2))
        } else {
            None
        }
    }

    pub fn mul(self, other: LogScalar) -> LogScalar {
        if self.zero || other.zero {
            return Self::ZERO;
        }
        LogScalar { log2: self.log2 + other.log2, zero: false }
    }

    /// Errors on division by zero.
    pub fn div(self, other: LogScalar) -> Result<LogScalar> {
        if other.zero {
            return Err(Error::invalid("division by zero"));
        }
        if self.zero {
            return Ok(Self::ZERO);
        }
        Ok(LogScalar { log2: self.log2 - other.log2, zero: false })
    }

    /// `x^e` for finite `e > 0`.
    pub fn powf(self, e: f64) -> Result<LogScalar> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::invalid("exponent must be positive and finite"));
        }
        if self.zero {
            return Ok(Self::ZERO);
        }
        Self::from_log2(self.log2 * e)
    }

    /// Total order: zero first, then by `log₂`.
    pub fn total_cmp(&self, other: &LogScalar) -> Ordering {
        self.log2().total_cmp(&other.log2())
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            write!(f, "0")
        } else {
            write!(f, "2^{}", self.log2)
        }
    }
}

/// Which lower bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerVariant {
    /// The general bound: `(ε)^{(16K/ε)^p}` for `n = 1`,
    /// `ε^{K^p n^{20(n+p)} / ε^{2p+2n−2}}` for `n ≥ 2`.
    Theorem,
    /// The sharper one-dimensional bound `(ε/8)^{(8K/ε)^p}`.
    Sharp1d,
}

/// Which sawtooth construction supplies the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperVariant {
    /// `ℝ → ℓ_p`: `r(ε) ≤ 4 / 2^m`.
    Interval,
    /// `ℓ_2^n → ℓ_2^n(ℓ_p^{m+1})`: `r(ε) ≤ 32 / (√n 2^m)`.
    Ball,
}

fn check_common(p: f64, k: f64) -> Result<()> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::invalid(format!("need p ≥ 2, got {p}")));
    }
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::invalid(format!("need K ≥ 1, got {k}")));
    }
    Ok(())
}

/// Lower bound on the approximability radius for maps from an
/// `n`-dimensional space into a space with four-point constants `(p, K)`.
pub fn lower_bound_r(n: usize, p: f64, k: f64, eps: f64, variant: LowerVariant) -> Result<LogScalar> {
    check_common(p, k)?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    // The bound is stated for ε < ½; the closed endpoint is admitted so the
    // formula can be evaluated at its boundary.
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::invalid(format!("need ε ∈ (0, ½], got {eps}")));
    }
    let log_eps = fmath::log2(eps);
    let log2 = match variant {
        LowerVariant::Theorem if n == 1 => fmath::pow(16.0 * k / eps, p) * log_eps,
        LowerVariant::Theorem => {
            let nf = n as f64;
            let exponent = p * fmath::log2(k)
                + 20.0 * (nf + p) * fmath::log2(nf)
                + (2.0 * p + 2.0 * nf - 2.0) * -log_eps;
            fmath::exp2(exponent) * log_eps
        }
        LowerVariant::Sharp1d => {
            if n != 1 {
                return Err(Error::invalid("the sharp bound is one-dimensional"));
            }
            fmath::pow(8.0 * k / eps, p) * fmath::log2(eps / 8.0)
        }
    };
    LogScalar::from_log2(log2)
}

/// `m` with `(8ε)^{-p}` (or `(16ε)^{-p}`) rounded down; values within
/// `1e-9` relative of an integer count as that integer.
fn depth_for(base: f64, p: f64, eps: f64) -> f64 {
    let raw = fmath::pow(base * eps, -p);
    let nearest = fmath::round(raw);
    if fmath::abs(raw - nearest) <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        fmath::floor(raw)
    }
}

/// Upper bound on the approximability radius from the sawtooth examples.
///
/// The examples exist for integer depths `m`, at `ε_m = 1/(8 m^{1/p})`
/// (interval) or `1/(16 m^{1/p})` (ball). Since the radius is nondecreasing
/// in `ε`, a general `ε` uses the largest `m` with `ε ≤ ε_m`.
pub fn upper_bound_r(n: usize, p: f64, eps: f64, variant: UpperVariant) -> Result<LogScalar> {
    check_common(p, 1.0)?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("need ε > 0, got {eps}")));
    }
    let log2 = match variant {
        UpperVariant::Interval => 2.0 - depth_for(8.0, p, eps),
        UpperVariant::Ball => fmath::log2(32.0 / fmath::sqrt(n as f64)) - depth_for(16.0, p, eps),
    };
    LogScalar::from_log2(log2)
}

fn check_net_inputs(n: usize, eps: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("need n ≥ 2"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("need ε ∈ (0, 1), got {eps}")));
    }
    Ok(())
}

/// Net scale `δ = exp(−K^p (n/ε)^{C(n+p)})`, as `log₂ δ`.
pub fn discretization_bound(n: usize, p: f64, k: f64, eps: f64, c: f64) -> Result<LogScalar> {
    check_common(p, k)?;
    check_net_inputs(n, eps)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("C must be positive and finite"));
    }
    let nf = n as f64;
    let exponent = p * fmath::log2(k) + c * (nf + p) * fmath::log2(nf / eps);
    LogScalar::from_log2(-fmath::exp2(exponent) * core::f64::consts::LOG2_E)
}

/// `log₂ ρ` for the net radius `ρ = ε^{K^p n^{20(n+p)} (32 c n D/ε)^{2p+2n−2}}`.
pub fn net_radius(n: usize, p: f64, k: f64, eps: f64, distortion: f64, extension: f64) -> Result<LogScalar> {
    check_common(p, k)?;
    check_net_inputs(n, eps)?;
    if !(distortion >= 1.0 && distortion.is_finite()) || !(extension >= 1.0 && extension.is_finite()) {
        return Err(Error::invalid("distortion and extension constant must be at least 1"));
    }
    let nf = n as f64;
    let exponent = p * fmath::log2(k)
        + 20.0 * (nf + p) * fmath::log2(nf)
        + (2.0 * p + 2.0 * nf - 2.0) * fmath::log2(32.0 * extension * nf * distortion / eps);
    LogScalar::from_log2(fmath::exp2(exponent) * fmath::log2(eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Smallest feasible `C` found, to within `1e-3`.
    pub c: f64,
    pub log2_delta: f64,
    pub log2_rho: f64,
    /// `log₂ ρ − log₂(64 n δ / ε)`; nonnegative at a feasible `C`.
    pub margin: f64,
}

fn calibration_at(n: usize, p: f64, k: f64, eps: f64, c: f64, log2_rho: f64) -> Result<Calibration> {
    let log2_delta = discretization_bound(n, p, k, eps, c)?.log2();
    let rhs = fmath::log2(64.0 * n as f64 / eps) + log2_delta;
    // Both sides may be −∞; treat −∞ ≥ −∞ as satisfied with zero margin.
    let margin = if log2_rho == rhs { 0.0 } else { log2_rho - rhs };
    Ok(Calibration { c, log2_delta, log2_rho, margin })
}

/// Smallest `C ∈ [1, 1000]` (bisection to `1e-3`) for which the net scale
/// from [`discretization_bound`] satisfies `64 n δ / ε ≤ ρ` with `ρ` from
/// [`net_radius`]. `extension` is the Lipschitz extension constant `c`
/// (2 is a reasonable default).
pub fn calibrate_c(n: usize, p: f64, k: f64, eps: f64, distortion: f64, extension: f64) -> Result<Calibration> {
    if !(distortion >= 1.0 && distortion <= n as f64) {
        return Err(Error::invalid(format!("need D ∈ [1, n], got {distortion}")));
    }
    let log2_rho = net_radius(n, p, k, eps, distortion, extension)?.log2();
    let at = |c: f64| calibration_at(n, p, k, eps, c, log2_rho);
    let lo_check = at(1.0)?;
    if lo_check.margin >= 0.0 {
        return Ok(lo_check);
    }
    let hi_check = at(1000.0)?;
    if hi_check.margin < 0.0 {
        return Err(Error::precondition("no feasible C in [1, 1000]"));
    }
    let (mut lo, mut hi) = (1.0f64, 1000.0f64);
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.margin >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(hi)
}

/// `log₂(ε/n) + log₂ r(κε / distortion)` for a radius function `r`.
pub fn delta_r_relation(
    n: usize,
    eps: f64,
    kappa: f64,
    distortion: f64,
    r: impl FnOnce(f64) -> Result<LogScalar>,
) -> Result<LogScalar> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("need ε ∈ (0, 1), got {eps}")));
    }
    if !(distortion >= 1.0 && distortion.is_finite()) {
        return Err(Error::invalid("distortion must be at least 1"));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid("κ must be positive and finite"));
    }
    let lead = LogScalar::from_f64(eps / n as f64)?;
    Ok(lead.mul(r(kappa * eps / distortion)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_scalar_basics() {
        let a = LogScalar::from_f64(8.0).unwrap();
        let b = LogScalar::from_f64(0.25).unwrap();
        assert_eq!(a.mul(b).log2(), 1.0);
        assert_eq!(a.div(b).unwrap().to_f64(), Some(32.0));
        assert_eq!(a.powf(2.0).unwrap().log2(), 6.0);
        assert!(LogScalar::ZERO < b && b < a);
        assert_eq!(LogScalar::ZERO.mul(a), LogScalar::ZERO);
        assert!(a.div(LogScalar::ZERO).is_err());
        assert_eq!(LogScalar::from_log2(-2000.0).unwrap().to_f64(), None);
        assert!(LogScalar::from_log2(f64::INFINITY).is_err());
        assert!(LogScalar::from_f64(-1.0).is_err());
        assert_eq!(LogScalar::from_f64(0.0).unwrap().to_f64(), Some(0.0));
        for e in -1000..1000 {
            let x = libm::ldexp(1.0, e);
            assert_eq!(LogScalar::from_f64(x).unwrap().to_f64(), if e.abs() < 900 { Some(x) } else { None });
        }
    }

    #[test]
    fn lower_bound_examples() {
        let v = lower_bound_r(1, 2.0, 1.0, 0.25, LowerVariant::Theorem).unwrap();
        assert_eq!(v.log2(), -8192.0);
        let v = lower_bound_r(2, 2.0, 1.0, 0.5, LowerVariant::Theorem).unwrap();
        assert_eq!(v.log2(), -libm::ldexp(1.0, 86));
        assert!(lower_bound_r(2, 2.0, 1.0, 0.6, LowerVariant::Theorem).is_err());
        assert!(lower_bound_r(2, 2.0, 1.0, 0.25, LowerVariant::Sharp1d).is_err());
        assert!(lower_bound_r(1, 1.5, 1.0, 0.25, LowerVariant::Theorem).is_err());
        assert!(lower_bound_r(1, 2.0, 0.5, 0.25, LowerVariant::Theorem).is_err());
    }

    #[test]
    fn lower_bound_at_half_in_two_dimensions() {
        // Continuous at the endpoint: 20·4·1 + 6·1 = 86.
        let near = lower_bound_r(2, 2.0, 1.0, 0.5 - 1e-12, LowerVariant::Theorem).unwrap();
        let expected = -libm::ldexp(1.0, 86);
        assert!((near.log2() / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(upper_bound_r(1, 2.0, 1.0 / 16.0, UpperVariant::Interval).unwrap().log2(), -2.0);
        assert_eq!(upper_bound_r(4, 2.0, 1.0 / 32.0, UpperVariant::Ball).unwrap().log2(), 0.0);
        let eps = 1.0 / (8.0 * libm::sqrt(3.0));
        assert_eq!(upper_bound_r(1, 2.0, eps, UpperVariant::Interval).unwrap().to_f64(), Some(0.5));
        // Between two depths the smaller one is used.
        assert_eq!(upper_bound_r(1, 2.0, 0.07, UpperVariant::Interval).unwrap().log2(), 2.0 - 3.0);
    }

    #[test]
    fn discretization_examples() {
        let v = discretization_bound(2, 2.0, 1.0, 0.5, 1.0).unwrap();
        assert!((v.log2() + 256.0 * core::f64::consts::LOG2_E).abs() < 1e-9);
        assert!((v.log2() + 369.33).abs() < 0.01);
        assert!(discretization_bound(1, 2.0, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn calibration_example() {
        let cal = calibrate_c(2, 2.0, 1.0, 0.5, 2.0, 2.0).unwrap();
        assert!(cal.margin >= 0.0);
        // 8C ≥ 134 − log₂ log₂ e.
        let exact = (134.0 - libm::log2(core::f64::consts::LOG2_E)) / 8.0;
        assert!(cal.c >= exact && cal.c - exact <= 2e-3, "{cal:?}");
        let recheck = calibration_at(2, 2.0, 1.0, 0.5, cal.c, cal.log2_rho).unwrap();
        assert_eq!(recheck, cal);
        assert!(calibrate_c(2, 2.0, 1.0, 0.5, 3.0, 2.0).is_err());
    }

    #[test]
    fn delta_r_examples() {
        let v = delta_r_relation(1, 0.25, 1.0, 1.0, |e| lower_bound_r(1, 2.0, 1.0, e, LowerVariant::Theorem)).unwrap();
        assert_eq!(v.log2(), -2.0 - 8192.0);
        let lead = |n| delta_r_relation(n, 0.25, 1.0, 1.0, |_| Ok(LogScalar::ONE)).unwrap().log2();
        assert_eq!(lead(2), lead(1) - 1.0);
    }

    proptest! {
        #[test]
        fn lower_below_upper(n in 1usize..=4, p in prop_oneof![Just(2.0), Just(3.0)], eps in prop_oneof![Just(1.0 / 16.0), Just(1.0 / 32.0)], k in 1.0f64..3.0) {
            let lower = lower_bound_r(n, p, k, eps, LowerVariant::Theorem).unwrap();
            prop_assert!(lower < upper_bound_r(n, p, eps, UpperVariant::Ball).unwrap());
            if n == 1 {
                prop_assert!(lower < upper_bound_r(1, p, eps, UpperVariant::Interval).unwrap());
            }
        }

        #[test]
        fn sharp_beats_theorem(eps in 0.001f64..0.4999, p in 2.0f64..5.0, k in 1.0f64..4.0) {
            let sharp = lower_bound_r(1, p, k, eps, LowerVariant::Sharp1d).unwrap();
            let general = lower_bound_r(1, p, k, eps, LowerVariant::Theorem).unwrap();
            prop_assert!(sharp >= general);
        }

        #[test]
        fn discretization_decreasing_in_c(c in 1.0f64..20.0, dc in 0.01f64..5.0, n in 2usize..5) {
            let a = discretization_bound(n, 2.0, 1.0, 0.5, c).unwrap();
            let b = discretization_bound(n, 2.0, 1.0, 0.5, c + dc).unwrap();
            prop_assert!(b < a || (a.log2() == f64::NEG_INFINITY && b.log2() == f64::NEG_INFINITY));
        }

        #[test]
        fn calibration_monotone_in_distortion(d1 in 1.0f64..3.0, d2 in 1.0f64..3.0, n in 3usize..=4) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let a = calibrate_c(n, 2.0, 1.0, 0.5, lo, 2.0).unwrap();
            let b = calibrate_c(n, 2.0, 1.0, 0.5, hi, 2.0).unwrap();
            prop_assert!(b.c >= a.c);
            prop_assert!(a.margin >= 0.0 && b.margin >= 0.0);
        }

        #[test]
        fn delta_r_monotone_in_distortion(d1 in 1.0f64..10.0, d2 in 1.0f64..10.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let r = |e| lower_bound_r(1, 2.0, 1.0, e, LowerVariant::Theorem);
            let a = delta_r_relation(1, 0.25, 1.0, lo, r).unwrap();
            let b = delta_r_relation(1, 0.25, 1.0, hi, r).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn log_products_add(a in -500.0f64..500.0, b in -500.0f64..500.0) {
            let x = LogScalar::from_log2(a).unwrap();
            let y = LogScalar::from_log2(b).unwrap();
            prop_assert_eq!(x.mul(y).log2(), a + b);
        }

        #[test]
        fn round_trip_close(x in 1e-250f64..1e250) {
            let back = LogScalar::from_f64(x).unwrap().to_f64().unwrap();
            prop_assert!((back / x - 1.0).abs() <= 1e-12);
        }
    }
}
