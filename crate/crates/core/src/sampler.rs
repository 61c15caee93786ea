//! Point evaluation of maps `ℝ^n → Y`, either closed form or backed by a grid.

use crate::error::Result;
use crate::space::NormedSpace;

/// A map that can be evaluated at (some) points of `ℝ^n`.
///
/// Grid-backed samplers fail with [`Error::OffGrid`](crate::Error::OffGrid)
/// for points that are not lattice points; closed-form samplers accept any
/// point of their domain.
pub trait Sampler {
    fn domain_dim(&self) -> usize;
    fn target(&self) -> &NormedSpace;
    fn sample(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Adapts a closure into a [`Sampler`].
pub struct FnSampler<F> {
    domain_dim: usize,
    target: NormedSpace,
    f: F,
}

impl<F> FnSampler<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    pub fn new(domain_dim: usize, target: NormedSpace, f: F) -> Self {
        FnSampler { domain_dim, target, f }
    }
}

impl<F> Sampler for FnSampler<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    fn target(&self) -> &NormedSpace {
        &self.target
    }

    fn sample(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        crate::error::check_dim(self.domain_dim, x.len())?;
        crate::error::check_dim(self.target.dim(), out.len())?;
        (self.f)(x, out);
        Ok(())
    }
}
