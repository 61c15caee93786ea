//! Sup-norm affine fitting and the empirical approximability radius.
//!
//! [`best_affine_fit`] minimizes the convex objective
//! `φ(T, z) = max_i ‖f(x_i) − T x_i − z‖_Y` by a restarted normalized
//! subgradient method warm-started from least squares. It also reports the
//! best midpoint certificate among collinear sample triples, which bounds
//! `φ` from below for every affine map.
//!
//! [`empirical_r`] scans sub-balls of the unit ball of a source norm for the
//! largest radius on which a sampled map is `ε`-affine relative to its
//! Lipschitz constant.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::midpoint_certificate;
use crate::error::{check_dim, Error, Result};
use crate::fmath;
use crate::space::{lipschitz_estimate, DomainMetric, NormedSpace, PairMode};
use crate::walsh::GridFunctionCube;

/// `x ↦ T x + z` from `ℝ^n` into a `dim`-dimensional target.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    n: usize,
    dim: usize,
    /// Row-major `dim × n`.
    linear: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(n: usize, dim: usize, linear: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        check_dim(n * dim, linear.len())?;
        check_dim(dim, offset.len())?;
        Ok(AffineMap { n, dim, linear, offset })
    }

    pub fn constant(n: usize, value: Vec<f64>) -> Self {
        AffineMap { n, dim: value.len(), linear: vec![0.0; n * value.len()], offset: value }
    }

    pub fn domain_dim(&self) -> usize {
        self.n
    }

    pub fn target_dim(&self) -> usize {
        self.dim
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.n, x.len())?;
        check_dim(self.dim, out.len())?;
        for ((o, row), z) in out.iter_mut().zip(self.linear.chunks_exact(self.n.max(1))).zip(&self.offset) {
            *o = z + row.iter().zip(x).map(|(t, xi)| t * xi).sum::<f64>();
        }
        Ok(())
    }
}

/// Sample points in `ℝ^n` with values in a `dim`-dimensional target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    n: usize,
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(n: usize, dim: usize) -> Self {
        SampleSet { n, dim, points: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, point: &[f64], value: &[f64]) -> Result<()> {
        check_dim(self.n, point.len())?;
        check_dim(self.dim, value.len())?;
        self.points.extend_from_slice(point);
        self.values.extend_from_slice(value);
        Ok(())
    }

    pub fn domain_dim(&self) -> usize {
        self.n
    }

    pub fn target_dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest residual `max_i ‖f(x_i) − A(x_i)‖`.
    pub fn sup_error(&self, space: &NormedSpace, map: &AffineMap) -> Result<f64> {
        check_dim(self.dim, space.dim())?;
        let mut a = vec![0.0; self.dim];
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            map.eval_into(self.point(i), &mut a)?;
            worst = worst.max(space.distance_unchecked(self.value(i), &a));
        }
        Ok(worst)
    }

    /// Best midpoint certificate `½‖f(m) − (f(l) + f(r))/2‖` over sample
    /// triples whose middle point is exactly the midpoint of the outer two.
    pub fn best_midpoint_certificate(&self, space: &NormedSpace) -> f64 {
        let mut by_point: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for i in 0..self.len() {
            by_point.entry(point_key(self.point(i))).or_default().push(i);
        }
        let mut mid = vec![0.0; self.n];
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                for ((m, a), b) in mid.iter_mut().zip(self.point(i)).zip(self.point(j)) {
                    *m = 0.5 * (a + b);
                }
                if self.point(i) == self.point(j) {
                    continue;
                }
                if let Some(centers) = by_point.get(&point_key(&mid)) {
                    for &c in centers {
                        let cert = midpoint_certificate(space, self.value(i), self.value(c), self.value(j));
                        best = best.max(cert);
                    }
                }
            }
        }
        best
    }

    /// Drops exact repeats of `(point, value)` pairs, keeping first occurrences.
    /// Repeated points with different values are all kept.
    pub fn dedup(&self) -> SampleSet {
        let mut seen = BTreeMap::new();
        let mut out = SampleSet::new(self.n, self.dim);
        for i in 0..self.len() {
            let mut key = point_key(self.point(i));
            key.extend(point_key(self.value(i)));
            if seen.insert(key, ()).is_none() {
                out.points.extend_from_slice(self.point(i));
                out.values.extend_from_slice(self.value(i));
            }
        }
        out
    }
}

fn point_key(x: &[f64]) -> Vec<u64> {
    // `+ 0.0` folds −0 into +0.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative step size, and absolute gap to the certificate, at which the
    /// iteration is declared converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Stop as soon as the sup error is at most this value.
    pub target: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-9, max_iter: 10_000, target: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub map: AffineMap,
    /// Exact `max_i ‖f(x_i) − A(x_i)‖` of the returned map.
    pub sup_error: f64,
    /// Best midpoint certificate; no affine map does better than this.
    pub lower_certificate: f64,
    pub iterations: usize,
    pub converged: bool,
}

const EPOCH: usize = 200;
const EPOCH_DECAY: f64 = 0.7;

/// Minimizes the sup-norm residual of an affine fit.
///
/// Points are centered and scaled to unit spread before fitting. The method
/// restarts from the best iterate every few hundred steps with a smaller
/// step scale, so the step sequence is `c_e / √t` within epoch `e`.
pub fn best_affine_fit(samples: &SampleSet, space: &NormedSpace, options: &FitOptions) -> Result<FitResult> {
    let n = samples.domain_dim();
    let dim = samples.target_dim();
    check_dim(dim, space.dim())?;
    if samples.len() < n + 1 {
        return Err(Error::TooFewSamples { needed: n + 1, found: samples.len() });
    }
    if samples.points.iter().chain(&samples.values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !(options.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let samples = samples.dedup();
    let count = samples.len();
    let lower_certificate = samples.best_midpoint_certificate(space);

    // Normalized coordinates u = (x − c)/s, with a trailing 1 for the offset.
    let cols = n + 1;
    let mut center = vec![0.0; n];
    for i in 0..count {
        for (c, x) in center.iter_mut().zip(samples.point(i)) {
            *c += x / count as f64;
        }
    }
    let mut spread = 0.0f64;
    for i in 0..count {
        for (x, c) in samples.point(i).iter().zip(&center) {
            spread = spread.max(fmath::abs(x - c));
        }
    }
    let spread = if spread > 0.0 { spread } else { 1.0 };
    let mut design = vec![0.0; count * cols];
    for (i, row) in design.chunks_exact_mut(cols).enumerate() {
        for ((u, x), c) in row.iter_mut().zip(samples.point(i)).zip(&center) {
            *u = (x - c) / spread;
        }
        row[n] = 1.0;
    }

    let mut params = least_squares(&design, &samples.values, count, cols, dim);
    let mut scratch = Scratch::new(dim);
    let mut current = objective(&design, &samples.values, &params, cols, space, &mut scratch);
    let mut best_params = params.clone();
    let mut best = current.clone();
    let stop = |value: f64| {
        options.target.is_some_and(|t| value <= t) || value - lower_certificate <= options.tol
    };

    let mut iterations = 0;
    let mut converged = stop(best.value);
    let mut scale = best.value;
    let mut grad = vec![0.0; dim];
    while !converged && iterations < options.max_iter {
        for t in 1..=EPOCH {
            if iterations >= options.max_iter {
                break;
            }
            iterations += 1;
            // Subgradient of φ at the arg-max sample i: −g ⊗ (u_i, 1), with g
            // the dual vector of the residual.
            space.dual_vector(&current.residual, &mut grad)?;
            let row = &design[current.index * cols..(current.index + 1) * cols];
            let gnorm = fmath::sqrt(grad.iter().map(|g| g * g).sum::<f64>())
                * fmath::sqrt(row.iter().map(|u| u * u).sum::<f64>());
            if gnorm == 0.0 {
                break;
            }
            let step = scale / fmath::sqrt(t as f64) / gnorm;
            for (r, g) in grad.iter().enumerate() {
                for (p, u) in params[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                    *p += step * g * u;
                }
            }
            current = objective(&design, &samples.values, &params, cols, space, &mut scratch);
            if current.value < best.value {
                best = current.clone();
                best_params.copy_from_slice(&params);
                if stop(best.value) {
                    converged = true;
                    break;
                }
            }
        }
        params.copy_from_slice(&best_params);
        current = best.clone();
        scale *= EPOCH_DECAY;
        if scale <= options.tol * best.value.max(f64::MIN_POSITIVE) {
            converged = true;
        }
    }

    // Back to absolute coordinates: T = W / s, z = w_0 − T c.
    let mut linear = vec![0.0; dim * n];
    let mut offset = vec![0.0; dim];
    for r in 0..dim {
        let row = &best_params[r * cols..(r + 1) * cols];
        let mut z = row[n];
        for i in 0..n {
            let t = row[i] / spread;
            linear[r * n + i] = t;
            z -= t * center[i];
        }
        offset[r] = z;
    }
    let map = AffineMap::new(n, dim, linear, offset)?;
    let sup_error = samples.sup_error(space, &map)?;
    Ok(FitResult { map, sup_error, lower_certificate, iterations, converged })
}

#[derive(Debug, Clone)]
struct Eval {
    value: f64,
    index: usize,
    residual: Vec<f64>,
}

struct Scratch {
    residual: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch { residual: vec![0.0; dim] }
    }
}

fn objective(design: &[f64], values: &[f64], params: &[f64], cols: usize, space: &NormedSpace, s: &mut Scratch) -> Eval {
    let dim = s.residual.len();
    let mut best = Eval { value: -1.0, index: 0, residual: vec![0.0; dim] };
    for (i, (row, y)) in design.chunks_exact(cols).zip(values.chunks_exact(dim)).enumerate() {
        for (r, (res, yr)) in s.residual.iter_mut().zip(y).enumerate() {
            let fit: f64 = params[r * cols..(r + 1) * cols].iter().zip(row).map(|(p, u)| p * u).sum();
            *res = yr - fit;
        }
        let norm = space.norm_unchecked(&s.residual);
        if norm > best.value {
            best.value = norm;
            best.index = i;
            best.residual.copy_from_slice(&s.residual);
        }
    }
    best
}

/// Least-squares parameters, row-major `dim × cols`, from the normal
/// equations with a tiny ridge so rank-deficient designs stay solvable.
fn least_squares(design: &[f64], values: &[f64], count: usize, cols: usize, dim: usize) -> Vec<f64> {
    let mut gram = vec![0.0; cols * cols];
    for row in design.chunks_exact(cols) {
        for a in 0..cols {
            for b in 0..cols {
                gram[a * cols + b] += row[a] * row[b];
            }
        }
    }
    let trace: f64 = (0..cols).map(|a| gram[a * cols + a]).sum();
    for a in 0..cols {
        gram[a * cols + a] += 1e-13 * trace;
    }
    let mut out = vec![0.0; dim * cols];
    for r in 0..dim {
        let mut rhs = vec![0.0; cols];
        for i in 0..count {
            let y = values[i * dim + r];
            for (acc, u) in rhs.iter_mut().zip(&design[i * cols..(i + 1) * cols]) {
                *acc += u * y;
            }
        }
        let sol = solve(gram.clone(), rhs, cols);
        out[r * cols..(r + 1) * cols].copy_from_slice(&sol);
    }
    out
}

/// Gaussian elimination with partial pivoting; singular pivots give zeros.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>, size: usize) -> Vec<f64> {
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&i, &j| fmath::abs(a[i * size + col]).total_cmp(&fmath::abs(a[j * size + col])))
            .unwrap_or(col);
        if pivot != col {
            for k in 0..size {
                a.swap(col * size + k, pivot * size + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * size + col];
        if diag == 0.0 {
            continue;
        }
        for row in col + 1..size {
            let factor = a[row * size + col] / diag;
            if factor != 0.0 {
                for k in col..size {
                    a[row * size + k] -= factor * a[col * size + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; size];
    for row in (0..size).rev() {
        let diag = a[row * size + row];
        if diag == 0.0 {
            continue;
        }
        let tail: f64 = (row + 1..size).map(|k| a[row * size + k] * x[k]).sum();
        x[row] = (b[row] - tail) / diag;
    }
    x
}

/// One evaluated `(radius, center)` candidate of the radius search.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub center: Vec<f64>,
    /// Number of samples in the candidate ball.
    pub samples: usize,
    /// Fitted sup error; `None` when the certificate alone ruled the ball out.
    pub sup_error: Option<f64>,
    pub certificate: f64,
    pub pass: bool,
    fit: Option<AffineMap>,
}

impl SweepRow {
    pub fn map(&self) -> Option<&AffineMap> {
        self.fit.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximabilityReport {
    pub eps: f64,
    /// Lipschitz estimate of the sampled map in the source norm.
    pub lip: f64,
    /// Largest passing radius, or 0 when none passed.
    pub best_rho: f64,
    pub center: Vec<f64>,
    pub map: Option<AffineMap>,
    /// `sup_error / best_rho` of the winning candidate.
    pub relative_error: f64,
    /// `lip × grid spacing`: how far grid suprema can sit below continuum suprema.
    pub grid_gap: f64,
    /// Every candidate evaluated, in scan order.
    pub sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RSearchOptions {
    /// Candidate radii; scanned in descending order.
    pub radii: Vec<f64>,
    /// Use every grid point as a candidate center instead of thinning the
    /// grid to spacing `ρ/4`.
    pub exhaustive: bool,
    pub fit: FitOptions,
    pub lip_mode: PairMode,
}

impl RSearchOptions {
    /// Radii `2^{-j}·R` for `j = 0..=levels`, where `R` is the domain ball radius.
    pub fn dyadic(levels: u32, domain_radius: f64) -> Self {
        RSearchOptions {
            radii: (0..=levels).map(|j| domain_radius * fmath::pow2i(-(j as i32))).collect(),
            exhaustive: false,
            fit: FitOptions::default(),
            lip_mode: PairMode::Adjacent,
        }
    }
}

/// The radius search, split into steps so callers can evaluate the
/// candidates of one radius concurrently.
///
/// The domain ball is centered at the cube center with radius `θ/2`, i.e.
/// the source-norm ball inscribed in the sampled cube (for `ℓ_∞` the cube
/// itself). With `origin = (−1,…,−1)` and `θ = 2` it is the unit ball.
#[derive(Debug, Clone)]
pub struct RSearch<'a> {
    f: &'a GridFunctionCube,
    source: NormedSpace,
    eps: f64,
    lip: f64,
    center: Vec<f64>,
    radius: f64,
    options: RSearchOptions,
}

impl<'a> RSearch<'a> {
    pub fn new(f: &'a GridFunctionCube, source: NormedSpace, eps: f64, options: RSearchOptions) -> Result<Self> {
        check_dim(f.n(), source.dim())?;
        if options.radii.is_empty() {
            return Err(Error::invalid("empty radius ladder"));
        }
        if options.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("radii must be positive and finite"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid("ε must be finite and nonnegative"));
        }
        let mut options = options;
        options.radii.sort_by(|a, b| b.total_cmp(a));
        options.radii.dedup();
        let lip = lipschitz_estimate(f, DomainMetric::SpaceNorm(source), options.lip_mode)?;
        let center = f.origin().iter().map(|o| o + 0.5 * f.theta()).collect();
        Ok(RSearch { f, source, eps, lip, center, radius: 0.5 * f.theta(), options })
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn radii(&self) -> &[f64] {
        &self.options.radii
    }

    /// Feasible candidate centers for `rho`, as flat grid indices in row-major order.
    pub fn centers(&self, rho: f64) -> Vec<usize> {
        let f = self.f;
        let n = f.n();
        let stride = if self.options.exhaustive {
            1
        } else {
            let s = fmath::floor(0.25 * rho / f.spacing());
            if s < 1.0 {
                1
            } else {
                s as usize
            }
        };
        let slack = 1e-12 * self.radius;
        let mut multi = vec![0usize; n];
        let mut y = vec![0.0; n];
        (0..f.len())
            .filter(|&flat| {
                f.multi_index(flat, &mut multi);
                if multi.iter().any(|k| k % stride != 0) {
                    return false;
                }
                f.point_of(&multi, &mut y);
                self.source.distance_unchecked(&y, &self.center) <= self.radius - rho + slack
            })
            .collect()
    }

    /// Fits the ball of radius `rho` around grid point `center`.
    pub fn evaluate(&self, rho: f64, center: usize) -> Result<SweepRow> {
        let f = self.f;
        let n = f.n();
        let mut multi = vec![0usize; n];
        let mut c = vec![0.0; n];
        f.multi_index(center, &mut multi);
        f.point_of(&multi, &mut c);
        let mut samples = SampleSet::new(n, f.space().dim());
        let mut x = vec![0.0; n];
        let reach = rho * (1.0 + 1e-12);
        for flat in 0..f.len() {
            f.multi_index(flat, &mut multi);
            f.point_of(&multi, &mut x);
            if self.source.distance_unchecked(&x, &c) <= reach {
                samples.push(&x, f.value(flat))?;
            }
        }
        let allowed = self.eps * self.lip * rho;
        let mut row = SweepRow {
            rho,
            center: c,
            samples: samples.len(),
            sup_error: None,
            certificate: 0.0,
            pass: false,
            fit: None,
        };
        if samples.len() < n + 2 {
            return Ok(row);
        }
        row.certificate = samples.best_midpoint_certificate(f.space());
        if row.certificate > allowed {
            return Ok(row);
        }
        let options = FitOptions { target: Some(allowed), ..self.options.fit };
        let fit = best_affine_fit(&samples, f.space(), &options)?;
        row.sup_error = Some(fit.sup_error);
        row.pass = fit.sup_error <= allowed;
        row.fit = Some(fit.map);
        Ok(row)
    }

    /// Builds the report from candidate rows in scan order; rows after the
    /// first passing one are ignored.
    pub fn finish(&self, rows: Vec<SweepRow>) -> ApproximabilityReport {
        let mut sweep = Vec::with_capacity(rows.len());
        let mut winner = None;
        for row in rows {
            let pass = row.pass;
            sweep.push(row);
            if pass {
                winner = Some(sweep.len() - 1);
                break;
            }
        }
        let grid_gap = self.lip * self.f.spacing();
        let (best_rho, center, map, relative_error) = match winner {
            Some(i) => {
                let row = &sweep[i];
                let err = row.sup_error.unwrap_or(0.0);
                (row.rho, row.center.clone(), row.fit.clone(), err / row.rho)
            }
            None => (0.0, self.center.clone(), None, 0.0),
        };
        ApproximabilityReport { eps: self.eps, lip: self.lip, best_rho, center, map, relative_error, grid_gap, sweep }
    }

    /// Report for a constant map: the whole domain ball passes.
    fn constant_report(&self) -> Result<ApproximabilityReport> {
        let f = self.f;
        let probe = f.locate(&self.center).ok();
        let value = match probe {
            Some(flat) => f.value(flat).to_vec(),
            None => f.value(0).to_vec(),
        };
        Ok(ApproximabilityReport {
            eps: self.eps,
            lip: 0.0,
            best_rho: self.radius,
            center: self.center.clone(),
            map: Some(AffineMap::constant(f.n(), value)),
            relative_error: 0.0,
            grid_gap: 0.0,
            sweep: Vec::new(),
        })
    }
}

/// Largest radius `ρ` in the ladder such that some ball `y + ρB_X` inside the
/// domain ball admits an affine map with `sup ‖f − A‖ ≤ ε·lip·ρ` over the
/// grid points of the ball.
///
/// Radii are scanned in descending order and centers in row-major order; the
/// first passing candidate wins. A ball containing fewer than `n + 2` samples
/// never passes, since any `n + 1` points are fitted exactly. A constant map
/// (`lip = 0`) passes on the whole domain ball.
pub fn empirical_r(f: &GridFunctionCube, source: NormedSpace, eps: f64, options: RSearchOptions) -> Result<ApproximabilityReport> {
    let search = RSearch::new(f, source, eps, options)?;
    if search.lip() == 0.0 {
        return search.constant_report();
    }
    let mut rows = Vec::new();
    for &rho in search.radii() {
        for center in search.centers(rho) {
            let row = search.evaluate(rho, center)?;
            let pass = row.pass;
            rows.push(row);
            if pass {
                return Ok(search.finish(rows));
            }
        }
    }
    Ok(search.finish(rows))
}

/// Like [`empirical_r`] but lets the caller evaluate each radius's candidates
/// (for instance in parallel). `eval_all` must return rows in the order of
/// the centers it is given.
pub fn empirical_r_with(
    f: &GridFunctionCube,
    source: NormedSpace,
    eps: f64,
    options: RSearchOptions,
    mut eval_all: impl FnMut(&RSearch<'_>, f64, &[usize]) -> Result<Vec<SweepRow>>,
) -> Result<ApproximabilityReport> {
    let search = RSearch::new(f, source, eps, options)?;
    if search.lip() == 0.0 {
        return search.constant_report();
    }
    let mut rows = Vec::new();
    for &rho in search.radii() {
        let centers = search.centers(rho);
        let batch = eval_all(&search, rho, &centers)?;
        let hit = batch.iter().position(|r| r.pass);
        match hit {
            Some(i) => {
                rows.extend(batch.into_iter().take(i + 1));
                return Ok(search.finish(rows));
            }
            None => rows.extend(batch),
        }
    }
    Ok(search.finish(rows))
}
