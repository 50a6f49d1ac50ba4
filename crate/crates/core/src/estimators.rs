//! Monte Carlo estimators: effective diffusivity from endpoint
//! displacements, running-in-time diagnostics, power-law and exponential
//! fits, and pathwise strong errors.
//!
//! Every reduction visits paths in index order, so results are bit-identical
//! however the paths were produced.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::SplittableField;
use crate::matrix::Matrix;

/// `K = <Δx ⊗ Δx> / 2T` with per-entry Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusivityEstimate {
    pub k: Matrix,
    pub stderr: Matrix,
    pub n_paths: usize,
    pub horizon: f64,
}

impl DiffusivityEstimate {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.k[(i, j)]
    }

    pub fn entry_stderr(&self, i: usize, j: usize) -> f64 {
        self.stderr[(i, j)]
    }
}

/// Running sums of `q_p = Δx ⊗ Δx / 2T` and `q_p²`, fed one path at a time.
#[derive(Debug, Clone)]
pub struct DiffusivityAccumulator {
    dim: usize,
    horizon: f64,
    n: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl DiffusivityAccumulator {
    pub fn new(dim: usize, horizon: f64) -> Self {
        Self { dim, horizon, n: 0, sum: vec![0.0; dim * dim], sum_sq: vec![0.0; dim * dim] }
    }

    pub fn push(&mut self, displacement: &[f64]) -> Result<()> {
        if displacement.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: displacement.len() });
        }
        let scale = 1.0 / (2.0 * self.horizon);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let q = displacement[i] * displacement[j] * scale;
                self.sum[i * self.dim + j] += q;
                self.sum_sq[i * self.dim + j] += q * q;
            }
        }
        self.n += 1;
        Ok(())
    }

    /// With a single path the standard errors are reported as 0.
    pub fn finish(&self) -> Result<DiffusivityEstimate> {
        if self.n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let n = self.n as f64;
        let mut k = Matrix::zeros(self.dim);
        let mut se = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let idx = i * self.dim + j;
                let mean = self.sum[idx] / n;
                let var = if self.n > 1 { ((self.sum_sq[idx] - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
                k[(i, j)] = mean;
                se[(i, j)] = (var / n).sqrt();
            }
        }
        // symmetric by construction up to rounding; enforce it exactly
        let k = symmetrize(&k);
        let se = symmetrize(&se);
        Ok(DiffusivityEstimate { k, stderr: se, n_paths: self.n, horizon: self.horizon })
    }
}

fn symmetrize(m: &Matrix) -> Matrix {
    let t = m.transpose();
    let mut out = Matrix::zeros(m.dim());
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            out[(i, j)] = 0.5 * (m[(i, j)] + t[(i, j)]);
        }
    }
    out
}

/// Effective diffusivity from the endpoint displacements `x(T) − x(0)`.
pub fn estimate_diffusivity(displacements: &[Vec<f64>], horizon: f64) -> Result<DiffusivityEstimate> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter { name: "horizon", reason: format!("must be positive, got {horizon}") });
    }
    if displacements.len() < 2 {
        return Err(Error::EmptyEnsemble);
    }
    let first = &displacements[0];
    let mut acc = DiffusivityAccumulator::new(first.len(), horizon);
    for d in displacements {
        acc.push(d)?;
    }
    acc.finish()
}

/// A statistic sampled on an increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunningSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl RunningSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() != stderr.len() {
            return Err(Error::MismatchedGrid(format!(
                "{} times, {} values, {} stderr",
                times.len(),
                values.len(),
                stderr.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MismatchedGrid("times must be strictly increasing".into()));
        }
        Ok(Self { times, values, stderr })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_value(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Positions of every path on a shared grid of positive times, plus the
/// starting positions. `positions[p]` is `times.len() × dim`, flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSnapshots {
    pub times: Vec<f64>,
    pub dim: usize,
    pub initial: Vec<Vec<f64>>,
    pub positions: Vec<Vec<f64>>,
}

impl PathSnapshots {
    pub fn n_paths(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, path: usize, k: usize) -> &[f64] {
        &self.positions[path][k * self.dim..(k + 1) * self.dim]
    }

    fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if self.initial.len() != self.positions.len() {
            return Err(Error::MismatchedGrid("initial and snapshot path counts differ".into()));
        }
        let expect = self.times.len() * self.dim;
        if let Some(p) = self.positions.iter().position(|p| p.len() != expect) {
            return Err(Error::MismatchedGrid(format!("path {p} does not match the common grid")));
        }
        Ok(())
    }
}

/// Mean and standard error of per-path values, summed in path order.
fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut s, mut s2, mut n) = (0.0, 0.0, 0usize);
    for v in values {
        s += v;
        s2 += v * v;
        n += 1;
    }
    let nf = n as f64;
    let mean = s / nf;
    let se = if n > 1 { (((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) / nf).sqrt() } else { 0.0 };
    (mean, se, n)
}

/// `<(x_c(t) − x_c(0))²> / 2t` for coordinate `component` at every snapshot.
pub fn running_diffusivity(snaps: &PathSnapshots, component: usize) -> Result<RunningSeries> {
    snaps.validate()?;
    if snaps.times.first().is_some_and(|&t| t <= 0.0) {
        return Err(Error::MismatchedGrid("first snapshot time must be positive".into()));
    }
    if component >= snaps.dim {
        return Err(Error::DimensionMismatch { expected: snaps.dim, got: component + 1 });
    }
    let mut values = Vec::with_capacity(snaps.times.len());
    let mut stderr = Vec::with_capacity(snaps.times.len());
    for (k, &t) in snaps.times.iter().enumerate() {
        let (m, se, _) = mean_stderr((0..snaps.n_paths()).map(|p| {
            let d = snaps.position(p, k)[component] - snaps.initial[p][component];
            // same operation order as the accumulator, so the last point equals K₁₁
            d * d * (1.0 / (2.0 * t))
        }));
        values.push(m);
        stderr.push(se);
    }
    RunningSeries::new(snaps.times.clone(), values, stderr)
}

/// Earliest grid time after which the series stays within `band × |final|`
/// of its final value.
///
/// A plateau only counts if it lasts at least as long as it took to reach
/// it (`t* ≤ t_final / 2`); otherwise returns `f64::INFINITY`.
pub fn estimate_diffusive_time(series: &RunningSeries, band: f64) -> Result<f64> {
    if !(band > 0.0 && band < 1.0) {
        return Err(Error::InvalidParameter { name: "band", reason: format!("must lie in (0, 1), got {band}") });
    }
    let last = series.last_value().ok_or(Error::EmptyEnsemble)?;
    let tol = band * last.abs();
    let mut start = series.len() - 1;
    while start > 0 && (series.values[start - 1] - last).abs() <= tol {
        start -= 1;
    }
    let t_star = series.times[start];
    let t_final = *series.times.last().unwrap();
    if series.len() > 1 && t_star > 0.5 * t_final {
        return Ok(f64::INFINITY);
    }
    Ok(t_star)
}

/// `y ≈ c · x^a` fitted by least squares in log–log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope · x + intercept` with its `r²`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::MismatchedGrid(format!("{} x values, {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-300 * n {
        return Err(Error::DegenerateFit("all abscissae are equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok((slope, intercept, r2))
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if let Some(&bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositive(bad));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&lx, &ly)?;
    Ok(PowerLawFit { exponent: slope, prefactor: intercept.exp(), r_squared })
}

/// `|E f(t)| ≈ A e^{−rate · t}` over the fitted window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window_end: f64,
}

/// Ensemble mean of an observable on the snapshot grid (with `t = 0`
/// prepended) and its exponential decay rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub series: RunningSeries,
    pub decay: Option<ExponentialFit>,
}

/// Regresses `log|mean|` on `t` over the leading window where
/// `|mean| > 3 stderr`. Needs at least two points in the window.
pub fn fit_exponential_decay(series: &RunningSeries) -> Option<ExponentialFit> {
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    for ((&t, &v), &se) in series.times.iter().zip(&series.values).zip(&series.stderr) {
        if !(v.abs() > 3.0 * se) || v == 0.0 {
            break;
        }
        ts.push(t);
        ls.push(v.abs().ln());
    }
    let (slope, intercept, r_squared) = linear_fit(&ts, &ls).ok()?;
    Some(ExponentialFit { rate: -slope, amplitude: intercept.exp(), r_squared, window_end: *ts.last()? })
}

/// `E[Ψ(x(t))]` for the field's stream function, with its decay rate.
pub fn mean_observable_series(snaps: &PathSnapshots, field: &SplittableField) -> Result<ObservableSeries> {
    snaps.validate()?;
    if !field.has_stream_function() {
        return Err(Error::NoStreamFunction(field.name().to_string()));
    }
    let psi = |x: &[f64]| field.stream_function(x);
    let mut times = vec![0.0];
    let mut values = Vec::with_capacity(snaps.times.len() + 1);
    let mut stderr = Vec::with_capacity(snaps.times.len() + 1);
    let initial: Vec<f64> = snaps.initial.iter().map(|x| psi(x)).collect::<Result<_>>()?;
    let (m, se, _) = mean_stderr(initial.into_iter());
    values.push(m);
    stderr.push(se);
    for (k, &t) in snaps.times.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        let vals: Vec<f64> = (0..snaps.n_paths()).map(|p| psi(snaps.position(p, k))).collect::<Result<_>>()?;
        let (m, se, _) = mean_stderr(vals.into_iter());
        times.push(t);
        values.push(m);
        stderr.push(se);
    }
    let series = RunningSeries::new(times, values, stderr)?;
    let decay = fit_exponential_decay(&series);
    Ok(ObservableSeries { series, decay })
}

/// `max_k ‖a_k − b_k‖²` over two trajectories stored flat (`dim` values
/// per grid point) on the same grid.
pub fn sup_squared_distance(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    if a.len() != b.len() || dim == 0 || a.len() % dim != 0 {
        return Err(Error::MismatchedGrid(format!("trajectory lengths {} and {} (dim {dim})", a.len(), b.len())));
    }
    Ok(a.chunks(dim)
        .zip(b.chunks(dim))
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .fold(0.0, f64::max))
}

/// `sqrt(E sup_t ‖a(t) − b(t)‖²)` over paired trajectories.
pub fn strong_error(a: &[Vec<f64>], b: &[Vec<f64>], dim: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MismatchedGrid(format!("{} paths against {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut total = 0.0;
    for (p, q) in a.iter().zip(b) {
        total += sup_squared_distance(p, q, dim)?;
    }
    Ok((total / a.len() as f64).sqrt())
}
