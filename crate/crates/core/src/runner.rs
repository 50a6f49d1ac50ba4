//! Experiment drivers: single ensembles, parameter sweeps, strong
//! convergence studies and small-inertia coupling studies, plus their
//! on-disk outputs.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use smallvec::SmallVec;

use crate::config::{ExperimentConfig, InitialCondition, Integrator, Model};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_diffusive_time, fit_power_law, mean_observable_series, running_diffusivity, sup_squared_distance,
    DiffusivityAccumulator, DiffusivityEstimate, ObservableSeries, PathSnapshots, PowerLawFit, RunningSeries,
};
use crate::fields::SplittableField;
use crate::integrators::{
    euler_step_inertial, euler_step_passive, modified_tracers_step, splitting_step_passive, ColoredSplitting,
    InertialSplitting, InertialState, NoiseCoefficients,
};
use crate::noise::{BrownianPath, Channel, CoupledNoise, NoiseStream, StreamKey};
use crate::oracles::{integrate_on_path, reference_trajectory, PathModel, PathScheme};

/// Relative band used to detect the diffusive plateau.
pub const DIFFUSIVE_BAND: f64 = 0.1;

type Draws = SmallVec<[f64; 4]>;

/// Starting position of path `p`.
pub fn initial_position(cfg: &ExperimentConfig, dim: usize, p: u64) -> Result<Vec<f64>> {
    match &cfg.initial {
        InitialCondition::Origin => Ok(vec![0.0; dim]),
        InitialCondition::Uniform => {
            let mut s = NoiseStream::new(StreamKey::new(cfg.seed, p, Channel::Init));
            Ok((0..dim).map(|_| s.uniform(0.0, TAU)).collect())
        }
        InitialCondition::Points(points) => {
            let x = &points[(p % points.len() as u64) as usize];
            if x.len() != dim {
                return Err(Error::Config {
                    field: "initial".into(),
                    message: format!("point has {} coordinates, field has dimension {dim}", x.len()),
                });
            }
            Ok(x.clone())
        }
    }
}

enum Stepper {
    PassiveSplitting,
    PassiveEuler,
    Inertial(InertialSplitting),
    InertialEuler { tau: f64 },
    Colored(ColoredSplitting),
    Modified { tau: f64 },
}

impl Stepper {
    fn new(cfg: &ExperimentConfig, field: &SplittableField) -> Result<Self> {
        let tau = || cfg.tau.expect("validated");
        Ok(match (cfg.model, cfg.integrator) {
            (Model::Passive, Integrator::Splitting) => Stepper::PassiveSplitting,
            (Model::Passive, Integrator::Euler) => Stepper::PassiveEuler,
            (Model::Inertial, Integrator::Splitting) => {
                Stepper::Inertial(InertialSplitting::new(field, cfg.dt, cfg.sigma, tau())?)
            }
            (Model::Inertial, Integrator::Euler) => Stepper::InertialEuler { tau: tau() },
            (Model::Colored, _) => {
                Stepper::Colored(ColoredSplitting::new(cfg.dt, cfg.sigma, cfg.corr_time.expect("validated"))?)
            }
            (Model::Modified, _) => Stepper::Modified { tau: tau() },
        })
    }
}

/// Runs one path and returns its start and its positions at `steps`.
fn simulate_path(
    cfg: &ExperimentConfig,
    field: &SplittableField,
    stepper: &Stepper,
    steps: &[usize],
    p: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = field.dim();
    let x0 = initial_position(cfg, dim, p)?;
    let mut x = x0.clone();
    let mut aux = vec![0.0; dim];
    let mut gamma_stream = NoiseStream::new(StreamKey::new(cfg.seed, p, Channel::Gamma));
    let mut xi_stream = NoiseStream::new(StreamKey::new(cfg.seed, p, Channel::Xi));
    let mut eta_stream = NoiseStream::new(StreamKey::new(cfg.seed, p, Channel::Eta));
    let mut gamma: Draws = SmallVec::from_elem(0.0, dim);
    let mut second: Draws = SmallVec::from_elem(0.0, dim);
    let mut out = Vec::with_capacity(steps.len() * dim);
    let (dt, sigma) = (cfg.dt, cfg.sigma);
    let mut next = 0;
    let last = *steps.last().expect("final step is always recorded");
    for k in 1..=last {
        gamma_stream.fill_gaussian(&mut gamma);
        match stepper {
            Stepper::PassiveSplitting => splitting_step_passive(field, &mut x, dt, sigma, &gamma),
            Stepper::PassiveEuler => euler_step_passive(field, &mut x, dt, sigma, &gamma),
            Stepper::Inertial(s) => {
                xi_stream.fill_gaussian(&mut second);
                s.step(field, &mut x, &mut aux, &second, &gamma);
            }
            Stepper::InertialEuler { tau } => {
                let mut state = InertialState { x: std::mem::take(&mut x), y: std::mem::take(&mut aux) };
                euler_step_inertial(field, &mut state, dt, sigma, *tau, &gamma);
                x = state.x;
                aux = state.y;
            }
            Stepper::Colored(s) => {
                eta_stream.fill_gaussian(&mut second);
                s.step(field, dt, &mut x, &mut aux, &gamma, &second);
            }
            Stepper::Modified { tau } => modified_tracers_step(field, &mut x, dt, *tau, &gamma),
        }
        if !x.iter().chain(&aux).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { path: p, time: k as f64 * dt });
        }
        if k == steps[next] {
            out.extend_from_slice(&x);
            next += 1;
        }
    }
    Ok((x0, out))
}

/// Everything produced by one ensemble run.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub config: ExperimentConfig,
    pub estimate: DiffusivityEstimate,
    /// `<(x₁(t) − x₁(0))²> / 2t` on the snapshot grid.
    pub running: RunningSeries,
    /// Start of the diffusive plateau, `None` if it was not reached.
    pub diffusive_time: Option<f64>,
    /// Mean stream function, for fields that have one.
    pub observable: Option<ObservableSeries>,
    pub noise_coefficients: Option<NoiseCoefficients>,
    pub snapshots: PathSnapshots,
}

pub fn run_simulation(cfg: &ExperimentConfig, ensemble: &Ensemble) -> Result<SimulationReport> {
    cfg.validate()?;
    let field = cfg.load_field()?;
    run_simulation_with_field(cfg, &field, ensemble)
}

/// As [`run_simulation`], with the field supplied by the caller; `cfg.field`
/// is then only a label.
pub fn run_simulation_with_field(
    cfg: &ExperimentConfig,
    field: &SplittableField,
    ensemble: &Ensemble,
) -> Result<SimulationReport> {
    let stepper = Stepper::new(cfg, field)?;
    let steps = cfg.snapshot_steps();
    let paths = ensemble.map(cfg.n_paths, |p| simulate_path(cfg, field, &stepper, &steps, p))?;
    let (initial, positions): (Vec<_>, Vec<_>) = paths.into_iter().unzip();

    let mut times: Vec<f64> = steps.iter().map(|&k| k as f64 * cfg.dt).collect();
    *times.last_mut().unwrap() = cfg.horizon;
    let snapshots = PathSnapshots { times, dim: field.dim(), initial, positions };

    let last = snapshots.times.len() - 1;
    let mut acc = DiffusivityAccumulator::new(field.dim(), cfg.horizon);
    let mut disp = vec![0.0; field.dim()];
    for p in 0..snapshots.n_paths() {
        for (d, (a, b)) in disp.iter_mut().zip(snapshots.position(p, last).iter().zip(&snapshots.initial[p])) {
            *d = a - b;
        }
        acc.push(&disp)?;
    }
    let estimate = acc.finish()?;
    let running = running_diffusivity(&snapshots, 0)?;
    let diffusive_time = Some(estimate_diffusive_time(&running, DIFFUSIVE_BAND)?).filter(|t| t.is_finite());
    let observable = if field.has_stream_function() { Some(mean_observable_series(&snapshots, field)?) } else { None };
    let noise_coefficients = match &stepper {
        Stepper::Inertial(s) => Some(s.coefficients()),
        _ => None,
    };
    Ok(SimulationReport {
        config: cfg.clone(),
        estimate,
        running,
        diffusive_time,
        observable,
        noise_coefficients,
        snapshots,
    })
}

fn config_json(cfg: &ExperimentConfig) -> Value {
    Value::Object(cfg.to_pairs().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect())
}

impl SimulationReport {
    pub fn summary_json(&self) -> Value {
        json!({
            "kind": "simulation",
            "config": config_json(&self.config),
            "K": self.estimate.k,
            "stderr": self.estimate.stderr,
            "n_paths": self.estimate.n_paths,
            "horizon": self.estimate.horizon,
            "diffusive_time": self.diffusive_time,
            "stream_function": self.observable.as_ref().map(|o| json!({
                "times": o.series.times,
                "mean": o.series.values,
                "stderr": o.series.stderr,
                "decay": o.decay,
            })),
            "noise_coefficients": self.noise_coefficients,
        })
    }

    /// Writes `summary.json` and `series.csv` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("summary.json"), &self.summary_json())?;
        write_series(&dir.join("series.csv"), &self.running)
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// CSV with columns `t,value,stderr`.
pub fn write_series(path: &Path, series: &RunningSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "value", "stderr"])?;
    for i in 0..series.len() {
        w.write_record([series.times[i].to_string(), series.values[i].to_string(), series.stderr[i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One parameter varied over a list of values, everything else fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    /// A numeric config key: `sigma`, `tau`, `corr_time`, `dt` or `T`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// Extra `(key, value)` assignments per point; empty, or one list per value.
    pub overrides: Vec<Vec<(String, String)>>,
}

impl SweepSpec {
    pub fn new(base: ExperimentConfig, parameter: &str, values: Vec<f64>) -> Self {
        Self { base, parameter: parameter.to_string(), values, overrides: Vec::new() }
    }

    /// The configuration of point `i`. For the modified model a `tau` sweep
    /// also moves `sigma = √τ`.
    pub fn point(&self, i: usize) -> Result<ExperimentConfig> {
        let mut cfg = self.base.clone();
        let v = self.values[i];
        cfg.set(&self.parameter, &v.to_string())?;
        if cfg.model == Model::Modified && self.parameter == "tau" {
            cfg.sigma = v.sqrt();
        }
        if let Some(list) = self.overrides.get(i) {
            for (k, val) in list {
                cfg.set(k, val)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        const NUMERIC: [&str; 5] = ["sigma", "tau", "corr_time", "dt", "T"];
        if !NUMERIC.contains(&self.parameter.as_str()) {
            return Err(Error::Config {
                field: "sweep.parameter".into(),
                message: format!("cannot sweep `{}`", self.parameter),
            });
        }
        if self.values.len() < 2 {
            return Err(Error::Config { field: "sweep.values".into(), message: "need at least two values".into() });
        }
        if let Some(v) = self.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config { field: "sweep.values".into(), message: format!("{v} is not positive") });
        }
        if !self.overrides.is_empty() && self.overrides.len() != self.values.len() {
            return Err(Error::Config { field: "sweep.overrides".into(), message: "one list per value".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub parameter: String,
    pub values: Vec<f64>,
    pub points: Vec<SimulationReport>,
    /// `K₁₁` and `K₂₂` against the parameter, when all entries are positive.
    pub fit_k11: Option<PowerLawFit>,
    pub fit_k22: Option<PowerLawFit>,
}

/// Runs every point of the sweep with the base seed, in order.
pub fn run_sweep(spec: &SweepSpec, ensemble: &Ensemble) -> Result<SweepReport> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.values.len());
    for i in 0..spec.values.len() {
        points.push(run_simulation(&spec.point(i)?, ensemble)?);
    }
    let entry = |i: usize| -> Vec<f64> { points.iter().map(|r| r.estimate.entry(i, i)).collect() };
    let fit_k11 = fit_power_law(&spec.values, &entry(0)).ok();
    let fit_k22 = if spec.base.load_field()?.dim() > 1 { fit_power_law(&spec.values, &entry(1)).ok() } else { None };
    Ok(SweepReport { parameter: spec.parameter.clone(), values: spec.values.clone(), points, fit_k11, fit_k22 })
}

impl SweepReport {
    pub fn summary_json(&self) -> Value {
        json!({
            "kind": "sweep",
            "parameter": self.parameter,
            "values": self.values,
            "points": self.points.iter().map(SimulationReport::summary_json).collect::<Vec<_>>(),
            "fit_K11": self.fit_k11,
            "fit_K22": self.fit_k22,
        })
    }

    /// Writes `summary.json` and `sweep.csv` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("summary.json"), &self.summary_json())?;
        let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
        w.write_record(["parameter", "K11", "K22", "stderr11", "stderr22"])?;
        for (v, r) in self.values.iter().zip(&self.points) {
            let e = &r.estimate;
            let d = e.k.dim();
            let at = |m: &crate::matrix::Matrix, i: usize| if i < d { m[(i, i)].to_string() } else { String::new() };
            w.write_record([v.to_string(), at(&e.k, 0), at(&e.k, 1), at(&e.stderr, 0), at(&e.stderr, 1)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Strong errors of a scheme against a fine reference on shared Brownian paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    /// `sqrt(E sup_t ‖x_dt(t) − x_ref(t)‖²)` over the grid of the largest step.
    pub errors: Vec<f64>,
    pub reference_dt: f64,
    pub fit: PowerLawFit,
}

impl ConvergenceReport {
    pub fn slope(&self) -> f64 {
        self.fit.exponent
    }
}

/// Ratio of fine to coarse step, required to be a power of two.
fn refinement_factor(coarse: f64, fine: f64) -> Result<usize> {
    let r = coarse / fine;
    let ri = r.round();
    if (r - ri).abs() > 1e-9 * ri || ri < 1.0 || !(ri as usize).is_power_of_two() {
        return Err(Error::MismatchedGrid(format!("step {coarse} is not a power-of-two multiple of {fine}")));
    }
    Ok(ri as usize)
}

/// Step sizes must be power-of-two multiples of each other. The reference
/// uses a step 16 times smaller than the smallest one.
pub fn run_convergence(cfg: &ExperimentConfig, dts: &[f64], ensemble: &Ensemble) -> Result<ConvergenceReport> {
    if dts.len() < 4 {
        return Err(Error::DegenerateFit("a convergence study needs at least four step sizes"));
    }
    if let Some(bad) = dts.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::NonPositive(*bad));
    }
    let model = match (cfg.model, cfg.integrator) {
        (Model::Passive, _) => PathModel::Passive { sigma: cfg.sigma },
        (Model::Modified, Integrator::Splitting) => PathModel::Modified { tau: cfg.tau.expect("validated") },
        (m, i) => {
            return Err(Error::Config {
                field: "model".into(),
                message: format!("no convergence study for {m} with {i}"),
            })
        }
    };
    let scheme = match cfg.integrator {
        Integrator::Splitting => PathScheme::Splitting,
        Integrator::Euler => PathScheme::Euler,
    };
    let field = cfg.load_field()?;
    let dt_min = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let dt_max = dts.iter().copied().fold(0.0, f64::max);
    let reference_dt = dt_min / 16.0;
    let factors = dts.iter().map(|&d| refinement_factor(d, reference_dt)).collect::<Result<Vec<_>>>()?;
    let save_ref = refinement_factor(dt_max, reference_dt)?;
    let n_ref = (cfg.horizon / reference_dt).round() as usize;
    if n_ref == 0 || n_ref % save_ref != 0 || ((n_ref as f64) * reference_dt - cfg.horizon).abs() > 1e-9 * cfg.horizon {
        return Err(Error::Config {
            field: "T".into(),
            message: format!("must be a whole multiple of the largest step {dt_max}"),
        });
    }

    let dim = field.dim();
    let per_path = ensemble.map(cfg.n_paths, |p| {
        let x0 = initial_position(cfg, dim, p)?;
        let mut stream = NoiseStream::new(StreamKey::new(cfg.seed, p, Channel::Gamma));
        let fine = BrownianPath::generate(&mut stream, dim, reference_dt, n_ref);
        let reference = reference_trajectory(&field, model, &x0, &fine, save_ref)?;
        let mut sups = Vec::with_capacity(dts.len());
        for &factor in &factors {
            let coarse = fine.coarsen_by(factor)?;
            let traj = integrate_on_path(&field, model, scheme, &x0, &coarse, save_ref / factor)?;
            if !traj.iter().chain(&reference).all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { path: p, time: cfg.horizon });
            }
            sups.push(sup_squared_distance(&traj, &reference, dim)?);
        }
        Ok(sups)
    })?;
    let errors: Vec<f64> =
        (0..dts.len()).map(|j| (per_path.iter().map(|s| s[j]).sum::<f64>() / cfg.n_paths as f64).sqrt()).collect();
    let fit = fit_power_law(dts, &errors)?;
    Ok(ConvergenceReport { dts: dts.to_vec(), errors, reference_dt, fit })
}

/// Distance between passive and inertial paths driven by the same γ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub taus: Vec<f64>,
    /// `sqrt(E sup_t ‖x_passive(t) − x_inertial(t)‖²)` per τ.
    pub errors: Vec<f64>,
    pub fit: PowerLawFit,
}

impl CouplingReport {
    pub fn slope(&self) -> f64 {
        self.fit.exponent
    }
}

/// For each τ runs passive splitting and inertial splitting from the same
/// start (inertial at rest), sharing γ, and measures their distance.
pub fn run_coupling(cfg: &ExperimentConfig, taus: &[f64], ensemble: &Ensemble) -> Result<CouplingReport> {
    if taus.len() < 2 {
        return Err(Error::DegenerateFit("a coupling study needs at least two values of tau"));
    }
    if let Some(bad) = taus.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::NonPositive(*bad));
    }
    if taus.iter().all(|t| *t == taus[0]) {
        return Err(Error::DegenerateFit("all values of tau are equal"));
    }
    let field = cfg.load_field()?;
    let dim = field.dim();
    let n = cfg.n_steps();
    let mut errors = Vec::with_capacity(taus.len());
    for &tau in taus {
        let inertial = InertialSplitting::new(&field, cfg.dt, cfg.sigma, tau)?;
        let sups = ensemble.map(cfg.n_paths, |p| {
            let x0 = initial_position(cfg, dim, p)?;
            let mut noise = CoupledNoise::new(cfg.seed, p);
            let (mut a, mut b) = (x0.clone(), x0);
            let mut y = vec![0.0; dim];
            let mut gamma: Draws = SmallVec::from_elem(0.0, dim);
            let mut xi: Draws = SmallVec::from_elem(0.0, dim);
            let mut sup = 0.0f64;
            for k in 1..=n {
                noise.fill(&mut gamma, &mut xi);
                splitting_step_passive(&field, &mut a, cfg.dt, cfg.sigma, &gamma);
                inertial.step(&field, &mut b, &mut y, &xi, &gamma);
                let d2: f64 = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum();
                if !d2.is_finite() {
                    return Err(Error::NonFiniteState { path: p, time: k as f64 * cfg.dt });
                }
                sup = sup.max(d2);
            }
            Ok(sup)
        })?;
        errors.push((sups.iter().sum::<f64>() / cfg.n_paths as f64).sqrt());
    }
    let fit = fit_power_law(taus, &errors)?;
    Ok(CouplingReport { taus: taus.to_vec(), errors, fit })
}

/// `summary.json` for convergence and coupling studies.
pub fn study_summary<T: Serialize>(kind: &str, cfg: &ExperimentConfig, report: &T) -> Result<Value> {
    Ok(json!({ "kind": kind, "config": config_json(cfg), "result": serde_json::to_value(report)? }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Snapshots;

    fn small(field: &str) -> ExperimentConfig {
        ExperimentConfig::new(field, 1.0, 0.01, 1.0, 8, 5)
    }

    #[test]
    fn estimate_matches_running_series_end() {
        let r = run_simulation(&small("taylor-green"), &Ensemble::new(1)).unwrap();
        assert_eq!(r.running.last_value().unwrap(), r.estimate.entry(0, 0));
        assert_eq!(*r.running.times.last().unwrap(), 1.0);
        assert!(r.observable.is_some());
    }

    #[test]
    fn deterministic_across_workers() {
        for cfg in [
            small("taylor-green"),
            small("taylor-green").inertial(0.1),
            small("shear").colored(0.05),
            small("taylor-green").modified(0.1),
            small("shear").euler(),
            small("shear").inertial(0.5).euler(),
        ] {
            let a = run_simulation(&cfg, &Ensemble::new(1)).unwrap().summary_json();
            let b = run_simulation(&cfg, &Ensemble::new(3)).unwrap().summary_json();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn zero_field_free_motion() {
        let cfg = ExperimentConfig::new("zero", 1.0, 0.5, 1.0, 2, 0)
            .with_snapshots(Snapshots::None)
            .with_initial(InitialCondition::Origin);
        let r = run_simulation(&cfg, &Ensemble::new(1)).unwrap();
        // two steps of σ√dt γ from the origin
        let mut s = NoiseStream::new(StreamKey::new(0, 1, Channel::Gamma));
        let g1 = [s.normal(), s.normal()];
        let g2 = [s.normal(), s.normal()];
        let x = [0.5f64.sqrt() * g1[0] + 0.5f64.sqrt() * g2[0], 0.5f64.sqrt() * g1[1] + 0.5f64.sqrt() * g2[1]];
        assert_eq!(r.snapshots.position(1, 0), &x);
    }

    #[test]
    fn unstable_euler_reports_path_and_time() {
        let cfg = ExperimentConfig::new("taylor-green", 1.0, 0.5, 2000.0, 2, 0).inertial(0.01).euler();
        match run_simulation(&cfg, &Ensemble::new(1)) {
            Err(Error::NonFiniteState { path, time }) => {
                assert_eq!(path, 0);
                assert!(time > 0.0 && time <= 2000.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_points_match_single_runs() {
        let spec = SweepSpec::new(small("shear"), "sigma", vec![0.5, 1.0]);
        let sweep = run_sweep(&spec, &Ensemble::new(2)).unwrap();
        let single = run_simulation(&spec.point(1).unwrap(), &Ensemble::new(1)).unwrap();
        assert_eq!(sweep.points[1].estimate, single.estimate);
        assert!(run_sweep(&SweepSpec::new(small("shear"), "sigma", vec![1.0]), &Ensemble::new(1)).is_err());
        assert!(run_sweep(&SweepSpec::new(small("shear"), "paths", vec![1.0, 2.0]), &Ensemble::new(1)).is_err());
    }

    #[test]
    fn convergence_rejects_short_or_misaligned_lists() {
        let cfg = small("taylor-green");
        assert!(run_convergence(&cfg, &[0.1], &Ensemble::new(1)).is_err());
        assert!(run_convergence(&cfg, &[0.1, 0.05, 0.03, 0.0125], &Ensemble::new(1)).is_err());
    }

    #[test]
    fn coupling_rejects_equal_taus() {
        let cfg = small("shear");
        assert!(matches!(run_coupling(&cfg, &[1e-4, 1e-4, 1e-4], &Ensemble::new(1)), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn outputs_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_simulation(&small("shear"), &Ensemble::new(1)).unwrap();
        r.write_outputs(dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert!(csv.starts_with("t,value,stderr\n"));
        let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["config"]["field"], "shear");
        assert_eq!(json["K"].as_array().unwrap().len(), 2);

        let sweep = run_sweep(&SweepSpec::new(small("shear"), "sigma", vec![0.5, 1.0]), &Ensemble::new(1)).unwrap();
        sweep.write_outputs(dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert!(csv.starts_with("parameter,K11,K22,stderr11,stderr22\n0.5,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
