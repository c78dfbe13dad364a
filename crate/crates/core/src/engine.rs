//! Monte Carlo estimators of semigroup quantities.
//!
//! Sample `i` draws every random number from streams keyed by `(seed, i)`,
//! and samples are accumulated in fixed chunks merged in chunk order, so an
//! [`Estimate`] is bit-identical for any worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{fk_weight, Mode, PathBundle};
use crate::error::{invalid, Error, Result};
use crate::field::{FieldConfig, SpinCoupling};
use crate::geom::{self, Point};
use crate::levy::{laplace_exponent, parity_sign, sample_brownian_on_grid, sample_jumps, sample_subordinator_path, JumpSet, SubordinatorPath};
use crate::rng::SampleStreams;
use crate::stats::ComplexAccumulator;
use crate::testfn::TestFunction;

const CHUNK: u64 = 2048;
const INVALID_CAP: f64 = 1e-3;

/// Which clock drives the Brownian motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// `B_{T_s}` with the relativistic subordinator.
    #[default]
    Relativistic,
    /// `B_s`: the subordinator is replaced by the identity clock.
    NonRelativistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    pub n_subordinator_steps: usize,
    /// Largest Brownian step on `[0, T_t]` when the weight needs a fine grid.
    pub bm_max_step: f64,
    /// Caps the fine grid on long (heavy-tailed) subordinator draws; the
    /// step is `max(bm_max_step, T_t / max_fine_points)`.
    pub max_fine_points: usize,
    /// Use the fine grid even when the fields do not need it.
    pub always_fine: bool,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { n_subordinator_steps: 32, bm_max_step: 0.01, max_fine_points: 20_000, always_fine: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Start {
    Fixed {
        x: Point,
        #[serde(default)]
        alpha: u8,
    },
    Sampled {
        f: TestFunction,
    },
}

impl Default for Start {
    fn default() -> Self {
        Start::Fixed { x: geom::ORIGIN, alpha: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub t: f64,
    #[serde(default)]
    pub fields: FieldConfig,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub dynamics: Dynamics,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_samples")]
    pub n_samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub start: Start,
    /// Extra factor `e^{time_tilt · T_t}` on every weight.
    #[serde(default)]
    pub time_tilt: f64,
    /// Worker count; 0 uses the ambient pool. Never changes the numbers.
    #[serde(default)]
    pub threads: usize,
    /// Half width of the box on which `m_*` is estimated.
    #[serde(default = "default_field_box")]
    pub field_box: f64,
}

fn default_mass() -> f64 {
    1.0
}
fn default_samples() -> u64 {
    100_000
}
fn default_field_box() -> f64 {
    6.0
}

impl ExperimentSpec {
    pub fn new(t: f64, fields: FieldConfig, mass: f64, mode: Mode) -> Self {
        Self {
            t,
            fields,
            mass,
            mode,
            dynamics: Dynamics::Relativistic,
            epsilon: 0.0,
            n_samples: default_samples(),
            seed: 0,
            discretization: Discretization::default(),
            start: Start::default(),
            time_tilt: 0.0,
            threads: 0,
            field_box: default_field_box(),
        }
    }

    pub fn with_samples(mut self, n: u64) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return invalid(format!("t must be finite and non-negative, got {}", self.t));
        }
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return invalid(format!("mass must be finite and non-negative, got {}", self.mass));
        }
        if self.n_samples == 0 {
            return invalid("n_samples must be at least 1");
        }
        if !(self.epsilon >= 0.0) {
            return invalid(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        let d = &self.discretization;
        if d.n_subordinator_steps == 0 || !(d.bm_max_step > 0.0) || d.max_fine_points == 0 {
            return invalid("discretization parameters must be positive");
        }
        if !self.time_tilt.is_finite() {
            return invalid("time_tilt must be finite");
        }
        if let Start::Fixed { alpha, .. } = self.start {
            if alpha > 1 {
                return invalid(format!("spin index must be 0 or 1, got {alpha}"));
            }
        }
        Ok(())
    }

    /// `m_*` of the magnetic field over the configured box.
    pub fn m_star(&self) -> f64 {
        SpinCoupling::new(self.fields.magnetic_field.clone(), self.field_box, 25).m_star()
    }

    /// Whether the weights have finite second moment: the spin factor
    /// contributes `e^{m_* T}` and the tilt `e^{2·tilt·T}` against the
    /// subordinator's `e^{-m²T/2}` tail.
    pub fn finite_variance_guaranteed(&self) -> bool {
        if self.dynamics == Dynamics::NonRelativistic {
            return true;
        }
        let spin = if self.mode == Mode::Spin { self.m_star() } else { 0.0 };
        spin + 2.0 * self.time_tilt.max(0.0) < 0.5 * self.mass * self.mass
    }

    fn fine_step(&self, horizon: f64) -> Option<f64> {
        let d = &self.discretization;
        let needed = d.always_fine || self.fields.needs_fine_grid(self.mode == Mode::Spin);
        (needed && horizon > 0.0).then(|| d.bm_max_step.max(horizon / d.max_fine_points as f64))
    }
}

/// Complex Monte Carlo mean with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub n: u64,
    pub invalid_count: u64,
    pub zero_hit_fraction: f64,
    pub finite_variance_guaranteed: bool,
}

impl Estimate {
    /// An estimate with no sampling error.
    pub fn exact(value: Complex64) -> Self {
        Self { mean: value, stderr: 0.0, n: 1, invalid_count: 0, zero_hit_fraction: 0.0, finite_variance_guaranteed: true }
    }

    /// `|self - other| ≤ k·√(σ₁² + σ₂²) + slack`.
    pub fn agrees_with(&self, other: &Estimate, k: f64, slack: f64) -> bool {
        (self.mean - other.mean).norm() <= k * self.stderr.hypot(other.stderr) + slack
    }

    pub fn agrees_with_value(&self, value: Complex64, k: f64, slack: f64) -> bool {
        (self.mean - value).norm() <= k * self.stderr + slack
    }
}

/// One sample's contribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub value: Complex64,
    pub zero_hit: bool,
}

impl From<Complex64> for Sample {
    fn from(value: Complex64) -> Self {
        Self { value, zero_hit: false }
    }
}

#[derive(Default)]
struct Chunk {
    acc: ComplexAccumulator,
    invalid: u64,
    zero_hits: u64,
}

/// Runs `draw(i)` for `i < n_samples` and reduces deterministically.
/// [`Error::InvalidSample`] results are excluded and counted; any other
/// error aborts the run.
pub fn run_samples<F>(spec: &ExperimentSpec, draw: F) -> Result<Estimate>
where
    F: Fn(u64) -> Result<Sample> + Sync,
{
    spec.validate()?;
    let n = spec.n_samples;
    let n_chunks = n.div_ceil(CHUNK);
    let work = || -> Vec<Result<Chunk>> {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut chunk = Chunk::default();
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    match draw(i) {
                        Ok(s) if s.value.re.is_finite() && s.value.im.is_finite() => {
                            chunk.acc.push(s.value);
                            chunk.zero_hits += s.zero_hit as u64;
                        }
                        Ok(_) | Err(Error::InvalidSample(_)) => chunk.invalid += 1,
                        Err(e) => return Err(e),
                    }
                }
                Ok(chunk)
            })
            .collect()
    };
    let chunks = if spec.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    };

    let mut total = Chunk::default();
    for chunk in chunks {
        let chunk = chunk?;
        total.acc.merge(&chunk.acc);
        total.invalid += chunk.invalid;
        total.zero_hits += chunk.zero_hits;
    }
    if total.invalid as f64 > INVALID_CAP * n as f64 {
        return Err(Error::TooManyInvalidSamples { invalid: total.invalid, total: n });
    }
    Ok(Estimate {
        mean: total.acc.mean,
        stderr: total.acc.stderr(),
        n: total.acc.n,
        invalid_count: total.invalid,
        zero_hit_fraction: if total.acc.n > 0 { total.zero_hits as f64 / total.acc.n as f64 } else { 0.0 },
        finite_variance_guaranteed: spec.finite_variance_guaranteed(),
    })
}

/// Draws the path of sample `index` started at `(start, α)`, using the
/// spec's clock, mode and grid policy.
pub fn sample_bundle(spec: &ExperimentSpec, start: Point, alpha: u8, streams: &mut SampleStreams) -> Result<PathBundle> {
    let n = spec.discretization.n_subordinator_steps;
    let sub = match spec.dynamics {
        Dynamics::Relativistic => sample_subordinator_path(spec.t, n, spec.mass, &mut streams.subordinator)?,
        Dynamics::NonRelativistic => SubordinatorPath::deterministic(spec.t, n)?,
    };
    let horizon = sub.final_value();
    let jumps = match spec.mode {
        Mode::Spin => sample_jumps(horizon, &mut streams.jumps)?,
        Mode::Spinless => JumpSet::empty(horizon),
    };
    PathBundle::sample(start, alpha, sub, jumps, spec.fine_step(horizon), &mut streams.brownian)
}

/// Monte Carlo mean of `integrand(bundle)` over paths from `(start, α)`.
pub fn estimate_paths<F>(spec: &ExperimentSpec, start: Point, alpha: u8, integrand: F) -> Result<Estimate>
where
    F: Fn(&PathBundle) -> Result<Sample> + Sync,
{
    if alpha > 1 {
        return invalid(format!("spin index must be 0 or 1, got {alpha}"));
    }
    run_samples(spec, |i| {
        let mut streams = SampleStreams::new(spec.seed, i);
        let bundle = sample_bundle(spec, start, alpha, &mut streams)?;
        integrand(&bundle)
    })
}

fn weighted(spec: &ExperimentSpec, bundle: &PathBundle) -> Result<(Complex64, bool)> {
    let w = fk_weight(bundle, &spec.fields, spec.epsilon, spec.mode)?;
    let tilt = if spec.time_tilt != 0.0 { (spec.time_tilt * w.horizon).exp() } else { 1.0 };
    Ok((w.value * tilt, w.zero_hit()))
}

fn eval_end(spec: &ExperimentSpec, g: &TestFunction, bundle: &PathBundle) -> Complex64 {
    let (x, theta) = bundle.end_state();
    match spec.mode {
        Mode::Spin => g.eval(x, theta),
        Mode::Spinless => g.spatial(x),
    }
}

/// `(e^{-t(H+V)} g)(x, (-1)^α)`.
pub fn apply_semigroup(x: Point, alpha: u8, g: &TestFunction, spec: &ExperimentSpec) -> Result<Estimate> {
    g.validate()?;
    estimate_paths(spec, x, alpha, |b| {
        let (w, zero_hit) = weighted(spec, b)?;
        Ok(Sample { value: w * eval_end(spec, g, b), zero_hit })
    })
}

/// `(f, e^{-t(H+V)} g) = Σ_α ∫dx conj(f(x, (-1)^α)) E^{x,α}[…]`, with `x`
/// drawn from `f`'s own density and both spin starts evaluated on the same
/// path.
pub fn matrix_element(f: &TestFunction, g: &TestFunction, spec: &ExperimentSpec) -> Result<Estimate> {
    f.validate()?;
    g.validate()?;
    run_samples(spec, |i| {
        let mut streams = SampleStreams::new(spec.seed, i);
        let (x, wf) = f.sample_conj_weighted(&mut streams.start);
        let mut bundle = sample_bundle(spec, x, 0, &mut streams)?;
        match spec.mode {
            Mode::Spinless => {
                let (w, zero_hit) = weighted(spec, &bundle)?;
                Ok(Sample { value: wf * w * eval_end(spec, g, &bundle), zero_hit })
            }
            Mode::Spin => {
                let mut value = Complex64::new(0.0, 0.0);
                let mut zero_hit = false;
                for alpha in 0..2u8 {
                    let fa = f.sector.weight(parity_sign(alpha as usize));
                    if fa == 0.0 {
                        continue;
                    }
                    bundle.spin.alpha = alpha;
                    let (w, z) = weighted(spec, &bundle)?;
                    zero_hit |= z;
                    value += wf * fa * w * eval_end(spec, g, &bundle);
                }
                Ok(Sample { value, zero_hit })
            }
        }
    })
}

/// `E[e^{iξ·B_{T_t}} e^{izθ_{T_t}}]` in closed form.
pub fn characteristic_exact(t: f64, mass: f64, xi: Point, z: f64) -> Complex64 {
    let k2 = geom::norm2(xi);
    let even = (-t * laplace_exponent(0.5 * k2, mass)).exp();
    let odd = (-t * laplace_exponent(0.5 * k2 + 2.0, mass)).exp();
    Complex64::new(even * z.cos(), odd * z.sin())
}

/// Monte Carlo counterpart of [`characteristic_exact`] from `(0, α = 0)`.
/// Fields, mode and dynamics in `spec` are ignored. Only the parity of
/// `N_{T_t}` enters, so it is drawn directly (`P(even) = (1 + e^{-2T})/2`)
/// instead of materialising `~T_t` jump times, which the heavy `m = 0`
/// tail would make unbounded.
pub fn characteristic_mc(xi: Point, z: f64, spec: &ExperimentSpec) -> Result<Estimate> {
    let spec = ExperimentSpec { fields: FieldConfig::free(), mode: Mode::Spin, dynamics: Dynamics::Relativistic, ..spec.clone() };
    run_samples(&spec, |i| {
        let mut streams = SampleStreams::new(spec.seed, i);
        let sub = sample_subordinator_path(spec.t, spec.discretization.n_subordinator_steps, spec.mass, &mut streams.subordinator)?;
        let horizon = sub.final_value();
        let bm = sample_brownian_on_grid(geom::ORIGIN, &[0.0, horizon], &mut streams.brownian)?;
        let even = streams.jumps.uniform_open() < 0.5 * (1.0 + (-2.0 * horizon).exp());
        let theta = if even { 1.0 } else { -1.0 };
        Ok(Complex64::from_polar(1.0, geom::dot(xi, bm.end()) + z * theta).into())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpMoment {
    pub estimate: Estimate,
    /// `e^{t(m - √(m² - 2c))}`, absent when `2c ≥ m²`.
    pub closed_form: Option<f64>,
    pub warning: Option<String>,
}

/// `E[e^{c T_t}]` by Monte Carlo, with the closed form when it is finite.
pub fn exp_moment(c: f64, spec: &ExperimentSpec) -> Result<ExpMoment> {
    let m = spec.mass;
    let spec = ExperimentSpec { fields: FieldConfig::free(), mode: Mode::Spinless, time_tilt: c, ..spec.clone() };
    let estimate = run_samples(&spec, |i| {
        let mut streams = SampleStreams::new(spec.seed, i);
        let sub = sample_subordinator_path(spec.t, spec.discretization.n_subordinator_steps, m, &mut streams.subordinator)?;
        Ok(Complex64::new((c * sub.final_value()).exp(), 0.0).into())
    })?;
    let finite = 2.0 * c < m * m;
    let closed_form = finite.then(|| (spec.t * (m - (m * m - 2.0 * c).sqrt())).exp());
    let warning = if !finite {
        Some(format!("E[e^(cT)] diverges for c = {c} >= m^2/2 = {}; Monte Carlo value only", 0.5 * m * m))
    } else if 4.0 * c >= m * m {
        Some("e^(cT) has infinite variance here; the standard error is not reliable".to_string())
    } else {
        None
    };
    Ok(ExpMoment { estimate, closed_form, warning })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundEnergy {
    pub energy: f64,
    pub stderr: f64,
    pub u1: Estimate,
    pub u2: Estimate,
}

/// `-log(u(t₂)/u(t₁))/(t₂ - t₁)` with `u(t) = (e^{-t(H+V)} g)(x₀)`.
pub fn ground_state_energy(spec: &ExperimentSpec, x0: Point, g: &TestFunction, t1: f64, t2: f64) -> Result<GroundEnergy> {
    if !(t1 > 0.0 && t2 > t1) {
        return invalid(format!("need 0 < t1 < t2, got t1 = {t1}, t2 = {t2}"));
    }
    let alpha = match spec.start {
        Start::Fixed { alpha, .. } => alpha,
        Start::Sampled { .. } => 0,
    };
    let u1 = apply_semigroup(x0, alpha, g, &spec.clone().with_time(t1))?;
    let u2 = apply_semigroup(x0, alpha, g, &spec.clone().with_time(t2))?;
    for (t, u) in [(t1, &u1), (t2, &u2)] {
        if !(u.mean.re > 0.0) || u.stderr / u.mean.re >= 0.05 {
            return Err(Error::NoiseDominated(format!(
                "u({t}) = {} ± {}: need a positive value with relative error below 5%",
                u.mean.re, u.stderr
            )));
        }
    }
    let (r1, r2) = (u1.stderr / u1.mean.re, u2.stderr / u2.mean.re);
    Ok(GroundEnergy {
        energy: -(u2.mean.re / u1.mean.re).ln() / (t2 - t1),
        stderr: r1.hypot(r2) / (t2 - t1),
        u1,
        u2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiamagneticCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub holds: bool,
}

/// `|(f, e^{-t(H+V)} g)|` against `(|f|, e^{-t(H_{b₀}+V)} |g|)` with
/// `a = 0` and `b₀ = (√(b₁² + b₂²), 0, b₃)` on the right. Both sides use
/// the same paths and grid.
pub fn diamagnetic_check(f: &TestFunction, g: &TestFunction, spec: &ExperimentSpec) -> Result<DiamagneticCheck> {
    if !f.is_nonnegative() || !g.is_nonnegative() {
        return invalid("diamagnetic check needs non-negative test functions");
    }
    let mut lhs_spec = spec.clone();
    lhs_spec.discretization.always_fine |= spec.fields.needs_fine_grid(spec.mode == Mode::Spin);
    let rhs_spec = ExperimentSpec { fields: spec.fields.diamagnetic_reference(), ..lhs_spec.clone() };
    let lhs = matrix_element(f, g, &lhs_spec)?;
    let rhs = matrix_element(&f.modulus(), &g.modulus(), &rhs_spec)?;
    let holds = lhs.mean.norm() <= rhs.mean.re + 3.0 * lhs.stderr.hypot(rhs.stderr);
    Ok(DiamagneticCheck { lhs, rhs, holds })
}
