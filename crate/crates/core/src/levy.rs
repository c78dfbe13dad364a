//! The three driving processes: Brownian motion, the unit-rate Poisson clock
//! behind the spin flips, and the relativistic ½-stable subordinator with
//! Laplace exponent `√(2u + m²) − m`. Also the closed-form laws used to
//! validate the samplers.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geom::{self, Point};
use crate::quad;
use crate::rng::RandomStream;

/// Laplace exponent of the subordinator: `E[e^{-u T_t}] = e^{-t ψ(u)}`.
pub fn laplace_exponent(u: f64, mass: f64) -> f64 {
    (2.0 * u + mass * mass).sqrt() - mass
}

/// One increment `T_{s+dt} - T_s`.
///
/// For `m > 0` this is inverse-Gaussian with mean `dt/m` and shape `dt²`,
/// drawn by the transformation method (one normal, one uniform). For `m = 0`
/// it is the first-passage time of level `dt`, realised as `dt²/Z²`.
pub fn sample_subordinator_increment(dt: f64, mass: f64, rng: &mut RandomStream) -> Result<f64> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return invalid(format!("subordinator step must be non-negative, got {dt}"));
    }
    if !(mass >= 0.0) || !mass.is_finite() {
        return invalid(format!("mass must be non-negative, got {mass}"));
    }
    if dt == 0.0 {
        return Ok(0.0);
    }
    let z = rng.normal();
    if mass == 0.0 {
        return Ok(dt * dt / (z * z));
    }
    let mean = dt / mass;
    let shape = dt * dt;
    let w = mean * z * z / (2.0 * shape);
    // Smaller root of the quadratic, written without cancellation.
    let root = mean / (1.0 + w + (w * (w + 2.0)).sqrt());
    let u = rng.uniform_open();
    if u <= mean / (mean + root) {
        Ok(root)
    } else {
        Ok(mean * mean / root)
    }
}

/// Density `p_t(s)` of `T_t`.
pub fn subordinator_density(t: f64, mass: f64, s: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid(format!("density needs t > 0, got {t}"));
    }
    if s <= 0.0 {
        return Ok(0.0);
    }
    let log_p = t.ln() + t * mass - 0.5 * (2.0 * PI * s * s * s).ln() - 0.5 * (t * t / s + mass * mass * s);
    Ok(log_p.exp())
}

/// Distribution function of `T_t` in closed form (inverse-Gaussian CDF, or
/// `erfc(t/√(2s))` when `m = 0`).
pub fn subordinator_cdf(t: f64, mass: f64, s: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid(format!("cdf needs t > 0, got {t}"));
    }
    if s <= 0.0 {
        return Ok(0.0);
    }
    if mass == 0.0 {
        return Ok(libm::erfc(t / (2.0 * s).sqrt()));
    }
    let mean = t / mass;
    let root = (t * t / s).sqrt();
    let first = quad::normal_cdf(root * (s / mean - 1.0));
    let z = root * (s / mean + 1.0);
    // e^{2tm} Φ(-z), combined in log space to dodge overflow.
    let tail = 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
    let second = if tail > 0.0 { (2.0 * t * mass + tail.ln()).exp() } else { 0.0 };
    Ok((first + second).clamp(0.0, 1.0))
}

/// A subordinator path on a uniform physical-time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SubordinatorPath {
    pub t_final: f64,
    pub mass: f64,
    pub s_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SubordinatorPath {
    /// The identity clock `T_s = s`, used for the non-relativistic dynamics.
    pub fn deterministic(t: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return invalid("n_steps must be at least 1");
        }
        if !(t >= 0.0) {
            return invalid(format!("horizon must be non-negative, got {t}"));
        }
        let s_grid: Vec<f64> = uniform_grid(t, n_steps);
        Ok(Self { t_final: t, mass: f64::INFINITY, values: s_grid.clone(), s_grid })
    }

    pub fn n_steps(&self) -> usize {
        self.s_grid.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.n_steps() as f64
    }

    /// `T_t`.
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("path has at least one point")
    }
}

fn uniform_grid(t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|j| if j == n { t } else { t * j as f64 / n as f64 }).collect()
}

pub fn sample_subordinator_path(
    t: f64,
    n_steps: usize,
    mass: f64,
    rng: &mut RandomStream,
) -> Result<SubordinatorPath> {
    if n_steps == 0 {
        return invalid("n_steps must be at least 1");
    }
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("horizon must be non-negative, got {t}"));
    }
    let dt = t / n_steps as f64;
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut acc = 0.0;
    values.push(acc);
    for _ in 0..n_steps {
        acc += sample_subordinator_increment(dt, mass, rng)?;
        values.push(acc);
    }
    Ok(SubordinatorPath { t_final: t, mass, s_grid: uniform_grid(t, n_steps), values })
}

/// Brownian motion sampled exactly at the supplied times.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    pub start: Point,
    pub times: Vec<f64>,
    pub values: Vec<Point>,
}

impl BrownianPath {
    pub fn end(&self) -> Point {
        *self.values.last().expect("path has at least one point")
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("path has at least one point")
    }
}

pub fn sample_brownian_on_grid(start: Point, times: &[f64], rng: &mut RandomStream) -> Result<BrownianPath> {
    if times.is_empty() || times[0] != 0.0 {
        return invalid("Brownian grid must start at 0");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("Brownian grid must be strictly increasing");
    }
    let mut values = Vec::with_capacity(times.len());
    let mut x = start;
    values.push(x);
    for w in times.windows(2) {
        let sd = (w[1] - w[0]).sqrt();
        for c in x.iter_mut() {
            *c += sd * rng.normal();
        }
        values.push(x);
    }
    Ok(BrownianPath { start, times: times.to_vec(), values })
}

/// Jump times of a unit-rate Poisson process on `(0, horizon]`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct JumpSet {
    pub horizon: f64,
    pub jump_times: Vec<f64>,
}

impl JumpSet {
    pub fn empty(horizon: f64) -> Self {
        Self { horizon, jump_times: Vec::new() }
    }

    pub fn count(&self) -> usize {
        self.jump_times.len()
    }

    /// Number of jumps in `(0, s]`.
    pub fn count_through(&self, s: f64) -> usize {
        self.jump_times.partition_point(|&r| r <= s)
    }

    /// Number of jumps in `(0, s)`.
    pub fn count_before(&self, s: f64) -> usize {
        self.jump_times.partition_point(|&r| r < s)
    }
}

/// Longest horizon for which jump times are materialised (about 80 MB).
pub const MAX_JUMP_HORIZON: f64 = 1e7;

/// Exponential inter-arrival construction; given the count the times are
/// distributed as sorted uniforms, which is the same law. Horizons beyond
/// [`MAX_JUMP_HORIZON`] (only reachable through the heavy `m = 0` tail) are
/// reported as an invalid sample.
pub fn sample_jumps(horizon: f64, rng: &mut RandomStream) -> Result<JumpSet> {
    if !(horizon >= 0.0) || horizon.is_nan() {
        return invalid(format!("jump horizon must be non-negative, got {horizon}"));
    }
    if horizon > MAX_JUMP_HORIZON {
        return Err(Error::InvalidSample(format!("jump horizon {horizon:.3e} exceeds {MAX_JUMP_HORIZON:.0e}")));
    }
    let mut jump_times = Vec::new();
    let mut clock = rng.exponential();
    while clock <= horizon {
        jump_times.push(clock);
        clock += rng.exponential();
    }
    Ok(JumpSet { horizon, jump_times })
}

/// `θ_s = (-1)^{α + N_s}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinTrack {
    pub alpha: u8,
    pub jumps: JumpSet,
}

impl SpinTrack {
    pub fn new(alpha: u8, jumps: JumpSet) -> Result<Self> {
        if alpha > 1 {
            return invalid(format!("spin index must be 0 or 1, got {alpha}"));
        }
        Ok(Self { alpha, jumps })
    }

    fn check(&self, s: f64) -> Result<()> {
        if !(s >= 0.0 && s <= self.jumps.horizon) {
            return invalid(format!("spin time {s} outside [0, {}]", self.jumps.horizon));
        }
        Ok(())
    }

    /// Right-continuous value at `s`.
    pub fn spin_value(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(parity_sign(self.alpha as usize + self.jumps.count_through(s)))
    }

    /// Left limit at `s`.
    pub fn spin_value_left(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(parity_sign(self.alpha as usize + self.jumps.count_before(s)))
    }

    pub fn flipped(&self) -> Self {
        Self { alpha: 1 - self.alpha, jumps: self.jumps.clone() }
    }
}

#[inline]
pub(crate) fn parity_sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `e^x K₂(x)` from `∫₀^∞ cosh(2u) e^{-x(cosh u - 1)} du`, the log-substituted
/// form of `K₂(x) = ½∫₀^∞ ξ e^{-½(ξ+1/ξ)x} dξ` with the halves ξ<1 and ξ>1
/// folded onto each other.
fn bessel_k2_scaled(x: f64) -> f64 {
    let integrand = |u: f64| (2.0 * u).cosh() * (-x * (u.cosh() - 1.0)).exp();
    let peak = (2.0 / x).max(1.0).acosh();
    let upper = (1.0 + 750.0 / x).acosh().max(peak + 1.0);
    let first = quad::integrate(integrand, 0.0, peak, 0.0, 1e-14);
    let second = quad::integrate(integrand, peak, upper, 0.0, 1e-14);
    first + second
}

/// Modified Bessel function of the second kind, order two.
pub fn bessel_k2(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("K2 needs a positive argument, got {x}"));
    }
    Ok(bessel_k2_scaled(x) * (-x).exp())
}

/// Density of `B_{T_t}` (Brownian motion started at the origin):
/// `2 (m/2π)² e^{mt} t/(t²+|x|²) K₂(m√(|x|²+t²))`, and the Cauchy-type limit
/// `t / (π² (t²+|x|²)²)` at `m = 0`.
pub fn relativistic_kernel(t: f64, mass: f64, x: Point) -> Result<f64> {
    if !(t > 0.0) {
        return invalid(format!("kernel needs t > 0, got {t}"));
    }
    let r2 = geom::norm2(x);
    let q = t * t + r2;
    if mass == 0.0 {
        return Ok(t / (PI * PI * q * q));
    }
    let z = mass * q.sqrt();
    let prefactor = 2.0 * (mass / (2.0 * PI)).powi(2) * t / q;
    Ok(prefactor * (mass * t - z).exp() * bessel_k2_scaled(z))
}

/// Tabulated radial distribution function of `|B_{T_t}|`, built by
/// integrating `4πr² P_t(r)` cell by cell in the variable `u = r/(r+t)`.
#[derive(Clone, Debug)]
pub struct KernelRadialCdf {
    t: f64,
    cumulative: Vec<f64>,
}

impl KernelRadialCdf {
    const CELLS: usize = 4096;

    pub fn new(t: f64, mass: f64) -> Result<Self> {
        if !(t > 0.0) {
            return invalid(format!("kernel needs t > 0, got {t}"));
        }
        let density_u = |u: f64| -> f64 {
            if u >= 1.0 {
                return 0.0;
            }
            let r = t * u / (1.0 - u);
            let jac = t / ((1.0 - u) * (1.0 - u));
            let p = relativistic_kernel(t, mass, [r, 0.0, 0.0]).unwrap_or(0.0);
            let v = 4.0 * PI * r * r * p * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let h = 1.0 / Self::CELLS as f64;
        let mut cumulative = Vec::with_capacity(Self::CELLS + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 0..Self::CELLS {
            let lo = k as f64 * h;
            acc += quad::integrate(density_u, lo, lo + h, 1e-15, 1e-11);
            cumulative.push(acc);
        }
        Ok(Self { t, cumulative })
    }

    /// Total mass of the tabulated density (should be 1).
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let u = r / (r + self.t);
        let pos = u * Self::CELLS as f64;
        let k = (pos.floor() as usize).min(Self::CELLS - 1);
        let frac = pos - k as f64;
        self.cumulative[k] + frac * (self.cumulative[k + 1] - self.cumulative[k])
    }
}
