//! Martingale identities, the stopped bound and bound-state fall-off.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::{fk_weight, Mode};
use crate::engine::{estimate_paths, Estimate, ExperimentSpec, Sample};
use crate::error::{invalid, Result};
use crate::geom::{self, Point};
use crate::lattice::{BoundState, Interpolation, Lattice, PhiInterpolant};
use crate::levy::parity_sign;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleScan {
    pub x: Point,
    pub alpha: u8,
    pub t_list: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// `φ_g(x, (-1)^α)`.
    pub reference: Complex64,
}

impl MartingaleScan {
    /// Largest `|E[Y_s] - E[Y_t]| - 3σ_combined - budget` over pairs; the
    /// scan is constant when this is not positive.
    pub fn max_pairwise_excess(&self, budget: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, a) in self.estimates.iter().enumerate() {
            for b in &self.estimates[i + 1..] {
                worst = worst.max((a.mean - b.mean).norm() - 3.0 * a.stderr.hypot(b.stderr) - budget);
            }
        }
        worst
    }

    pub fn is_constant(&self, budget: f64) -> bool {
        self.max_pairwise_excess(budget) <= 0.0
    }
}

/// `E[Y_t]` for each `t`, with `Y_t = e^{tE} e^{T_t} e^{S} φ_g(q_t)` (the
/// `e^{T_t}` and spin terms only in spin mode). With the non-relativistic
/// clock this is `M_t`.
pub fn martingale_scan(
    spec: &ExperimentSpec,
    state: &BoundState,
    interpolation: Interpolation,
    x: Point,
    alpha: u8,
    t_list: &[f64],
) -> Result<MartingaleScan> {
    check_state(spec, state)?;
    let phi = PhiInterpolant::new(state, interpolation);
    let theta0 = parity_sign(alpha as usize);
    let reference = phi.value(x, theta0);
    let mut estimates = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if t == 0.0 {
            estimates.push(Estimate::exact(reference));
            continue;
        }
        let spec_t = spec.clone().with_time(t);
        let growth = (t * state.energy).exp();
        estimates.push(estimate_paths(&spec_t, x, alpha, |b| {
            let w = fk_weight(b, &spec_t.fields, spec_t.epsilon, spec_t.mode)?;
            let (end, theta) = b.end_state();
            Ok(Sample { value: growth * w.value * phi.value(end, theta), zero_hit: w.zero_hit() })
        })?);
    }
    Ok(MartingaleScan { x, alpha, t_list: t_list.to_vec(), estimates, reference })
}

fn check_state(spec: &ExperimentSpec, state: &BoundState) -> Result<()> {
    if state.spin != (spec.mode == Mode::Spin) {
        return invalid("bound state and experiment disagree on spin");
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// First s-grid time with `|B_{T_s} - x| > R`.
    #[default]
    Exit,
    /// First s-grid time with `|B_{T_s}| ≤ R`, the path started at `x`.
    Entry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppedBound {
    /// `E[e^{(t∧τ)E} e^{-∫V} e^{½ m_* T_{t∧τ}}]`.
    pub expectation: Estimate,
    pub sup_norm: f64,
    /// `|φ_g(x, (-1)^α)|`.
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Estimates the right side of `|φ_g(x)| ≤ E[…] ‖φ_g‖_∞` for the stopping
/// time `τ_R` of `rule` (`R = ∞` never stops) and reports whether it
/// dominates the left side within `3σ + budget`.
#[allow(clippy::too_many_arguments)]
pub fn stopped_bound(
    spec: &ExperimentSpec,
    state: &BoundState,
    interpolation: Interpolation,
    x: Point,
    alpha: u8,
    radius: f64,
    rule: StopRule,
    budget: f64,
) -> Result<StoppedBound> {
    check_state(spec, state)?;
    if !(radius > 0.0) {
        return invalid(format!("R must be positive, got {radius}"));
    }
    let m_star = if spec.mode == Mode::Spin { spec.m_star() } else { 0.0 };
    let energy = state.energy;
    // Only the subordinator and V enter; the spin has been bounded out.
    let plain = ExperimentSpec { mode: Mode::Spinless, ..spec.clone() };
    let expectation = estimate_paths(&plain, x, alpha, |b| {
        let n = b.sub.n_steps();
        let stop = (0..=n)
            .find(|&j| {
                let p = b.subordinated_point(j);
                match rule {
                    StopRule::Exit => geom::norm(geom::sub(p, x)) > radius,
                    StopRule::Entry => geom::norm(p) <= radius,
                }
            })
            .unwrap_or(n);
        let s = &b.sub.s_grid;
        let s_v: f64 = (0..stop).map(|j| plain.fields.potential.eval(b.subordinated_point(j)) * (s[j + 1] - s[j])).sum();
        let log = s[stop] * energy - s_v + 0.5 * m_star * b.sub.values[stop];
        Ok(Complex64::new(log.exp(), 0.0).into())
    })?;
    let sup_norm = state.sup_norm();
    let lhs = PhiInterpolant::new(state, interpolation).value(x, parity_sign(alpha as usize)).norm();
    let rhs = expectation.mean.re * sup_norm;
    let holds = lhs <= rhs + 3.0 * expectation.stderr * sup_norm + budget;
    Ok(StoppedBound { expectation, sup_norm, lhs, rhs, holds })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub m_star: f64,
    pub energy: f64,
    pub mass: f64,
    pub m_epsilon: f64,
    /// `m - √(m² - 2m_*) < -2E`; `None` when `m² ≤ 2m_*`.
    pub condition_n34: Option<bool>,
}

/// The decay constant `m_ε` (`m` if `2|E| > m`, else `2√(m|E| - E²)`) and
/// the spectral condition for fall-off when `V → 0`.
pub fn rate_bounds(energy: f64, mass: f64, m_star: f64) -> Result<RateBounds> {
    if !(energy < 0.0) {
        return invalid(format!("m_epsilon needs a negative energy, got {energy}"));
    }
    if !(mass >= 0.0) || !(m_star >= 0.0) {
        return invalid("mass and m_star must be non-negative");
    }
    let e = energy.abs();
    let m_epsilon = if 2.0 * e > mass { mass } else { 2.0 * (mass * e - e * e).sqrt() };
    let disc = mass * mass - 2.0 * m_star;
    let condition_n34 = (disc > 0.0).then(|| mass - disc.sqrt() < -2.0 * energy);
    Ok(RateBounds { m_star, energy, mass, m_epsilon, condition_n34 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a_hat: f64,
    pub b_hat: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub shells: usize,
}

/// `(|x|, max |φ| over the shell)` for every distinct radius, keeping sites
/// at least `2Δx` inside the periodic boundary.
pub fn decay_profile(state: &BoundState) -> Vec<(f64, f64)> {
    let lat: &Lattice = &state.lattice;
    let limit = 0.5 * lat.side - 2.0 * lat.spacing() + 1e-12;
    let mut pts: Vec<(f64, f64)> = (0..lat.n_sites())
        .filter_map(|s| {
            let x = lat.position(s);
            x.iter().all(|c| c.abs() <= limit).then(|| (geom::norm(x), state.site_modulus(s)))
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut shells: Vec<(f64, f64)> = Vec::new();
    for (r, v) in pts {
        match shells.last_mut() {
            Some(last) if (r - last.0).abs() <= 1e-9 * r.max(1.0) => last.1 = last.1.max(v),
            _ => shells.push((r, v)),
        }
    }
    shells
}

/// Least-squares fit of `log(shell max |φ|) = log b - a|x|` on `window`.
pub fn fit_decay(state: &BoundState, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = decay_profile(state)
        .into_iter()
        .filter(|&(r, v)| r >= window.0 && r <= window.1 && v > 0.0)
        .map(|(r, v)| (r, v.ln()))
        .collect();
    if pts.len() < 8 {
        return invalid(format!("window {window:?} holds {} radial shells, need at least 8", pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit { a_hat: -slope, b_hat: (my - slope * mx).exp(), window, r_squared, shells: pts.len() })
}

impl BoundState {
    /// A state whose continuum values at the sites are `f(x)`; for testing
    /// the fitter on planted profiles.
    pub fn from_fn<F: Fn(Point) -> f64>(lattice: Lattice, energy: f64, f: F) -> Self {
        let scale = lattice.spacing().powf(1.5);
        let phi = (0..lattice.n_sites()).map(|s| Complex64::new(f(lattice.position(s)) * scale, 0.0)).collect();
        Self { energy, phi, residual: 0.0, lattice, spin: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldConfig, Potential};
    use proptest::prelude::*;

    #[test]
    fn rate_bound_values() {
        let r = rate_bounds(-1.0, 1.0, 0.0).unwrap();
        assert_eq!(r.m_epsilon, 1.0);
        let r = rate_bounds(-0.25, 1.0, 0.1).unwrap();
        assert!((r.m_epsilon - 0.866_025_403_784_438_6).abs() < 1e-12);
        assert_eq!(r.condition_n34, Some(true));
        let r = rate_bounds(-0.25, 1.0, 0.5).unwrap();
        assert_eq!(r.condition_n34, None);
        assert!(rate_bounds(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn planted_rate_is_recovered() {
        let lat = Lattice::new(24, 12.0).unwrap();
        let s = BoundState::from_fn(lat, -1.0, |x| 3.0 * (-2.0 * geom::norm(x)).exp());
        let fit = fit_decay(&s, (1.0, 4.0)).unwrap();
        assert!((fit.a_hat - 2.0).abs() < 0.05, "{fit:?}");
        assert!((fit.b_hat - 3.0).abs() < 0.1);
        assert!(fit.r_squared > 0.999);
        assert!(fit_decay(&s, (1.0, 1.2)).is_err());
    }

    #[test]
    fn profile_stays_off_the_boundary() {
        let lat = Lattice::new(10, 8.0).unwrap();
        let s = BoundState::from_fn(lat, -1.0, |_| 1.0);
        let rmax = decay_profile(&s).last().unwrap().0;
        let limit = 4.0 - 2.0 * 0.8;
        assert!(rmax <= limit * 3f64.sqrt() + 1e-9);
    }

    #[test]
    fn unstopped_free_bound_is_the_sup_norm() {
        let lat = Lattice::new(6, 6.0).unwrap();
        let s = BoundState::from_fn(lat, 0.0, |x| (-geom::norm2(x)).exp());
        let spec = ExperimentSpec::new(1.0, FieldConfig::free(), 1.0, Mode::Spinless).with_samples(500);
        let b = stopped_bound(&spec, &s, Interpolation::Trilinear, [0.5, 0.0, 0.0], 0, f64::INFINITY, StopRule::Exit, 0.0).unwrap();
        assert_eq!(b.expectation.mean, Complex64::new(1.0, 0.0));
        assert!((b.rhs - s.sup_norm()).abs() < 1e-15);
        assert!(b.holds);
    }

    #[test]
    fn scan_at_time_zero_is_exact() {
        let lat = Lattice::new(6, 6.0).unwrap();
        let s = BoundState::from_fn(lat, -0.5, |x| (-geom::norm2(x)).exp());
        let fields = FieldConfig::free().with_potential(Potential::Harmonic { omega: 1.0 });
        let spec = ExperimentSpec::new(1.0, fields, 1.0, Mode::Spinless).with_samples(100);
        let scan = martingale_scan(&spec, &s, Interpolation::Trilinear, [0.3, 0.2, 0.0], 0, &[0.0]).unwrap();
        assert_eq!(scan.estimates[0].mean, s.value_at([0.3, 0.2, 0.0], 1.0));
        assert_eq!(scan.estimates[0].stderr, 0.0);
    }

    proptest! {
        #[test]
        fn rate_bound_is_continuous_at_the_case_boundary(m in 0.01f64..5.0) {
            let e = -0.5 * m;
            let below = rate_bounds(e * (1.0 - 1e-15), m, 0.0).unwrap().m_epsilon;
            let at = rate_bounds(e, m, 0.0).unwrap().m_epsilon;
            prop_assert!((at - m).abs() < 1e-12);
            prop_assert!((below - m).abs() < 1e-6);
        }

        #[test]
        fn planted_fits_within_tolerance(rate in 0.5f64..3.0) {
            let lat = Lattice::new(20, 10.0).unwrap();
            let s = BoundState::from_fn(lat, -1.0, |x| (-rate * geom::norm(x)).exp());
            let fit = fit_decay(&s, (0.5, 3.5)).unwrap();
            prop_assert!((fit.a_hat - rate).abs() <= 0.025 * rate);
        }
    }
}
