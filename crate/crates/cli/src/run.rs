//! One function per subcommand; each returns its tables and whether the
//! run's own checks passed.

use relfk_core::levy::{laplace_exponent, subordinator_cdf, KernelRadialCdf};
use relfk_core::rng::{RandomStream, StreamRole};
use relfk_core::stats::{ks_statistic, MeanAccumulator};
use relfk_core::*;
use std::result::Result;

use crate::config::{EstimateConfig, LatticeConfig, RunConfig};
use crate::output::{Cell, Table};
use crate::Failure;

pub struct Outcome {
    pub tables: Vec<Table>,
    pub passed: bool,
}

fn experiment(config: &RunConfig) -> Result<&ExperimentSpec, Failure> {
    let spec = config.experiment.as_ref().ok_or_else(|| Failure::Schema("missing section `experiment`".into()))?;
    spec.validate()?;
    Ok(spec)
}

fn lattice(config: &LatticeConfig) -> Result<Lattice, Failure> {
    Ok(Lattice::new(config.n, config.side)?)
}

fn estimate_row(table: &mut Table, label: &str, t: f64, e: &Estimate) {
    table.push(vec![
        label.into(),
        t.into(),
        e.mean.re.into(),
        e.mean.im.into(),
        e.stderr.into(),
        e.n.into(),
        e.invalid_count.into(),
        e.zero_hit_fraction.into(),
        e.finite_variance_guaranteed.into(),
    ]);
}

const ESTIMATE_COLUMNS: [&str; 9] = ["quantity", "t", "re", "im", "stderr", "n", "invalid", "zero_hit_fraction", "finite_variance"];

pub fn validate(config: &RunConfig, threads: usize) -> Result<Outcome, Failure> {
    let v = &config.validate;
    let mut table = Table::new("checks", &["check", "parameters", "statistic", "limit", "pass"]);
    let mut passed = true;
    let mut record = |table: &mut Table, check: &str, params: String, stat: f64, limit: f64| {
        let ok = stat <= limit;
        passed &= ok;
        table.push(vec![check.into(), params.into(), stat.into(), limit.into(), ok.into()]);
    };

    let draw_t = |t: f64, m: f64| -> Result<Vec<f64>, Failure> {
        (0..v.samples)
            .map(|i| Ok(sample_subordinator_increment(t, m, &mut RandomStream::new(v.seed, i, StreamRole::Subordinator))?))
            .collect()
    };
    for m in [0.0, 1.0, 2.0] {
        let mut s = draw_t(1.0, m)?;
        let d = ks_statistic(&mut s, |x| subordinator_cdf(1.0, m, x).unwrap_or(f64::NAN));
        record(&mut table, "subordinator_ks", format!("t=1 m={m}"), d, v.ks_limit);
    }
    for t in [0.5, 1.0] {
        for m in [0.0, 1.0] {
            let s = draw_t(t, m)?;
            for u in [0.5, 1.0, 2.0] {
                let mut acc = MeanAccumulator::default();
                s.iter().for_each(|&x| acc.push((-u * x).exp()));
                let z = (acc.mean() - (-t * laplace_exponent(u, m)).exp()).abs() / acc.stderr();
                record(&mut table, "laplace_transform", format!("u={u} t={t} m={m}"), z, v.z_limit);
            }
        }
    }
    for m in [0.0, 1.0] {
        let mut r: Vec<f64> = (0..v.samples)
            .map(|i| {
                let s = sample_subordinator_increment(1.0, m, &mut RandomStream::new(v.seed, i, StreamRole::Subordinator))?;
                let b = sample_brownian_on_grid([0.0; 3], &[0.0, s], &mut RandomStream::new(v.seed, i, StreamRole::Brownian))?;
                Ok(geom::norm(b.end()))
            })
            .collect::<Result<_, Failure>>()?;
        let table_cdf = KernelRadialCdf::new(1.0, m)?;
        let d = ks_statistic(&mut r, |x| table_cdf.cdf(x));
        record(&mut table, "kernel_radial_ks", format!("t=1 m={m}"), d, v.ks_limit);
    }
    for m in [0.0, 1.0] {
        for xi in [[0.0, 0.0, 0.0], [0.7, 0.0, 0.0], [0.5, 1.0, -0.5]] {
            for z in [0.0, 0.8, std::f64::consts::FRAC_PI_2] {
                let mut spec = ExperimentSpec::new(1.0, FieldConfig::free(), m, Mode::Spin)
                    .with_samples(v.samples)
                    .with_seed(v.seed)
                    .with_threads(threads);
                spec.discretization.n_subordinator_steps = 1;
                let e = characteristic_mc(xi, z, &spec)?;
                let dev = (e.mean - characteristic_exact(1.0, m, xi, z)).norm();
                let stat = if e.stderr > 0.0 { dev / e.stderr } else if dev < 1e-12 { 0.0 } else { f64::INFINITY };
                record(&mut table, "characteristic", format!("xi={xi:?} z={z} m={m}"), stat, v.z_limit);
            }
        }
    }
    for (t, m, c) in [(1.0, 2.0, 1.5), (2.0, 1.0, 0.375)] {
        let mut spec = ExperimentSpec::new(t, FieldConfig::free(), m, Mode::Spinless)
            .with_samples(v.samples)
            .with_seed(v.seed)
            .with_threads(threads);
        spec.discretization.n_subordinator_steps = 1;
        let r = exp_moment(c, &spec)?;
        let exact = r.closed_form.unwrap_or(f64::NAN);
        let z = (r.estimate.mean.re - exact).abs() / r.estimate.stderr;
        record(&mut table, "exp_moment", format!("t={t} m={m} c={c}"), z, v.z_limit);
    }
    Ok(Outcome { tables: vec![table], passed })
}

pub fn estimate(config: &RunConfig) -> Result<Outcome, Failure> {
    let spec = experiment(config)?;
    let mut table = Table::new("estimate", &ESTIMATE_COLUMNS);
    match &config.estimate {
        EstimateConfig::Semigroup { x, alpha, g } => {
            estimate_row(&mut table, "semigroup", spec.t, &apply_semigroup(*x, *alpha, g, spec)?);
        }
        EstimateConfig::MatrixElement { f, g } => {
            estimate_row(&mut table, "matrix_element", spec.t, &matrix_element(f, g, spec)?);
        }
        EstimateConfig::Characteristic { xi, z } => {
            estimate_row(&mut table, "characteristic", spec.t, &characteristic_mc(*xi, *z, spec)?);
            let exact = characteristic_exact(spec.t, spec.mass, *xi, *z);
            estimate_row(&mut table, "characteristic_exact", spec.t, &Estimate::exact(exact));
        }
        EstimateConfig::ExpMoment { c } => {
            let r = exp_moment(*c, spec)?;
            estimate_row(&mut table, "exp_moment", spec.t, &r.estimate);
            if let Some(v) = r.closed_form {
                estimate_row(&mut table, "exp_moment_exact", spec.t, &Estimate::exact(v.into()));
            }
            if let Some(w) = r.warning {
                eprintln!("warning: {w}");
            }
        }
        EstimateConfig::GroundEnergy { x0, g, t1, t2 } => {
            let r = ground_state_energy(spec, *x0, g, *t1, *t2)?;
            estimate_row(&mut table, "semigroup", *t1, &r.u1);
            estimate_row(&mut table, "semigroup", *t2, &r.u2);
            let mut e = Estimate::exact(r.energy.into());
            e.stderr = r.stderr;
            e.n = r.u1.n;
            estimate_row(&mut table, "ground_energy", *t2, &e);
        }
    }
    Ok(Outcome { tables: vec![table], passed: true })
}

fn hamiltonian(spec: &ExperimentSpec, lat: &Lattice) -> Result<OperatorMatrix, Failure> {
    let spin = spec.mode == Mode::Spin;
    Ok(match spec.dynamics {
        Dynamics::Relativistic => relativistic_hamiltonian(&spec.fields, lat, spec.mass, spin)?,
        Dynamics::NonRelativistic => relfk_core::lattice::nonrelativistic_hamiltonian(&spec.fields, lat, spin)?,
    })
}

pub fn oracle(config: &RunConfig) -> Result<Outcome, Failure> {
    let spec = experiment(config)?;
    let lat = lattice(&config.lattice)?;
    let op = hamiltonian(spec, &lat)?;
    let values = op.eigen()?.values;
    let mut table = Table::new("spectrum", &["index", "eigenvalue", "semigroup_eigenvalue"]);
    for (i, &v) in values.iter().take(config.lattice.eigenvalues).enumerate() {
        table.push(vec![i.into(), v.into(), (-spec.t * v).exp().into()]);
    }
    let mut info = Table::new("operator", &["n", "side", "spacing", "dim", "hermiticity_defect"]);
    info.push(vec![lat.n.into(), lat.side.into(), lat.spacing().into(), op.dim().into(), op.hermiticity_defect().into()]);
    Ok(Outcome { tables: vec![table, info], passed: true })
}

pub fn decay(config: &RunConfig) -> Result<Outcome, Failure> {
    let spec = experiment(config)?;
    let lat = lattice(&config.lattice)?;
    let state = ground_state(&hamiltonian(spec, &lat)?)?;
    let mut profile = Table::new("profile", &["radius", "shell_max"]);
    for (r, v) in relfk_core::decay::decay_profile(&state) {
        profile.push(vec![r.into(), v.into()]);
    }
    let mut fits = Table::new("fits", &["window_lo", "window_hi", "a_hat", "b_hat", "r_squared", "shells"]);
    for &w in &config.decay.windows {
        let f = fit_decay(&state, w)?;
        fits.push(vec![w.0.into(), w.1.into(), f.a_hat.into(), f.b_hat.into(), f.r_squared.into(), f.shells.into()]);
    }
    let mut bounds = Table::new("state", &["energy", "residual", "m_star", "m_epsilon", "condition_n34"]);
    let m_star = if spec.mode == Mode::Spin { spec.m_star() } else { 0.0 };
    let (m_eps, cond) = match rate_bounds(state.energy, spec.mass, m_star) {
        Ok(r) => (Cell::Num(r.m_epsilon), Cell::Text(r.condition_n34.map_or("not_evaluable".into(), |c| c.to_string()))),
        Err(_) => (Cell::Text("positive_energy".into()), Cell::Text("not_evaluable".into())),
    };
    bounds.push(vec![state.energy.into(), state.residual.into(), m_star.into(), m_eps, cond]);
    Ok(Outcome { tables: vec![fits, profile, bounds], passed: true })
}

pub fn martingale(config: &RunConfig) -> Result<Outcome, Failure> {
    let spec = experiment(config)?;
    let mc = &config.martingale;
    let lat = lattice(&config.lattice)?;
    let state = ground_state(&hamiltonian(spec, &lat)?)?;
    let mut scan_table = Table::new("scan", &["x", "y", "z", "alpha", "t", "re", "im", "stderr", "reference_re", "reference_im"]);
    let mut stopped = Table::new("stopped", &["x", "y", "z", "alpha", "t", "radius", "lhs", "rhs", "stderr", "holds"]);
    let mut passed = true;
    for &x in &mc.points {
        let scan = martingale_scan(spec, &state, mc.interpolation, x, mc.alpha, &mc.t_list)?;
        passed &= scan.is_constant(mc.budget);
        for (t, e) in scan.t_list.iter().zip(&scan.estimates) {
            scan_table.push(vec![
                x[0].into(),
                x[1].into(),
                x[2].into(),
                mc.alpha.into(),
                (*t).into(),
                e.mean.re.into(),
                e.mean.im.into(),
                e.stderr.into(),
                scan.reference.re.into(),
                scan.reference.im.into(),
            ]);
        }
        if let Some(radius) = mc.stop_radius {
            let r = stopped_bound(spec, &state, mc.interpolation, x, mc.alpha, radius, mc.stop_rule, mc.budget)?;
            passed &= r.holds;
            stopped.push(vec![
                x[0].into(),
                x[1].into(),
                x[2].into(),
                mc.alpha.into(),
                spec.t.into(),
                radius.into(),
                r.lhs.into(),
                r.rhs.into(),
                (r.expectation.stderr * r.sup_norm).into(),
                r.holds.into(),
            ]);
        }
    }
    let mut tables = vec![scan_table];
    if mc.stop_radius.is_some() {
        tables.push(stopped);
    }
    Ok(Outcome { tables, passed })
}

pub fn diamagnetic(config: &RunConfig) -> Result<Outcome, Failure> {
    let spec = experiment(config)?;
    let d = &config.diamagnetic;
    let check = diamagnetic_check(&d.f, &d.g, spec)?;
    let mut table = Table::new("diamagnetic", &ESTIMATE_COLUMNS);
    estimate_row(&mut table, "lhs", spec.t, &check.lhs);
    estimate_row(&mut table, "rhs", spec.t, &check.rhs);
    let mut passed = check.holds;
    let mut summary = Table::new("comparison", &["check", "left", "right", "holds"]);
    summary.push(vec!["monte_carlo".into(), check.lhs.mean.norm().into(), check.rhs.mean.re.into(), check.holds.into()]);
    if d.lattice_check {
        let lat = lattice(&config.lattice)?;
        let e = ground_state(&hamiltonian(spec, &lat)?)?.energy;
        let reference = ExperimentSpec { fields: spec.fields.diamagnetic_reference(), ..spec.clone() };
        let e0 = ground_state(&hamiltonian(&reference, &lat)?)?.energy;
        let holds = e0 <= e + 1e-8;
        passed &= holds;
        summary.push(vec!["lattice_ground_energy".into(), e0.into(), e.into(), holds.into()]);
    }
    Ok(Outcome { tables: vec![table, summary], passed })
}
