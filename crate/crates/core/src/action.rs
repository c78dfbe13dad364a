//! Path bundles and the Feynman-Kac exponent `S = S_V + S_A + S_S`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{FieldConfig, MagneticField, Potential, SpinCoupling, VectorPotential};
use crate::geom::{self, Point};
use crate::levy::{parity_sign, BrownianPath, JumpSet, SpinTrack, SubordinatorPath};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Spin,
    Spinless,
}

/// One realization of the subordinate process: the subordinator, a Brownian
/// path on the union of every time the weight needs, the Poisson jumps on
/// `[0, T_t]` and the spin start.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    pub sub: SubordinatorPath,
    pub bm: BrownianPath,
    pub jumps: JumpSet,
    pub spin: SpinTrack,
    /// `bm.times[sub_marks[j]] == sub.values[j]`.
    pub sub_marks: Vec<usize>,
    /// `bm.times[jump_marks[k]] == jumps.jump_times[k]`.
    pub jump_marks: Vec<usize>,
}

/// Sorted union of subordinator images, jump times and (optionally) a
/// uniform grid, with the positions of the marked points.
#[derive(Clone, Debug, PartialEq)]
pub struct UnionGrid {
    pub times: Vec<f64>,
    pub sub_marks: Vec<usize>,
    pub jump_marks: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Tag {
    Sub(usize),
    Jump(usize),
    Fine,
}

pub fn union_grid(sub: &SubordinatorPath, jumps: &JumpSet, fine_step: Option<f64>) -> Result<UnionGrid> {
    let horizon = sub.final_value();
    if jumps.horizon != horizon {
        return invalid(format!("jump horizon {} differs from T_t = {horizon}", jumps.horizon));
    }
    let mut points: Vec<(f64, Tag)> = Vec::with_capacity(sub.values.len() + jumps.count());
    points.extend(sub.values.iter().enumerate().map(|(j, &v)| (v, Tag::Sub(j))));
    points.extend(jumps.jump_times.iter().enumerate().map(|(k, &r)| (r, Tag::Jump(k))));
    if let Some(h) = fine_step {
        if !(h > 0.0) {
            return invalid(format!("fine grid step must be positive, got {h}"));
        }
        let n = (horizon / h).floor() as usize;
        points.extend((1..=n).map(|k| (k as f64 * h, Tag::Fine)).filter(|&(s, _)| s < horizon));
    }
    // Stable: the subordinator images are already nondecreasing.
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut times = Vec::with_capacity(points.len());
    let mut sub_marks = vec![0; sub.values.len()];
    let mut jump_marks = vec![0; jumps.count()];
    for (s, tag) in points {
        if times.last() != Some(&s) {
            times.push(s);
        }
        let i = times.len() - 1;
        match tag {
            Tag::Sub(j) => sub_marks[j] = i,
            Tag::Jump(k) => jump_marks[k] = i,
            Tag::Fine => {}
        }
    }
    Ok(UnionGrid { times, sub_marks, jump_marks })
}

impl PathBundle {
    /// Samples Brownian motion from `start` on the union grid.
    pub fn sample(
        start: Point,
        alpha: u8,
        sub: SubordinatorPath,
        jumps: JumpSet,
        fine_step: Option<f64>,
        rng: &mut RandomStream,
    ) -> Result<Self> {
        let grid = union_grid(&sub, &jumps, fine_step)?;
        let bm = crate::levy::sample_brownian_on_grid(start, &grid.times, rng)?;
        Self::assemble(bm, alpha, sub, jumps, grid)
    }

    /// A degenerate bundle whose Brownian path stays at `start`.
    pub fn frozen(start: Point, alpha: u8, sub: SubordinatorPath, jumps: JumpSet, fine_step: Option<f64>) -> Result<Self> {
        let grid = union_grid(&sub, &jumps, fine_step)?;
        let bm = BrownianPath { start, values: vec![start; grid.times.len()], times: grid.times.clone() };
        Self::assemble(bm, alpha, sub, jumps, grid)
    }

    /// Bundle with an explicitly supplied Brownian path on the union grid.
    pub fn with_path(bm: BrownianPath, alpha: u8, sub: SubordinatorPath, jumps: JumpSet, fine_step: Option<f64>) -> Result<Self> {
        let grid = union_grid(&sub, &jumps, fine_step)?;
        if bm.times != grid.times || bm.values.len() != grid.times.len() {
            return invalid("Brownian path is not defined on the union grid");
        }
        Self::assemble(bm, alpha, sub, jumps, grid)
    }

    fn assemble(bm: BrownianPath, alpha: u8, sub: SubordinatorPath, jumps: JumpSet, grid: UnionGrid) -> Result<Self> {
        let spin = SpinTrack::new(alpha, jumps.clone())?;
        Ok(Self { sub, bm, jumps, spin, sub_marks: grid.sub_marks, jump_marks: grid.jump_marks })
    }

    /// `T_t`.
    pub fn horizon(&self) -> f64 {
        self.sub.final_value()
    }

    /// Halves every grid interval, filling the midpoints by Brownian bridge
    /// so the refined bundle is the same path seen at a finer resolution.
    pub fn refine(&self, rng: &mut RandomStream) -> Self {
        let n = self.bm.times.len();
        let mut times = Vec::with_capacity(2 * n - 1);
        let mut values = Vec::with_capacity(2 * n - 1);
        for i in 0..n {
            if i > 0 {
                let (t0, t1) = (self.bm.times[i - 1], self.bm.times[i]);
                let mid = geom::midpoint(self.bm.values[i - 1], self.bm.values[i]);
                let sd = (0.25 * (t1 - t0)).sqrt();
                times.push(0.5 * (t0 + t1));
                values.push([mid[0] + sd * rng.normal(), mid[1] + sd * rng.normal(), mid[2] + sd * rng.normal()]);
            }
            times.push(self.bm.times[i]);
            values.push(self.bm.values[i]);
        }
        Self {
            sub: self.sub.clone(),
            bm: BrownianPath { start: self.bm.start, times, values },
            jumps: self.jumps.clone(),
            spin: self.spin.clone(),
            sub_marks: self.sub_marks.iter().map(|&i| 2 * i).collect(),
            jump_marks: self.jump_marks.iter().map(|&i| 2 * i).collect(),
        }
    }

    /// `B_{T_{s_j}}`.
    pub fn subordinated_point(&self, j: usize) -> Point {
        self.bm.values[self.sub_marks[j]]
    }

    /// `q_t = (B_{T_t}, θ_{T_t})`.
    pub fn end_state(&self) -> (Point, f64) {
        (self.bm.end(), parity_sign(self.spin.alpha as usize + self.jumps.count()))
    }
}

/// Spin part of the exponent. The off-diagonal product is kept as a
/// unit-modulus mantissa times `e^{log_scale}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinAction {
    pub diag_spin: f64,
    pub offdiag_mantissa: Complex64,
    pub offdiag_log_scale: f64,
    pub zero_hit: bool,
}

impl SpinAction {
    pub fn offdiag_product(&self) -> Complex64 {
        if self.zero_hit {
            Complex64::new(0.0, 0.0)
        } else {
            self.offdiag_mantissa * self.offdiag_log_scale.exp()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionParts {
    pub s_v: f64,
    /// `S_A = -i·phase`.
    pub phase: f64,
    pub spin: Option<SpinAction>,
}

/// `S_V = -Σ_j V(B_{T_{s_j}}) Δs`.
pub fn action_potential(bundle: &PathBundle, v: &Potential) -> f64 {
    if let Potential::Zero = v {
        return 0.0;
    }
    let s = &bundle.sub.s_grid;
    let mut acc = 0.0;
    for j in 0..bundle.sub.n_steps() {
        acc += v.eval(bundle.subordinated_point(j)) * (s[j + 1] - s[j]);
    }
    -acc
}

/// Stratonovich sum `Σ a((B_i + B_{i+1})/2)·(B_{i+1} - B_i)` over the union grid.
pub fn action_vector(bundle: &PathBundle, a: &VectorPotential) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    bundle
        .bm
        .values
        .windows(2)
        .map(|w| geom::dot(a.eval(geom::midpoint(w[0], w[1])), geom::sub(w[1], w[0])))
        .sum()
}

/// `χ_ε(z) = z + ε·1_{|z|<ε}`.
pub fn chi_epsilon(z: Complex64, epsilon: f64) -> Complex64 {
    if z.norm() < epsilon {
        z + epsilon
    } else {
        z
    }
}

pub fn action_spin(bundle: &PathBundle, coupling: &SpinCoupling, epsilon: f64) -> SpinAction {
    spin_action_for(bundle, &coupling.field, epsilon)
}

fn spin_action_for(bundle: &PathBundle, b: &MagneticField, epsilon: f64) -> SpinAction {
    let alpha = bundle.spin.alpha as usize;
    let times = &bundle.bm.times;
    let values = &bundle.bm.values;

    let diag_spin = if b.is_zero() {
        0.0
    } else {
        // -U_d(x, θ) = ½ θ b₃(x); θ is constant on [τ_i, τ_{i+1}) because
        // every jump is a grid point.
        let mut acc = 0.0;
        let mut passed = 0;
        for i in 0..times.len() - 1 {
            while passed < bundle.jump_marks.len() && bundle.jump_marks[passed] <= i {
                passed += 1;
            }
            acc += parity_sign(alpha + passed) * b.eval(values[i])[2] * (times[i + 1] - times[i]);
        }
        0.5 * acc
    };

    let mut mantissa = Complex64::new(1.0, 0.0);
    let mut log_scale = 0.0;
    let mut zero_hit = false;
    for (k, &i) in bundle.jump_marks.iter().enumerate() {
        let theta_left = parity_sign(alpha + k);
        let bx = b.eval(values[i]);
        // U_od(x, -θ) = -½(b₁ - iθ b₂).
        let u = Complex64::new(-0.5 * bx[0], 0.5 * theta_left * bx[1]);
        let z = -chi_epsilon(u, epsilon);
        let r = z.norm();
        if r == 0.0 {
            zero_hit = true;
            break;
        }
        mantissa *= z / r;
        log_scale += r.ln();
    }
    SpinAction { diag_spin, offdiag_mantissa: mantissa, offdiag_log_scale: log_scale, zero_hit }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FkWeight {
    pub parts: ActionParts,
    /// `T_t`.
    pub horizon: f64,
    pub value: Complex64,
}

impl FkWeight {
    pub fn zero_hit(&self) -> bool {
        self.parts.spin.is_some_and(|s| s.zero_hit)
    }
}

/// Path weight: `e^{S_V + S_A}` in spinless mode, and
/// `e^{T_t} e^{S_V} e^{S_A} e^{diag} Π(-χ_ε(U_od))` in spin mode.
pub fn fk_weight(bundle: &PathBundle, fields: &FieldConfig, epsilon: f64, mode: Mode) -> Result<FkWeight> {
    let s_v = action_potential(bundle, &fields.potential);
    let phase = action_vector(bundle, &fields.vector_potential);
    let horizon = bundle.horizon();
    let (spin, value) = match mode {
        Mode::Spinless => (None, Complex64::from_polar((s_v).exp(), -phase)),
        Mode::Spin => {
            let sa = spin_action_for(bundle, &fields.magnetic_field, epsilon);
            let value = if sa.zero_hit {
                Complex64::new(0.0, 0.0)
            } else {
                let log_mod = horizon + s_v + sa.diag_spin + sa.offdiag_log_scale;
                sa.offdiag_mantissa * Complex64::from_polar(log_mod.exp(), -phase)
            };
            (Some(sa), value)
        }
    };
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::InvalidSample(format!(
            "non-finite weight (S_V = {s_v}, phase = {phase}, T_t = {horizon})"
        )));
    }
    Ok(FkWeight { parts: ActionParts { s_v, phase, spin }, horizon, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{sample_jumps, sample_subordinator_path};
    use crate::rng::StreamRole;
    use proptest::prelude::*;

    fn bundle(seed: u64, t: f64, mass: f64, fine: Option<f64>, start: Point, alpha: u8) -> PathBundle {
        let mut rs = RandomStream::new(seed, 0, StreamRole::Subordinator);
        let mut rj = RandomStream::new(seed, 0, StreamRole::Jumps);
        let mut rb = RandomStream::new(seed, 0, StreamRole::Brownian);
        let sub = sample_subordinator_path(t, 16, mass, &mut rs).unwrap();
        let jumps = sample_jumps(sub.final_value(), &mut rj).unwrap();
        PathBundle::sample(start, alpha, sub, jumps, fine, &mut rb).unwrap()
    }

    fn with_jumps(t: f64, jump_times: Vec<f64>, start: Point, alpha: u8) -> PathBundle {
        let sub = SubordinatorPath::deterministic(t, 8).unwrap();
        let jumps = JumpSet { horizon: t, jump_times };
        PathBundle::frozen(start, alpha, sub, jumps, None).unwrap()
    }

    #[test]
    fn union_grid_contains_marks() {
        for seed in 0..20 {
            let b = bundle(seed, 1.0, 1.0, Some(0.05), [0.0; 3], 0);
            for (j, &i) in b.sub_marks.iter().enumerate() {
                assert_eq!(b.bm.times[i], b.sub.values[j]);
            }
            for (k, &i) in b.jump_marks.iter().enumerate() {
                assert_eq!(b.bm.times[i], b.jumps.jump_times[k]);
            }
            assert_eq!(b.bm.horizon(), b.horizon());
            assert!(b.bm.times.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn refine_keeps_marks() {
        let b = bundle(3, 1.0, 1.0, None, [0.5, 0.0, 0.0], 1);
        let r = b.refine(&mut RandomStream::new(3, 0, StreamRole::Auxiliary));
        assert_eq!(r.bm.times.len(), 2 * b.bm.times.len() - 1);
        for (j, &i) in r.sub_marks.iter().enumerate() {
            assert_eq!(r.bm.values[i], b.subordinated_point(j));
        }
    }

    #[test]
    fn potential_action_cases() {
        let b = bundle(1, 1.0, 1.0, None, [0.0; 3], 0);
        assert_eq!(action_potential(&b, &Potential::Zero), 0.0);
        let c = action_potential(&b, &Potential::Constant { value: 2.5 });
        assert!((c + 2.5).abs() < 1e-14);

        let x = [0.3, -0.4, 1.2];
        let frozen = with_jumps(0.7, vec![], x, 0);
        let omega: f64 = 1.3;
        let got = action_potential(&frozen, &Potential::Harmonic { omega });
        assert!((got + 0.7 * omega * omega * geom::norm2(x) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn vector_action_cases() {
        let b = bundle(2, 1.0, 1.0, Some(0.01), [0.1, 0.2, 0.3], 0);
        assert_eq!(action_vector(&b, &VectorPotential::Zero), 0.0);
        let c = 0.8;
        let got = action_vector(&b, &VectorPotential::Constant { value: [c, 0.0, 0.0] });
        assert!((got - c * (b.bm.end()[0] - b.bm.start[0])).abs() < 1e-12);
    }

    #[test]
    fn gradient_phase_converges_to_chain_rule() {
        let a = VectorPotential::LinearGradient { strength: 1.0 };
        let mut aux = RandomStream::new(9, 0, StreamRole::Auxiliary);
        let mut b = bundle(5, 1.0, 1.0, Some(0.02), [0.2, -0.1, 0.4], 0);
        let exact = a.gauge_function(b.bm.end()).unwrap() - a.gauge_function(b.bm.start).unwrap();
        // a = x is linear, so the midpoint rule telescopes exactly.
        assert!((action_vector(&b, &a) - exact).abs() < 1e-10);

        let p = VectorPotential::PeriodicGradient { amplitude: 0.7, wavenumber: 1.3 };
        let exact = p.gauge_function(b.bm.end()).unwrap() - p.gauge_function(b.bm.start).unwrap();
        let mut err = (action_vector(&b, &p) - exact).abs();
        for _ in 0..3 {
            b = b.refine(&mut aux);
            let e = (action_vector(&b, &p) - exact).abs();
            assert!(e < err || e < 1e-6, "{e} vs {err}");
            err = e;
        }
        assert!(err < 2e-3);
    }

    #[test]
    fn spin_action_cases() {
        let zero = SpinCoupling { field: MagneticField::Zero, b3_sup: 0.0, w_sup: 0.0 };
        let quiet = with_jumps(1.0, vec![], [0.0; 3], 0);
        let s = action_spin(&quiet, &zero, 0.0);
        assert_eq!((s.diag_spin, s.offdiag_product(), s.zero_hit), (0.0, Complex64::new(1.0, 0.0), false));

        let jumpy = with_jumps(1.0, vec![0.4], [0.0; 3], 0);
        let s = action_spin(&jumpy, &zero, 0.0);
        assert!(s.zero_hit);
        let w = fk_weight(&jumpy, &FieldConfig::free(), 0.0, Mode::Spin).unwrap();
        assert_eq!(w.value, Complex64::new(0.0, 0.0));

        let beta = 0.75;
        let field = MagneticField::Constant { value: [2.0 * beta, 0.0, 0.0] };
        let coupling = SpinCoupling { field, b3_sup: 0.0, w_sup: 0.0 };
        let three = with_jumps(1.0, vec![0.2, 0.5, 0.9], [0.0; 3], 1);
        let p = action_spin(&three, &coupling, 0.1).offdiag_product();
        assert!((p - Complex64::new(beta.powi(3), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn left_limit_spin_enters_off_diagonal() {
        // b = (0, 2, 0): -U_od(x, -θ) = -iθ, so the k-th factor is -i(-1)^{α+k}.
        let coupling = SpinCoupling { field: MagneticField::Constant { value: [0.0, 2.0, 0.0] }, b3_sup: 0.0, w_sup: 0.0 };
        let two = with_jumps(1.0, vec![0.3, 0.6], [0.0; 3], 0);
        let p = action_spin(&two, &coupling, 0.0).offdiag_product();
        let expected = Complex64::new(0.0, -1.0) * Complex64::new(0.0, 1.0);
        assert!((p - expected).norm() < 1e-14);
    }

    #[test]
    fn diagonal_term_follows_spin() {
        let b3 = 0.6;
        let coupling = SpinCoupling { field: MagneticField::Constant { value: [0.0, 0.0, b3] }, b3_sup: 0.0, w_sup: 0.0 };
        let one = with_jumps(1.0, vec![0.25], [0.0; 3], 0);
        let s = action_spin(&one, &coupling, 0.0);
        assert!((s.diag_spin - 0.5 * b3 * (0.25 - 0.75)).abs() < 1e-14);
    }

    #[test]
    fn free_spin_weight_is_exp_horizon() {
        let b = with_jumps(1.3, vec![], [0.0; 3], 0);
        let w = fk_weight(&b, &FieldConfig::free(), 0.0, Mode::Spin).unwrap();
        assert!((w.value - Complex64::new(1.3f64.exp(), 0.0)).norm() < 1e-12);
        let w = fk_weight(&b, &FieldConfig::free(), 0.0, Mode::Spinless).unwrap();
        assert_eq!(w.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn decoupled_sector_weight() {
        let b3 = 0.5;
        let fields = FieldConfig::free().with_magnetic_field(MagneticField::Constant { value: [0.0, 0.0, b3] });
        for seed in 0..50 {
            let b = bundle(seed, 1.0, 2.0, None, [0.0; 3], 0);
            if b.jumps.count() > 0 {
                continue;
            }
            let spin = fk_weight(&b, &fields, 0.0, Mode::Spin).unwrap().value;
            let plain = fk_weight(&b, &fields, 0.0, Mode::Spinless).unwrap().value;
            let t = b.horizon();
            assert!((spin - plain * (t + 0.5 * b3 * t).exp()).norm() < 1e-12 * spin.norm());
        }
    }

    #[test]
    fn non_finite_fields_are_tagged() {
        let b = with_jumps(1.0, vec![], [1.0, 0.0, 0.0], 0);
        let fields = FieldConfig::free().with_potential(Potential::Constant { value: f64::NAN });
        assert!(matches!(fk_weight(&b, &fields, 0.0, Mode::Spinless), Err(Error::InvalidSample(_))));
    }

    proptest! {
        #[test]
        fn chi_epsilon_never_vanishes(re in -1.0f64..1.0, im in -1.0f64..1.0, eps in 1e-6f64..1.0) {
            let z = Complex64::new(re, im);
            prop_assert!(chi_epsilon(z, eps).norm() > 0.0);
            if z.norm() >= eps {
                prop_assert_eq!(chi_epsilon(z, eps), z);
            }
        }

        #[test]
        fn weight_bound_holds(seed in 0u64..10_000, b1 in -1.0f64..1.0, b2 in -1.0f64..1.0, b3 in -1.0f64..1.0,
                              depth in 0.0f64..2.0) {
            let bump = MagneticField::GaussianBump { amplitude: [b1, b2, b3], center: [0.0; 3], width: 1.0, cutoff: 3.0 };
            let fields = FieldConfig {
                vector_potential: VectorPotential::SymmetricGauge { b: [0.0, 0.0, 0.5] },
                magnetic_field: bump,
                potential: Potential::FiniteWell { depth, radius: 1.0 },
            };
            let b = bundle(seed, 1.0, 1.0, Some(0.05), [0.2, 0.0, 0.0], (seed % 2) as u8);
            let w = fk_weight(&b, &fields, 0.0, Mode::Spin).unwrap();
            let t = b.horizon();
            let w_sup = 0.5 * b1.hypot(b2);
            let bound = (t + depth + 0.5 * b3.abs() * t).exp() * w_sup.powi(b.jumps.count() as i32);
            prop_assert!(w.value.norm() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn epsilon_limit_is_continuous(seed in 0u64..10_000) {
            let fields = FieldConfig::free().with_magnetic_field(MagneticField::Constant { value: [0.8, -0.6, 0.3] });
            let b = bundle(seed, 1.0, 1.0, None, [0.0; 3], 0);
            let exact = fk_weight(&b, &fields, 0.0, Mode::Spin).unwrap().value;
            // W = 0.5 everywhere, so every ε below it leaves the weight untouched.
            for eps in [0.4, 0.1, 1e-3, 1e-8] {
                let w = fk_weight(&b, &fields, eps, Mode::Spin).unwrap().value;
                prop_assert!((w - exact).norm() <= 1e-10 * exact.norm().max(1.0));
            }
        }

        #[test]
        fn gauge_covariance(seed in 0u64..10_000) {
            let base = FieldConfig::constant_b([0.0, 0.0, 0.7]);
            let chi = VectorPotential::PeriodicGradient { amplitude: 0.4, wavenumber: 0.9 };
            let gauged = base.clone().with_vector_potential(VectorPotential::Sum { terms: vec![base.vector_potential.clone(), chi.clone()] });
            let mut aux = RandomStream::new(seed, 1, StreamRole::Auxiliary);
            let mut b = bundle(seed, 1.0, 1.0, Some(0.05), [0.3, 0.1, -0.2], 0);
            let expected = chi.gauge_function(b.bm.end()).unwrap() - chi.gauge_function(b.bm.start).unwrap();
            let err = |b: &PathBundle| {
                let w0 = fk_weight(b, &base, 0.0, Mode::Spinless).unwrap().value;
                let w1 = fk_weight(b, &gauged, 0.0, Mode::Spinless).unwrap().value;
                (w1 / w0 - Complex64::from_polar(1.0, -expected)).norm()
            };
            let coarse = err(&b);
            for _ in 0..4 {
                b = b.refine(&mut aux);
            }
            let fine = err(&b);
            prop_assert!(fine < 2e-3, "coarse {coarse}, fine {fine}");
        }
    }
}
