//! Builtin parametric field families: vector potential `a`, magnetic field
//! `b` (specified independently of `a`), scalar potential `V`, and the spin
//! couplings derived from `b`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{self, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorPotential {
    #[default]
    Zero,
    Constant {
        value: Point,
    },
    /// `a(x) = ½ b × x`, the symmetric gauge of a uniform field.
    SymmetricGauge {
        b: Point,
    },
    /// `a = ∇χ` with `χ(x) = ½ c |x|²`.
    LinearGradient {
        strength: f64,
    },
    /// `a = ∇χ` with `χ(x) = A Σ_μ sin(k x_μ)`.
    PeriodicGradient {
        amplitude: f64,
        wavenumber: f64,
    },
    Sum {
        terms: Vec<VectorPotential>,
    },
}

impl VectorPotential {
    pub fn eval(&self, x: Point) -> Point {
        match self {
            Self::Zero => geom::ORIGIN,
            Self::Constant { value } => *value,
            Self::SymmetricGauge { b } => geom::scale(geom::cross(*b, x), 0.5),
            Self::LinearGradient { strength } => geom::scale(x, *strength),
            Self::PeriodicGradient { amplitude, wavenumber } => {
                let k = *wavenumber;
                [
                    amplitude * k * (k * x[0]).cos(),
                    amplitude * k * (k * x[1]).cos(),
                    amplitude * k * (k * x[2]).cos(),
                ]
            }
            Self::Sum { terms } => terms.iter().fold(geom::ORIGIN, |acc, a| geom::add(acc, a.eval(x))),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant { value } => value.iter().all(|&c| c == 0.0),
            Self::SymmetricGauge { b } => b.iter().all(|&c| c == 0.0),
            Self::LinearGradient { strength } => *strength == 0.0,
            Self::PeriodicGradient { amplitude, wavenumber } => *amplitude == 0.0 || *wavenumber == 0.0,
            Self::Sum { terms } => terms.iter().all(Self::is_zero),
        }
    }

    /// Gauge function `χ` when the potential is a pure gradient.
    pub fn gauge_function(&self, x: Point) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Constant { value } => Some(geom::dot(*value, x)),
            Self::LinearGradient { strength } => Some(0.5 * strength * geom::norm2(x)),
            Self::PeriodicGradient { amplitude, wavenumber } => {
                Some(amplitude * x.iter().map(|&c| (wavenumber * c).sin()).sum::<f64>())
            }
            Self::SymmetricGauge { b } if b.iter().all(|&c| c == 0.0) => Some(0.0),
            Self::SymmetricGauge { .. } => None,
            Self::Sum { terms } => terms.iter().map(|a| a.gauge_function(x)).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MagneticField {
    #[default]
    Zero,
    Constant {
        value: Point,
    },
    /// `amplitude · e^{-|x-c|²/(2w²)}` inside `|x-c| < cutoff`, exactly zero
    /// outside, so `W` has a full-measure zero set far from the bump.
    GaussianBump {
        amplitude: Point,
        center: Point,
        width: f64,
        cutoff: f64,
    },
    /// `b(x) = M x`; unbounded.
    Linear {
        matrix: [[f64; 3]; 3],
    },
    /// Componentwise clamp of `inner` to `[-level, level]`.
    Truncated {
        inner: Box<MagneticField>,
        level: f64,
    },
    /// `(√(b₁² + b₂²), 0, b₃)` of `inner`.
    Aligned {
        inner: Box<MagneticField>,
    },
}

impl MagneticField {
    pub fn eval(&self, x: Point) -> Point {
        match self {
            Self::Zero => geom::ORIGIN,
            Self::Constant { value } => *value,
            Self::GaussianBump { amplitude, center, width, cutoff } => {
                let r2 = geom::norm2(geom::sub(x, *center));
                if r2 >= cutoff * cutoff {
                    geom::ORIGIN
                } else {
                    geom::scale(*amplitude, (-r2 / (2.0 * width * width)).exp())
                }
            }
            Self::Linear { matrix } => [
                geom::dot(matrix[0], x),
                geom::dot(matrix[1], x),
                geom::dot(matrix[2], x),
            ],
            Self::Truncated { inner, level } => {
                let b = inner.eval(x);
                [clamp(b[0], *level), clamp(b[1], *level), clamp(b[2], *level)]
            }
            Self::Aligned { inner } => {
                let b = inner.eval(x);
                [b[0].hypot(b[1]), 0.0, b[2]]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant { value } => value.iter().all(|&c| c == 0.0),
            Self::GaussianBump { amplitude, .. } => amplitude.iter().all(|&c| c == 0.0),
            Self::Linear { matrix } => matrix.iter().flatten().all(|&c| c == 0.0),
            Self::Truncated { inner, .. } | Self::Aligned { inner } => inner.is_zero(),
        }
    }

    /// True when `b₃` does not depend on position.
    pub fn has_constant_b3(&self) -> bool {
        match self {
            Self::Zero | Self::Constant { .. } => true,
            Self::GaussianBump { amplitude, .. } => amplitude[2] == 0.0,
            Self::Linear { matrix } => matrix[2].iter().all(|&c| c == 0.0),
            Self::Truncated { inner, .. } | Self::Aligned { inner } => inner.has_constant_b3(),
        }
    }
}

#[inline]
fn clamp(v: f64, level: f64) -> f64 {
    if v > level {
        level
    } else if v < -level {
        -level
    } else {
        v
    }
}

/// `b^{(N)}`: the field clamped componentwise at level `N`.
pub fn truncate_field(b: &MagneticField, level: f64) -> Result<MagneticField> {
    if !(level > 0.0) {
        return invalid(format!("truncation level must be positive, got {level}"));
    }
    Ok(MagneticField::Truncated { inner: Box::new(b.clone()), level })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `ω² |x|² / 2`.
    Harmonic {
        omega: f64,
    },
    /// `-depth` inside the ball of radius `radius`.
    FiniteWell {
        depth: f64,
        radius: f64,
    },
    /// `-γ / √(|x|² + δ²)`.
    SoftCoulomb {
        strength: f64,
        softening: f64,
    },
}

impl Potential {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value } => *value,
            Self::Harmonic { omega } => 0.5 * omega * omega * geom::norm2(x),
            Self::FiniteWell { depth, radius } => {
                if geom::norm2(x) < radius * radius {
                    -depth
                } else {
                    0.0
                }
            }
            Self::SoftCoulomb { strength, softening } => -strength / (geom::norm2(x) + softening * softening).sqrt(),
        }
    }

    /// `‖V‖_∞`, when finite.
    pub fn sup_norm(&self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Constant { value } => Some(value.abs()),
            Self::Harmonic { omega } => (*omega == 0.0).then_some(0.0),
            Self::FiniteWell { depth, .. } => Some(depth.abs()),
            Self::SoftCoulomb { strength, softening } => Some((strength / softening).abs()),
        }
    }
}

/// The external fields of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub vector_potential: VectorPotential,
    #[serde(default)]
    pub magnetic_field: MagneticField,
    #[serde(default)]
    pub potential: Potential,
}

impl FieldConfig {
    pub fn free() -> Self {
        Self::default()
    }

    /// Uniform field `b` in the symmetric gauge.
    pub fn constant_b(b: Point) -> Self {
        Self {
            vector_potential: VectorPotential::SymmetricGauge { b },
            magnetic_field: MagneticField::Constant { value: b },
            potential: Potential::Zero,
        }
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_vector_potential(mut self, a: VectorPotential) -> Self {
        self.vector_potential = a;
        self
    }

    pub fn with_magnetic_field(mut self, b: MagneticField) -> Self {
        self.magnetic_field = b;
        self
    }

    /// The comparison configuration of the diamagnetic inequality: `a = 0`
    /// and `b` replaced by `b₀ = (√(b₁² + b₂²), 0, b₃)`.
    pub fn diamagnetic_reference(&self) -> Self {
        Self {
            vector_potential: VectorPotential::Zero,
            magnetic_field: match &self.magnetic_field {
                MagneticField::Zero => MagneticField::Zero,
                b => MagneticField::Aligned { inner: Box::new(b.clone()) },
            },
            potential: self.potential.clone(),
        }
    }

    /// Whether a path weight needs Brownian values between the subordinator
    /// images and jump times: the Stratonovich phase always does, the
    /// diagonal spin integral does once `b₃` varies in space.
    pub fn needs_fine_grid(&self, spin: bool) -> bool {
        !self.vector_potential.is_zero() || (spin && !self.magnetic_field.has_constant_b3())
    }
}

/// Spin interaction derived from a magnetic field, on `L²(ℝ³ × {±1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinCoupling {
    pub field: MagneticField,
    /// `sup |b₃|` over the sampling box.
    pub b3_sup: f64,
    /// `sup W` over the sampling box, with `W = ½√(b₁² + b₂²)`.
    pub w_sup: f64,
}

impl SpinCoupling {
    /// Estimates the sup-norms by evaluating `b` on a uniform grid of
    /// `points_per_axis³` points covering `[-half_width, half_width]³`.
    pub fn new(field: MagneticField, half_width: f64, points_per_axis: usize) -> Self {
        let k = points_per_axis.max(2);
        let mut b3_sup: f64 = 0.0;
        let mut w_sup: f64 = 0.0;
        let coord = |i: usize| -half_width + 2.0 * half_width * i as f64 / (k - 1) as f64;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let x = [coord(i), coord(j), coord(l)];
                    b3_sup = b3_sup.max(field.eval(x)[2].abs());
                    w_sup = w_sup.max(w_of(field.eval(x)));
                }
            }
        }
        Self { field, b3_sup, w_sup }
    }

    /// `U_d(x, θ) = -½ θ b₃(x)`.
    pub fn u_d(&self, x: Point, theta: f64) -> f64 {
        -0.5 * theta * self.field.eval(x)[2]
    }

    /// `U_od(x, σ) = -½ (b₁(x) + i σ b₂(x))`, so that `U_od(x, -θ)` is the
    /// amplitude for leaving spin `θ`.
    pub fn u_od(&self, x: Point, sigma: f64) -> Complex64 {
        let b = self.field.eval(x);
        Complex64::new(-0.5 * b[0], -0.5 * sigma * b[1])
    }

    pub fn w(&self, x: Point) -> f64 {
        w_of(self.field.eval(x))
    }

    /// `m_* = ‖b₃‖_∞ + ‖√(b₁² + b₂²)‖_∞`. This is the exponent of the spin
    /// factor bound `E_μ[e^{T} |e^{S_S}|] ≤ e^{½ m_* T}`.
    pub fn m_star(&self) -> f64 {
        self.b3_sup + 2.0 * self.w_sup
    }
}

#[inline]
fn w_of(b: Point) -> f64 {
    0.5 * b[0].hypot(b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truncation_cases() {
        let b = MagneticField::Constant { value: [0.5, -1.0, 1.5] };
        let t = truncate_field(&b, 2.0).unwrap();
        assert_eq!(t.eval([3.0, 1.0, 0.0]), b.eval([3.0, 1.0, 0.0]));

        let mut m = [[0.0; 3]; 3];
        m[2][0] = 1.0;
        let up = truncate_field(&MagneticField::Linear { matrix: m }, 2.0).unwrap();
        assert_eq!(up.eval([5.0, 0.0, 0.0])[2], 2.0);
        m[2][0] = -1.0;
        let down = truncate_field(&MagneticField::Linear { matrix: m }, 2.0).unwrap();
        assert_eq!(down.eval([5.0, 0.0, 0.0])[2], -2.0);
        assert!(truncate_field(&b, 0.0).is_err());
    }

    #[test]
    fn bump_vanishes_outside_cutoff() {
        let b = MagneticField::GaussianBump { amplitude: [1.0, 0.5, 0.2], center: [0.0; 3], width: 0.7, cutoff: 1.5 };
        assert_eq!(b.eval([1.6, 0.0, 0.0]), [0.0; 3]);
        assert!(b.eval([0.2, 0.0, 0.0])[0] > 0.9);
        assert!(!b.has_constant_b3());
    }

    #[test]
    fn symmetric_gauge_is_half_cross() {
        let a = VectorPotential::SymmetricGauge { b: [0.0, 0.0, 2.0] };
        assert_eq!(a.eval([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn reference_field_is_aligned() {
        let cfg = FieldConfig::constant_b([0.6, 0.8, -0.5]);
        let r = cfg.diamagnetic_reference();
        assert!(r.vector_potential.is_zero());
        let b0 = r.magnetic_field.eval([0.3, 0.2, 0.1]);
        assert!((b0[0] - 1.0).abs() < 1e-15);
        assert_eq!(b0[1], 0.0);
        assert_eq!(b0[2], -0.5);
    }

    #[test]
    fn m_star_of_constant_field() {
        let c = SpinCoupling::new(MagneticField::Constant { value: [0.6, 0.8, -0.5] }, 3.0, 5);
        assert!((c.w_sup - 0.5).abs() < 1e-15);
        assert!((c.m_star() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = FieldConfig::constant_b([0.0, 0.0, 1.0]).with_potential(Potential::Harmonic { omega: 1.0 });
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("symmetric_gauge"));
        let back: FieldConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }

    proptest! {
        #[test]
        fn off_diagonal_modulus_is_w(b1 in -3.0f64..3.0, b2 in -3.0f64..3.0, b3 in -3.0f64..3.0,
                                     x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
            let c = SpinCoupling { field: MagneticField::Constant { value: [b1, b2, b3] }, b3_sup: 0.0, w_sup: 0.0 };
            for sigma in [-1.0, 1.0] {
                prop_assert!((c.u_od([x, y, z], sigma).norm() - c.w([x, y, z])).abs() < 1e-12);
            }
            let bump = SpinCoupling {
                field: MagneticField::GaussianBump { amplitude: [b1, b2, b3], center: [0.0; 3], width: 1.0, cutoff: 2.0 },
                b3_sup: 0.0, w_sup: 0.0,
            };
            for sigma in [-1.0, 1.0] {
                prop_assert!((bump.u_od([x, y, z], sigma).norm() - bump.w([x, y, z])).abs() < 1e-12);
            }
        }
    }
}
