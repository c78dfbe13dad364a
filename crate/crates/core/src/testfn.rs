//! Builtin test functions on `ℝ³ × {±1}`, each with its own sampler so the
//! `∫dx` of a matrix element can be importance-sampled.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{self, Point};
use crate::rng::RandomStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `A e^{-|x-c|²/(2w²)} e^{i k·x}`.
    Gaussian {
        #[serde(default)]
        center: Point,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        momentum: Point,
    },
    /// `A·1_{|x_μ - c_μ| ≤ h}`.
    Box {
        #[serde(default)]
        center: Point,
        half_width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpinSector {
    #[default]
    Both,
    /// Supported on `θ = +1`.
    Up,
    /// Supported on `θ = -1`.
    Down,
}

impl SpinSector {
    pub fn weight(self, theta: f64) -> f64 {
        match self {
            Self::Both => 1.0,
            Self::Up => (theta > 0.0) as u8 as f64,
            Self::Down => (theta < 0.0) as u8 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub profile: Profile,
    #[serde(default)]
    pub sector: SpinSector,
}

impl TestFunction {
    pub fn gaussian(center: Point, width: f64) -> Self {
        Self {
            profile: Profile::Gaussian { center, width, amplitude: 1.0, momentum: geom::ORIGIN },
            sector: SpinSector::Both,
        }
    }

    pub fn unit_box(center: Point, half_width: f64) -> Self {
        Self { profile: Profile::Box { center, half_width, amplitude: 1.0 }, sector: SpinSector::Both }
    }

    pub fn with_sector(mut self, sector: SpinSector) -> Self {
        self.sector = sector;
        self
    }

    pub fn with_momentum(mut self, k: Point) -> Self {
        if let Profile::Gaussian { momentum, .. } = &mut self.profile {
            *momentum = k;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.profile {
            Profile::Gaussian { width, .. } if !(*width > 0.0) => invalid(format!("Gaussian width must be positive, got {width}")),
            Profile::Box { half_width, .. } if !(*half_width > 0.0) => {
                invalid(format!("box half width must be positive, got {half_width}"))
            }
            _ => Ok(()),
        }
    }

    /// Spatial factor.
    pub fn spatial(&self, x: Point) -> Complex64 {
        match &self.profile {
            Profile::Gaussian { center, width, amplitude, momentum } => {
                let r2 = geom::norm2(geom::sub(x, *center));
                Complex64::from_polar(amplitude * (-r2 / (2.0 * width * width)).exp(), geom::dot(*momentum, x))
            }
            Profile::Box { center, half_width, amplitude } => {
                let inside = (0..3).all(|i| (x[i] - center[i]).abs() <= *half_width);
                Complex64::new(if inside { *amplitude } else { 0.0 }, 0.0)
            }
        }
    }

    pub fn eval(&self, x: Point, theta: f64) -> Complex64 {
        self.spatial(x) * self.sector.weight(theta)
    }

    /// `|f|`.
    pub fn modulus(&self) -> Self {
        let profile = match &self.profile {
            Profile::Gaussian { center, width, amplitude, .. } => {
                Profile::Gaussian { center: *center, width: *width, amplitude: amplitude.abs(), momentum: geom::ORIGIN }
            }
            Profile::Box { center, half_width, amplitude } => {
                Profile::Box { center: *center, half_width: *half_width, amplitude: amplitude.abs() }
            }
        };
        Self { profile, sector: self.sector }
    }

    pub fn is_nonnegative(&self) -> bool {
        match &self.profile {
            Profile::Gaussian { amplitude, momentum, .. } => *amplitude >= 0.0 && momentum.iter().all(|&k| k == 0.0),
            Profile::Box { amplitude, .. } => *amplitude >= 0.0,
        }
    }

    /// Draws `x` from the profile's own normalised density `q` and returns
    /// `(x, conj(f(x)) / q(x))` for the spatial factor.
    pub fn sample_conj_weighted(&self, rng: &mut RandomStream) -> (Point, Complex64) {
        match &self.profile {
            Profile::Gaussian { center, width, amplitude, momentum } => {
                let x = [
                    center[0] + width * rng.normal(),
                    center[1] + width * rng.normal(),
                    center[2] + width * rng.normal(),
                ];
                let mass = amplitude * (2.0 * std::f64::consts::PI * width * width).powf(1.5);
                (x, Complex64::from_polar(mass, -geom::dot(*momentum, x)))
            }
            Profile::Box { center, half_width, amplitude } => {
                let x = [
                    center[0] + half_width * (2.0 * rng.uniform_open() - 1.0),
                    center[1] + half_width * (2.0 * rng.uniform_open() - 1.0),
                    center[2] + half_width * (2.0 * rng.uniform_open() - 1.0),
                ];
                (x, Complex64::new(amplitude * (2.0 * half_width).powi(3), 0.0))
            }
        }
    }
}

/// `Σ_θ ∫ conj(f) g dx`, closed form for Gaussian pairs.
pub fn gaussian_inner_product(f: &TestFunction, g: &TestFunction, spinless: bool) -> Option<Complex64> {
    let (
        Profile::Gaussian { center: c1, width: w1, amplitude: a1, momentum: k1 },
        Profile::Gaussian { center: c2, width: w2, amplitude: a2, momentum: k2 },
    ) = (&f.profile, &g.profile)
    else {
        return None;
    };
    let (p1, p2) = (1.0 / (w1 * w1), 1.0 / (w2 * w2));
    let p = p1 + p2;
    let mu = geom::scale(geom::add(geom::scale(*c1, p1), geom::scale(*c2, p2)), 1.0 / p);
    let overlap = (-geom::norm2(geom::sub(*c1, *c2)) / (2.0 * (w1 * w1 + w2 * w2))).exp();
    let q = geom::sub(*k2, *k1);
    let spatial = Complex64::from_polar(
        a1 * a2 * overlap * (2.0 * std::f64::consts::PI / p).powf(1.5) * (-geom::norm2(q) / (2.0 * p)).exp(),
        geom::dot(q, mu),
    );
    let spin = if spinless {
        1.0
    } else {
        [1.0, -1.0].iter().map(|&th| f.sector.weight(th) * g.sector.weight(th)).sum()
    };
    Some(spatial * spin)
}
