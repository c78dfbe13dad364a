//! Benchmark fixtures shared by the criterion targets.

use relfk_core::rng::SampleStreams;
use relfk_core::{FieldConfig, MagneticField, Mode, PathBundle, Potential, Result, VectorPotential};

/// A field with every ingredient switched on: periodic `a`, a bump `b`
/// with zeros, and a well.
pub fn busy_fields() -> FieldConfig {
    FieldConfig::free()
        .with_vector_potential(VectorPotential::PeriodicGradient { amplitude: 0.5, wavenumber: 1.0 })
        .with_magnetic_field(MagneticField::GaussianBump { amplitude: [0.8, 0.6, 0.4], center: [0.0; 3], width: 0.5, cutoff: 1.0 })
        .with_potential(Potential::FiniteWell { depth: 1.0, radius: 1.5 })
}

/// One path of the standard spin experiment.
pub fn spin_bundle(seed: u64, t: f64, fine_step: Option<f64>) -> Result<PathBundle> {
    let mut s = SampleStreams::new(seed, 0);
    let sub = relfk_core::sample_subordinator_path(t, 32, 2.0, &mut s.subordinator)?;
    let jumps = relfk_core::sample_jumps(sub.final_value(), &mut s.jumps)?;
    PathBundle::sample([0.0; 3], 0, sub, jumps, fine_step, &mut s.brownian)
}

pub const MODES: [Mode; 2] = [Mode::Spinless, Mode::Spin];
