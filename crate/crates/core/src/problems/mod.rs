//! Benchmark problems and closure-backed test problems.

mod bimodal;
mod exhaustive;
mod spectral;

pub use bimodal::{bimodal_energy, bimodal_marginal_histogram, bimodal_mode_masses, BimodalProblem, BimodalSpec};
pub use exhaustive::{
    exhaustive_energy, generate_exhaustive_data, indicator_posterior, ExhaustiveData, ExhaustiveProblem, ExhaustiveSpec,
};
pub use spectral::{
    generate_spectral_data, sort_peaks_by_position, spectral_energy, spectral_model, PeakParams, SpectralData,
    SpectralProblem, SpectralSpec,
};

use crate::model::{Bounds, Coords, Problem, Support};

type ContinuousFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type BinaryFn = dyn Fn(&[bool]) -> f64 + Send + Sync;

enum EnergyFn {
    Continuous(Box<ContinuousFn>),
    Binary(Box<BinaryFn>),
}

/// A problem defined by an energy closure over a box or a bit string.
pub struct FnProblem {
    label: String,
    support: Support,
    n: f64,
    energy: EnergyFn,
}

impl FnProblem {
    pub fn continuous(
        label: impl Into<String>,
        bounds: Vec<Bounds>,
        n: f64,
        energy: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnProblem { label: label.into(), support: Support::Box(bounds), n, energy: EnergyFn::Continuous(Box::new(energy)) }
    }

    pub fn binary(
        label: impl Into<String>,
        len: usize,
        n: f64,
        energy: impl Fn(&[bool]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnProblem { label: label.into(), support: Support::Binary(len), n, energy: EnergyFn::Binary(Box::new(energy)) }
    }
}

impl std::fmt::Debug for FnProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnProblem").field("label", &self.label).field("support", &self.support).field("n", &self.n).finish()
    }
}

impl Problem for FnProblem {
    fn label(&self) -> &str {
        &self.label
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn data_size(&self) -> f64 {
        self.n
    }

    fn energy(&self, coords: &Coords) -> f64 {
        match (&self.energy, coords) {
            (EnergyFn::Continuous(f), Coords::Continuous(x)) => f(x),
            (EnergyFn::Binary(f), Coords::Binary(c)) => f(c),
            _ => panic!("{}: coordinate kind does not match the problem", self.label),
        }
    }
}
