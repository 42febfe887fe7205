//! Benchmark fixtures shared by the criterion targets.

use mvlab_core::coefficients::presets::{build_preset, PresetOverrides};
use mvlab_core::{CoefficientSet, EmpiricalMeasure, MeasureFlow};

pub fn preset(name: &str) -> CoefficientSet {
    build_preset(name, &PresetOverrides::default()).expect("built-in preset")
}

/// `n` atoms on a deterministic spiral in the plane.
pub fn spiral(n: usize, phase: f64) -> EmpiricalMeasure {
    let atoms = (0..n)
        .flat_map(|i| {
            let r = 0.1 * i as f64;
            let a = phase + 0.7 * i as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    EmpiricalMeasure::uniform(2, atoms).expect("finite atoms")
}

/// Constant Dirac flow at the origin on `steps + 1` uniform times in `[0, t]`.
pub fn dirac_flow(dim: usize, t: f64, steps: usize) -> MeasureFlow {
    let times = (0..=steps).map(|k| t * k as f64 / steps as f64).collect();
    MeasureFlow::constant(times, &EmpiricalMeasure::dirac(&vec![0.0; dim])).expect("increasing grid")
}
