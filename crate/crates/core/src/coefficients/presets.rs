//! Built-in coefficient families, addressable by name.

use super::{CoefficientSet, Constants};
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// True when neither b nor σ depends on the measure argument.
    pub measure_free: bool,
}

const PRESETS: [PresetInfo; 5] = [
    PresetInfo {
        name: "brownian",
        description: "b = 0, sigma = I, f = 0: plain Brownian motion",
        measure_free: true,
    },
    PresetInfo {
        name: "constant_drift",
        description: "b = c e1 (c = 0.2), sigma = I, f = c: drifted Brownian motion with exact density",
        measure_free: true,
    },
    PresetInfo {
        name: "bump_drift_mu_dependent",
        description: "b = c exp(-|x|^2/2)(1 + mu(tanh x1)) e1 (c = 0.5), sigma = I, f = 2c exp(-|x|^2/2)",
        measure_free: false,
    },
    PresetInfo {
        name: "singular_envelope_1d",
        description: "d = 1, b = c sgn(x)|x|^(-1/4) 1{|x|<=1}(1 + mu(tanh)/2) (c = 0.5), sigma = 1, \
                      f = 1.5c|x|^(-1/4) 1{|x|<=1}, (p, q) = (2, 8)",
        measure_free: false,
    },
    PresetInfo {
        name: "sigma_mu_dependent",
        description: "b = c exp(-|x|^2/2) e1 (c = 0.5), sigma = (1 + min(||mu||_theta, 1)) I, K = 4",
        measure_free: false,
    },
];

/// Stable list of presets.
pub fn list_presets() -> Vec<PresetInfo> {
    PRESETS.to_vec()
}

pub fn preset_info(name: &str) -> Result<PresetInfo> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .cloned()
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Optional overrides of a preset's constants.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PresetOverrides {
    pub dim: Option<usize>,
    pub theta: Option<f64>,
    pub k: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub horizon: Option<f64>,
    /// The constant `c` in the preset description.
    pub drift_scale: Option<f64>,
}

fn bump(x: &[f64]) -> f64 {
    (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
}

fn identity(d: usize, scale: f64, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = scale;
    }
}

pub fn build_preset(name: &str, ov: &PresetOverrides) -> Result<CoefficientSet> {
    preset_info(name)?;
    let dim = ov.dim.unwrap_or(1);
    if dim == 0 {
        return Err(invalid("preset dimension must be positive"));
    }
    if name == "singular_envelope_1d" && dim != 1 {
        return Err(invalid("singular_envelope_1d is one-dimensional"));
    }
    let (p_def, q_def) = if name == "singular_envelope_1d" {
        (2.0, 8.0)
    } else {
        (8.0 * dim as f64, 16.0)
    };
    let k_def = if name == "sigma_mu_dependent" { 4.0 } else { 1.0 };
    let constants = Constants {
        dim,
        brownian_dim: dim,
        theta: ov.theta.unwrap_or(2.0),
        k: ov.k.unwrap_or(k_def),
        p: ov.p.unwrap_or(p_def),
        q: ov.q.unwrap_or(q_def),
        horizon: ov.horizon.unwrap_or(1.0),
    };
    let base = CoefficientSet::new(name, constants)?;
    let c_def = if name == "constant_drift" { 0.2 } else { 0.5 };
    let c = ov.drift_scale.unwrap_or(c_def);
    if !(c >= 0.0) || !c.is_finite() {
        return Err(invalid(format!("drift_scale must be nonnegative, got {c}")));
    }
    let tanh_feature = |law: &super::LawView<'_>| vec![law.expect(|x| x[0].tanh())];
    let set = match name {
        "brownian" => base,
        "constant_drift" => base
            .with_drift(move |_, _, _, out| {
                out.fill(0.0);
                out[0] = c;
            })
            .with_envelope(move |_, _| c),
        "bump_drift_mu_dependent" => base
            .with_features(tanh_feature)
            .with_drift(move |_, x, law, out| {
                out.fill(0.0);
                out[0] = c * bump(x) * (1.0 + law.features()[0]);
            })
            .with_envelope(move |_, x| 2.0 * c * bump(x)),
        "singular_envelope_1d" => base
            .with_features(tanh_feature)
            .with_drift(move |_, x, law, out| {
                let r = x[0].abs();
                out[0] = if r > 0.0 && r <= 1.0 {
                    c * x[0].signum() * r.powf(-0.25) * (1.0 + 0.5 * law.features()[0])
                } else {
                    0.0
                };
            })
            .with_envelope(move |_, x| {
                let r = x[0].abs();
                if r == 0.0 {
                    f64::INFINITY
                } else if r <= 1.0 {
                    1.5 * c * r.powf(-0.25)
                } else {
                    0.0
                }
            })
            .with_singular_points(vec![vec![0.0]]),
        "sigma_mu_dependent" => base
            .with_drift(move |_, x, _, out| {
                out.fill(0.0);
                out[0] = c * bump(x);
            })
            .with_diffusion(move |_, _, law, out| {
                identity(dim, 1.0 + law.theta_moment().min(1.0), out)
            })
            .with_state_independent_diffusion(true)
            .with_envelope(move |_, x| c * bump(x)),
        _ => unreachable!("checked by preset_info"),
    };
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unique_and_required_present() {
        let names: Vec<_> = list_presets().iter().map(|p| p.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        for n in [
            "brownian",
            "constant_drift",
            "bump_drift_mu_dependent",
            "singular_envelope_1d",
            "sigma_mu_dependent",
        ] {
            assert!(names.contains(&n));
            build_preset(n, &PresetOverrides::default()).unwrap();
        }
        assert!(matches!(
            build_preset("nope", &PresetOverrides::default()),
            Err(Error::UnknownPreset(_))
        ));
    }
}
