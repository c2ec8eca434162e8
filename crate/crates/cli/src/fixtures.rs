//! Built-in fixture configurations.
//!
//! All fixtures use two-generator Schottky groups in `H^2` with orthogonal
//! axes through the basepoint; translation lengths stay above 2.1 so the
//! auto-tuned ping-pong caps certify with comfortable margins. F2 is the
//! conjugate control (identical factors), F3 the asymmetric pair whose axis
//! ratios straddle 1 so the diagonal lies inside the limit cone, F4 the
//! generator-swap pair with a symmetric growth indicator, and F5 a small
//! triple joining.

use crate::config::{
    CapSpec, ExperimentConfig, ExperimentParams, ExperimentSpec, FactorSpec, GeneratorSpec,
    JoiningSpec, RunParams,
};

pub const FIXTURES: &[&str] = &["F1", "F2", "F3", "F4", "F5"];

fn axis_generator(axis: usize, dim: usize, length: f64) -> GeneratorSpec {
    let mut plus = vec![0.0; dim];
    plus[axis] = 1.0;
    let minus: Vec<f64> = plus.iter().map(|x| -x).collect();
    GeneratorSpec { axis_minus: Some(minus), axis_plus: Some(plus), length: Some(length), matrix: None }
}

/// Factor with generator j translating along the e_j axis.
fn straight_factor(label: &str, lengths: &[f64]) -> FactorSpec {
    FactorSpec {
        label: label.to_string(),
        dim: 2,
        generators: lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| axis_generator(i, 2, l))
            .collect(),
    }
}

/// Factor with a tilted second axis: generator a along e_1, b along the
/// diagonal (e_1+e_2)/sqrt(2). The 45-degree cap spacing needs lengths
/// around 4 for certification, and the asymmetric junction defects thicken
/// the limit cone of triple joinings away from a planar sliver.
fn tilted_factor(label: &str, lengths: &[f64]) -> FactorSpec {
    let d = std::f64::consts::FRAC_1_SQRT_2;
    FactorSpec {
        label: label.to_string(),
        dim: 2,
        generators: vec![
            axis_generator(0, 2, lengths[0]),
            GeneratorSpec {
                axis_minus: Some(vec![-d, -d]),
                axis_plus: Some(vec![d, d]),
                length: Some(lengths[1]),
                matrix: None,
            },
        ],
    }
}

/// Factor realizing `rho o swap`: generator a acts along e_2, b along e_1.
fn swapped_factor(label: &str, lengths: &[f64]) -> FactorSpec {
    FactorSpec {
        label: label.to_string(),
        dim: 2,
        generators: lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| axis_generator(1 - i, 2, l))
            .collect(),
    }
}

fn base_config(name: &str, factors: Vec<FactorSpec>, depth: usize) -> ExperimentConfig {
    ExperimentConfig {
        schema: 1,
        name: name.to_string(),
        joining: JoiningSpec { generators: 2, factors, caps: CapSpec::default() },
        run: RunParams { max_word_length: depth, ..Default::default() },
        experiment: ExperimentSpec {
            name: "theorem-m0".to_string(),
            params: ExperimentParams::default(),
        },
    }
}

/// Fixture by name; `None` for unknown names.
pub fn fixture(name: &str) -> Option<ExperimentConfig> {
    let config = match name {
        // single-factor two-generator Schottky group
        "F1" => base_config("F1", vec![straight_factor("rho1", &[2.6, 3.4])], 12),
        // conjugate pair: identical factors. Axis lengths keep e^length far
        // above 2 sinh(3), so R = 3 shadows never straddle sibling cylinders
        "F2" => base_config(
            "F2",
            vec![
                straight_factor("rho1", &[4.0, 5.0]),
                straight_factor("rho2", &[4.0, 5.0]),
            ],
            12,
        ),
        // non-conjugate pair; axis-length ratios straddle 1 so the diagonal
        // direction is interior to the limit cone
        "F3" => base_config(
            "F3",
            vec![
                straight_factor("rho1", &[2.1, 2.7]),
                straight_factor("rho2", &[4.6, 2.1]),
            ],
            12,
        ),
        // swap-symmetric pair with asymmetric lengths: rho2 = rho1 o (a<->b)
        "F4" => base_config(
            "F4",
            vec![
                straight_factor("rho1", &[2.2, 3.4]),
                swapped_factor("rho2", &[3.4, 2.2]),
            ],
            12,
        ),
        // triple joining at small depth; the tilted third factor keeps the
        // empirical limit cone from collapsing onto a planar sliver
        "F5" => base_config(
            "F5",
            vec![
                straight_factor("rho1", &[2.2, 3.2]),
                swapped_factor("rho2", &[3.2, 2.2]),
                tilted_factor("rho3", &[4.0, 4.0]),
            ],
            9,
        ),
        _ => return None,
    };
    Some(config)
}
