//! Named variant presets for `compare` and `solve --variant`.

use gradsamp::model::{
    DirectionMode, GsParams, LineSearchMode, NondiffStrategy, SamplingMode, ScalingMode,
    VariantConfig,
};

pub const NAMES: [&str; 11] = [
    "fixed",
    "nonnorm",
    "adaptive",
    "adaptive-noreuse",
    "trust",
    "bb",
    "matrix",
    "nonmonotone",
    "limited",
    "perturb-direction",
    "drop-center",
];

/// Applies preset `name` on top of `p`. Unknown names give `None`.
pub fn apply(name: &str, p: &GsParams) -> Option<GsParams> {
    let mut v = VariantConfig::default();
    match name {
        "fixed" | "nonnorm" => {}
        "adaptive" => {
            v.sampling_mode = SamplingMode::Adaptive { m_min: 2, m_max: 32 };
            v.reuse_gradients = true;
        }
        "adaptive-noreuse" => {
            v.sampling_mode = SamplingMode::Adaptive { m_min: 2, m_max: 32 };
        }
        "trust" => v.direction_mode = DirectionMode::TrustRegion,
        "bb" => {
            v.scaling_mode = ScalingMode::Bb {
                alpha_min: 1e-3,
                alpha_max: 1e3,
            }
        }
        "matrix" => {
            v.scaling_mode = ScalingMode::Matrix {
                lambda_min: 1e-3,
                lambda_max: 1e3,
            }
        }
        "nonmonotone" => v.line_search_mode = LineSearchMode::Nonmonotone { delta0: None },
        "limited" => v.line_search_mode = LineSearchMode::Limited { max_evals: 10 },
        "perturb-direction" => v.nondiff_strategy = NondiffStrategy::PerturbDirection,
        "drop-center" => {
            v.nondiff_strategy = NondiffStrategy::DropCenterGradient;
            v.line_search_mode = LineSearchMode::Nonmonotone { delta0: None };
        }
        _ => return None,
    }
    let mut out = p.clone();
    out.variant = v;
    Some(out)
}
