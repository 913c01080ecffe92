use super::{IntensityMap, RawMap};
use crate::error::{Error, Result};
use crate::flow::FlowField;

/// Remove the frame-average displacement from every pixel.
pub fn subtract_mean_flow(flow: &FlowField) -> FlowField {
    let [mx, my] = flow.mean();
    flow.map(|[dx, dy]| [dx - mx, dy - my])
        .expect("finite input minus finite mean stays finite")
}

/// Running state for the momentum (exponential moving average) of flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEmaState {
    momentum: f64,
    ema: Option<FlowField>,
}

impl FlowEmaState {
    pub fn new(momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        Ok(FlowEmaState {
            momentum,
            ema: None,
        })
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn ema(&self) -> Option<&FlowField> {
        self.ema.as_ref()
    }
}

/// One momentum step for 1-based frame index `i`.
///
/// `i == 1` passes `flow` through; later steps blend
/// `(1 - m) * flow + m * previous`.
pub fn apply_momentum(
    state: &FlowEmaState,
    flow: &FlowField,
    i: usize,
) -> Result<(FlowEmaState, FlowField)> {
    let m = state.momentum;
    let out = match (i, &state.ema) {
        (0, _) => return Err(Error::invalid("frame index", "momentum indices start at 1")),
        (1, _) => flow.clone(),
        (_, None) => {
            return Err(Error::invalid(
                "momentum state",
                "no previous flow for a frame index above 1",
            ))
        }
        (_, Some(prev)) => {
            Error::check_dims(prev.dims(), flow.dims())?;
            let vectors = flow
                .vectors()
                .iter()
                .zip(prev.vectors())
                .map(|(f, p)| [(1.0 - m) * f[0] + m * p[0], (1.0 - m) * f[1] + m * p[1]])
                .collect();
            FlowField::new(flow.width(), flow.height(), vectors)?
        }
    };
    Ok((
        FlowEmaState {
            momentum: m,
            ema: Some(out.clone()),
        },
        out,
    ))
}

/// Per-pixel L2 norm of the displacement.
pub fn flow_magnitude(flow: &FlowField) -> RawMap {
    RawMap {
        width: flow.width(),
        height: flow.height(),
        values: flow
            .vectors()
            .iter()
            .map(|v| libm::hypot(v[0], v[1]))
            .collect(),
    }
}

/// Flow magnitude min-max normalized to `[0, 255]` within the frame.
pub fn flow_intensity(flow: &FlowField) -> IntensityMap {
    flow_magnitude(flow).normalize()
}
