//! Scalar Kalman filtering of per-event credibility.
//!
//! Each event carries its own one-dimensional filter. The state transition is
//! the identity, so the prediction keeps the last corrected credibility and
//! only inflates the error covariance by `q`. The correction blends in the
//! observed event credibility through the gain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    /// Prediction-noise covariance.
    pub q: f64,
    /// Observation-noise covariance.
    pub r: f64,
    /// Observation scalar mapping the state onto the observation.
    pub b: f64,
    /// Error covariance of a freshly created state.
    pub p0: f64,
    /// Corrected credibility of a freshly created state.
    pub c0: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams {
            q: 0.01,
            r: 0.01,
            b: 1.0,
            p0: 0.02,
            c0: 0.5,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.q, self.r, self.b, self.p0, self.c0]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.q <= 0.0 || self.r <= 0.0 || self.p0 <= 0.0 || self.b == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kalman parameters need q, r, p0 > 0 and b != 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventCredState {
    pub event_id: u64,
    /// Corrected credibility.
    pub c_hat: f64,
    /// Corrected error covariance.
    pub p_hat: f64,
    /// Number of corrections applied.
    pub t: u64,
}

impl EventCredState {
    pub fn initial(event_id: u64, params: &KalmanParams) -> Self {
        EventCredState {
            event_id,
            c_hat: params.c0,
            p_hat: params.p0,
            t: 0,
        }
    }
}

/// Predicted credibility and prior error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub c: f64,
    pub p_minus: f64,
}

/// What a correction produced, including the gain used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub state: EventCredState,
    pub gain: f64,
}

pub fn predict(state: &EventCredState, params: &KalmanParams) -> Prediction {
    Prediction {
        c: state.c_hat,
        p_minus: state.p_hat + params.q,
    }
}

pub fn correct(
    state: &EventCredState,
    prediction: Prediction,
    z: f64,
    params: &KalmanParams,
) -> Result<Correction> {
    let Prediction { c, p_minus } = prediction;
    if p_minus.is_nan() || p_minus <= 0.0 {
        return Err(Error::NonPositiveCovariance(p_minus));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::ObservationOutOfRange {
            event: state.event_id,
            value: z,
        });
    }
    let b = params.b;
    let gain = p_minus * b / (b * p_minus * b + params.r);
    let c_hat = c + gain * (z - b * c);
    let p_hat = (1.0 - gain * b) * p_minus;
    // with b = 1 the correction is a convex blend of c and z
    if b == 1.0 && (0.0..=1.0).contains(&c) {
        debug_assert!(
            (-1e-12..=1.0 + 1e-12).contains(&c_hat),
            "corrected credibility {c_hat} left [0, 1]"
        );
    }
    Ok(Correction {
        state: EventCredState {
            event_id: state.event_id,
            c_hat,
            p_hat,
            t: state.t + 1,
        },
        gain,
    })
}

/// One predict-correct cycle.
pub fn step(state: &EventCredState, z: f64, params: &KalmanParams) -> Result<Correction> {
    correct(state, predict(state, params), z, params)
}

/// Applies one predict-correct cycle to every observed event.
///
/// Events seen for the first time start from `(c0, p0)`. Events without an
/// observation are left as they are. Returns the gains keyed by event.
pub fn update_all(
    states: &mut BTreeMap<u64, EventCredState>,
    observations: &BTreeMap<u64, f64>,
    params: &KalmanParams,
) -> Result<BTreeMap<u64, f64>> {
    if let Some((&event, &value)) = observations
        .iter()
        .find(|(_, z)| !(0.0..=1.0).contains(*z))
    {
        return Err(Error::ObservationOutOfRange { event, value });
    }
    let mut gains = BTreeMap::new();
    for (&event, &z) in observations {
        let current = states
            .get(&event)
            .copied()
            .unwrap_or_else(|| EventCredState::initial(event, params));
        let corrected = step(&current, z, params)?;
        states.insert(event, corrected.state);
        gains.insert(event, corrected.gain);
    }
    Ok(gains)
}
