//! The discrete-time error plant shared by the engine, the subjects and the
//! oracle: `x(t+1) = x(t) + w(t) + u(t) + r(t)`, starting from `x(0) = 0`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default wheel sensitivity: screen widths per tick per degree of wheel
/// angle. At this gain a 75 degree hold moves the player a quarter screen
/// per second.
pub const DEFAULT_SENSITIVITY: f64 = 1.0 / 30_000.0;
/// Default wheel travel either side of centre, degrees.
pub const DEFAULT_MAX_ANGLE: f64 = 90.0;
/// Reference screen width used to express game-mode error in 100 px units.
pub const DEFAULT_SCREEN_WIDTH_PX: f64 = 1920.0;

/// Unit tag for a session. Model mode is the dimensionless integrator with
/// per-tick trail increments; game mode tracks a trail position on screen
/// and reports error in units of 100 pixels and control in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    Model,
    #[default]
    Game,
}

impl fmt::Display for UnitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitMode::Model => "model",
            UnitMode::Game => "game",
        })
    }
}

impl FromStr for UnitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(UnitMode::Model),
            "game" => Ok(UnitMode::Game),
            other => Err(format!("unknown mode `{other}` (expected model or game)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("non-finite plant input `{field}` = {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("negative delay {0} ticks")]
    NegativeDelay(i64),
}

/// Error state at a tick. `x` is normalized in model mode and in units of
/// 100 screen pixels when reported from a game session.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub t: u64,
    pub x: f64,
}

impl PlantState {
    pub fn initial() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInputs {
    /// Control action.
    pub u: f64,
    /// Trail disturbance increment.
    pub r: f64,
    /// Bump disturbance increment (already scaled by the bump gain).
    pub w: f64,
}

impl StepInputs {
    pub fn new(u: f64, r: f64, w: f64) -> Self {
        Self { u, r, w }
    }

    fn check(&self) -> Result<(), PlantError> {
        for (field, value) in [("u", self.u), ("r", self.r), ("w", self.w)] {
            if !value.is_finite() {
                return Err(PlantError::NonFinite { field, value });
            }
        }
        Ok(())
    }
}

/// Advance the plant by one tick.
pub fn step_plant(state: PlantState, inputs: StepInputs) -> Result<PlantState, PlantError> {
    inputs.check()?;
    if !state.x.is_finite() {
        return Err(PlantError::NonFinite {
            field: "x",
            value: state.x,
        });
    }
    Ok(PlantState {
        t: state.t + 1,
        x: state.x + inputs.w + inputs.u + inputs.r,
    })
}

/// Closed-form error trajectory under the delayed inversion policy
/// `u(t + T) = -r(t)`: `x(t) = sum_{s = t-T}^{t-1} r(s)` with zero history
/// before `t = 0`. Returns `x(0..=len)`, one entry longer than `r`.
pub fn telescoped_error(r: &[f64], delay: i64) -> Result<Vec<f64>, PlantError> {
    if delay < 0 {
        return Err(PlantError::NegativeDelay(delay));
    }
    let delay = delay as usize;
    let mut out = Vec::with_capacity(r.len() + 1);
    for t in 0..=r.len() {
        let lo = t.saturating_sub(delay);
        out.push(r[lo..t].iter().sum());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(x: f64, u: f64, r: f64, w: f64) -> f64 {
        step_plant(PlantState { t: 0, x }, StepInputs::new(u, r, w))
            .unwrap()
            .x
    }

    #[test]
    fn direct_evaluation() {
        assert_eq!(step(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(step(0.0, 0.0, 1.0, 0.0), 1.0);
        assert_eq!(step(1.0, -1.0, 0.5, 0.25), 0.75);
    }

    #[test]
    fn tick_advances() {
        let s = step_plant(PlantState { t: 41, x: 0.0 }, StepInputs::default()).unwrap();
        assert_eq!(s.t, 42);
    }

    #[test]
    fn rejects_non_finite() {
        let err = step_plant(PlantState::initial(), StepInputs::new(0.0, f64::NAN, 0.0));
        assert!(matches!(err, Err(PlantError::NonFinite { field: "r", .. })));
        let err = step_plant(PlantState::initial(), StepInputs::new(0.0, 0.0, f64::INFINITY));
        assert!(matches!(err, Err(PlantError::NonFinite { field: "w", .. })));
    }

    #[test]
    fn telescoped_examples() {
        let r = vec![0.7; 20];
        assert!(telescoped_error(&r, 0).unwrap().iter().all(|&x| x == 0.0));

        let ones = vec![1.0; 6];
        assert_eq!(
            telescoped_error(&ones, 2).unwrap(),
            vec![0.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0]
        );
        let sup = telescoped_error(&vec![1.0; 50], 3)
            .unwrap()
            .into_iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        assert_eq!(sup, 3.0);
        assert!(telescoped_error(&ones, -1).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn n_steps_sum_inputs(inputs in prop::collection::vec((-4i32..4, -4i32..4, -4i32..4), 0..40)) {
            // quarter-integers keep every partial sum exact
            let mut s = PlantState::initial();
            let mut total = 0.0;
            for &(u, r, w) in &inputs {
                let i = StepInputs::new(u as f64 / 4.0, r as f64 / 4.0, w as f64 / 4.0);
                total += i.u + i.r + i.w;
                s = step_plant(s, i).unwrap();
            }
            prop_assert_eq!(s.t, inputs.len() as u64);
            prop_assert_eq!(s.x, total);
        }

        #[test]
        fn telescoped_bounded_by_delay(r in prop::collection::vec(-1.0f64..=1.0, 1..80), delay in 0i64..12) {
            let sup = telescoped_error(&r, delay).unwrap().into_iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            prop_assert!(sup <= delay as f64 + 1e-12);
        }

        #[test]
        fn telescoped_matches_plant_under_inversion(r in prop::collection::vec(-1.0f64..=1.0, 1..60), delay in 0usize..10) {
            let mut s = PlantState::initial();
            let expected = telescoped_error(&r, delay as i64).unwrap();
            let mut sup_u = 0.0_f64;
            for (t, &rt) in r.iter().enumerate() {
                let u = if t >= delay { -r[t - delay] } else { 0.0 };
                sup_u = sup_u.max(u.abs());
                s = step_plant(s, StepInputs::new(u, rt, 0.0)).unwrap();
                prop_assert!((s.x - expected[t + 1]).abs() <= 1e-9);
            }
            prop_assert!(sup_u <= 1.0);
        }
    }
}
