//! The fourteen integer model parameters, in their canonical order.

use std::fmt;

use thiserror::Error;

/// Number of model parameters.
pub const PARAM_COUNT: usize = 14;

/// Parameter names in canonical (positional argument) order.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "grid_x",
    "grid_y",
    "init_prey",
    "init_predators",
    "iterations",
    "prey_gain",
    "predator_gain",
    "prey_loss",
    "predator_loss",
    "prey_repro_threshold",
    "predator_repro_threshold",
    "prey_repro_prob",
    "predator_repro_prob",
    "cell_food_restart",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("parameter `{field}` = {value} is out of range: {constraint}")]
    OutOfRange {
        field: &'static str,
        value: u32,
        constraint: &'static str,
    },
    #[error("expected {PARAM_COUNT} parameters, got {0}")]
    WrongCount(usize),
}

impl ParamError {
    /// Name of the offending parameter, when the error concerns one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ParamError::OutOfRange { field, .. } => Some(field),
            ParamError::WrongCount(_) => None,
        }
    }
}

/// Model parameters. Reproduction probabilities are integer percentages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimParams {
    pub grid_x: u32,
    pub grid_y: u32,
    pub init_prey: u32,
    pub init_predators: u32,
    pub iterations: u32,
    pub prey_gain: u32,
    pub predator_gain: u32,
    pub prey_loss: u32,
    pub predator_loss: u32,
    pub prey_repro_threshold: u32,
    pub predator_repro_threshold: u32,
    pub prey_repro_prob: u32,
    pub predator_repro_prob: u32,
    pub cell_food_restart: u32,
}

impl SimParams {
    /// Builds parameters from values in canonical order and validates them.
    pub fn from_values(values: &[u32]) -> Result<Self, ParamError> {
        let v: [u32; PARAM_COUNT] = values
            .try_into()
            .map_err(|_| ParamError::WrongCount(values.len()))?;
        let params = SimParams {
            grid_x: v[0],
            grid_y: v[1],
            init_prey: v[2],
            init_predators: v[3],
            iterations: v[4],
            prey_gain: v[5],
            predator_gain: v[6],
            prey_loss: v[7],
            predator_loss: v[8],
            prey_repro_threshold: v[9],
            predator_repro_threshold: v[10],
            prey_repro_prob: v[11],
            predator_repro_prob: v[12],
            cell_food_restart: v[13],
        };
        params.validate()?;
        Ok(params)
    }

    /// Values in canonical order.
    pub fn values(&self) -> [u32; PARAM_COUNT] {
        [
            self.grid_x,
            self.grid_y,
            self.init_prey,
            self.init_predators,
            self.iterations,
            self.prey_gain,
            self.predator_gain,
            self.prey_loss,
            self.predator_loss,
            self.prey_repro_threshold,
            self.predator_repro_threshold,
            self.prey_repro_prob,
            self.predator_repro_prob,
            self.cell_food_restart,
        ]
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let at_least_one = [
            ("grid_x", self.grid_x),
            ("grid_y", self.grid_y),
            ("prey_loss", self.prey_loss),
            ("predator_loss", self.predator_loss),
            ("prey_repro_threshold", self.prey_repro_threshold),
            ("predator_repro_threshold", self.predator_repro_threshold),
            ("cell_food_restart", self.cell_food_restart),
        ];
        for (field, value) in at_least_one {
            if value < 1 {
                return Err(ParamError::OutOfRange {
                    field,
                    value,
                    constraint: "must be at least 1",
                });
            }
        }
        for (field, value) in [
            ("prey_repro_prob", self.prey_repro_prob),
            ("predator_repro_prob", self.predator_repro_prob),
        ] {
            if value > 100 {
                return Err(ParamError::OutOfRange {
                    field,
                    value,
                    constraint: "must be a percentage in 0..=100",
                });
            }
        }
        // Cell indices and agent indices are stored as u32.
        if u64::from(self.grid_x) * u64::from(self.grid_y) > u64::from(u32::MAX) {
            return Err(ParamError::OutOfRange {
                field: "grid_y",
                value: self.grid_y,
                constraint: "grid_x * grid_y must fit in 32 bits",
            });
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.grid_x as usize * self.grid_y as usize
    }

    /// Copy of these parameters with a different iteration count.
    pub fn with_iterations(mut self, iterations: u32) -> Self {
        self.iterations = iterations;
        self
    }
}

impl fmt::Display for SimParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values = self.values();
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> [u32; PARAM_COUNT] {
        [100, 100, 400, 200, 4000, 4, 20, 1, 1, 2, 2, 4, 5, 10]
    }

    #[test]
    fn values_round_trip() {
        let p = SimParams::from_values(&base()).unwrap();
        assert_eq!(p.values(), base());
        assert_eq!(p.prey_gain, 4);
        assert_eq!(p.cell_food_restart, 10);
    }

    #[test]
    fn rejects_wrong_count() {
        assert_eq!(
            SimParams::from_values(&base()[..13]),
            Err(ParamError::WrongCount(13))
        );
    }

    #[test]
    fn zero_loss_names_field() {
        let mut v = base();
        v[8] = 0;
        let err = SimParams::from_values(&v).unwrap_err();
        assert_eq!(err.field(), Some("predator_loss"));
    }

    #[test]
    fn probability_above_hundred_rejected() {
        let mut v = base();
        v[11] = 101;
        let err = SimParams::from_values(&v).unwrap_err();
        assert_eq!(err.field(), Some("prey_repro_prob"));
        v[11] = 100;
        assert!(SimParams::from_values(&v).is_ok());
    }

    #[test]
    fn zero_agents_and_iterations_allowed() {
        let mut v = base();
        v[2] = 0;
        v[3] = 0;
        v[4] = 0;
        v[5] = 0;
        assert!(SimParams::from_values(&v).is_ok());
    }
}
