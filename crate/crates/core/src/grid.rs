//! Nodal grid functions on a uniform partition of `[0, 1]` and obstacles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endpoint values within this distance of zero are snapped to zero.
const PIN_TOLERANCE: f64 = 1e-12;

/// Nodal values `u_0 … u_m` of a graph pinned at both ends, `x_j = j/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps nodal values. Fails unless there are at least three nodes, all
    /// values are finite and both endpoints vanish.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Resolution {
                m: values.len().saturating_sub(1),
                min: 2,
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite nodal value {v}")));
        }
        let last = values.len() - 1;
        for idx in [0, last] {
            if values[idx].abs() > PIN_TOLERANCE {
                return Err(Error::Domain(format!(
                    "grid function must vanish at both endpoints (node {idx} = {})",
                    values[idx]
                )));
            }
            values[idx] = 0.0;
        }
        Ok(Self { values })
    }

    /// Samples `f` at the nodes; the endpoint values are forced to zero.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = (0..=m).map(|j| f(node(j, m))).collect();
        if let Some(v) = values.first_mut() {
            *v = 0.0;
        }
        if let Some(v) = values.last_mut() {
            *v = 0.0;
        }
        Self::new(values)
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::new(vec![0.0; m + 1])
    }

    /// Number of intervals.
    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.m() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        node(j, self.m())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.values.len() == other.values.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.values.len(),
                right: other.values.len(),
            })
        }
    }

    /// Reflection `u(x) ↦ u(1 − x)`.
    pub fn reflected(&self) -> GridFunction {
        let mut values = self.values.clone();
        values.reverse();
        GridFunction { values }
    }

    /// `max_j |u_j − v_j|`.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Pointwise `self + s * other` with the endpoints kept pinned.
    pub fn axpy(&self, s: f64, other: &GridFunction) -> Result<GridFunction> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        GridFunction::new(values)
    }
}

impl TryFrom<Vec<f64>> for GridFunction {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        GridFunction::new(values)
    }
}

impl From<GridFunction> for Vec<f64> {
    fn from(u: GridFunction) -> Self {
        u.values
    }
}

/// `x_j = j/m`, computed so that `x_{m/2}` is exactly one half for even `m`.
pub fn node(j: usize, m: usize) -> f64 {
    j as f64 / m as f64
}

/// The obstacle `ψ` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleSpec {
    /// `ψ(x) = height − slope·|x − 1/2|`; the slope defaults to `4·height`,
    /// which puts `ψ(0) = ψ(1) = −height`.
    #[serde(alias = "cone")]
    SymmetricCone {
        height: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
    },
    /// Piecewise-linear interpolation of `(x, ψ(x))` pairs covering `[0, 1]`.
    Sampled { table: Vec<(f64, f64)> },
}

impl ObstacleSpec {
    pub fn cone(height: f64) -> Self {
        ObstacleSpec::SymmetricCone {
            height,
            slope: None,
        }
    }

    /// A constant obstacle, convenient for unconstrained runs.
    pub fn flat(level: f64) -> Self {
        ObstacleSpec::Sampled {
            table: vec![(0.0, level), (1.0, level)],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ObstacleSpec::SymmetricCone { height, slope } => {
                height - slope.unwrap_or(4.0 * height) * (x - 0.5).abs()
            }
            ObstacleSpec::Sampled { table } => interpolate(table, x),
        }
    }

    /// Checks continuity data and the sign condition `ψ(0) < 0`, `ψ(1) < 0`.
    pub fn validate(&self) -> Result<()> {
        match self {
            ObstacleSpec::SymmetricCone { height, slope } => {
                if !height.is_finite() || !slope.unwrap_or(0.0).is_finite() {
                    return Err(Error::Obstacle("cone parameters must be finite".into()));
                }
            }
            ObstacleSpec::Sampled { table } => {
                if table.len() < 2 {
                    return Err(Error::Obstacle(
                        "sampled obstacle needs at least two points".into(),
                    ));
                }
                if table.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return Err(Error::Obstacle(
                        "sampled obstacle has non-finite entries".into(),
                    ));
                }
                if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Obstacle(
                        "sample abscissae must be strictly increasing".into(),
                    ));
                }
                if table[0].0 != 0.0 || table[table.len() - 1].0 != 1.0 {
                    return Err(Error::Obstacle(
                        "sampled obstacle must include x = 0 and x = 1".into(),
                    ));
                }
            }
        }
        let (left, right) = (self.eval(0.0), self.eval(1.0));
        if !(left < 0.0 && right < 0.0) {
            return Err(Error::Obstacle(format!(
                "obstacle must satisfy psi(0) < 0 and psi(1) < 0 (got {left}, {right})"
            )));
        }
        Ok(())
    }

    /// Nodal values `ψ(x_j)`, `j = 0 … m`.
    pub fn sample(&self, m: usize) -> Vec<f64> {
        match self {
            ObstacleSpec::SymmetricCone { height, slope } => {
                let s = slope.unwrap_or(4.0 * height);
                // |x_j - 1/2| = |2j - m| / (2m), exact at the tip for even m
                (0..=m)
                    .map(|j| height - s * (2 * j).abs_diff(m) as f64 / (2 * m) as f64)
                    .collect()
            }
            ObstacleSpec::Sampled { .. } => (0..=m).map(|j| self.eval(node(j, m))).collect(),
        }
    }
}

/// Linear interpolation in a table sorted by abscissa, clamped at the ends.
pub fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    match table.partition_point(|(xi, _)| *xi <= x) {
        0 => table[0].1,
        k if k == table.len() => table[table.len() - 1].1,
        k => {
            let (x0, y0) = table[k - 1];
            let (x1, y1) = table[k];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}
