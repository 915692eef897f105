use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How offset direction is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionVariant {
    /// `min_θ cos(θ_v − θ)` exactly as the formula reads.
    Literal,
    /// `min_θ (1 − |cos(θ_v − θ)|)`: zero for axis-aligned offsets.
    #[default]
    #[serde(alias = "axis")]
    AxisPenalty,
}

impl std::str::FromStr for DirectionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "axis" | "axis-penalty" => Ok(Self::AxisPenalty),
            other => Err(Error::InvalidParameter(format!(
                "unknown direction variant `{other}` (expected literal|axis)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionParams {
    /// Odd patch side `W`.
    pub patch_size: usize,
    /// Weight of the proximity cost.
    pub lambda_proximity: f64,
    /// Weight of the direction cost.
    pub lambda_direction: f64,
    /// Preferred offset directions in radians.
    pub directions: Vec<f64>,
    pub iterations_per_level: usize,
    pub seed: u64,
    pub direction_variant: DirectionVariant,
    /// Half-width of the axis-aligned search buffer; `None` means `2·W`.
    pub buffer_halfwidth: Option<usize>,
    /// Random draws per radius of the expansion schedule.
    pub samples_per_radius: usize,
    /// Smallest side length allowed for the coarsest pyramid level.
    pub min_level_dim: usize,
    /// Standard deviation of the appearance weights; `None` means `W / 4`.
    pub patch_sigma: Option<f64>,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            patch_size: 7,
            lambda_proximity: 5e-4,
            lambda_direction: 0.5,
            directions: vec![std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
            iterations_per_level: 5,
            seed: 0,
            direction_variant: DirectionVariant::AxisPenalty,
            buffer_halfwidth: None,
            samples_per_radius: 8,
            min_level_dim: 32,
            patch_sigma: None,
        }
    }
}

impl CompletionParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.patch_size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "patch size must be odd, got {}",
                self.patch_size
            )));
        }
        if !(self.lambda_proximity >= 0.0) || !(self.lambda_direction >= 0.0) {
            return Err(Error::InvalidParameter("cost weights must be >= 0".into()));
        }
        if self.iterations_per_level == 0 {
            return Err(Error::InvalidParameter("need at least one iteration per level".into()));
        }
        if self.directions.is_empty() || self.directions.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter("direction set must be non-empty and finite".into()));
        }
        if self.samples_per_radius == 0 {
            return Err(Error::InvalidParameter("need at least one sample per radius".into()));
        }
        if self.min_level_dim < 8 {
            return Err(Error::InvalidParameter("min_level_dim must be >= 8".into()));
        }
        if let Some(s) = self.patch_sigma {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter("patch sigma must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn half_patch(&self) -> usize {
        self.patch_size / 2
    }

    pub fn buffer_halfwidth(&self) -> usize {
        self.buffer_halfwidth.unwrap_or(2 * self.patch_size)
    }

    pub fn patch_sigma(&self) -> f64 {
        self.patch_sigma.unwrap_or(self.patch_size as f64 / 4.0)
    }
}
