//! Affine test-time distribution shifts for 2-D tasks.

use crate::error::{Error, Result};
use crate::synthdata::dataset::LabeledDataset;
use std::f64::consts::PI;

/// A covariate shift applied to test features. Labels are untouched; the
/// stored posterior is dropped because it refers to the original distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftTransform {
    Identity,
    /// x' = S x for a 2x2 shear matrix S.
    Shear([[f64; 2]; 2]),
    /// Counterclockwise rotation by the given angle (radians).
    Rotation(f64),
    /// x' = x + t.
    Translation([f64; 2]),
}

impl ShiftTransform {
    /// Shear along the x-axis with coupling 1.25.
    pub fn standard_shear() -> Self {
        ShiftTransform::Shear([[1.0, 1.25], [0.0, 1.0]])
    }

    /// Rotation by 30 degrees.
    pub fn standard_rotation() -> Self {
        ShiftTransform::Rotation(PI / 6.0)
    }

    /// Translation by (1.0, -0.5).
    pub fn standard_translation() -> Self {
        ShiftTransform::Translation([1.0, -0.5])
    }

    /// The benchmark suite: identity plus the three standard shifts.
    pub fn benchmark_suite() -> Vec<ShiftTransform> {
        vec![
            ShiftTransform::Identity,
            ShiftTransform::standard_shear(),
            ShiftTransform::standard_rotation(),
            ShiftTransform::standard_translation(),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShiftTransform::Identity => "identity",
            ShiftTransform::Shear(_) => "shear",
            ShiftTransform::Rotation(_) => "rotation",
            ShiftTransform::Translation(_) => "translation",
        }
    }

    /// Transform a single 2-D point.
    pub fn apply_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ShiftTransform::Identity => Ok(x.to_vec()),
            _ if x.len() != 2 => Err(Error::DimensionMismatch { expected: 2, got: x.len() }),
            ShiftTransform::Shear(m) => Ok(vec![
                m[0][0] * x[0] + m[0][1] * x[1],
                m[1][0] * x[0] + m[1][1] * x[1],
            ]),
            ShiftTransform::Rotation(theta) => {
                let (s, c) = theta.sin_cos();
                Ok(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]])
            }
            ShiftTransform::Translation(t) => Ok(vec![x[0] + t[0], x[1] + t[1]]),
        }
    }
}

/// Apply a shift to every feature row. Sample count and labels are preserved;
/// the posterior column is cleared.
pub fn apply_shift(data: &LabeledDataset, shift: &ShiftTransform) -> Result<LabeledDataset> {
    let features: Result<Vec<Vec<f64>>> =
        data.features().iter().map(|x| shift.apply_point(x)).collect();
    let shifted = LabeledDataset::new(
        features?,
        data.labels().to_vec(),
        data.num_classes(),
        None,
        data.seed(),
    )?;
    Ok(shifted)
}
