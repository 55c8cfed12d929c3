//! Named densities addressable from the command line.

use super::{DensitySpec, Family, GapDensity, GaussianMixture, LipschitzTwoBump, SplinePair};
use crate::error::{Error, Result};

/// Raw gap-density shape values before normalization.
pub const GAP_LAMBDA_LOW: f64 = 0.05;
pub const GAP_EPSILON: f64 = 0.5;

pub const NAMES: &[&str] = &[
    "lipschitz-two-bump",
    "gaussian-two-bump",
    "gaussian-wide",
    "spline-pair-2",
    "spline-pair-3",
    "gap-disk-square",
    "uniform-square",
];

pub fn names() -> &'static [&'static str] {
    NAMES
}

pub fn lookup(name: &str) -> Result<DensitySpec> {
    let family = match name {
        "lipschitz-two-bump" => Family::LipschitzTwoBump(LipschitzTwoBump::default()),
        "gaussian-two-bump" => Family::GaussianMixture(GaussianMixture::symmetric_pair(1.5, 0.5)),
        "gaussian-wide" => Family::GaussianMixture(GaussianMixture::symmetric_pair(2.0, 0.5)),
        "spline-pair-2" => Family::SplinePair(SplinePair::new(2, 1)?),
        "spline-pair-3" => Family::SplinePair(SplinePair::new(3, 1)?),
        "gap-disk-square" => Family::GapDensity(GapDensity::disk_and_square(GAP_LAMBDA_LOW, GAP_EPSILON)?),
        "uniform-square" => Family::Uniform { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] },
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown density '{other}'; known: {}",
                NAMES.join(", ")
            )))
        }
    };
    DensitySpec::new(name, family)
}

/// Gap density with caller-chosen raw shape values.
pub fn gap_density(lambda_low: f64, epsilon: f64) -> Result<DensitySpec> {
    DensitySpec::new("gap-disk-square", Family::GapDensity(GapDensity::disk_and_square(lambda_low, epsilon)?))
}
