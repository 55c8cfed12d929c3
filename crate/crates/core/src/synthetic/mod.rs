//! Ground-truth densities with known cluster structure, rejection
//! samplers and gridders.

mod families;
pub mod registry;

pub use families::{
    bump_profile, bump_profile_holder, shape_distance, GapDensity, GaussianMixture, LipschitzTwoBump,
    LowerBoundFamily, Shape, SplinePair, SplineProfile,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Dataset;
use crate::grid::GriddedDensity;

/// Minimum acceptance rate of the rejection sampler.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    LipschitzTwoBump(LipschitzTwoBump),
    GaussianMixture(GaussianMixture),
    SplinePair(SplinePair),
    GapDensity(GapDensity),
    LowerBound(LowerBoundFamily),
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

/// Gap facts, in normalized density units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapFacts {
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub c0: f64,
}

/// Facts known in closed form.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct KnownFacts {
    pub split_levels: Vec<f64>,
    /// Hölder constant and exponent.
    pub holder: Option<(f64, f64)>,
    pub c_s: Option<f64>,
    pub gap: Option<GapFacts>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySpec {
    pub name: String,
    pub dim: usize,
    pub family: Family,
    pub facts: KnownFacts,
}

impl DensitySpec {
    pub fn new(name: impl Into<String>, family: Family) -> Result<Self> {
        let (dim, facts) = match &family {
            Family::LipschitzTwoBump(w) => (
                1,
                KnownFacts {
                    split_levels: vec![w.valley],
                    holder: Some((w.lipschitz(), 1.0)),
                    c_s: Some(w.separation_constant()),
                    gap: None,
                },
            ),
            Family::GaussianMixture(g) => (g.dim(), KnownFacts::default()),
            Family::SplinePair(s) => (
                s.dim,
                KnownFacts {
                    split_levels: vec![0.0],
                    holder: None,
                    c_s: Some(s.separation_constant()),
                    gap: None,
                },
            ),
            Family::GapDensity(g) => (
                2,
                KnownFacts {
                    split_levels: Vec::new(),
                    holder: None,
                    c_s: None,
                    gap: Some(GapFacts {
                        lambda_low: g.lambda_low(),
                        lambda_high: g.lambda_high(),
                        epsilon: g.epsilon(),
                        sigma: g.separation(),
                        c0: g.regularity_constant(),
                    }),
                },
            ),
            Family::LowerBound(f) => (
                f.dim,
                KnownFacts {
                    split_levels: vec![f.lambda],
                    holder: Some((f.lipschitz, f.alpha)),
                    c_s: None,
                    gap: None,
                },
            ),
            Family::Uniform { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(Error::Parameter("uniform box needs lo < hi on every axis".into()));
                }
                (lo.len(), KnownFacts::default())
            }
        };
        Ok(Self { name: name.into(), dim, family, facts })
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::LipschitzTwoBump(w) => w.pdf(x[0]),
            Family::GaussianMixture(g) => g.pdf(x),
            Family::SplinePair(s) => s.pdf(x),
            Family::GapDensity(g) => g.pdf(x),
            Family::LowerBound(f) => f.pdf(x),
            Family::Uniform { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(c, (a, b))| c >= a && c <= b);
                if inside {
                    1.0 / lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>()
                } else {
                    0.0
                }
            }
        }
    }

    /// Box containing the support (up to negligible tails for Gaussians).
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.family {
            Family::LipschitzTwoBump(_) => (vec![-2.0], vec![2.0]),
            Family::GaussianMixture(g) => g.bounds(),
            Family::SplinePair(s) => s.bounds(),
            Family::GapDensity(g) => (g.background.0.to_vec(), g.background.1.to_vec()),
            Family::LowerBound(f) => f.bounds(),
            Family::Uniform { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// Upper bound on the density.
    pub fn sup(&self) -> f64 {
        match &self.family {
            Family::LipschitzTwoBump(w) => w.peak,
            Family::GaussianMixture(g) => g.sup(),
            Family::SplinePair(s) => s.sup(),
            Family::GapDensity(g) => g.lambda_high(),
            Family::LowerBound(f) => f.sup(),
            Family::Uniform { lo, hi } => 1.0 / lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>(),
        }
    }

    /// Expected acceptance rate of the uniform-box rejection sampler.
    pub fn acceptance_rate(&self) -> f64 {
        let (lo, hi) = self.bounds();
        let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        1.0 / (self.sup() * vol)
    }

    /// `n` i.i.d. draws by rejection against the uniform envelope on
    /// [`Self::bounds`]; deterministic per seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        let rate = self.acceptance_rate();
        if !(rate >= MIN_ACCEPTANCE) {
            return Err(Error::Envelope(rate));
        }
        let (lo, hi) = self.bounds();
        let m = self.sup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coords = Vec::with_capacity(n * self.dim);
        let mut x = vec![0.0; self.dim];
        let mut accepted = 0;
        while accepted < n {
            for k in 0..self.dim {
                x[k] = rng.random_range(lo[k]..hi[k]);
            }
            let u: f64 = rng.random::<f64>() * m;
            if u < self.pdf(&x) {
                coords.extend_from_slice(&x);
                accepted += 1;
            }
        }
        Dataset::from_flat(coords, self.dim)
    }

    /// Cell-center evaluation on the bounding box; `d <= 2`.
    pub fn grid(&self, step: f64) -> Result<GriddedDensity> {
        if self.dim > 2 {
            return Err(Error::Unsupported(format!("gridding needs d <= 2, got {}", self.dim)));
        }
        let (lo, hi) = self.bounds();
        GriddedDensity::from_fn(&lo, &hi, step, |x| self.pdf(x))
    }

    /// Grid over an explicit box.
    pub fn grid_on(&self, lo: &[f64], hi: &[f64], step: f64) -> Result<GriddedDensity> {
        GriddedDensity::from_fn(lo, hi, step, |x| self.pdf(x))
    }

    /// Hölder constant and exponent, if declared.
    pub fn holder(&self) -> Option<(f64, f64)> {
        self.facts.holder
    }
}
