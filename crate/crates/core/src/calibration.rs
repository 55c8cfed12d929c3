//! Error-budget constants measured once per test fixture and frozen.
//!
//! For a fixture (density, kernel, bandwidth rule) the budget is
//! `a_n = C1 (γ + log(1/h)) / sqrt(n h^d) + C2 h^α` with `γ = log n`.
//! `C1` is the 95th percentile over calibration seeds of
//! `sup_x |p̂_h(x) - p_h(x)|` divided by `(γ + log(1/h))/sqrt(n h^d)`, where
//! `p_h = E p̂_h` comes from quadrature. `C2 = sup_x |p_h(x) - p(x)| / h^α`.
//! Both take the maximum over the fixture's sample sizes. Calibration seeds
//! start at [`CALIBRATION_SEED_BASE`] and never overlap test seeds.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kde::{build_valid_kernel, error_budget, optimal_bandwidth, unit_ball_volume, DensityEstimate, ErrorBudget, Kernel};
use crate::quadrature::GaussLegendre;
use crate::synthetic::registry::lookup;
use crate::synthetic::DensitySpec;

pub const CALIBRATION_SEED_BASE: u64 = 1_000_000;
pub const CALIBRATION_SEEDS: usize = 100;
const QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `h = c (log n / n)^{1/(2α + d)}`
    Optimal { c: f64 },
    /// `h = min(σ/4, c (log n/(n ε^2))^{1/d})`, the gap-clustering range.
    Gap { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fixture {
    pub name: &'static str,
    pub density: &'static str,
    /// `None` for the spherical kernel.
    pub kernel_order: Option<usize>,
    pub alpha: f64,
    pub rule: BandwidthRule,
    pub ns: &'static [usize],
    /// Measure the bias term (false for discontinuous gap densities).
    pub with_bias: bool,
}

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "lipschitz-spherical",
        density: "lipschitz-two-bump",
        kernel_order: None,
        alpha: 1.0,
        rule: BandwidthRule::Optimal { c: 1.0 },
        ns: &[250, 1000, 4000],
        with_bias: true,
    },
    Fixture {
        name: "spline2-order2",
        density: "spline-pair-2",
        kernel_order: Some(2),
        alpha: 2.0,
        rule: BandwidthRule::Optimal { c: 1.0 },
        ns: &[250, 1000, 4000],
        with_bias: true,
    },
    Fixture {
        name: "gaussian-order2",
        density: "gaussian-two-bump",
        kernel_order: Some(2),
        alpha: 2.0,
        rule: BandwidthRule::Optimal { c: 0.5 },
        ns: &[1000, 4000],
        with_bias: true,
    },
    Fixture {
        name: "gap-spherical",
        density: "gap-disk-square",
        kernel_order: None,
        alpha: 1.0,
        rule: BandwidthRule::Gap { c: 0.68 },
        ns: &[1000, 3000, 4000],
        with_bias: false,
    },
];

/// Frozen `(fixture, C1, C2)`; regenerate with `treeclust --experiment calibrate`.
pub const FROZEN: &[(&str, f64, f64)] = &[
    ("lipschitz-spherical", 0.16578567295131108, 0.1941543883884984),
    ("spline2-order2", 0.2288283641478251, 0.005367194656778783),
    ("gaussian-order2", 0.21697304179294655, 0.0022788105076112196),
    ("gap-spherical", 0.0918868796435003, 0.0),
];

pub fn fixture(name: &str) -> Result<&'static Fixture> {
    FIXTURES
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown calibration fixture '{name}'")))
}

impl Fixture {
    pub fn spec(&self) -> Result<DensitySpec> {
        lookup(self.density)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        match self.kernel_order {
            None => Ok(Kernel::Spherical),
            Some(order) => build_valid_kernel(order, self.spec()?.dim),
        }
    }

    pub fn bandwidth(&self, n: usize) -> Result<f64> {
        let spec = self.spec()?;
        let d = spec.dim;
        Ok(match self.rule {
            BandwidthRule::Optimal { c } => optimal_bandwidth(n, d, self.alpha, c),
            BandwidthRule::Gap { c } => {
                let gap = spec.facts.gap.ok_or_else(|| Error::Precondition(format!("'{}' has no gap", spec.name)))?;
                crate::evaluation::gap_bandwidth(n, d, gap.epsilon, gap.sigma, c)
            }
        })
    }

    /// Frozen constants for this fixture.
    pub fn constants(&self) -> Result<(f64, f64)> {
        FROZEN
            .iter()
            .find(|(name, _, _)| *name == self.name)
            .map(|&(_, c1, c2)| (c1, c2))
            .ok_or_else(|| Error::InvalidInput(format!("no frozen constants for '{}'", self.name)))
    }

    /// Budget at sample size `n` with the frozen constants and `γ = log n`.
    pub fn budget(&self, n: usize, h: f64) -> Result<ErrorBudget> {
        let spec = self.spec()?;
        let (c1, c2) = self.constants()?;
        let lipschitz = spec.holder().map(|(l, _)| l).unwrap_or(0.0);
        error_budget(n, h, spec.dim, self.alpha, lipschitz, (n as f64).ln(), c1, c2)
    }
}

/// Nodes and weights for integrating against the kernel on its support.
fn kernel_rule(kernel: &Kernel, d: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let gl = GaussLegendre::new(16);
    match (kernel, d) {
        (_, 1) => {
            let norm = if kernel.is_spherical() { unit_ball_volume(1) } else { 1.0 };
            Ok(gl
                .composite_points(-1.0, 1.0, 64)
                .into_iter()
                .map(|(u, w)| (vec![u], w * kernel.eval(&[u]) / norm))
                .collect())
        }
        (Kernel::Spherical, 2) => {
            // polar: radial Gauss–Legendre, periodic trapezoid in angle
            let angles = 256;
            let norm = unit_ball_volume(2);
            let mut out = Vec::new();
            for (r, w) in gl.composite_points(0.0, 1.0, 8) {
                for a in 0..angles {
                    let t = 2.0 * std::f64::consts::PI * a as f64 / angles as f64;
                    let wt = w * r * 2.0 * std::f64::consts::PI / angles as f64 / norm;
                    out.push((vec![r * t.cos(), r * t.sin()], wt));
                }
            }
            Ok(out)
        }
        (Kernel::Valid { .. }, 2) => {
            let line = gl.composite_points(-1.0, 1.0, 16);
            let mut out = Vec::new();
            for (u, wu) in &line {
                for (v, wv) in &line {
                    out.push((vec![*u, *v], wu * wv * kernel.factor(*u) * kernel.factor(*v)));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!("smoothed density needs d <= 2, got {d}"))),
    }
}

/// `p_h(x) = ∫ K(u) p(x + h u) du` at each point, by quadrature.
pub fn smoothed_density(spec: &DensitySpec, kernel: &Kernel, h: f64, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let rule = kernel_rule(kernel, spec.dim)?;
    Ok(xs
        .par_iter()
        .map(|x| {
            let mut y = vec![0.0; x.len()];
            rule.iter()
                .map(|(u, w)| {
                    for k in 0..x.len() {
                        y[k] = x[k] + h * u[k];
                    }
                    w * spec.pdf(&y)
                })
                .sum()
        })
        .collect())
}

/// Evaluation grid for sup-norm errors: spacing `h/8` in `d = 1`, `h/3` in `d = 2`.
pub fn sup_grid(spec: &DensitySpec, h: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = spec.bounds();
    let step = if spec.dim == 1 { h / 8.0 } else { h / 3.0 };
    let counts: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| ((b - a) / step).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    (0..total)
        .map(|mut c| {
            let mut x = vec![0.0; lo.len()];
            for k in (0..lo.len()).rev() {
                x[k] = lo[k] + step * (c % counts[k]) as f64;
                c /= counts[k];
            }
            x
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeCalibration {
    pub n: usize,
    pub h: f64,
    /// `(γ + log(1/h))/sqrt(n h^d)`
    pub scale: f64,
    /// 95th percentile of `sup |p̂_h - p_h| / scale`.
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub fixture: String,
    pub seeds: usize,
    pub per_n: Vec<SizeCalibration>,
    pub c1: f64,
    pub c2: f64,
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

/// Runs the calibration for one fixture.
pub fn calibrate(fx: &Fixture, seeds: usize) -> Result<Calibration> {
    let spec = fx.spec()?;
    let kernel = fx.kernel()?;
    let d = spec.dim;
    let mut per_n = Vec::new();
    for &n in fx.ns {
        let h = fx.bandwidth(n)?;
        let xs = sup_grid(&spec, h);
        let ph = smoothed_density(&spec, &kernel, h, &xs)?;
        let scale = ((n as f64).ln() + (1.0 / h).ln()) / (n as f64 * h.powi(d as i32)).sqrt();
        let ratios: Vec<f64> = (0..seeds as u64)
            .into_par_iter()
            .map(|s| -> Result<f64> {
                let ds = spec.sample(n, CALIBRATION_SEED_BASE + s)?;
                let est = DensityEstimate::eval_many(&ds, &kernel, h, &xs)?;
                Ok(est.iter().zip(&ph).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale)
            })
            .collect::<Result<_>>()?;
        let c2 = if fx.with_bias {
            let p: Vec<f64> = xs.iter().map(|x| spec.pdf(x)).collect();
            p.iter().zip(&ph).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / h.powf(fx.alpha)
        } else {
            0.0
        };
        per_n.push(SizeCalibration { n, h, scale, c1: quantile(ratios, QUANTILE), c2 });
    }
    let c1 = per_n.iter().map(|r| r.c1).fold(0.0, f64::max);
    let c2 = per_n.iter().map(|r| r.c2).fold(0.0, f64::max);
    Ok(Calibration { fixture: fx.name.to_string(), seeds, per_n, c1, c2 })
}
