//! Closed-form test densities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kde::unit_ball_volume;
use crate::quadrature;

/// Piecewise-linear "W" density on [-2, 2]: peaks `P` at ±1, valley `P/4`
/// at 0, zero at ±2. Lipschitz with constant `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzTwoBump {
    pub peak: f64,
    pub valley: f64,
}

impl Default for LipschitzTwoBump {
    fn default() -> Self {
        // 2P + v = 1 with v = P/4
        let peak = 4.0 / 9.0;
        Self { peak, valley: peak / 4.0 }
    }
}

impl LipschitzTwoBump {
    pub fn pdf(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= 1.0 {
            self.valley + (self.peak - self.valley) * a
        } else if a <= 2.0 {
            self.peak * (2.0 - a)
        } else {
            0.0
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.peak.max(self.peak - self.valley)
    }

    /// Children of `{p >= v + δ}` are `2δ/(P - v)` apart.
    pub fn separation_constant(&self) -> f64 {
        2.0 / (self.peak - self.valley)
    }
}

/// Isotropic Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        if weights.len() != means.len() || weights.is_empty() {
            return Err(Error::Parameter("one weight per component is required".into()));
        }
        let d = means[0].len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return Err(Error::Parameter("component means must share a positive dimension".into()));
        }
        if !(sigma > 0.0) || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Parameter("weights and sigma must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self { weights: weights.iter().map(|w| w / total).collect(), means, sigma })
    }

    /// Symmetric 1-d two-component mixture at ±mu.
    pub fn symmetric_pair(mu: f64, sigma: f64) -> Self {
        Self::new(vec![0.5, 0.5], vec![vec![-mu], vec![mu]], sigma).expect("valid parameters")
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim() as i32;
        let s2 = self.sigma * self.sigma;
        let norm = (2.0 * std::f64::consts::PI * s2).powf(d as f64 / 2.0);
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| {
                let r2: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                w * (-r2 / (2.0 * s2)).exp() / norm
            })
            .sum()
    }

    /// Box holding every mean padded by 8σ.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let pad = 8.0 * self.sigma;
        let lo = (0..d).map(|k| self.means.iter().map(|m| m[k]).fold(f64::INFINITY, f64::min) - pad).collect();
        let hi = (0..d).map(|k| self.means.iter().map(|m| m[k]).fold(f64::NEG_INFINITY, f64::max) + pad).collect();
        (lo, hi)
    }

    pub fn sup(&self) -> f64 {
        // each component peaks at its mean; the sum is bounded by the sum of peaks
        let d = self.dim() as f64;
        let peak = 1.0 / (2.0 * std::f64::consts::PI * self.sigma * self.sigma).powf(d / 2.0);
        self.weights.iter().sum::<f64>() * peak
    }
}

/// Radial profile `f` of the spline pair: `(2-r)^α` on [1,2] and the degree-α
/// polynomial on [0,1] with `f'(0) = 0` matching `f` to order `α-1` at 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplineProfile {
    pub alpha: u32,
    /// coefficients of `f_2` in powers of `s = 1 - r`
    pub inner: Vec<f64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl SplineProfile {
    pub fn new(alpha: u32) -> Result<Self> {
        if alpha < 2 {
            return Err(Error::Parameter(format!("spline order must be an integer >= 2, got {alpha}")));
        }
        // (2 - r)^α = (1 + s)^α; keep the first α Taylor terms in s and fix the
        // top coefficient by f_2'(r=0) = 0, i.e. sum_j j c_j = 0 at s = 1
        let mut inner: Vec<f64> = (0..alpha).map(|j| binomial(alpha, j)).collect();
        let slope: f64 = inner.iter().enumerate().map(|(j, c)| j as f64 * c).sum();
        inner.push(-slope / alpha as f64);
        Ok(Self { alpha, inner })
    }

    pub fn eval(&self, r: f64) -> f64 {
        if !(0.0..2.0).contains(&r) {
            0.0
        } else if r >= 1.0 {
            (2.0 - r).powi(self.alpha as i32)
        } else {
            let s = 1.0 - r;
            self.inner.iter().rev().fold(0.0, |acc, c| acc * s + c)
        }
    }
}

/// `G(x) = (F(x - x0) + F(x + x0)) / Z` with `F(x) = f(|x|)`, `x0 = 2 e_1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplinePair {
    pub profile: SplineProfile,
    pub dim: usize,
    pub normalizer: f64,
}

impl SplinePair {
    pub fn new(alpha: u32, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        let profile = SplineProfile::new(alpha)?;
        // ∫F = d V_d ∫_0^2 f(r) r^{d-1} dr, split at the knot r = 1
        let radial = |r: f64| profile.eval(r) * r.powi(dim as i32 - 1);
        let one = quadrature::integrate(0.0, 1.0, radial) + quadrature::integrate(1.0, 2.0, radial);
        let normalizer = 2.0 * dim as f64 * unit_ball_volume(dim) * one;
        Ok(Self { profile, dim, normalizer })
    }

    pub fn unnormalized(&self, x: &[f64]) -> f64 {
        let shifted = |sign: f64| {
            let r2: f64 = x
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let c0 = if k == 0 { sign * 2.0 } else { 0.0 };
                    (c - c0) * (c - c0)
                })
                .sum();
            self.profile.eval(r2.sqrt())
        };
        shifted(1.0) + shifted(-1.0)
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.unnormalized(x) / self.normalizer
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![-2.0; self.dim];
        let mut hi = vec![2.0; self.dim];
        lo[0] = -4.0;
        hi[0] = 4.0;
        (lo, hi)
    }

    pub fn sup(&self) -> f64 {
        self.profile.eval(0.0) / self.normalizer
    }

    /// `c_S` for the split at 0: at normalized level `δ` the two balls have
    /// radius `2 - (Zδ)^{1/α}`, so their gap is `2 Z^{1/α} δ^{1/α}`.
    pub fn separation_constant(&self) -> f64 {
        2.0 * self.normalizer.powf(1.0 / self.profile.alpha as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Rect { lo: [f64; 2], hi: [f64; 2] },
}

impl Shape {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Disk { center, radius } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
            Shape::Rect { lo, hi } => x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1],
        }
    }

    /// Euclidean distance from `x` to the shape (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Disk { center, radius } => ((x[0] - center[0]).hypot(x[1] - center[1]) - radius).max(0.0),
            Shape::Rect { lo, hi } => {
                let dx = (lo[0] - x[0]).max(0.0).max(x[0] - hi[0]);
                let dy = (lo[1] - x[1]).max(0.0).max(x[1] - hi[1]);
                dx.hypot(dy)
            }
        }
    }

    /// Depth of `x` inside the shape (0 outside).
    pub fn depth(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            Shape::Disk { center, radius } => radius - (x[0] - center[0]).hypot(x[1] - center[1]),
            Shape::Rect { lo, hi } => (x[0] - lo[0]).min(hi[0] - x[0]).min(x[1] - lo[1]).min(hi[1] - x[1]),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Rect { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => 2.0 * std::f64::consts::PI * radius,
            Shape::Rect { lo, hi } => 2.0 * ((hi[0] - lo[0]) + (hi[1] - lo[1])),
        }
    }

    fn within(&self, lo: &[f64; 2], hi: &[f64; 2]) -> bool {
        let (a, b) = match self {
            Shape::Disk { center, radius } => {
                ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius])
            }
            Shape::Rect { lo, hi } => (*lo, *hi),
        };
        a[0] >= lo[0] && a[1] >= lo[1] && b[0] <= hi[0] && b[1] <= hi[1]
    }
}

/// Distance between two shapes.
pub fn shape_distance(a: &Shape, b: &Shape) -> f64 {
    match (a, b) {
        (Shape::Disk { center: c1, radius: r1 }, Shape::Disk { center: c2, radius: r2 }) => {
            ((c1[0] - c2[0]).hypot(c1[1] - c2[1]) - r1 - r2).max(0.0)
        }
        (Shape::Disk { center, radius }, rect @ Shape::Rect { .. })
        | (rect @ Shape::Rect { .. }, Shape::Disk { center, radius }) => (rect.distance(center) - radius).max(0.0),
        (Shape::Rect { lo: l1, hi: h1 }, Shape::Rect { lo: l2, hi: h2 }) => {
            let dx = (l2[0] - h1[0]).max(l1[0] - h2[0]).max(0.0);
            let dy = (l2[1] - h1[1]).max(l1[1] - h2[1]).max(0.0);
            dx.hypot(dy)
        }
    }
}

/// Piecewise-constant density with a gap: `s (λ_* + ε)` on the shapes,
/// `s λ_*` on the rest of the background box, zero outside, with `s` chosen
/// so the total mass is 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapDensity {
    pub shapes: Vec<Shape>,
    pub background: ([f64; 2], [f64; 2]),
    /// shape values before normalization
    pub raw_lambda_low: f64,
    pub raw_epsilon: f64,
    pub scale: f64,
}

impl GapDensity {
    pub fn new(shapes: Vec<Shape>, background: ([f64; 2], [f64; 2]), lambda_low: f64, epsilon: f64) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::Parameter("at least one shape is required".into()));
        }
        if !(epsilon > 0.0) || !(lambda_low >= 0.0) {
            return Err(Error::Parameter("need ε > 0 and λ_* >= 0".into()));
        }
        for (i, a) in shapes.iter().enumerate() {
            if !a.within(&background.0, &background.1) {
                return Err(Error::Parameter(format!("shape {i} leaves the background box")));
            }
            for b in &shapes[i + 1..] {
                if !(shape_distance(a, b) > 0.0) {
                    return Err(Error::Parameter("shapes must be at positive distance".into()));
                }
            }
        }
        let (lo, hi) = background;
        let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let s_area: f64 = shapes.iter().map(Shape::area).sum();
        let mass = lambda_low * box_area + epsilon * s_area;
        Ok(Self { shapes, background, raw_lambda_low: lambda_low, raw_epsilon: epsilon, scale: 1.0 / mass })
    }

    /// Layout of the disk-and-square example on [-3, 3]^2.
    pub fn disk_and_square(lambda_low: f64, epsilon: f64) -> Result<Self> {
        Self::new(
            vec![
                Shape::Disk { center: [-1.0, -1.0], radius: 0.7 },
                Shape::Rect { lo: [0.5, 0.5], hi: [1.5, 1.5] },
            ],
            ([-3.0, -3.0], [3.0, 3.0]),
            lambda_low,
            epsilon,
        )
    }

    pub fn lambda_low(&self) -> f64 {
        self.scale * self.raw_lambda_low
    }

    pub fn epsilon(&self) -> f64 {
        self.scale * self.raw_epsilon
    }

    pub fn lambda_high(&self) -> f64 {
        self.lambda_low() + self.epsilon()
    }

    pub fn in_level_set(&self, x: &[f64]) -> bool {
        self.shapes.iter().any(|s| s.contains(x))
    }

    /// Which shape (cluster) holds `x`.
    pub fn cluster_of(&self, x: &[f64]) -> Option<usize> {
        self.shapes.iter().position(|s| s.contains(x))
    }

    pub fn in_background(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.background;
        x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1]
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        if self.in_level_set(x) {
            self.lambda_high()
        } else if self.in_background(x) {
            self.lambda_low()
        } else {
            0.0
        }
    }

    /// Exact mass, from the piecewise areas.
    pub fn total_mass(&self) -> f64 {
        let (lo, hi) = self.background;
        let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        self.lambda_low() * box_area + self.epsilon() * self.level_set_area()
    }

    pub fn level_set_area(&self) -> f64 {
        self.shapes.iter().map(Shape::area).sum()
    }

    /// Probability of the level set `S`.
    pub fn level_set_probability(&self) -> f64 {
        self.lambda_high() * self.level_set_area()
    }

    /// Smallest distance between two shapes; +∞ for a single shape.
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.shapes.iter().enumerate() {
            for b in &self.shapes[i + 1..] {
                best = best.min(shape_distance(a, b));
            }
        }
        best
    }

    /// `C_0 = V_{d-1} |∂S|` with `V_1 = 2`.
    pub fn regularity_constant(&self) -> f64 {
        unit_ball_volume(1) * self.shapes.iter().map(Shape::perimeter).sum::<f64>()
    }

    /// Distance from `x` to `S`.
    pub fn distance_to_set(&self, x: &[f64]) -> f64 {
        self.shapes.iter().map(|s| s.distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to the complement of `S` (0 outside `S`).
    pub fn depth_in_set(&self, x: &[f64]) -> f64 {
        self.shapes.iter().map(|s| s.depth(x)).fold(0.0, f64::max)
    }
}

/// Profile ψ on [-1, 1] with `g(r) = δ ψ((r - b - w)/w)`.
pub fn bump_profile(alpha: f64, t: f64) -> f64 {
    let a = t.abs();
    if a > 1.0 {
        0.0
    } else if alpha >= 1.0 && a <= 0.5 {
        2f64.powf(1.0 - alpha) - a.powf(alpha)
    } else {
        (1.0 - a).powf(alpha)
    }
}

/// Hölder constant of the `(⌈α⌉-1)`-th derivative of ψ with exponent
/// `α - ⌈α⌉ + 1`, maximized over pairs on a fine grid.
pub fn bump_profile_holder(alpha: f64) -> f64 {
    let m = (alpha.ceil() as i32 - 1).max(0);
    let beta = alpha - m as f64;
    let n = 2001;
    let step = 2.4 / (n - 1) as f64;
    let ts: Vec<f64> = (0..n).map(|i| -1.2 + step * i as f64).collect();
    let eps = 1e-6;
    let deriv = |t: f64| -> f64 {
        match m {
            0 => bump_profile(alpha, t),
            1 => (bump_profile(alpha, t + eps) - bump_profile(alpha, t - eps)) / (2.0 * eps),
            _ => {
                // repeated central differences; only used for α > 2
                let mut h = eps.powf(1.0 / m as f64);
                h = h.max(1e-4);
                let mut acc = 0.0;
                for k in 0..=m {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let c = binomial(m as u32, k as u32);
                    acc += sign * c * bump_profile(alpha, t + (m as f64 / 2.0 - k as f64) * h);
                }
                acc / h.powi(m)
            }
        }
    };
    let vals: Vec<f64> = ts.iter().map(|&t| deriv(t)).collect();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let q = (vals[i] - vals[j]).abs() / (ts[j] - ts[i]).powf(beta);
            best = best.max(q);
        }
    }
    best
}

/// Member `i` of the perturbed family `f_i = f - g(|x - x_i|) + g(|x - x_0|)`
/// over the flat density `λ` on `Ω = [0, 56a] x [0, 8a]^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundFamily {
    pub alpha: f64,
    pub delta: f64,
    pub n: usize,
    pub index: usize,
    pub dim: usize,
    pub lambda: f64,
    pub lipschitz: f64,
    /// side unit `a` with `56 λ 8^{d-1} a^d = 1`
    pub a: f64,
    /// inner radius `b = (log 32/(n λ V_d))^{1/d}`
    pub b: f64,
    /// half-width `w = (δ/𝒦)^{1/α}` of the bump annulus
    pub w: f64,
    pub kappa: f64,
}

impl LowerBoundFamily {
    pub fn new(alpha: f64, delta: f64, n: usize, index: usize, dim: usize, lambda: f64, lipschitz: f64) -> Result<Self> {
        if !(1..=8).contains(&index) {
            return Err(Error::Parameter(format!("family index must be in 1..=8, got {index}")));
        }
        if !(alpha > 0.0) || !(lambda > 0.0) || !(lipschitz > 0.0) || dim == 0 {
            return Err(Error::Parameter("need α, λ, L > 0 and d >= 1".into()));
        }
        let a = (1.0 / (56.0 * lambda * 8f64.powi(dim as i32 - 1))).powf(1.0 / dim as f64);
        let vd = unit_ball_volume(dim);
        let b = (32f64.ln() / (n as f64 * lambda * vd)).powf(1.0 / dim as f64);
        let kappa = (0.9 * lipschitz / bump_profile_holder(alpha)).min(1.0);
        let max_delta = kappa / (16f64.powf(alpha) * (7.0 * lambda).powf(alpha / dim as f64));
        if !(delta > 0.0) || delta > max_delta || delta > lambda {
            return Err(Error::Parameter(format!("δ = {delta} outside (0, {:.4e}]", max_delta.min(lambda))));
        }
        let w = (delta / kappa).powf(1.0 / alpha);
        if b + 2.0 * w > 3.0 * a {
            return Err(Error::Parameter(format!(
                "perturbation radius {:.4e} exceeds 3a = {:.4e}; n is too small",
                b + 2.0 * w,
                3.0 * a
            )));
        }
        Ok(Self { alpha, delta, n, index, dim, lambda, lipschitz, a, b, w, kappa })
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        let mut c = vec![4.0 * self.a; self.dim];
        c[0] = 4.0 * self.a + 6.0 * self.a * i as f64;
        c
    }

    pub fn g(&self, r: f64) -> f64 {
        if r <= self.b {
            return 0.0;
        }
        self.delta * bump_profile(self.alpha, (r - self.b - self.w) / self.w)
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut hi = vec![8.0 * self.a; self.dim];
        hi[0] = 56.0 * self.a;
        (vec![0.0; self.dim], hi)
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.bounds();
        x.iter().zip(lo.iter().zip(&hi)).all(|(c, (l, h))| c >= l && c <= h)
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        if !self.in_domain(x) {
            return 0.0;
        }
        let dist = |c: Vec<f64>| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        self.lambda - self.g(dist(self.center(self.index))) + self.g(dist(self.center(0)))
    }

    pub fn sup(&self) -> f64 {
        self.lambda + self.delta * bump_profile(self.alpha, 0.0)
    }

    /// Radius beyond which `f_i` and `f` agree around a center.
    pub fn perturbation_radius(&self) -> f64 {
        self.b + 2.0 * self.w
    }
}
