//! Kernel density estimation: the spherical kernel, tensor-product valid
//! kernels, bandwidth rule and the sup-norm error budget `a_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dataset, NeighborIndex};
use crate::quadrature;

/// Volume of the Euclidean unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2π / d
    let (mut even, mut odd) = (1.0, 2.0);
    if d == 0 {
        return 1.0;
    }
    for k in 2..=d {
        let v = 2.0 * std::f64::consts::PI / k as f64;
        if k % 2 == 0 {
            even *= v;
        } else {
            odd *= v;
        }
    }
    if d.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// Tolerance for the moment checks run when a valid kernel is built.
pub const MOMENT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// Indicator of the closed unit ball.
    Spherical,
    /// Product of the 1-d kernel `sum_{m<=order} phi_m(0) phi_m(u)` on [-1,1].
    Valid {
        order: usize,
        /// power-basis coefficients of the 1-d factor, lowest degree first
        coeffs: Vec<f64>,
    },
}

impl Kernel {
    pub fn is_spherical(&self) -> bool {
        matches!(self, Kernel::Spherical)
    }

    pub fn order(&self) -> Option<usize> {
        match self {
            Kernel::Spherical => None,
            Kernel::Valid { order, .. } => Some(*order),
        }
    }

    /// One-dimensional factor `K_1(u)` of a valid kernel, 0 off [-1,1].
    pub fn factor(&self, u: f64) -> f64 {
        match self {
            Kernel::Spherical => {
                if u.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Valid { coeffs, .. } => {
                if u.abs() > 1.0 {
                    return 0.0;
                }
                coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
            }
        }
    }

    /// Kernel value at `u` (unnormalized ball indicator for the spherical case).
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Kernel::Spherical => {
                if u.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Valid { .. } => u.iter().map(|&x| self.factor(x)).product(),
        }
    }

    /// Radius of a Euclidean ball containing the support in dimension `d`.
    pub fn support_radius(&self, d: usize) -> f64 {
        match self {
            Kernel::Spherical => 1.0,
            Kernel::Valid { .. } => (d as f64).sqrt(),
        }
    }
}

/// Orthonormal Legendre polynomial `phi_m` in power-basis coefficients.
fn orthonormal_legendre(m: usize) -> Vec<f64> {
    let mut p0 = vec![1.0];
    let mut p1 = vec![0.0, 1.0];
    let poly = match m {
        0 => p0,
        1 => p1,
        _ => {
            for k in 2..=m {
                let k = k as f64;
                let mut p2 = vec![0.0; p1.len() + 1];
                for (i, c) in p1.iter().enumerate() {
                    p2[i + 1] += (2.0 * k - 1.0) * c / k;
                }
                for (i, c) in p0.iter().enumerate() {
                    p2[i] -= (k - 1.0) * c / k;
                }
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    let scale = ((2 * m + 1) as f64 / 2.0).sqrt();
    poly.into_iter().map(|c| c * scale).collect()
}

/// Moments `int_{-1}^{1} u^s K_1(u) du` for `s = 0..=max_power`.
fn factor_moments(kernel: &Kernel, max_power: usize) -> Vec<f64> {
    (0..=max_power)
        .map(|s| quadrature::integrate(-1.0, 1.0, |u| u.powi(s as i32) * kernel.factor(u)))
        .collect()
}

/// Builds the order-`order` valid product kernel for dimension `d` and
/// checks its moments by quadrature.
pub fn build_valid_kernel(order: usize, d: usize) -> Result<Kernel> {
    if order == 0 {
        return Err(Error::KernelConstruction("order must be at least 1".into()));
    }
    if d == 0 {
        return Err(Error::KernelConstruction("dimension must be positive".into()));
    }
    let mut coeffs = vec![0.0; order + 1];
    for m in 0..=order {
        let phi = orthonormal_legendre(m);
        let at_zero = phi[0];
        for (i, c) in phi.iter().enumerate() {
            coeffs[i] += at_zero * c;
        }
    }
    let kernel = Kernel::Valid { order, coeffs };
    validate_moments(&kernel, d)?;
    Ok(kernel)
}

/// Checks `int K = 1` and `int u^s K = 0` for `1 <= |s| <= order - 1`.
///
/// The product structure factors every multi-index moment into 1-d moments,
/// each computed by Gauss–Legendre quadrature.
pub fn validate_moments(kernel: &Kernel, d: usize) -> Result<()> {
    let order = kernel.order().unwrap_or(1);
    let m1 = factor_moments(kernel, order.max(1));
    let mut worst = 0.0f64;
    let mut s = vec![0usize; d];
    loop {
        let total: usize = s.iter().sum();
        if total <= order.saturating_sub(1) {
            let value: f64 = s.iter().map(|&k| m1[k]).product();
            let target = if total == 0 { 1.0 } else { 0.0 };
            worst = worst.max((value - target).abs());
        }
        // next multi-index in [0, order]^d
        let mut axis = 0;
        loop {
            if axis == d {
                if worst > MOMENT_TOLERANCE {
                    return Err(Error::KernelConstruction(format!(
                        "moment deviation {worst:.3e} exceeds {MOMENT_TOLERANCE:e}"
                    )));
                }
                return Ok(());
            }
            if s[axis] < order {
                s[axis] += 1;
                break;
            }
            s[axis] = 0;
            axis += 1;
        }
    }
}

/// Spherical estimate `|B(x,h) ∩ sample| / (n h^d V_d)`.
pub fn spherical_kde_at(ds: &Dataset, x: &[f64], h: f64) -> Result<f64> {
    kde_at(ds, &Kernel::Spherical, x, h)
}

/// `(1/(n h^d)) sum_i K((x - X_i)/h)`, divided by `V_d` for the spherical kernel.
pub fn kde_at(ds: &Dataset, kernel: &Kernel, x: &[f64], h: f64) -> Result<f64> {
    ds.check_point(x)?;
    check_bandwidth(h)?;
    let index = NeighborIndex::new(ds, h * kernel.support_radius(ds.dim()));
    Ok(kde_with_index(ds, &index, kernel, x, h))
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth must be positive and finite, got {h}")))
    }
}

fn normalizer(kernel: &Kernel, n: usize, h: f64, d: usize) -> f64 {
    let base = n as f64 * h.powi(d as i32);
    match kernel {
        Kernel::Spherical => base * unit_ball_volume(d),
        Kernel::Valid { .. } => base,
    }
}

pub(crate) fn kde_with_index(
    ds: &Dataset,
    index: &NeighborIndex<'_>,
    kernel: &Kernel,
    x: &[f64],
    h: f64,
) -> f64 {
    let d = ds.dim();
    let norm = normalizer(kernel, ds.len(), h, d);
    match kernel {
        Kernel::Spherical => index.count_within(x, h) as f64 / norm,
        Kernel::Valid { .. } => {
            let mut u = vec![0.0; d];
            let mut sum = 0.0;
            let mut terms = Vec::new();
            index.for_each_within(x, h * kernel.support_radius(d), |j| terms.push(j));
            // fixed summation order keeps results independent of index layout
            terms.sort_unstable();
            for j in terms {
                for (k, (a, b)) in x.iter().zip(ds.point(j)).enumerate() {
                    u[k] = (a - b) / h;
                }
                sum += kernel.eval(&u);
            }
            sum / norm
        }
    }
}

/// Kernel estimate evaluated at every sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub kernel: Kernel,
    pub h: f64,
    pub n: usize,
    pub dim: usize,
    /// `p̂_h(X_i)` in sample order
    pub values: Vec<f64>,
    /// neighbor counts `|B(X_i,h) ∩ sample|`, spherical kernel only
    pub counts: Option<Vec<usize>>,
}

impl DensityEstimate {
    pub fn compute(ds: &Dataset, kernel: &Kernel, h: f64) -> Result<Self> {
        check_bandwidth(h)?;
        let index = NeighborIndex::new(ds, h * kernel.support_radius(ds.dim()));
        let (values, counts) = match kernel {
            Kernel::Spherical => {
                let counts: Vec<usize> = (0..ds.len())
                    .into_par_iter()
                    .map(|i| index.count_within(ds.point(i), h))
                    .collect();
                let norm = normalizer(kernel, ds.len(), h, ds.dim());
                (counts.iter().map(|&c| c as f64 / norm).collect(), Some(counts))
            }
            Kernel::Valid { .. } => {
                let values = (0..ds.len())
                    .into_par_iter()
                    .map(|i| kde_with_index(ds, &index, kernel, ds.point(i), h))
                    .collect();
                (values, None)
            }
        };
        Ok(Self { kernel: kernel.clone(), h, n: ds.len(), dim: ds.dim(), values, counts })
    }

    /// Evaluates the estimate at arbitrary points.
    pub fn eval_many(ds: &Dataset, kernel: &Kernel, h: f64, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_bandwidth(h)?;
        for x in xs {
            ds.check_point(x)?;
        }
        let index = NeighborIndex::new(ds, h * kernel.support_radius(ds.dim()));
        Ok(xs.par_iter().map(|x| kde_with_index(ds, &index, kernel, x, h)).collect())
    }
}

/// `h = C (log n / n)^{1/(2α + d)}`.
pub fn optimal_bandwidth(n: usize, d: usize, alpha: f64, c: f64) -> f64 {
    let n = n as f64;
    c * (n.ln() / n).powf(1.0 / (2.0 * alpha + d as f64))
}

/// Inputs and value of the sup-norm budget
/// `a_n = C1 (γ + log(1/h)) / sqrt(n h^d) + C2 h^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub n: usize,
    pub h: f64,
    pub d: usize,
    pub alpha: f64,
    pub lipschitz: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ErrorBudget {
    pub fn a_n(&self) -> f64 {
        let nhd = self.n as f64 * self.h.powi(self.d as i32);
        self.c1 * (self.gamma + (1.0 / self.h).ln()) / nhd.sqrt() + self.c2 * self.h.powf(self.alpha)
    }

    /// Variance part only.
    pub fn stochastic_term(&self) -> f64 {
        let nhd = self.n as f64 * self.h.powi(self.d as i32);
        self.c1 * (self.gamma + (1.0 / self.h).ln()) / nhd.sqrt()
    }

    pub fn bias_term(&self) -> f64 {
        self.c2 * self.h.powf(self.alpha)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn error_budget(
    n: usize,
    h: f64,
    d: usize,
    alpha: f64,
    lipschitz: f64,
    gamma: f64,
    c1: f64,
    c2: f64,
) -> Result<ErrorBudget> {
    check_bandwidth(h)?;
    let nhd = n as f64 * h.powi(d as i32);
    if nhd < 1.0 {
        return Err(Error::Precondition(format!("n h^d = {nhd} < 1")));
    }
    Ok(ErrorBudget { n, h, d, alpha, lipschitz, gamma, c1, c2 })
}

/// Budget with `C1 = 1`, `C2 = L`, `γ = log n`.
pub fn default_error_budget(n: usize, h: f64, d: usize, alpha: f64, lipschitz: f64) -> Result<ErrorBudget> {
    error_budget(n, h, d, alpha, lipschitz, (n as f64).ln(), 1.0, lipschitz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_volumes() {
        assert_abs_diff_eq!(unit_ball_volume(1), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(unit_ball_volume(2), std::f64::consts::PI, epsilon = 1e-15);
        assert_abs_diff_eq!(unit_ball_volume(3), 4.0 * std::f64::consts::PI / 3.0, epsilon = 1e-14);
        // V_d = π^{d/2} / Γ(d/2 + 1); Γ(3) = 2 for d = 4
        assert_abs_diff_eq!(unit_ball_volume(4), std::f64::consts::PI.powi(2) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn spherical_examples() {
        let ds = Dataset::from_scalars(&[0.0, 10.0]).unwrap();
        assert_eq!(spherical_kde_at(&ds, &[0.0], 1.0).unwrap(), 0.25);
        let ds = Dataset::from_scalars(&[0.0]).unwrap();
        assert_eq!(spherical_kde_at(&ds, &[5.0], 1.0).unwrap(), 0.0);
        assert!(spherical_kde_at(&ds, &[5.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn spherical_matches_brute_force_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coords: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let ds = Dataset::from_flat(coords, 2).unwrap();
        let x = [0.5, 0.5];
        let count = ds.points().filter(|p| crate::geometry::distance(p, &x) <= 0.1).count();
        let expected = count as f64 / (500.0 * 0.01 * std::f64::consts::PI);
        assert_abs_diff_eq!(spherical_kde_at(&ds, &x, 0.1).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn valid_kernel_shapes() {
        let k1 = build_valid_kernel(1, 1).unwrap();
        assert_abs_diff_eq!(k1.factor(0.3), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(quadrature::integrate(-1.0, 1.0, |u| k1.factor(u)), 1.0, epsilon = 1e-14);
        let k2 = build_valid_kernel(2, 1).unwrap();
        assert_abs_diff_eq!(k2.factor(0.0), 9.0 / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k2.factor(1.0), -0.75, epsilon = 1e-14);
        assert_eq!(k2.factor(1.01), 0.0);
        assert_abs_diff_eq!(quadrature::integrate(-1.0, 1.0, |u| k2.factor(u)), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(quadrature::integrate(-1.0, 1.0, |u| u * k2.factor(u)), 0.0, epsilon = 1e-10);
        assert!(build_valid_kernel(0, 1).is_err());
    }

    #[test]
    fn order_four_in_two_dimensions_by_tensor_quadrature() {
        let k = build_valid_kernel(4, 2).unwrap();
        let pts = quadrature::GaussLegendre::standard().composite_points(-1.0, 1.0, 2);
        let (mut m0, mut m20, mut m11) = (0.0, 0.0, 0.0);
        for &(x, wx) in &pts {
            for &(y, wy) in &pts {
                let v = k.eval(&[x, y]) * wx * wy;
                m0 += v;
                m20 += x * x * v;
                m11 += x * y * v;
            }
        }
        assert_abs_diff_eq!(m0, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m20, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m11, 0.0, epsilon = 1e-8);
        let mut min = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                min = min.min(k.eval(&[-1.0 + 0.02 * i as f64, -1.0 + 0.02 * j as f64]));
            }
        }
        assert!(min < 0.0);
    }

    #[test]
    fn valid_kernel_single_sample() {
        let k = build_valid_kernel(2, 1).unwrap();
        let ds = Dataset::from_scalars(&[0.0]).unwrap();
        assert_abs_diff_eq!(kde_at(&ds, &k, &[0.0], 1.0).unwrap(), k.factor(0.0), epsilon = 1e-15);
    }

    #[test]
    fn bandwidth_rule() {
        let h = optimal_bandwidth(1000, 1, 1.0, 1.0);
        let expected = ((1000f64).ln() / 1000.0).cbrt();
        assert_abs_diff_eq!(h, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(h, 0.190_43, epsilon = 1e-4);
        assert_abs_diff_eq!(optimal_bandwidth(1000, 1, 1.0, 2.0), 2.0 * h, epsilon = 1e-15);
        assert_abs_diff_eq!(optimal_bandwidth(1000, 1, 1e12, 0.7), 0.7, epsilon = 1e-9);
    }

    #[test]
    fn budget_examples() {
        let b = error_budget(100, 0.5, 1, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(b.a_n(), 0.5, epsilon = 1e-15);
        let b = error_budget(100, 1.0, 1, 1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(b.a_n(), 0.0);
        let n = 1000usize;
        let h = 0.19038;
        let b = error_budget(n, h, 1, 1.0, 1.0, (n as f64).ln(), 1.0, 1.0).unwrap();
        let expected = ((n as f64).ln() + (1.0 / h).ln()) / (n as f64 * h).sqrt() + h;
        assert_abs_diff_eq!(b.a_n(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(b.a_n(), 0.8112, epsilon = 5e-4);
        assert!(matches!(error_budget(10, 0.05, 1, 1.0, 1.0, 1.0, 1.0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn spherical_estimate_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let ds = Dataset::from_scalars(&xs).unwrap();
        let h = 0.2;
        let step = h / 50.0;
        let (lo, hi): (f64, f64) = (-2.0 - 2.0 * h, 2.0 + 2.0 * h);
        let cells = ((hi - lo) / step).ceil() as usize;
        let grid: Vec<Vec<f64>> = (0..cells).map(|i| vec![lo + (i as f64 + 0.5) * step]).collect();
        let vals = DensityEstimate::eval_many(&ds, &Kernel::Spherical, h, &grid).unwrap();
        let mass: f64 = vals.iter().sum::<f64>() * step;
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn kernel_paths_agree(xs in prop::collection::vec(-3.0f64..3.0, 1..120), h in 0.05f64..1.0, q in -3.0f64..3.0) {
            let ds = Dataset::from_scalars(&xs).unwrap();
            let a = spherical_kde_at(&ds, &[q], h).unwrap();
            let b = kde_at(&ds, &Kernel::Spherical, &[q], h).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert!(a >= 0.0);
            let est = DensityEstimate::compute(&ds, &Kernel::Spherical, h).unwrap();
            for i in 0..ds.len() {
                let direct = spherical_kde_at(&ds, ds.point(i), h).unwrap();
                prop_assert_eq!(est.values[i].to_bits(), direct.to_bits());
            }
            let k = build_valid_kernel(2, 1).unwrap();
            let v = DensityEstimate::compute(&ds, &k, h).unwrap();
            for i in 0..ds.len() {
                let brute: f64 = xs.iter().map(|&x| k.factor((xs[i] - x) / h)).sum::<f64>() / (xs.len() as f64 * h);
                prop_assert!((v.values[i] - brute).abs() < 1e-12);
            }
        }
    }
}
