//! Composite Gauss–Legendre quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes per unit-length panel.
pub const NODES_PER_PANEL: usize = 64;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `m` nodes on [-1, 1], by Newton iteration on P_m.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 64-node rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(NODES_PER_PANEL))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over a single panel [a, b].
    pub fn panel<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Points and weights of the composite rule on [a, b].
    pub fn composite_points(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let step = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let lo = a + step * p as f64;
            let half = 0.5 * step;
            let mid = lo + half;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + half * x, w * half));
            }
        }
        out
    }
}

/// P_m(x) and P_m'(x) via the three-term recurrence.
pub fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let m = m as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint limit
        0.5 * m * (m + 1.0) * x.powi((m as i32) + 1)
    } else {
        m * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Composite integral over [a, b] with one 64-node panel per unit length.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let rule = GaussLegendre::standard();
    let panels = ((b - a).abs().ceil() as usize).max(1);
    let step = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let lo = a + step * p as f64;
        s += rule.panel(lo, lo + step, &mut f);
    }
    s
}

/// Same as [`integrate`] with `panels` explicit panels.
pub fn integrate_panels<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    let rule = GaussLegendre::standard();
    let panels = panels.max(1);
    let step = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let lo = a + step * p as f64;
        s += rule.panel(lo, lo + step, &mut f);
    }
    s
}
