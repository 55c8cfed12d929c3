//! Level-set estimation: the union-of-balls estimator at a gap, grid
//! dilation and erosion, symmetric-difference measures and the grid
//! connected-components oracle.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dbscan::{lambda_of_k, Algorithm, ClusterHierarchy};
use crate::error::{Error, Result};
use crate::geometry::{squared_distance, Dataset, NeighborIndex};
use crate::grid::{GridComponents, GriddedDensity};
use crate::kde::{unit_ball_volume, DensityEstimate, ErrorBudget, Kernel};
use crate::synthetic::GapDensity;

/// Anything with a point-membership test.
pub trait Region: Sync {
    fn contains(&self, x: &[f64]) -> bool;
    /// Exact interval representation in `d = 1`, when available.
    fn intervals(&self) -> Option<IntervalSet> {
        None
    }
}

/// Region given by a predicate.
pub struct FnRegion<F>(pub F);

impl<F: Fn(&[f64]) -> bool + Sync> Region for FnRegion<F> {
    fn contains(&self, x: &[f64]) -> bool {
        (self.0)(x)
    }
}

/// Finite union of closed intervals, kept sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSet {
    pieces: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.retain(|(a, b)| b >= a);
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (a, b) in pieces {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Self { pieces: merged }
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|(a, b)| b - a).sum()
    }

    pub fn intersection_measure(&self, other: &IntervalSet) -> f64 {
        let (mut i, mut j, mut total) = (0, 0, 0.0);
        while i < self.pieces.len() && j < other.pieces.len() {
            let (a0, a1) = self.pieces[i];
            let (b0, b1) = other.pieces[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                total += hi - lo;
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    pub fn symmetric_difference(&self, other: &IntervalSet) -> f64 {
        (self.measure() + other.measure() - 2.0 * self.intersection_measure(other)).max(0.0)
    }
}

impl Region for IntervalSet {
    fn contains(&self, x: &[f64]) -> bool {
        let i = self.pieces.partition_point(|&(a, _)| a <= x[0]);
        i > 0 && x[0] <= self.pieces[i - 1].1
    }

    fn intervals(&self) -> Option<IntervalSet> {
        Some(self.clone())
    }
}

/// Union of closed balls of radius `h` around selected sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetEstimate {
    /// Sample indices of the centers, ascending.
    pub centers: Vec<usize>,
    pub h: f64,
    pub dim: usize,
    coords: Vec<f64>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl LevelSetEstimate {
    pub fn new(ds: &Dataset, centers: Vec<usize>, h: f64) -> Self {
        let dim = ds.dim();
        let mut coords = Vec::with_capacity(centers.len() * dim);
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (slot, &i) in centers.iter().enumerate() {
            let p = ds.point(i);
            coords.extend_from_slice(p);
            buckets.entry(bucket(p, h)).or_default().push(slot);
        }
        Self { centers, h, dim, coords, buckets }
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Export as `{centers: [[..]], radius}`.
    pub fn to_json(&self) -> serde_json::Value {
        let centers: Vec<&[f64]> = (0..self.centers.len()).map(|s| self.center(s)).collect();
        serde_json::json!({ "indices": self.centers, "centers": centers, "radius": self.h })
    }
}

fn bucket(p: &[f64], h: f64) -> Vec<i64> {
    p.iter().map(|&c| (c / h).floor() as i64).collect()
}

impl Region for LevelSetEstimate {
    fn contains(&self, x: &[f64]) -> bool {
        if self.centers.is_empty() {
            return false;
        }
        let base = bucket(x, self.h);
        let d = self.dim;
        let mut offset = vec![-1i64; d];
        let mut key = base.clone();
        let r2 = self.h * self.h;
        loop {
            for k in 0..d {
                key[k] = base[k] + offset[k];
            }
            if let Some(slots) = self.buckets.get(&key) {
                if slots.iter().any(|&s| squared_distance(self.center(s), x) <= r2) {
                    return true;
                }
            }
            let mut axis = 0;
            loop {
                if axis == d {
                    return false;
                }
                if offset[axis] < 1 {
                    offset[axis] += 1;
                    break;
                }
                offset[axis] = -1;
                axis += 1;
            }
        }
    }

    fn intervals(&self) -> Option<IntervalSet> {
        (self.dim == 1).then(|| IntervalSet::new(self.coords.iter().map(|&c| (c - self.h, c + self.h)).collect()))
    }
}

/// Union of `h`-balls around the nodes of `G_{h,k}`, the points with at
/// least `k` samples in their closed `h`-ball.
pub fn devroye_wise(ds: &Dataset, h: f64, k: usize) -> Result<LevelSetEstimate> {
    let est = DensityEstimate::compute(ds, &Kernel::Spherical, h)?;
    let counts = est.counts.expect("spherical estimate carries counts");
    let centers = (0..ds.len()).filter(|&i| counts[i] >= k).collect();
    Ok(LevelSetEstimate::new(ds, centers, h))
}

/// Resolved inputs for the gap estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapInputs {
    pub lambda: f64,
    pub k: usize,
    pub a_n: f64,
    /// `C_1 (log n/(n ε^2))^{1/d}`
    pub h_min: f64,
    pub h_ok: bool,
}

/// Midpoint `λ` of `(λ_* + a_n, λ^* - a_n]`, `k = ⌈n h^d V_d λ⌉`, and the
/// lower bandwidth bound `h >= C_1 (log n/(n ε^2))^{1/d}`.
pub fn gap_inputs(
    n: usize,
    d: usize,
    h: f64,
    lambda_low: f64,
    lambda_high: f64,
    budget: &ErrorBudget,
    c1_bandwidth: f64,
) -> Result<GapInputs> {
    let a_n = budget.a_n();
    let eps = lambda_high - lambda_low;
    if !(eps > 2.0 * a_n) {
        return Err(Error::GapTooSmall { a_n, gap: eps });
    }
    let lambda = 0.5 * ((lambda_low + a_n) + (lambda_high - a_n));
    let k = (n as f64 * h.powi(d as i32) * unit_ball_volume(d) * lambda).ceil() as usize;
    let h_min = c1_bandwidth * ((n as f64).ln() / (n as f64 * eps * eps)).powf(1.0 / d as f64);
    Ok(GapInputs { lambda, k, a_n, h_min, h_ok: h >= h_min })
}

/// Boolean mask over the cells of a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRegion {
    pub lo: Vec<f64>,
    pub step: Vec<f64>,
    pub shape: Vec<usize>,
    pub cells: Vec<bool>,
}

impl GridRegion {
    /// Mask of cell centers satisfying `pred` on the geometry of `like`.
    pub fn from_predicate<F: Fn(&[f64]) -> bool + Sync>(like: &GriddedDensity, pred: F) -> Self {
        let cells = (0..like.len()).into_par_iter().map(|c| pred(&like.center(c))).collect();
        Self { lo: like.lo().to_vec(), step: like.step().to_vec(), shape: like.shape().to_vec(), cells }
    }

    pub fn from_region(like: &GriddedDensity, region: &dyn Region) -> Self {
        Self::from_predicate(like, |x| region.contains(x))
    }

    pub fn cell_volume(&self) -> f64 {
        self.step.iter().product()
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.cell_volume()
    }

    fn same_geometry(&self, other: &GridRegion) -> bool {
        self.shape == other.shape && self.lo == other.lo && self.step == other.step
    }

    /// Cell-count measure of `A △ B`.
    pub fn symmetric_difference(&self, other: &GridRegion) -> Result<f64> {
        if !self.same_geometry(other) {
            return Err(Error::InvalidInput("regions live on different grids".into()));
        }
        let diff = self.cells.iter().zip(&other.cells).filter(|(a, b)| a != b).count();
        Ok(diff as f64 * self.cell_volume())
    }

    pub fn is_subset_of(&self, other: &GridRegion) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }
}

impl Region for GridRegion {
    fn contains(&self, x: &[f64]) -> bool {
        let mut flat = 0;
        for k in 0..self.shape.len() {
            let t = ((x[k] - self.lo[k]) / self.step[k]).floor();
            if t < 0.0 || t >= self.shape[k] as f64 {
                return false;
            }
            flat = flat * self.shape[k] + t as usize;
        }
        self.cells[flat]
    }
}

/// Exact squared Euclidean distance transform of a 1-d sampled function
/// (lower envelope of parabolas).
fn dt1d(f: &[f64], spacing: f64, out: &mut [f64]) {
    let n = f.len();
    let s2 = spacing * spacing;
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let (qf, pf) = (q as f64, p as f64);
                    let s = ((f[q] + s2 * qf * qf) - (f[p] + s2 * pf * pf)) / (2.0 * s2 * (qf - pf));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    z.push(f64::INFINITY);
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = s2 * (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Squared distance from each cell center to the nearest `true` cell center.
pub fn squared_distance_transform(shape: &[usize], step: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut g: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let d = shape.len();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for axis in (0..d).rev() {
        let len = shape[axis];
        let outer = total / (len * stride);
        let mut line = vec![0.0; len];
        let mut out = vec![0.0; len];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * len * stride + inner;
                for i in 0..len {
                    line[i] = g[base + i * stride];
                }
                dt1d(&line, step[axis], &mut out);
                for i in 0..len {
                    g[base + i * stride] = out[i];
                }
            }
        }
        stride *= len;
    }
    g
}

/// Grid approximations of the `h`-dilation `A_h` and the `h`-erosion
/// `A_{-h} = {x ∈ A : B(x,h) ⊂ A}`; cells outside the grid count as
/// outside `A`.
pub fn dilate_erode(region: &GridRegion, h: f64) -> Result<(GridRegion, GridRegion)> {
    if let Some(s) = region.step.iter().find(|&&s| !(s < h / 4.0)) {
        return Err(Error::Precision(format!("grid step {s} is not below h/4 = {}", h / 4.0)));
    }
    let d2 = squared_distance_transform(&region.shape, &region.step, &region.cells);
    let dilated = GridRegion { cells: d2.iter().map(|&v| v <= h * h).collect(), ..region.clone() };

    // complement with a one-cell border of non-members around the grid
    let padded_shape: Vec<usize> = region.shape.iter().map(|s| s + 2).collect();
    let total: usize = padded_shape.iter().product();
    let d = region.shape.len();
    let mut comp = vec![true; total];
    for (c, &inside) in region.cells.iter().enumerate() {
        let mut rem = c;
        let mut flat = 0;
        let mut idx = vec![0; d];
        for k in (0..d).rev() {
            idx[k] = rem % region.shape[k];
            rem /= region.shape[k];
        }
        for k in 0..d {
            flat = flat * padded_shape[k] + idx[k] + 1;
        }
        comp[flat] = !inside;
    }
    let e2 = squared_distance_transform(&padded_shape, &region.step, &comp);
    let mut eroded = vec![false; region.cells.len()];
    for (c, slot) in eroded.iter_mut().enumerate() {
        if !region.cells[c] {
            continue;
        }
        let mut rem = c;
        let mut idx = vec![0; d];
        for k in (0..d).rev() {
            idx[k] = rem % region.shape[k];
            rem /= region.shape[k];
        }
        let flat = idx.iter().zip(&padded_shape).fold(0, |acc, (&i, &s)| acc * s + i + 1);
        *slot = e2[flat] > h * h;
    }
    Ok((dilated, GridRegion { cells: eroded, ..region.clone() }))
}

/// Measure estimate with its standard error (zero for exact methods).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measure {
    pub value: f64,
    pub std_error: f64,
}

/// How [`symmetric_difference_measure`] integrates.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureMethod<'a> {
    /// Exact interval arithmetic, `d = 1`.
    Intervals,
    /// Cell counting on the geometry of a grid.
    Grid(&'a GriddedDensity),
    /// Uniform draws on a box.
    MonteCarlo { lo: Vec<f64>, hi: Vec<f64>, draws: usize, seed: u64 },
}

/// Default Monte Carlo sample size.
pub const MC_DRAWS: usize = 1_000_000;
const MC_BATCH: usize = 16_384;

/// Lebesgue measure of `A △ B`.
pub fn symmetric_difference_measure(a: &dyn Region, b: &dyn Region, method: &MeasureMethod<'_>) -> Result<Measure> {
    match method {
        MeasureMethod::Intervals => {
            let (ia, ib) = (a.intervals(), b.intervals());
            match (ia, ib) {
                (Some(ia), Some(ib)) => Ok(Measure { value: ia.symmetric_difference(&ib), std_error: 0.0 }),
                _ => Err(Error::Unsupported("exact measure needs interval regions".into())),
            }
        }
        MeasureMethod::Grid(gd) => {
            let ga = GridRegion::from_region(gd, a);
            let gb = GridRegion::from_region(gd, b);
            Ok(Measure { value: ga.symmetric_difference(&gb)?, std_error: 0.0 })
        }
        MeasureMethod::MonteCarlo { lo, hi, draws, seed } => Ok(monte_carlo_measure(lo, hi, *draws, *seed, |x| {
            a.contains(x) != b.contains(x)
        })),
    }
}

/// Monte Carlo volume of `{x in box : pred(x)}`. Batches are drawn in
/// parallel, each from its own stream seeded by `(seed, batch index)`.
pub fn monte_carlo_measure<F: Fn(&[f64]) -> bool + Sync>(lo: &[f64], hi: &[f64], draws: usize, seed: u64, pred: F) -> Measure {
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let batches = draws.div_ceil(MC_BATCH);
    let hits: usize = (0..batches)
        .into_par_iter()
        .map(|bi| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(bi as u64);
            let count = MC_BATCH.min(draws - bi * MC_BATCH);
            let mut x = vec![0.0; lo.len()];
            let mut hits = 0;
            for _ in 0..count {
                for k in 0..lo.len() {
                    x[k] = rng.random_range(lo[k]..hi[k]);
                }
                hits += pred(&x) as usize;
            }
            hits
        })
        .sum();
    let p = hits as f64 / draws as f64;
    Measure { value: vol * p, std_error: vol * (p * (1.0 - p) / draws as f64).sqrt() }
}

/// Grid level sets: face-adjacency components of `{value >= λ}`.
pub fn grid_levelset_components(gd: &GriddedDensity, lambda: f64) -> Result<GridComponents> {
    if gd.dim() > 2 {
        return Err(Error::Unsupported(format!("grid level sets need d <= 2, got {}", gd.dim())));
    }
    Ok(gd.components(lambda))
}

/// Component label of the cell containing each sample.
pub fn label_samples(gd: &GriddedDensity, comps: &GridComponents, ds: &Dataset) -> Vec<Option<u32>> {
    ds.points().map(|p| gd.cell_of(p).and_then(|c| comps.label(c))).collect()
}

/// Kernel estimate evaluated at the cell centers of `like`.
pub fn kde_on_grid(ds: &Dataset, kernel: &Kernel, h: f64, like: &GriddedDensity) -> Result<GriddedDensity> {
    let index = NeighborIndex::new(ds, h * kernel.support_radius(ds.dim()));
    let values: Vec<f64> = (0..like.len())
        .into_par_iter()
        .map(|c| crate::kde::kde_with_index(ds, &index, kernel, &like.center(c), h))
        .collect();
    GriddedDensity::from_values(like.lo().to_vec(), like.step().to_vec(), like.shape().to_vec(), values)
}

/// Grid level sets read off at the samples: `X_i` and `X_j` share a cluster at
/// `λ` iff their cells lie in one face-connected component of
/// `{p̂_h >= λ}` on the grid. Samples outside the grid are excluded.
pub fn grid_hierarchy(ds: &Dataset, est: &GriddedDensity, kernel: &Kernel, h: f64) -> Result<ClusterHierarchy> {
    if est.dim() > 2 || est.dim() != ds.dim() {
        return Err(Error::Unsupported(format!("grid hierarchy needs d <= 2 matching the data, got {}", est.dim())));
    }
    let cell_of: Vec<Option<usize>> = ds.points().map(|p| est.cell_of(p)).collect();
    let mut residents: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, c) in cell_of.iter().enumerate() {
        if let Some(c) = c {
            residents.entry(*c).or_default().push(i);
        }
    }
    let scores: Vec<f64> = cell_of.iter().map(|c| c.map_or(f64::NEG_INFINITY, |c| est.value(c))).collect();
    let included: Vec<bool> = cell_of.iter().map(Option::is_some).collect();

    // descending sweep over cells; each component remembers one sample
    let mut order: Vec<usize> = (0..est.len()).collect();
    order.sort_by(|&a, &b| est.value(b).total_cmp(&est.value(a)).then(a.cmp(&b)));
    let mut uf = crate::geometry::UnionFind::new(est.len());
    let mut rep: Vec<Option<usize>> = vec![None; est.len()];
    let mut active = vec![false; est.len()];
    let mut events: Vec<(f64, usize, usize)> = Vec::new();
    for &c in &order {
        let v = est.value(c);
        active[c] = true;
        if let Some(list) = residents.get(&c) {
            rep[c] = Some(list[0]);
            for &s in &list[1..] {
                events.push((v, list[0], s));
            }
        }
        let mut nbrs = Vec::new();
        est.for_each_face_neighbor(c, |nb| nbrs.push(nb));
        for nb in nbrs {
            if !active[nb] {
                continue;
            }
            let (ra, rb) = (uf.find(c), uf.find(nb));
            if ra == rb {
                continue;
            }
            let (sa, sb) = (rep[ra], rep[rb]);
            let root = uf.union(ra, rb).expect("distinct roots merge");
            rep[root] = match (sa, sb) {
                (Some(a), Some(b)) => {
                    events.push((v, a, b));
                    Some(a.min(b))
                }
                (a, b) => a.or(b),
            };
        }
    }
    let tree = crate::dendrogram::Dendrogram::from_events(&scores, &included, &events);
    Ok(ClusterHierarchy::from_tree(ds, Algorithm::Gridlevel, h, kernel.clone(), scores, None, &included, tree))
}

/// Outcome of [`gap_cluster_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapClusterReport {
    /// Bullet (i): every test set's samples share one component.
    pub same_cluster_ok: bool,
    /// Bullet (ii): test sets of different clusters never share a component.
    pub separation_ok: bool,
    /// Per cluster: number of samples in its test set.
    pub test_set_sizes: Vec<usize>,
    /// Samples that break a bullet.
    pub witnesses: Vec<usize>,
}

impl GapClusterReport {
    pub fn passed(&self) -> bool {
        self.same_cluster_ok && self.separation_ok
    }
}

/// Checks both bullets of the gap clustering guarantee. The test set of
/// cluster `C_i` is the erosion `(C_i)_{-2h}`, the largest `A` with
/// `A_{2h} ⊂ C_i`. `labels` are the components of `G_{h,k}`.
pub fn gap_cluster_check(ds: &Dataset, labels: &[Option<usize>], gap: &GapDensity, h: f64) -> GapClusterReport {
    let m = gap.shapes.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, p) in ds.points().enumerate() {
        for (s, shape) in gap.shapes.iter().enumerate() {
            if shape.depth(p) > 2.0 * h {
                members[s].push(i);
            }
        }
    }
    let mut witnesses = Vec::new();
    let mut same_cluster_ok = true;
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for (s, pts) in members.iter().enumerate() {
        let mut first: Option<usize> = None;
        for &i in pts {
            match (labels[i], first) {
                (None, _) => {
                    same_cluster_ok = false;
                    witnesses.push(i);
                }
                (Some(l), None) => first = Some(l),
                (Some(l), Some(f)) if l != f => {
                    same_cluster_ok = false;
                    witnesses.push(i);
                }
                _ => {}
            }
        }
        owner[s] = first;
    }
    let mut separation_ok = true;
    for s in 0..m {
        for t in s + 1..m {
            if let (Some(a), Some(b)) = (owner[s], owner[t]) {
                if a == b {
                    separation_ok = false;
                    witnesses.push(members[s][0]);
                    witnesses.push(members[t][0]);
                }
            }
        }
    }
    witnesses.sort_unstable();
    witnesses.dedup();
    GapClusterReport { same_cluster_ok, separation_ok, test_set_sizes: members.iter().map(Vec::len).collect(), witnesses }
}

/// Grid check of `S_{-2h} ⊆ Ŝ_h ⊆ S_{2h}` using exact distances to `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub inner_ok: bool,
    pub outer_ok: bool,
    pub inner_violations: usize,
    pub outer_violations: usize,
}

pub fn gap_sandwich(est: &LevelSetEstimate, gap: &GapDensity, like: &GriddedDensity) -> SandwichReport {
    let h2 = 2.0 * est.h;
    let (inner, outer) = (0..like.len())
        .into_par_iter()
        .map(|c| {
            let x = like.center(c);
            let inside = est.contains(&x);
            let inner_bad = !inside && gap.depth_in_set(&x) > h2;
            let outer_bad = inside && gap.distance_to_set(&x) > h2;
            (inner_bad as usize, outer_bad as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    SandwichReport { inner_ok: inner == 0, outer_ok: outer == 0, inner_violations: inner, outer_violations: outer }
}

/// `λ_k` for a stored count threshold; re-exported for level-set callers.
pub fn level_of_k(k: usize, n: usize, h: f64, d: usize) -> f64 {
    lambda_of_k(k, n, h, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn line_grid(lo: f64, hi: f64, step: f64) -> GriddedDensity {
        GriddedDensity::from_fn(&[lo], &[hi], step, |_| 0.0).unwrap()
    }

    #[test]
    fn devroye_wise_intervals() {
        let ds = Dataset::from_scalars(&[0.0, 1.0]).unwrap();
        let est = devroye_wise(&ds, 0.5, 0).unwrap();
        let iv = est.intervals().unwrap();
        assert_eq!(iv.pieces(), &[(-0.5, 1.5)]);
        assert_abs_diff_eq!(iv.measure(), 2.0, epsilon = 1e-15);
        let est = devroye_wise(&ds, 0.5, 3).unwrap();
        assert!(est.is_empty());
        assert!(!est.contains(&[0.0]));
    }

    #[test]
    fn gap_input_examples() {
        let budget = ErrorBudget { n: 100, h: 0.5, d: 1, alpha: 1.0, lipschitz: 1.0, gamma: 0.0, c1: 0.0, c2: 0.2 };
        // a_n = 0.2 h^1 = 0.1
        let g = gap_inputs(100, 1, 0.5, 0.2, 0.6, &budget, 1.0).unwrap();
        assert_abs_diff_eq!(g.lambda, 0.4, epsilon = 1e-15);
        assert_eq!(g.k, 40);
        let tight = ErrorBudget { c2: 0.4, ..budget };
        assert!(matches!(gap_inputs(100, 1, 0.5, 0.2, 0.6, &tight, 1.0), Err(Error::GapTooSmall { .. })));
        let g = gap_inputs(10000, 2, 0.2, 0.0, 0.3, &ErrorBudget { c2: 0.0, ..budget }, 1.0).unwrap();
        let expected = ((10000f64).ln() / (10000.0 * 0.09)).sqrt();
        assert_abs_diff_eq!(g.h_min, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(g.h_min, 0.1012, epsilon = 1e-4);
        assert!(g.h_ok);
    }

    #[test]
    fn dilate_erode_interval() {
        let gd = line_grid(-1.0, 2.0, 0.001);
        let a = GridRegion::from_predicate(&gd, |x| (0.0..=1.0).contains(&x[0]));
        let (dil, ero) = dilate_erode(&a, 0.25).unwrap();
        let tol = 2.0 * 0.001;
        assert!((dil.measure() - 1.5).abs() <= tol);
        assert!((ero.measure() - 0.5).abs() <= tol);
        assert!(dil.contains(&[-0.24]) && !dil.contains(&[-0.26]));
        assert!(ero.contains(&[0.26]) && !ero.contains(&[0.24]));
        // erosion past the inradius empties the set
        let (_, gone) = dilate_erode(&a, 0.6).unwrap();
        assert_eq!(gone.count(), 0);
        assert!(matches!(dilate_erode(&a, 0.003), Err(Error::Precision(_))));
    }

    #[test]
    fn dilate_erode_disk() {
        let step = 0.004;
        let gd = GriddedDensity::from_fn(&[-1.5, -1.5], &[1.5, 1.5], step, |_| 0.0).unwrap();
        let disk = GridRegion::from_predicate(&gd, |x| x[0] * x[0] + x[1] * x[1] <= 1.0);
        let (dil, ero) = dilate_erode(&disk, 0.1).unwrap();
        let pi = std::f64::consts::PI;
        // two rings of cells around the circle
        let ring = |r: f64| 2.0 * 2.0 * pi * r * step;
        assert!((dil.measure() - pi * 1.21).abs() <= ring(1.1));
        assert!((ero.measure() - pi * 0.81).abs() <= ring(0.9));
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let shape = [23usize, 17];
        let step = [0.3, 0.2];
        let mask: Vec<bool> = (0..shape[0] * shape[1]).map(|c| c % 37 == 0 || c == 200).collect();
        let d2 = squared_distance_transform(&shape, &step, &mask);
        for c in 0..mask.len() {
            let (i, j) = (c / shape[1], c % shape[1]);
            let mut best = f64::INFINITY;
            for (e, &m) in mask.iter().enumerate() {
                if m {
                    let (a, b) = (e / shape[1], e % shape[1]);
                    let dx = (i as f64 - a as f64) * step[0];
                    let dy = (j as f64 - b as f64) * step[1];
                    best = best.min(dx * dx + dy * dy);
                }
            }
            assert_abs_diff_eq!(d2[c], best, epsilon = 1e-12);
        }
    }

    #[test]
    fn interval_symmetric_difference() {
        let a = IntervalSet::new(vec![(0.0, 1.0)]);
        let b = IntervalSet::new(vec![(-0.5, 1.5)]);
        let m = symmetric_difference_measure(&a, &b, &MeasureMethod::Intervals).unwrap();
        assert_abs_diff_eq!(m.value, 1.0, epsilon = 1e-15);
        let z = symmetric_difference_measure(&a, &a, &MeasureMethod::Intervals).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn shifted_disks_by_grid_and_monte_carlo() {
        let disk = |cx: f64| move |x: &[f64]| (x[0] - cx).powi(2) + x[1] * x[1] <= 1.0;
        let a = FnRegion(disk(0.0));
        let b = FnRegion(disk(0.5));
        // lens of two unit circles at distance s: 2 acos(s/2) - (s/2) sqrt(4 - s^2)
        let s: f64 = 0.5;
        let lens = 2.0 * (s / 2.0).acos() - 0.5 * s * (4.0 - s * s).sqrt();
        let exact = 2.0 * (std::f64::consts::PI - lens);
        let gd = GriddedDensity::from_fn(&[-1.5, -1.5], &[2.0, 1.5], 0.002, |_| 0.0).unwrap();
        let g = symmetric_difference_measure(&a, &b, &MeasureMethod::Grid(&gd)).unwrap();
        assert!((g.value - exact).abs() < 0.01, "{} vs {exact}", g.value);
        let mc = symmetric_difference_measure(
            &a,
            &b,
            &MeasureMethod::MonteCarlo { lo: vec![-1.5, -1.5], hi: vec![2.0, 1.5], draws: MC_DRAWS, seed: 5 },
        )
        .unwrap();
        assert!((mc.value - exact).abs() < 5.0 * mc.std_error, "{mc:?} vs {exact}");
        let again = symmetric_difference_measure(
            &a,
            &b,
            &MeasureMethod::MonteCarlo { lo: vec![-1.5, -1.5], hi: vec![2.0, 1.5], draws: MC_DRAWS, seed: 5 },
        )
        .unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn grid_components_examples() {
        let gd = GriddedDensity::from_fn(&[0.0, 0.0], &[1.0, 1.0], 0.05, |_| 1.0).unwrap();
        assert_eq!(grid_levelset_components(&gd, 0.5).unwrap().count, 1);
        assert_eq!(grid_levelset_components(&gd, 2.0).unwrap().count, 0);
    }

    #[test]
    fn grid_hierarchy_matches_grid_components() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..300).map(|_| rng.random_range(-2.0..2.0) + if rng.random::<bool>() { 1.5 } else { -1.5 }).collect();
        let ds = Dataset::from_scalars(&xs).unwrap();
        let like = line_grid(-4.0, 4.0, 0.01);
        let est = kde_on_grid(&ds, &Kernel::Spherical, 0.3, &like).unwrap();
        let hier = grid_hierarchy(&ds, &est, &Kernel::Spherical, 0.3).unwrap();
        assert_eq!(hier.check_nesting(), 0);
        for &t in hier.levels().iter().step_by(7) {
            let comps = est.components(t);
            let labels = hier.labels_at(t);
            let cells = label_samples(&est, &comps, &ds);
            for i in 0..ds.len() {
                for j in 0..ds.len() {
                    let same = labels[i].is_some() && labels[i] == labels[j];
                    let oracle = cells[i].is_some() && cells[i] == cells[j];
                    assert_eq!(same, oracle, "t={t} i={i} j={j}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn nested_estimates_and_pseudometric(xs in prop::collection::vec(-2.0f64..2.0, 1..60), h in 0.05f64..0.5, k1 in 0usize..10, dk in 0usize..10) {
            let ds = Dataset::from_scalars(&xs).unwrap();
            let lo = devroye_wise(&ds, h, k1).unwrap();
            let hi = devroye_wise(&ds, h, k1 + dk).unwrap();
            let (ilo, ihi) = (lo.intervals().unwrap(), hi.intervals().unwrap());
            prop_assert!((ihi.intersection_measure(&ilo) - ihi.measure()).abs() < 1e-9);
            let all = devroye_wise(&ds, h, 0).unwrap().intervals().unwrap();
            let d = |a: &IntervalSet, b: &IntervalSet| a.symmetric_difference(b);
            prop_assert!((d(&ilo, &ihi) - d(&ihi, &ilo)).abs() < 1e-12);
            prop_assert!(d(&ilo, &ilo).abs() < 1e-12);
            prop_assert!(d(&ilo, &all) <= d(&ilo, &ihi) + d(&ihi, &all) + 1e-9);
            // membership agrees with the interval form
            for i in 0..40 {
                let x = -2.6 + 0.13 * i as f64;
                prop_assert_eq!(lo.contains(&[x]), ilo.contains(&[x]));
            }
        }

        #[test]
        fn dilation_then_erosion_brackets(cx in -0.3f64..0.3, r in 0.3f64..0.8, h in 0.05f64..0.2) {
            let gd = GriddedDensity::from_fn(&[-1.5, -1.5], &[1.5, 1.5], 0.01, |_| 0.0).unwrap();
            let a = GridRegion::from_predicate(&gd, |x| (x[0] - cx).powi(2) + x[1] * x[1] <= r * r);
            let (dil, _) = dilate_erode(&a, h).unwrap();
            let (_, closed) = dilate_erode(&dil, h).unwrap();
            prop_assert!(a.is_subset_of(&closed));
            let (_, ero) = dilate_erode(&a, h).unwrap();
            let (opened, _) = dilate_erode(&ero, h).unwrap();
            prop_assert!(opened.is_subset_of(&a));
        }
    }
}
