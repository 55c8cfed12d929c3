//! δ-consistency harness: separated set pairs from a gridded ground truth,
//! per-hierarchy checks and rate experiments.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster_tree::true_split_levels;
use crate::dbscan::{hierarchy_from_estimate, Algorithm, ClusterHierarchy};
use crate::error::{Error, Result};
use crate::geometry::{Dataset, NeighborIndex};
use crate::grid::GriddedDensity;
use crate::kde::{optimal_bandwidth, DensityEstimate, Kernel};
use crate::synthetic::DensitySpec;

/// Two grid regions certified δ-separated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatedPair {
    /// Cell indices of `A`, ascending.
    pub a: Vec<usize>,
    /// Cell indices of `A'`, ascending.
    pub b: Vec<usize>,
    pub delta: f64,
    /// `inf p` over `A ∪ A'`.
    pub lambda: f64,
    /// Split level the pair was built from.
    pub split_level: f64,
    /// Component labels of `A` and `A'` in `{p > λ - δ}`.
    pub certificate: (u32, u32),
}

/// Builds one pair per pair of children of every true split with
/// `λ* + δ <= max p`: the component of `{p >= λ* + δ}` holding each child's
/// peak. Pairs that fail the certification flood fill are dropped.
pub fn make_separated_pairs(gd: &GriddedDensity, delta: f64) -> Result<Vec<SeparatedPair>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("δ must be positive, got {delta}")));
    }
    let mut out = Vec::new();
    for split in true_split_levels(gd) {
        let top = split.level + delta;
        if top > gd.max_value() {
            continue;
        }
        let comps = gd.components(top);
        let members = comps.members();
        let parts: Vec<&Vec<usize>> = split
            .children
            .iter()
            .filter_map(|c| comps.label(c.peak_cell).map(|l| &members[l as usize]))
            .collect();
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                if let Some(pair) = certify(gd, parts[i], parts[j], delta, split.level) {
                    out.push(pair);
                }
            }
        }
    }
    Ok(out)
}

fn certify(gd: &GriddedDensity, a: &[usize], b: &[usize], delta: f64, split_level: f64) -> Option<SeparatedPair> {
    let lambda = a.iter().chain(b).map(|&c| gd.value(c)).fold(f64::INFINITY, f64::min);
    let mask: Vec<bool> = gd.values().iter().map(|&v| v > lambda - delta).collect();
    let comps = gd.components_of_mask(&mask);
    let la = comps.label(a[0])?;
    let lb = comps.label(b[0])?;
    // each set must sit inside a single component
    if la == lb || a.iter().any(|&c| comps.label(c) != Some(la)) || b.iter().any(|&c| comps.label(c) != Some(lb)) {
        return None;
    }
    Some(SeparatedPair { a: a.to_vec(), b: b.to_vec(), delta, lambda, split_level, certificate: (la, lb) })
}

/// Independent re-check of a pair's certificate.
pub fn recertify(gd: &GriddedDensity, pair: &SeparatedPair) -> bool {
    certify(gd, &pair.a, &pair.b, pair.delta, pair.split_level).is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOutcome {
    EmptyIntersection,
    CorrectlySeparated,
    IncorrectlyMerged,
    /// Some sample in `A` or `A'` is in no cluster at all.
    NoContainingCluster,
}

impl PairOutcome {
    pub fn ok(self) -> bool {
        matches!(self, PairOutcome::EmptyIntersection | PairOutcome::CorrectlySeparated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub outcomes: Vec<PairOutcome>,
    pub success: bool,
}

/// Samples whose grid cell lies in each set of each pair.
fn pair_members(gd: &GriddedDensity, pairs: &[SeparatedPair], ds: &Dataset) -> Vec<(Vec<usize>, Vec<usize>)> {
    let cells: Vec<Option<usize>> = ds.points().map(|p| gd.cell_of(p)).collect();
    let mut mark = vec![0u8; gd.len()];
    pairs
        .iter()
        .map(|pair| {
            pair.a.iter().for_each(|&c| mark[c] = 1);
            pair.b.iter().for_each(|&c| mark[c] = 2);
            let (mut xa, mut xb) = (Vec::new(), Vec::new());
            for (i, c) in cells.iter().enumerate() {
                match c.map(|c| mark[c]) {
                    Some(1) => xa.push(i),
                    Some(2) => xb.push(i),
                    _ => {}
                }
            }
            pair.a.iter().chain(&pair.b).for_each(|&c| mark[c] = 0);
            (xa, xb)
        })
        .collect()
}

fn judge(hier: &ClusterHierarchy, xa: &[usize], xb: &[usize]) -> PairOutcome {
    if xa.is_empty() || xb.is_empty() {
        return PairOutcome::EmptyIntersection;
    }
    match (hier.smallest_containing_cluster(xa), hier.smallest_containing_cluster(xb)) {
        (Ok(ca), Ok(cb)) if hier.disjoint(&ca, &cb) => PairOutcome::CorrectlySeparated,
        (Ok(_), Ok(_)) => PairOutcome::IncorrectlyMerged,
        _ => PairOutcome::NoContainingCluster,
    }
}

/// Classifies every pair against the hierarchy built from `ds`.
pub fn check_delta_consistency(
    hier: &ClusterHierarchy,
    pairs: &[SeparatedPair],
    gd: &GriddedDensity,
    ds: &Dataset,
) -> ConsistencyReport {
    let outcomes: Vec<PairOutcome> =
        pair_members(gd, pairs, ds).iter().map(|(xa, xb)| judge(hier, xa, xb)).collect();
    let success = outcomes.iter().all(|o| o.ok());
    ConsistencyReport { outcomes, success }
}

/// Settings of a rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateConfig {
    pub algorithm: Algorithm,
    /// Smoothness used in the bandwidth rule.
    pub alpha: f64,
    pub bandwidth_c: f64,
    pub kernel: Kernel,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Fraction of seeds that must succeed.
    pub threshold: f64,
    /// Bisection steps in `log δ`.
    pub search_steps: usize,
    pub grid_step: f64,
}

impl RateConfig {
    pub fn new(algorithm: Algorithm, alpha: f64, bandwidth_c: f64, kernel: Kernel, ns: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self { algorithm, alpha, bandwidth_c, kernel, ns, seeds, threshold: 0.9, search_steps: 14, grid_step: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub delta: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub delta_min: f64,
    pub success_rate: f64,
    /// Success curve went up as δ shrank by more than one seed.
    pub non_monotone: bool,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    pub density: String,
    pub config: RateConfig,
    pub rows: Vec<RateRow>,
    /// OLS slope of `log δ_min` on `log n`.
    pub slope: f64,
}

impl RateTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,delta_min,success_rate,non_monotone\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.n, r.h, r.delta_min, r.success_rate, r.non_monotone);
        }
        s
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One fitted sample: the hierarchy and the grid cell of every point.
pub struct Replicate {
    pub hier: ClusterHierarchy,
    pub ds: Dataset,
}

pub fn build_replicates(spec: &DensitySpec, config: &RateConfig, n: usize, h: f64) -> Result<Vec<Replicate>> {
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let ds = spec.sample(n, seed)?;
            let est = DensityEstimate::compute(&ds, &config.kernel, h)?;
            let hier = hierarchy_from_estimate(&ds, config.algorithm, est)?;
            Ok(Replicate { hier, ds })
        })
        .collect()
}

/// Fraction of replicates that are δ-consistent on `pairs`.
pub fn success_rate(replicates: &[Replicate], pairs: &[SeparatedPair], gd: &GriddedDensity) -> f64 {
    let ok = replicates
        .par_iter()
        .filter(|r| check_delta_consistency(&r.hier, pairs, gd, &r.ds).success)
        .count();
    ok as f64 / replicates.len() as f64
}

/// Smallest `δ` (to bisection precision) reaching the success threshold.
pub fn search_delta_min(
    replicates: &[Replicate],
    gd: &GriddedDensity,
    threshold: f64,
    steps: usize,
) -> Result<(f64, f64, Vec<TracePoint>)> {
    let splits = true_split_levels(gd);
    let top = splits
        .iter()
        .map(|s| s.children.iter().map(|c| c.peak_value).fold(f64::INFINITY, f64::min) - s.level)
        .fold(0.0f64, f64::max);
    if splits.is_empty() || !(top > 0.0) {
        return Err(Error::Precondition("density has no split to separate".into()));
    }
    let mut trace = Vec::new();
    let mut eval = |delta: f64| -> Result<f64> {
        let pairs = make_separated_pairs(gd, delta)?;
        let rate = success_rate(replicates, &pairs, gd);
        trace.push(TracePoint { delta, success_rate: rate });
        Ok(rate)
    };
    let (mut lo, mut hi) = ((top * 1e-4).ln(), (top * 0.999).ln());
    let mut best = (hi.exp(), eval(hi.exp())?);
    if best.1 < threshold {
        return Ok((f64::NAN, best.1, trace));
    }
    let floor = eval(lo.exp())?;
    if floor >= threshold {
        return Ok((lo.exp(), floor, trace));
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let rate = eval(mid.exp())?;
        if rate >= threshold {
            hi = mid;
            best = (mid.exp(), rate);
        } else {
            lo = mid;
        }
    }
    Ok((best.0, best.1, trace))
}

/// A success curve is flagged when a smaller δ did better than a larger one
/// by more than one seed.
pub fn is_non_monotone(trace: &[TracePoint], seeds: usize) -> bool {
    let mut pts: Vec<&TracePoint> = trace.iter().collect();
    pts.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let slack = 1.0 / seeds as f64 + 1e-12;
    pts.iter().enumerate().any(|(i, p)| pts[i + 1..].iter().any(|q| p.success_rate > q.success_rate + slack))
}

/// For each `n`, the smallest δ with success rate at least the threshold,
/// and the log-log slope of `δ_min` against `n`.
pub fn rate_experiment(spec: &DensitySpec, config: &RateConfig) -> Result<RateTable> {
    if spec.facts.split_levels.is_empty() {
        return Err(Error::Precondition(format!("density '{}' has no known split", spec.name)));
    }
    if config.seeds.is_empty() || config.ns.len() < 2 {
        return Err(Error::InvalidInput("need at least one seed and two sample sizes".into()));
    }
    let gd = spec.grid(config.grid_step)?;
    let d = spec.dim;
    let mut rows = Vec::new();
    for &n in &config.ns {
        let h = optimal_bandwidth(n, d, config.alpha, config.bandwidth_c);
        let reps = build_replicates(spec, config, n, h)?;
        let (delta_min, rate, trace) = search_delta_min(&reps, &gd, config.threshold, config.search_steps)?;
        let non_monotone = is_non_monotone(&trace, config.seeds.len());
        rows.push(RateRow { n, h, delta_min, success_rate: rate, non_monotone, trace });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.delta_min.ln()).collect();
    let slope = ols_slope(&xs, &ys);
    Ok(RateTable { density: spec.name.clone(), config: config.clone(), rows, slope })
}

/// Violations of `{p >= λ + c} ⊆ ∪_{p̂(X_j) >= λ} B(X_j, h) ⊆ {p >= λ - c}`
/// over the levels `λ_m = m · lambda_step > 0` and the probe points `xs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichOutcome {
    pub levels: usize,
    /// Probe points where the inner inclusion fails at some level.
    pub inner_violations: usize,
    /// Probe points where the outer inclusion fails at some level.
    pub outer_violations: usize,
}

impl SandwichOutcome {
    pub fn holds(&self) -> bool {
        self.inner_violations == 0 && self.outer_violations == 0
    }
}

pub fn ball_union_sandwich<F: Fn(&[f64]) -> f64 + Sync>(
    ds: &Dataset,
    scores: &[f64],
    h: f64,
    pdf: F,
    slack: f64,
    lambda_step: f64,
    xs: &[Vec<f64>],
) -> SandwichOutcome {
    let index = NeighborIndex::new(ds, h);
    let top = scores.iter().copied().fold(0.0, f64::max).max(xs.iter().map(|x| pdf(x)).fold(0.0, f64::max));
    let levels = (top / lambda_step).ceil() as usize + 1;
    let (inner, outer) = xs
        .par_iter()
        .map(|x| {
            // x is covered at λ iff the best score within h reaches λ
            let mut best = f64::NEG_INFINITY;
            index.for_each_within(x, h, |j| best = best.max(scores[j]));
            let p = pdf(x);
            let first_uncovered = if best.is_finite() { (best / lambda_step).floor() as usize + 1 } else { 1 };
            let first_uncovered = first_uncovered.max(1);
            let inner_bad = first_uncovered <= levels && first_uncovered as f64 * lambda_step <= p - slack;
            let last_covered = if best.is_finite() { (best / lambda_step).floor() as usize } else { 0 };
            let outer_bad = last_covered >= 1 && p < last_covered as f64 * lambda_step - slack;
            (inner_bad as usize, outer_bad as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    SandwichOutcome { levels, inner_violations: inner, outer_violations: outer }
}

/// Violations of `{p >= λ + c} ⊆ {p̂ >= λ} ⊆ {p >= λ - c}` over the levels
/// `λ_m = m · lambda_step > 0`, cell by cell.
pub fn grid_level_sandwich(truth: &[f64], estimate: &[f64], slack: f64, lambda_step: f64) -> SandwichOutcome {
    let top = truth.iter().chain(estimate).copied().fold(0.0, f64::max);
    let levels = (top / lambda_step).ceil() as usize + 1;
    let (mut inner, mut outer) = (0, 0);
    for (&p, &q) in truth.iter().zip(estimate) {
        // smallest level the estimate misses, largest level it reaches
        let first_missed = ((q / lambda_step).floor().max(0.0) as usize + 1).max(1);
        if first_missed <= levels && first_missed as f64 * lambda_step <= p - slack {
            inner += 1;
        }
        let last_reached = (q / lambda_step).floor().max(0.0) as usize;
        if last_reached >= 1 && p < last_reached as f64 * lambda_step - slack {
            outer += 1;
        }
    }
    SandwichOutcome { levels, inner_violations: inner, outer_violations: outer }
}

/// Bandwidth `min(σ/4, c (log n/(n ε^2))^{1/d})` for clustering at a gap.
pub fn gap_bandwidth(n: usize, d: usize, epsilon: f64, sigma: f64, c: f64) -> f64 {
    let nf = n as f64;
    (c * (nf.ln() / (nf * epsilon * epsilon)).powf(1.0 / d as f64)).min(sigma / 4.0)
}

/// One seeded run of the gap estimator against a known gap density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRun {
    pub n: usize,
    pub seed: u64,
    pub h: f64,
    pub k: usize,
    pub lambda: f64,
    pub a_n: f64,
    /// `L(S △ Ŝ_h)`
    pub error: f64,
    /// `2 C_0 (2h)`
    pub bound: f64,
    pub clusters_ok: bool,
    pub sandwich_ok: bool,
}

/// Samples `n` points, builds `Ŝ_h` at `k = ⌈n h^d V_d λ⌉` and the
/// DBSCAN clusters at that `k`, and scores both against the truth. The
/// symmetric difference is counted on the cells of `like`.
pub fn gap_run(
    spec: &DensitySpec,
    n: usize,
    seed: u64,
    h: f64,
    budget: &crate::kde::ErrorBudget,
    like: &GriddedDensity,
) -> Result<GapRun> {
    use crate::levelset::{devroye_wise, gap_inputs, gap_sandwich, symmetric_difference_measure, FnRegion, MeasureMethod};
    let crate::synthetic::Family::GapDensity(gap) = &spec.family else {
        return Err(Error::Precondition(format!("density '{}' has no gap", spec.name)));
    };
    let facts = spec.facts.gap.expect("gap density facts");
    let variance_only = crate::kde::ErrorBudget { c2: 0.0, ..*budget };
    let inputs = gap_inputs(n, spec.dim, h, facts.lambda_low, facts.lambda_high, &variance_only, 1.0)?;
    let ds = spec.sample(n, seed)?;
    let est = devroye_wise(&ds, h, inputs.k)?;
    let truth = FnRegion(|x: &[f64]| gap.in_level_set(x));
    let error = symmetric_difference_measure(&truth, &est, &MeasureMethod::Grid(like))?.value;
    let hier = crate::dbscan::dbscan_hierarchy(&ds, h)?;
    let labels = hier.labels_at(hier.lambda_of_k(inputs.k));
    let clusters_ok = crate::levelset::gap_cluster_check(&ds, &labels, gap, h).passed();
    let sw = gap_sandwich(&est, gap, like);
    Ok(GapRun {
        n,
        seed,
        h,
        k: inputs.k,
        lambda: inputs.lambda,
        a_n: inputs.a_n,
        error,
        bound: 2.0 * facts.c0 * 2.0 * h,
        clusters_ok,
        sandwich_ok: sw.inner_ok && sw.outer_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbscan::dbscan_hierarchy;
    use crate::synthetic::registry::lookup;

    fn mixture_grid() -> GriddedDensity {
        lookup("gaussian-two-bump").unwrap().grid(1e-3).unwrap()
    }

    #[test]
    fn unimodal_has_no_pairs() {
        let gd = GriddedDensity::from_fn(&[-3.0], &[3.0], 0.01, |x| (-x[0] * x[0]).exp()).unwrap();
        assert!(make_separated_pairs(&gd, 0.01).unwrap().is_empty());
    }

    #[test]
    fn two_bump_pair_at_half_gap() {
        let gd = mixture_grid();
        let split = &true_split_levels(&gd)[0];
        let peak = split.children[0].peak_value.min(split.children[1].peak_value);
        let delta = 0.5 * (peak - split.level);
        let pairs = make_separated_pairs(&gd, delta).unwrap();
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert!((p.lambda - (split.level + delta)).abs() < 1e-3);
        assert!(p.lambda >= split.level + delta);
        assert!(recertify(&gd, p));
        assert!(make_separated_pairs(&gd, 2.0 * (peak - split.level)).unwrap().is_empty());
        assert!(make_separated_pairs(&gd, 0.0).is_err());
    }

    #[test]
    fn empty_intersection_is_vacuous() {
        let gd = mixture_grid();
        let pairs = make_separated_pairs(&gd, 0.05).unwrap();
        // every sample far outside A
        let ds = Dataset::from_scalars(&[-6.0, 6.0]).unwrap();
        let hier = dbscan_hierarchy(&ds, 0.1).unwrap();
        let rep = check_delta_consistency(&hier, &pairs, &gd, &ds);
        assert_eq!(rep.outcomes, vec![PairOutcome::EmptyIntersection]);
        assert!(rep.success);
    }

    #[test]
    fn hand_built_hierarchies() {
        let gd = mixture_grid();
        let pairs = make_separated_pairs(&gd, 0.05).unwrap();
        // two tight clumps at the modes joined only through the bottom level
        let mut xs: Vec<f64> = (0..10).map(|i| -1.5 + 0.01 * i as f64).collect();
        xs.extend((0..10).map(|i| 1.5 + 0.01 * i as f64));
        let ds = Dataset::from_scalars(&xs).unwrap();
        let apart = dbscan_hierarchy(&ds, 0.1).unwrap();
        let rep = check_delta_consistency(&apart, &pairs, &gd, &ds);
        assert_eq!(rep.outcomes, vec![PairOutcome::CorrectlySeparated]);
        // a bandwidth that swallows both clumps at once
        let merged = dbscan_hierarchy(&ds, 2.0).unwrap();
        let rep = check_delta_consistency(&merged, &pairs, &gd, &ds);
        assert_eq!(rep.outcomes, vec![PairOutcome::IncorrectlyMerged]);
        assert!(!rep.success);
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs: Vec<f64> = [100.0f64, 200.0, 400.0].iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = [100.0f64, 200.0, 400.0].iter().map(|v| (3.0 * v.powf(-0.4)).ln()).collect();
        assert!((ols_slope(&xs, &ys) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_flag() {
        let t = |d, s| TracePoint { delta: d, success_rate: s };
        assert!(!is_non_monotone(&[t(0.1, 0.5), t(0.2, 0.9), t(0.15, 0.88)], 50));
        assert!(is_non_monotone(&[t(0.1, 0.9), t(0.2, 0.5)], 50));
    }
}
