//! Regular grids of density values with face-adjacency flood fill.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Upper bound on the number of grid cells.
pub const MAX_CELLS: u128 = 100_000_000;

pub const UNLABELED: u32 = u32::MAX;

/// Density values at cell centers of an axis-aligned box.
///
/// Cell `(i_0, .., i_{d-1})` has center `lo_k + (i_k + 1/2) step_k`; storage
/// is row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDensity {
    lo: Vec<f64>,
    step: Vec<f64>,
    shape: Vec<usize>,
    values: Vec<f64>,
    distinct: Vec<f64>,
}

/// Face-adjacency components of `{value >= λ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridComponents {
    /// Component label per cell, [`UNLABELED`] outside the level set.
    pub labels: Vec<u32>,
    pub count: usize,
}

impl GridComponents {
    pub fn label(&self, cell: usize) -> Option<u32> {
        match self.labels[cell] {
            UNLABELED => None,
            l => Some(l),
        }
    }

    /// Cells of each component.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (c, &l) in self.labels.iter().enumerate() {
            if l != UNLABELED {
                out[l as usize].push(c);
            }
        }
        out
    }
}

/// Number of cells covering `[lo, hi]` with the given step, per axis.
pub fn cells_for(lo: &[f64], hi: &[f64], step: f64) -> Result<Vec<usize>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("grid step must be positive, got {step}")));
    }
    let shape: Vec<usize> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (((b - a) / step).round() as usize).max(1))
        .collect();
    let total: u128 = shape.iter().map(|&s| s as u128).product();
    if total > MAX_CELLS {
        return Err(Error::GridTooLarge { cells: total, limit: MAX_CELLS });
    }
    Ok(shape)
}

impl GriddedDensity {
    /// Evaluates `f` at the cell centers of `[lo, hi]` with cubic cells of side
    /// about `step` (adjusted so the box is tiled exactly).
    pub fn from_fn<F>(lo: &[f64], hi: &[f64], step: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidInput("grid box bounds must share a positive dimension".into()));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidInput("grid box must have positive extent".into()));
        }
        let shape = cells_for(lo, hi, step)?;
        let steps: Vec<f64> = lo.iter().zip(hi).zip(&shape).map(|((a, b), &s)| (b - a) / s as f64).collect();
        let total: usize = shape.iter().product();
        let d = lo.len();
        let values: Vec<f64> = (0..total)
            .into_par_iter()
            .map_init(
                || vec![0.0; d],
                |x, idx| {
                    let mut rem = idx;
                    for k in (0..d).rev() {
                        let i = rem % shape[k];
                        rem /= shape[k];
                        x[k] = lo[k] + (i as f64 + 0.5) * steps[k];
                    }
                    f(x)
                },
            )
            .collect();
        Self::from_values(lo.to_vec(), steps, shape, values)
    }

    pub fn from_values(lo: Vec<f64>, step: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let total: usize = shape.iter().product();
        if values.len() != total || lo.len() != shape.len() || step.len() != shape.len() {
            return Err(Error::InvalidInput("grid shape does not match values".into()));
        }
        if step.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidInput("grid steps must be positive".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite grid value {v}")));
        }
        let mut distinct = values.clone();
        distinct.par_sort_unstable_by(f64::total_cmp);
        distinct.dedup();
        Ok(Self { lo, step, shape, values, distinct })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn step(&self) -> &[f64] {
        &self.step
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.step).zip(&self.shape).map(|((a, s), &n)| a + s * n as f64).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    /// Sorted distinct grid values.
    pub fn distinct_values(&self) -> &[f64] {
        &self.distinct
    }

    pub fn max_value(&self) -> f64 {
        *self.distinct.last().expect("grid is non-empty")
    }

    pub fn cell_volume(&self) -> f64 {
        self.step.iter().product()
    }

    /// Riemann sum of the values.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        let mut rem = cell;
        for k in (0..self.dim()).rev() {
            out[k] = rem % self.shape[k];
            rem /= self.shape[k];
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.multi_index(cell)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.lo[k] + (i as f64 + 0.5) * self.step[k])
            .collect()
    }

    /// Cell containing `x`, if inside the box.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut flat = 0;
        for k in 0..self.dim() {
            let t = ((x[k] - self.lo[k]) / self.step[k]).floor();
            if t < 0.0 || t >= self.shape[k] as f64 {
                return None;
            }
            flat = flat * self.shape[k] + t as usize;
        }
        Some(flat)
    }

    /// Calls `emit` for each face-adjacent neighbor of `cell`.
    pub fn for_each_face_neighbor<F: FnMut(usize)>(&self, cell: usize, mut emit: F) {
        let mut stride = 1;
        let mut rem = cell;
        for k in (0..self.dim()).rev() {
            let i = rem % self.shape[k];
            rem /= self.shape[k];
            if i > 0 {
                emit(cell - stride);
            }
            if i + 1 < self.shape[k] {
                emit(cell + stride);
            }
            stride *= self.shape[k];
        }
    }

    /// Flood fill of `{value >= λ}` with face adjacency. Labels are assigned
    /// in order of the first cell of each component.
    pub fn components(&self, lambda: f64) -> GridComponents {
        self.components_of_mask(&self.values.iter().map(|&v| v >= lambda).collect::<Vec<_>>())
    }

    /// Flood fill of an arbitrary cell mask.
    pub fn components_of_mask(&self, mask: &[bool]) -> GridComponents {
        let mut labels = vec![UNLABELED; self.len()];
        let mut count = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..self.len() {
            if !mask[start] || labels[start] != UNLABELED {
                continue;
            }
            labels[start] = count;
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                self.for_each_face_neighbor(c, |nb| {
                    if mask[nb] && labels[nb] == UNLABELED {
                        labels[nb] = count;
                        queue.push_back(nb);
                    }
                });
            }
            count += 1;
        }
        GridComponents { labels, count: count as usize }
    }

    /// Same grid geometry with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_values(self.lo.clone(), self.step.clone(), self.shape.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_grid_is_one_component() {
        let g = GriddedDensity::from_fn(&[0.0, 0.0], &[1.0, 1.0], 0.1, |_| 1.0).unwrap();
        assert_eq!(g.shape(), &[10, 10]);
        assert_eq!(g.components(0.5).count, 1);
        assert_eq!(g.components(1.5).count, 0);
        assert_abs_diff_eq!(g.mass(), 1.0, epsilon = 1e-12);
        assert_eq!(g.distinct_values(), &[1.0]);
    }

    #[test]
    fn indexing_round_trips() {
        let g = GriddedDensity::from_fn(&[-1.0, 0.0], &[1.0, 3.0], 0.5, |x| x[0] + 10.0 * x[1]).unwrap();
        assert_eq!(g.shape(), &[4, 6]);
        for c in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(c)), c);
            assert_eq!(g.cell_of(&g.center(c)), Some(c));
            let x = g.center(c);
            assert_abs_diff_eq!(g.value(c), x[0] + 10.0 * x[1], epsilon = 1e-12);
        }
        assert_eq!(g.cell_of(&[1.0, 0.0]), None);
        let mut nbs = vec![];
        g.for_each_face_neighbor(0, |n| nbs.push(n));
        nbs.sort();
        assert_eq!(nbs, vec![1, 6]);
    }

    #[test]
    fn diagonal_contact_does_not_connect() {
        // checkerboard corner touch in 2-d
        let g = GriddedDensity::from_values(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(g.components(0.5).count, 2);
    }

    #[test]
    fn guards_cell_budget() {
        let err = GriddedDensity::from_fn(&[0.0, 0.0], &[1.0, 1.0], 1e-5, |_| 0.0).unwrap_err();
        assert!(matches!(err, Error::GridTooLarge { .. }));
    }
}
