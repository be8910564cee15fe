use std::collections::VecDeque;

use crate::bits::BitFrame;
use crate::error::{ReconError, Result};

/// Sparse binary parity-check matrix `H` with `m` rows and `n` columns.
///
/// Adjacency is stored twice in compressed form: row-major (the edge order
/// used by the decoder) and column-major with a map back to edge ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    m: usize,
    row_ptr: Vec<u32>,
    row_cols: Vec<u32>,
    col_ptr: Vec<u32>,
    col_rows: Vec<u32>,
    col_edges: Vec<u32>,
}

impl ParityCheckMatrix {
    /// Builds from per-row column lists. Column order within a row is
    /// normalised to ascending.
    pub fn from_rows(n: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let m = rows.len();
        if n == 0 || m == 0 || m >= n {
            return Err(ReconError::Matrix(format!(
                "need 0 < m < n, got m = {m}, n = {n}"
            )));
        }
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut row_cols = Vec::new();
        row_ptr.push(0u32);
        for (j, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(ReconError::Matrix(format!(
                    "duplicate edge ({j}, {})",
                    w[0]
                )));
            }
            if let Some(&c) = row.iter().find(|&&c| c as usize >= n) {
                return Err(ReconError::Matrix(format!(
                    "column {c} out of range in row {j}"
                )));
            }
            row_cols.extend_from_slice(&row);
            row_ptr.push(row_cols.len() as u32);
        }

        let mut degree = vec![0u32; n];
        for &c in &row_cols {
            degree[c as usize] += 1;
        }
        if let Some(c) = degree.iter().position(|&d| d == 0) {
            return Err(ReconError::Matrix(format!("column {c} has degree 0")));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0u32);
        for d in &degree {
            col_ptr.push(col_ptr.last().unwrap() + d);
        }
        let mut fill: Vec<u32> = col_ptr[..n].to_vec();
        let mut col_rows = vec![0u32; row_cols.len()];
        let mut col_edges = vec![0u32; row_cols.len()];
        for j in 0..m {
            for e in row_ptr[j]..row_ptr[j + 1] {
                let c = row_cols[e as usize] as usize;
                let slot = fill[c] as usize;
                col_rows[slot] = j as u32;
                col_edges[slot] = e;
                fill[c] += 1;
            }
        }
        Ok(ParityCheckMatrix {
            n,
            m,
            row_ptr,
            row_cols,
            col_ptr,
            col_rows,
            col_edges,
        })
    }

    /// Builds from per-column row lists.
    pub fn from_columns(m: usize, cols: &[Vec<u32>]) -> Result<Self> {
        let mut rows = vec![Vec::new(); m];
        for (i, col) in cols.iter().enumerate() {
            for &j in col {
                let row = rows.get_mut(j as usize).ok_or_else(|| {
                    ReconError::Matrix(format!("row {j} out of range in column {i}"))
                })?;
                row.push(i as u32);
            }
        }
        Self::from_rows(cols.len(), rows)
    }

    /// Frame size `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Syndrome length `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rate(&self) -> f64 {
        1.0 - self.m as f64 / self.n as f64
    }

    pub fn edges(&self) -> usize {
        self.row_cols.len()
    }

    pub fn row(&self, j: usize) -> &[u32] {
        &self.row_cols[self.row_ptr[j] as usize..self.row_ptr[j + 1] as usize]
    }

    pub fn col(&self, i: usize) -> &[u32] {
        &self.col_rows[self.col_ptr[i] as usize..self.col_ptr[i + 1] as usize]
    }

    /// Row-major edge ids of column `i`, aligned with [`Self::col`].
    pub fn col_edge_ids(&self, i: usize) -> &[u32] {
        &self.col_edges[self.col_ptr[i] as usize..self.col_ptr[i + 1] as usize]
    }

    pub(crate) fn row_range(&self, j: usize) -> std::ops::Range<usize> {
        self.row_ptr[j] as usize..self.row_ptr[j + 1] as usize
    }

    pub fn row_degree(&self, j: usize) -> usize {
        self.row_range(j).len()
    }

    pub fn col_degree(&self, i: usize) -> usize {
        (self.col_ptr[i + 1] - self.col_ptr[i]) as usize
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.m).map(move |j| self.row(j))
    }

    /// `(degree, count)` pairs of the column degrees, ascending by degree.
    pub fn column_degree_histogram(&self) -> Vec<(usize, usize)> {
        histogram((0..self.n).map(|i| self.col_degree(i)))
    }

    pub fn row_degree_histogram(&self) -> Vec<(usize, usize)> {
        histogram((0..self.m).map(|j| self.row_degree(j)))
    }

    /// `s = H x`.
    pub fn syndrome(&self, frame: &BitFrame) -> Result<BitFrame> {
        if frame.len() != self.n {
            return Err(ReconError::LengthMismatch {
                left: frame.len(),
                right: self.n,
            });
        }
        Ok(BitFrame::from_bools(
            self.rows().map(|row| frame.parity_of(row)),
        ))
    }

    /// Length of the shortest cycle in the Tanner graph, or `None` when the
    /// graph is a forest.
    pub fn girth(&self) -> Option<usize> {
        // Tanner nodes: columns 0..n, rows n..n+m.
        let total = self.n + self.m;
        let mut best: Option<usize> = None;
        let mut dist = vec![u32::MAX; total];
        let mut parent = vec![u32::MAX; total];
        let mut touched = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.n {
            for &t in &touched {
                dist[t] = u32::MAX;
                parent[t] = u32::MAX;
            }
            touched.clear();
            queue.clear();
            dist[start] = 0;
            touched.push(start);
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                let du = dist[u] as usize;
                if best.is_some_and(|g| 2 * du + 1 >= g) {
                    break;
                }
                let neighbours: Vec<usize> = if u < self.n {
                    self.col(u).iter().map(|&j| self.n + j as usize).collect()
                } else {
                    self.row(u - self.n).iter().map(|&c| c as usize).collect()
                };
                for w in neighbours {
                    if w as u32 == parent[u] {
                        continue;
                    }
                    if dist[w] == u32::MAX {
                        dist[w] = du as u32 + 1;
                        parent[w] = u as u32;
                        touched.push(w);
                        queue.push_back(w);
                    } else {
                        let cycle = du + dist[w] as usize + 1;
                        best = Some(best.map_or(cycle, |g| g.min(cycle)));
                    }
                }
            }
        }
        best
    }
}

fn histogram(degrees: impl Iterator<Item = usize>) -> Vec<(usize, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for d in degrees {
        *counts.entry(d).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}
