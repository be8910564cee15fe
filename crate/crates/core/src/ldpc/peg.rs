use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::ParityCheckMatrix;
use crate::error::{ReconError, Result};
use crate::rng::{self, Purpose};

/// Variable-node degree distribution in node perspective: the fraction of
/// columns having each degree.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    terms: Vec<(u32, f64)>,
}

impl DegreeDistribution {
    pub fn new(mut terms: Vec<(u32, f64)>) -> Result<Self> {
        terms.retain(|&(_, f)| f != 0.0);
        terms.sort_by_key(|&(d, _)| d);
        if terms.is_empty() {
            return Err(ReconError::InfeasibleDistribution("no degrees".into()));
        }
        if terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ReconError::InfeasibleDistribution(
                "degree listed twice".into(),
            ));
        }
        if terms.iter().any(|&(d, f)| d == 0 || !(f > 0.0 && f <= 1.0)) {
            return Err(ReconError::InfeasibleDistribution(
                "degrees must be positive with fractions in (0, 1]".into(),
            ));
        }
        let total: f64 = terms.iter().map(|&(_, f)| f).sum();
        if (total - 1.0).abs() > 1e-3 {
            return Err(ReconError::InfeasibleDistribution(format!(
                "fractions sum to {total}"
            )));
        }
        for t in &mut terms {
            t.1 /= total;
        }
        Ok(DegreeDistribution { terms })
    }

    pub fn regular(degree: u32) -> Self {
        DegreeDistribution {
            terms: vec![(degree, 1.0)],
        }
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.last().map_or(0, |&(d, _)| d)
    }

    pub fn mean_degree(&self) -> f64 {
        self.terms.iter().map(|&(d, f)| f64::from(d) * f).sum()
    }

    /// Integer column degrees for `n` columns, ascending, by largest
    /// remainder rounding of `n * fraction`.
    pub fn column_degrees(&self, n: usize) -> Vec<u32> {
        let exact: Vec<f64> = self.terms.iter().map(|&(_, f)| f * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let short = n - counts.iter().sum::<usize>();
        for &k in order.iter().cycle().take(short) {
            counts[k] += 1;
        }
        self.terms
            .iter()
            .zip(counts)
            .flat_map(|(&(d, _), c)| std::iter::repeat_n(d, c))
            .collect()
    }
}

/// One `degree fraction` pair per line; `#` starts a comment.
impl FromStr for DegreeDistribution {
    type Err = ReconError;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (no, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || {
                ReconError::InfeasibleDistribution(format!("line {}: {line:?}", no + 1))
            };
            let mut it = line.split_whitespace();
            let d: u32 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let f: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() {
                return Err(bad());
            }
            terms.push((d, f));
        }
        DegreeDistribution::new(terms)
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(d, x) in &self.terms {
            writeln!(f, "{d} {x}")?;
        }
        Ok(())
    }
}

/// Progressive edge growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PegBuilder {
    /// Breadth-first expansion limit, in check levels. Bounds the cost per
    /// edge on long codes; while the expansion does not reach every row, a
    /// depth of `L` rules out cycles shorter than `2L + 4`.
    pub max_depth: usize,
}

impl Default for PegBuilder {
    fn default() -> Self {
        PegBuilder { max_depth: 1 }
    }
}

/// Builds an `m x n` matrix whose column degrees follow `dist`, with
/// [`PegBuilder::default`].
pub fn peg_construct(
    n: usize,
    dist: &DegreeDistribution,
    m: usize,
    seed: u64,
) -> Result<ParityCheckMatrix> {
    PegBuilder::default().build(n, dist, m, seed)
}

impl PegBuilder {
    pub fn build(
        &self,
        n: usize,
        dist: &DegreeDistribution,
        m: usize,
        seed: u64,
    ) -> Result<ParityCheckMatrix> {
        if m == 0 || m >= n {
            return Err(ReconError::InvalidParameter(format!(
                "need 0 < m < n, got m = {m}, n = {n}"
            )));
        }
        if dist.max_degree() as usize > m {
            return Err(ReconError::InfeasibleDistribution(format!(
                "column degree {} exceeds {m} rows",
                dist.max_degree()
            )));
        }
        let degrees = dist.column_degrees(n);
        let mut rng = rng::stream(seed, Purpose::Construction, 0);
        // Columns get their degree at random; edges are placed in ascending
        // degree order.
        let mut columns: Vec<usize> = (0..n).collect();
        columns.shuffle(&mut rng);
        let mut state = PegState::new(n, m);
        for (&col, &deg) in columns.iter().zip(&degrees) {
            for k in 0..deg {
                let row = if k == 0 {
                    state.lowest_degree_row(&mut rng, None)
                } else {
                    state.farthest_row(col, self.max_depth, &mut rng)
                };
                state.connect(col, row);
            }
        }
        ParityCheckMatrix::from_columns(m, &state.col_adj)
    }
}

struct PegState {
    col_adj: Vec<Vec<u32>>,
    row_adj: Vec<Vec<u32>>,
    buckets: Vec<Vec<u32>>,
    slot: Vec<usize>,
    row_mark: Vec<u32>,
    col_mark: Vec<u32>,
    stamp: u32,
}

impl PegState {
    fn new(n: usize, m: usize) -> Self {
        PegState {
            col_adj: vec![Vec::new(); n],
            row_adj: vec![Vec::new(); m],
            buckets: vec![(0..m as u32).collect()],
            slot: (0..m).collect(),
            row_mark: vec![0; m],
            col_mark: vec![0; n],
            stamp: 0,
        }
    }

    fn connect(&mut self, col: usize, row: u32) {
        let r = row as usize;
        let d = self.row_adj[r].len();
        let bucket = &mut self.buckets[d];
        let at = self.slot[r];
        bucket.swap_remove(at);
        if let Some(&moved) = bucket.get(at) {
            self.slot[moved as usize] = at;
        }
        if self.buckets.len() == d + 1 {
            self.buckets.push(Vec::new());
        }
        self.slot[r] = self.buckets[d + 1].len();
        self.buckets[d + 1].push(row);
        self.row_adj[r].push(col as u32);
        self.col_adj[col].push(row);
    }

    /// Lowest-degree row, skipping rows marked with the current stamp when
    /// `marked` is set. Ties go to the first eligible row after a random
    /// offset in the bucket.
    fn lowest_degree_row(&self, rng: &mut rng::Rng, marked: Option<u32>) -> u32 {
        for bucket in self.buckets.iter().filter(|b| !b.is_empty()) {
            let start = rng.gen_range(0..bucket.len());
            let found = (0..bucket.len())
                .map(|i| bucket[(start + i) % bucket.len()])
                .find(|&r| marked != Some(self.row_mark[r as usize]));
            if let Some(r) = found {
                return r;
            }
        }
        unreachable!("PEG ran out of rows although column degrees fit")
    }

    fn farthest_row(&mut self, col: usize, max_depth: usize, rng: &mut rng::Rng) -> u32 {
        self.stamp += 1;
        let stamp = self.stamp;
        let m = self.row_adj.len();
        self.col_mark[col] = stamp;
        let mut frontier: Vec<u32> = self.col_adj[col].clone();
        for &r in &frontier {
            self.row_mark[r as usize] = stamp;
        }
        let mut reached = frontier.len();
        for _ in 0..max_depth {
            let mut next = Vec::new();
            'level: for &r in &frontier {
                for &c in &self.row_adj[r as usize] {
                    if self.col_mark[c as usize] == stamp {
                        continue;
                    }
                    self.col_mark[c as usize] = stamp;
                    for &r2 in &self.col_adj[c as usize] {
                        if self.row_mark[r2 as usize] != stamp {
                            self.row_mark[r2 as usize] = stamp;
                            next.push(r2);
                        }
                    }
                    if reached + next.len() == m {
                        break 'level;
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            if reached + next.len() == m {
                // Everything is reachable: take the farthest level.
                let best = next
                    .iter()
                    .map(|&r| self.row_adj[r as usize].len())
                    .min()
                    .unwrap();
                let ties: Vec<u32> = next
                    .into_iter()
                    .filter(|&r| self.row_adj[r as usize].len() == best)
                    .collect();
                return ties[rng.gen_range(0..ties.len())];
            }
            reached += next.len();
            frontier = next;
        }
        self.lowest_degree_row(rng, Some(stamp))
    }
}
