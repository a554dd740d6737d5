//! Dense weighted digraphs and the deterministic statistics defined on them.
//!
//! Reciprocated quantities follow the min-decomposition of a dyad: for the
//! ordered pair `(i, j)` the reciprocated weight is `min(w_ij, w_ji)` and the
//! remainder on each side is the non-reciprocated surplus.
//!
//! Global reciprocated totals (`d^↔`, `s^↔`) are summed over *ordered* pairs,
//! so each reciprocated dyad contributes twice. This keeps `D^↔ = d^↔ / d`
//! inside `[0, 1]` and makes the totals equal the sums of the per-node
//! reciprocated degrees and strengths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest weight accepted anywhere in the crate.
pub const MAX_WEIGHT: u64 = i64::MAX as u64;

/// Directed graph on `n` nodes with non-negative integer weights and an empty
/// diagonal, stored as a dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedDigraph {
    n: usize,
    weights: Vec<u64>,
    labels: Option<Vec<String>>,
}

impl WeightedDigraph {
    /// Graph with `n` nodes and no links.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph(
                "a graph needs at least one node".into(),
            ));
        }
        Ok(Self {
            n,
            weights: vec![0; n * n],
            labels: None,
        })
    }

    /// Row-major weights already known to satisfy the invariants.
    pub(crate) fn from_raw(n: usize, weights: Vec<u64>) -> Self {
        debug_assert_eq!(weights.len(), n * n);
        debug_assert!((0..n).all(|i| weights[i * n + i] == 0));
        Self {
            n,
            weights,
            labels: None,
        }
    }

    pub fn from_dense(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::empty(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &w) in row.iter().enumerate() {
                if i == j {
                    if w != 0 {
                        return Err(Error::SelfLoop(i));
                    }
                } else {
                    g.set_weight(i, j, w)?;
                }
            }
        }
        Ok(g)
    }

    /// Builds a graph from `(source, target, weight)` triples. Repeated pairs
    /// are summed.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u64)>,
    {
        let mut g = Self::empty(n)?;
        for (i, j, w) in edges {
            g.add_weight(i, j, w)?;
        }
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of node `i`, falling back to its index.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> u64 {
        self.weights[i * self.n + j]
    }

    #[inline]
    pub fn has_link(&self, i: usize, j: usize) -> bool {
        self.weight(i, j) > 0
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        for index in [i, j] {
            if index >= self.n {
                return Err(Error::NodeOutOfRange { index, n: self.n });
            }
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: u64) -> Result<()> {
        self.check_pair(i, j)?;
        if w > MAX_WEIGHT {
            return Err(Error::WeightOverflow);
        }
        self.weights[i * self.n + j] = w;
        Ok(())
    }

    pub fn add_weight(&mut self, i: usize, j: usize, w: u64) -> Result<()> {
        self.check_pair(i, j)?;
        let cell = &mut self.weights[i * self.n + j];
        let sum = cell.checked_add(w).filter(|&s| s <= MAX_WEIGHT);
        *cell = sum.ok_or(Error::WeightOverflow)?;
        Ok(())
    }

    /// Row `i` of the weight matrix.
    pub fn row(&self, i: usize) -> &[u64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Present links as `(i, j, w_ij)` in row-major order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let n = self.n;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(move |(idx, &w)| (idx / n, idx % n, w))
    }

    pub fn link_count(&self) -> u64 {
        self.weights.iter().filter(|&&w| w > 0).count() as u64
    }

    pub fn is_binary(&self) -> bool {
        self.weights.iter().all(|&w| w <= 1)
    }

    pub fn binarized(&self) -> Self {
        Self {
            n: self.n,
            weights: self.weights.iter().map(|&w| u64::from(w > 0)).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Min-decomposition of the dyad `(i, j)`.
    #[inline]
    pub fn dyad(&self, i: usize, j: usize) -> DyadDecomposition {
        dyad_decompose(self.weight(i, j), self.weight(j, i))
    }

    /// Graph with nodes relabelled so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidGraph("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
        }
        let mut g = Self::empty(self.n)?;
        for (i, j, w) in self.links() {
            g.weights[perm[i] * self.n + perm[j]] = w;
        }
        if let Some(labels) = &self.labels {
            let mut out = vec![String::new(); self.n];
            for (i, l) in labels.iter().enumerate() {
                out[perm[i]] = l.clone();
            }
            g.labels = Some(out);
        }
        Ok(g)
    }
}

/// Topological state of a dyad as seen from its first node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DyadState {
    /// No link in either direction.
    Empty,
    /// Only `i -> j`.
    Out,
    /// Only `j -> i`.
    In,
    /// Both directions present.
    Reciprocated,
}

impl DyadState {
    /// The same dyad seen from the other endpoint.
    pub fn reversed(self) -> Self {
        match self {
            DyadState::Out => DyadState::In,
            DyadState::In => DyadState::Out,
            s => s,
        }
    }
}

/// Weighted and binary min-decomposition of an ordered pair `(w_ij, w_ji)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadDecomposition {
    pub w_out_nonrec: u64,
    pub w_in_nonrec: u64,
    pub w_rec: u64,
    pub a_out_nonrec: bool,
    pub a_in_nonrec: bool,
    pub a_rec: bool,
    pub a_none: bool,
}

impl DyadDecomposition {
    pub fn state(&self) -> DyadState {
        if self.a_rec {
            DyadState::Reciprocated
        } else if self.a_out_nonrec {
            DyadState::Out
        } else if self.a_in_nonrec {
            DyadState::In
        } else {
            DyadState::Empty
        }
    }

    /// Recovers `(w_ij, w_ji)`.
    pub fn reconstruct(&self) -> (u64, u64) {
        (
            self.w_out_nonrec + self.w_rec,
            self.w_in_nonrec + self.w_rec,
        )
    }
}

pub fn dyad_decompose(w_ij: u64, w_ji: u64) -> DyadDecomposition {
    let w_rec = w_ij.min(w_ji);
    let (a_ij, a_ji) = (w_ij > 0, w_ji > 0);
    DyadDecomposition {
        w_out_nonrec: w_ij - w_rec,
        w_in_nonrec: w_ji - w_rec,
        w_rec,
        a_out_nonrec: a_ij && !a_ji,
        a_in_nonrec: !a_ij && a_ji,
        a_rec: a_ij && a_ji,
        a_none: !a_ij && !a_ji,
    }
}

/// Per-node degrees and strengths, split by direction and reciprocity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    pub d_out: u64,
    pub d_in: u64,
    pub s_out: u64,
    pub s_in: u64,
    pub d_out_nonrec: u64,
    pub d_in_nonrec: u64,
    pub d_rec: u64,
    pub s_out_nonrec: u64,
    pub s_in_nonrec: u64,
    pub s_rec: u64,
    /// `d_out + d_in`.
    pub d_total: u64,
}

pub fn node_stats(g: &WeightedDigraph) -> Vec<NodeStats> {
    let n = g.n();
    let mut out = vec![NodeStats::default(); n];
    for (i, st) in out.iter_mut().enumerate() {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (w_ij, w_ji) = (g.weight(i, j), g.weight(j, i));
            let dy = dyad_decompose(w_ij, w_ji);
            st.d_out += u64::from(w_ij > 0);
            st.d_in += u64::from(w_ji > 0);
            st.s_out += w_ij;
            st.s_in += w_ji;
            st.d_out_nonrec += u64::from(dy.a_out_nonrec);
            st.d_in_nonrec += u64::from(dy.a_in_nonrec);
            st.d_rec += u64::from(dy.a_rec);
            st.s_out_nonrec += dy.w_out_nonrec;
            st.s_in_nonrec += dy.w_in_nonrec;
            st.s_rec += dy.w_rec;
        }
        st.d_total = st.d_out + st.d_in;
    }
    out
}

/// Network-wide totals. Ratios whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub n: usize,
    pub links: u64,
    pub possible_links: u64,
    pub density: Option<f64>,
    pub volume: u64,
    pub weighted_density: Option<f64>,
    pub rec_links: u64,
    pub reciprocity_ratio: Option<f64>,
    pub rec_volume: u64,
    pub avg_rec_weight: Option<f64>,
}

pub(crate) fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn global_stats(g: &WeightedDigraph) -> GlobalStats {
    let n = g.n();
    let (mut links, mut volume, mut rec_links, mut rec_volume) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (w_ij, w_ji) = (g.weight(i, j), g.weight(j, i));
            links += u64::from(w_ij > 0);
            volume += w_ij;
            rec_links += u64::from(w_ij > 0 && w_ji > 0);
            rec_volume += w_ij.min(w_ji);
        }
    }
    let possible_links = (n * (n - 1)) as u64;
    GlobalStats {
        n,
        links,
        possible_links,
        density: ratio(links, possible_links),
        volume,
        weighted_density: ratio(volume, links),
        rec_links,
        reciprocity_ratio: ratio(rec_links, links),
        rec_volume,
        avg_rec_weight: ratio(rec_volume, rec_links),
    }
}
