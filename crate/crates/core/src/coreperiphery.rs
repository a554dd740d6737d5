//! Core-periphery decomposition of the binarised graph.
//!
//! The error score of a core `C` counts the links missing inside the core
//! plus the links present inside the periphery, divided by the total number
//! of links. Off-diagonal blocks are unconstrained.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{node_stats, ratio, WeightedDigraph};

/// Split of the nodes into a core and its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bipartition {
    /// Ascending node indices.
    pub core: Vec<usize>,
    /// Ascending node indices.
    pub periphery: Vec<usize>,
    pub error: f64,
}

/// Labelled form used for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledBipartition {
    pub core: Vec<String>,
    pub periphery: Vec<String>,
    pub core_size: usize,
    pub error: f64,
}

impl Bipartition {
    fn from_mask(in_core: &[bool], error: f64) -> Self {
        let (core, periphery) = (0..in_core.len()).partition(|&i| in_core[i]);
        Self {
            core,
            periphery,
            error,
        }
    }

    pub fn core_size(&self) -> usize {
        self.core.len()
    }

    pub fn mask(&self, n: usize) -> Result<Vec<bool>> {
        let mut mask = vec![false; n];
        for &i in &self.core {
            if i >= n || std::mem::replace(&mut mask[i], true) {
                return Err(Error::InvalidPartition(format!("bad core node {i}")));
            }
        }
        Ok(mask)
    }

    pub fn labelled(&self, g: &WeightedDigraph) -> LabelledBipartition {
        LabelledBipartition {
            core: self.core.iter().map(|&i| g.label(i)).collect(),
            periphery: self.periphery.iter().map(|&i| g.label(i)).collect(),
            core_size: self.core.len(),
            error: self.error,
        }
    }
}

/// Numerator of the error score: missing core links plus periphery links.
fn error_numerator(g: &WeightedDigraph, in_core: &[bool]) -> u64 {
    let n = g.n();
    let size = in_core.iter().filter(|&&c| c).count() as u64;
    let (mut core_links, mut periphery_links) = (0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            if i != j && g.has_link(i, j) {
                match (in_core[i], in_core[j]) {
                    (true, true) => core_links += 1,
                    (false, false) => periphery_links += 1,
                    _ => {}
                }
            }
        }
    }
    size * size.saturating_sub(1) - core_links + periphery_links
}

fn link_total(g: &WeightedDigraph) -> Result<u64> {
    match g.link_count() {
        0 => Err(Error::NoLinks),
        d => Ok(d),
    }
}

/// Error score of `core` (node indices). Any subset is accepted.
pub fn error_score(g: &WeightedDigraph, core: &[usize]) -> Result<f64> {
    let d = link_total(g)?;
    let mask = Bipartition {
        core: core.to_vec(),
        periphery: vec![],
        error: 0.0,
    }
    .mask(g.n())?;
    Ok(error_numerator(g, &mask) as f64 / d as f64)
}

/// Links between `v` and the nodes selected by `side`, both directions.
fn links_to(g: &WeightedDigraph, v: usize, in_core: &[bool], side: bool) -> u64 {
    (0..g.n())
        .filter(|&u| u != v && in_core[u] == side)
        .map(|u| u64::from(g.has_link(v, u)) + u64::from(g.has_link(u, v)))
        .sum()
}

/// Nodes by total degree, then total strength, both descending, then index.
pub fn degree_order(g: &WeightedDigraph) -> Vec<usize> {
    let st = node_stats(g);
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by(|&a, &b| {
        let key = |i: usize| (st[i].d_total, st[i].s_out + st[i].s_in);
        key(b).cmp(&key(a)).then(a.cmp(&b))
    });
    order
}

/// Scans every prefix of the degree order of length `1..n-1` and keeps the
/// one with the lowest error; ties go to the smaller core.
pub fn detect_core_sorted(g: &WeightedDigraph) -> Result<Bipartition> {
    let d = link_total(g)?;
    let n = g.n();
    let order = degree_order(g);
    let mut in_core = vec![false; n];
    // Empty core: every link lies in the periphery.
    let mut numerator = d as i64;
    let mut best: Option<(i64, usize)> = None;
    for (k, &v) in order.iter().enumerate().take(n - 1) {
        let size = k as i64;
        let to_core = links_to(g, v, &in_core, true) as i64;
        let to_periphery = links_to(g, v, &in_core, false) as i64;
        numerator += 2 * size - to_core - to_periphery;
        in_core[v] = true;
        if best.is_none_or(|(b, _)| numerator < b) {
            best = Some((numerator, k + 1));
        }
    }
    let (numerator, size) =
        best.ok_or(Error::InvalidPartition("need at least two nodes".into()))?;
    let mut mask = vec![false; n];
    for &v in &order[..size] {
        mask[v] = true;
    }
    Ok(Bipartition::from_mask(&mask, numerator as f64 / d as f64))
}

/// Best-improvement single-node moves, one per pass, keeping the core a
/// non-empty proper subset. Stops at a local optimum or after `max_passes`.
pub fn refine_greedy(
    g: &WeightedDigraph,
    init: &Bipartition,
    max_passes: usize,
) -> Result<Bipartition> {
    let d = link_total(g)?;
    let n = g.n();
    let mut in_core = init.mask(n)?;
    let mut size = in_core.iter().filter(|&&c| c).count() as i64;
    if size == 0 || size == n as i64 {
        return Err(Error::InvalidPartition(
            "core must be a non-empty proper subset".into(),
        ));
    }
    let mut numerator = error_numerator(g, &in_core) as i64;
    for _ in 0..max_passes {
        let mut best: Option<(i64, usize)> = None;
        for v in 0..n {
            let delta = if in_core[v] {
                if size == 1 {
                    continue;
                }
                let to_core = links_to(g, v, &in_core, true) as i64;
                let to_periphery = links_to(g, v, &in_core, false) as i64;
                -(2 * (size - 1) - to_core) + to_periphery
            } else {
                if size == n as i64 - 1 {
                    continue;
                }
                let to_core = links_to(g, v, &in_core, true) as i64;
                let to_periphery = links_to(g, v, &in_core, false) as i64;
                2 * size - to_core - to_periphery
            };
            if delta < 0 && best.is_none_or(|(b, _)| delta < b) {
                best = Some((delta, v));
            }
        }
        let Some((delta, v)) = best else { break };
        size += if in_core[v] { -1 } else { 1 };
        in_core[v] = !in_core[v];
        numerator += delta;
    }
    Ok(Bipartition::from_mask(
        &in_core,
        numerator as f64 / d as f64,
    ))
}

/// Degree-sorted detection followed by greedy refinement.
pub fn detect_core(g: &WeightedDigraph, max_passes: usize) -> Result<Bipartition> {
    refine_greedy(g, &detect_core_sorted(g)?, max_passes)
}

/// Global optimum over all `2^n − 2` non-trivial cores. Ties go to the smaller
/// core, then to the smaller bitmask. Only for small graphs.
pub fn detect_core_exhaustive(g: &WeightedDigraph) -> Result<Bipartition> {
    let d = link_total(g)?;
    let n = g.n();
    if !(2..=24).contains(&n) {
        return Err(Error::InvalidPartition(format!(
            "exhaustive search needs 2 <= n <= 24, got {n}"
        )));
    }
    let mut best: Option<(u64, u32, u64)> = None;
    for bits in 1..((1u64 << n) - 1) {
        let mask: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
        let key = (error_numerator(g, &mask), bits.count_ones(), bits);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    let (numerator, _, bits) = best.expect("n >= 2 leaves a candidate");
    let mask: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
    Ok(Bipartition::from_mask(&mask, numerator as f64 / d as f64))
}

/// Totals of one block of the 2x2 partition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub links: u64,
    pub possible_links: u64,
    pub density: Option<f64>,
    pub volume: u64,
    pub volume_per_link: Option<f64>,
    /// Ordered pairs in the block with a link both ways.
    pub rec_links: u64,
    /// `Σ min(w_ij, w_ji)` over the block's ordered pairs.
    pub rec_volume: u64,
    pub reciprocity: Option<f64>,
    pub weighted_reciprocity: Option<f64>,
}

/// Block statistics. The two off-diagonal blocks report the reciprocity of
/// the cross pairs jointly, because every reciprocated cross dyad has one leg
/// in each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub core_size: usize,
    pub periphery_size: usize,
    pub cc: Block,
    pub cp: Block,
    pub pc: Block,
    pub pp: Block,
}

impl BlockStats {
    pub fn blocks(&self) -> [(&'static str, &Block); 4] {
        [
            ("cc", &self.cc),
            ("cp", &self.cp),
            ("pc", &self.pc),
            ("pp", &self.pp),
        ]
    }
}

pub fn block_stats(g: &WeightedDigraph, part: &Bipartition) -> Result<BlockStats> {
    let n = g.n();
    let in_core = part.mask(n)?;
    let c = in_core.iter().filter(|&&x| x).count() as u64;
    let p = n as u64 - c;
    let mut blocks = [Block::default(); 4];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (w_ij, w_ji) = (g.weight(i, j), g.weight(j, i));
            let b = &mut blocks[match (in_core[i], in_core[j]) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            }];
            b.links += u64::from(w_ij > 0);
            b.volume += w_ij;
            b.rec_links += u64::from(w_ij > 0 && w_ji > 0);
            b.rec_volume += w_ij.min(w_ji);
        }
    }
    let possible = [
        c * c.saturating_sub(1),
        c * p,
        p * c,
        p * p.saturating_sub(1),
    ];
    for (b, m) in blocks.iter_mut().zip(possible) {
        b.possible_links = m;
        b.density = ratio(b.links, m);
        b.volume_per_link = ratio(b.volume, b.links);
        b.reciprocity = ratio(b.rec_links, b.links);
        b.weighted_reciprocity = ratio(b.rec_volume, b.volume);
    }
    let cross_links = blocks[1].links + blocks[2].links;
    let cross_volume = blocks[1].volume + blocks[2].volume;
    let cross_rec = blocks[1].rec_links + blocks[2].rec_links;
    let cross_rec_volume = blocks[1].rec_volume + blocks[2].rec_volume;
    for b in &mut blocks[1..3] {
        b.reciprocity = ratio(cross_rec, cross_links);
        b.weighted_reciprocity = ratio(cross_rec_volume, cross_volume);
    }
    let [cc, cp, pc, pp] = blocks;
    Ok(BlockStats {
        core_size: c as usize,
        periphery_size: p as usize,
        cc,
        cp,
        pc,
        pp,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per block; absent ratios are empty cells.
pub fn write_block_csv<W: Write>(out: W, stats: &BlockStats) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "block",
        "links",
        "possible_links",
        "density",
        "volume",
        "volume_per_link",
        "rec_links",
        "rec_volume",
        "reciprocity",
        "weighted_reciprocity",
    ])?;
    for (name, b) in stats.blocks() {
        w.write_record([
            name.to_string(),
            b.links.to_string(),
            b.possible_links.to_string(),
            opt(b.density),
            b.volume.to_string(),
            opt(b.volume_per_link),
            b.rec_links.to_string(),
            b.rec_volume.to_string(),
            opt(b.reciprocity),
            opt(b.weighted_reciprocity),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::global_stats;
    use proptest::prelude::*;

    /// Complete core {0, 1}; periphery {2, 3, 4} linked both ways to the core.
    fn ideal() -> WeightedDigraph {
        let mut edges = vec![(0, 1, 2), (1, 0, 3)];
        for c in 0..2 {
            for p in 2..5 {
                edges.push((c, p, 1));
                edges.push((p, c, 4));
            }
        }
        WeightedDigraph::from_edges(5, edges).unwrap()
    }

    fn complete(n: usize) -> WeightedDigraph {
        let mut g = WeightedDigraph::empty(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    g.set_weight(i, j, 1).unwrap();
                }
            }
        }
        g
    }

    fn arb_graph() -> impl Strategy<Value = WeightedDigraph> {
        (2usize..=6)
            .prop_flat_map(|n| (Just(n), proptest::collection::vec(0u64..3, n * n)))
            .prop_filter_map("needs a link", |(n, mut w)| {
                for i in 0..n {
                    w[i * n + i] = 0;
                }
                (w.iter().any(|&x| x > 0)).then(|| WeightedDigraph::from_raw(n, w))
            })
    }

    #[test]
    fn ideal_core_scores_zero() {
        let g = ideal();
        assert_eq!(error_score(&g, &[0, 1]).unwrap(), 0.0);
        assert_eq!(error_score(&complete(3), &[0, 1, 2]).unwrap(), 0.0);
        let found = detect_core_sorted(&g).unwrap();
        assert_eq!(found.core, vec![0, 1]);
        assert_eq!(found.error, 0.0);
    }

    #[test]
    fn refinement_drops_a_wrong_core_member() {
        // With two-way core links a periphery node joins the core at no cost,
        // so the periphery here only lends to the core.
        let mut edges = vec![(0, 1, 2), (1, 0, 3)];
        for p in 2..5 {
            edges.extend([(p, 0, 1), (p, 1, 1)]);
        }
        let g = WeightedDigraph::from_edges(5, edges).unwrap();
        let init = Bipartition {
            core: vec![0, 1, 3],
            periphery: vec![2, 4],
            error: error_score(&g, &[0, 1, 3]).unwrap(),
        };
        assert!(init.error > 0.0);
        let r = refine_greedy(&g, &init, 10).unwrap();
        assert_eq!(r.core, vec![0, 1]);
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn complete_graph_matches_exhaustive() {
        for n in 2..=5 {
            let g = complete(n);
            let sorted = detect_core_sorted(&g).unwrap();
            let best = detect_core_exhaustive(&g).unwrap();
            assert_eq!(sorted.error, best.error);
            assert_eq!(sorted.core_size(), best.core_size());
        }
    }

    #[test]
    fn empty_graph_is_diagnosed() {
        let g = WeightedDigraph::empty(4).unwrap();
        assert!(matches!(error_score(&g, &[0]), Err(Error::NoLinks)));
        assert!(matches!(detect_core_sorted(&g), Err(Error::NoLinks)));
    }

    #[test]
    fn ideal_blocks() {
        let g = ideal();
        let part = detect_core_sorted(&g).unwrap();
        let b = block_stats(&g, &part).unwrap();
        assert_eq!(b.cc.density, Some(1.0));
        assert_eq!(b.pp.density, Some(0.0));
        assert_eq!(b.cp.reciprocity, Some(1.0));
        let gs = global_stats(&g);
        let blocks = b.blocks();
        assert_eq!(blocks.iter().map(|(_, x)| x.links).sum::<u64>(), gs.links);
        assert_eq!(blocks.iter().map(|(_, x)| x.volume).sum::<u64>(), gs.volume);
        let mut buf = Vec::new();
        write_block_csv(&mut buf, &b).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    proptest! {
        #[test]
        fn sorted_and_refined_bracket_the_optimum(g in arb_graph()) {
            let best = detect_core_exhaustive(&g).unwrap();
            let sorted = detect_core_sorted(&g).unwrap();
            let refined = refine_greedy(&g, &sorted, 100).unwrap();
            prop_assert!(sorted.error >= best.error);
            prop_assert!(refined.error <= sorted.error);
            prop_assert!(refined.error >= best.error);
            prop_assert_eq!(refined.error, error_score(&g, &refined.core).unwrap());
            prop_assert_eq!(sorted.error, error_score(&g, &sorted.core).unwrap());
            let again = refine_greedy(&g, &best, 100).unwrap();
            prop_assert_eq!(again.error, best.error);
        }

        #[test]
        fn score_ignores_weights(g in arb_graph(), bits in 1u64..63) {
            let core: Vec<usize> = (0..g.n()).filter(|i| bits >> i & 1 == 1).collect();
            prop_assert_eq!(error_score(&g, &core).unwrap(), error_score(&g.binarized(), &core).unwrap());
        }
    }
}
