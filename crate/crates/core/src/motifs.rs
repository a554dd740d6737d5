//! Census of the 13 connected triadic motifs, binary and weighted.
//!
//! Each motif is a product of three dyad factors over the ordered triple
//! `(i, j, k)`: one for `(i, j)`, one for `(j, k)` and one for `(k, i)`. A
//! factor is the non-reciprocated out, non-reciprocated in or reciprocated
//! part of the dyad, or the absent-dyad indicator. Counts are raw sums over
//! ordered triples, so every motif carries its symmetry factor.
//!
//! The weighted census replaces each link indicator by the matching weight
//! component (the absent-dyad factor stays an indicator) and takes the square
//! root for two-link motifs and the cube root for three-link motifs.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::sampler::{StatDistribution, ZScore};

pub const MOTIFS: usize = 13;

/// Dyad factor kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum F {
    Out,
    In,
    Rec,
    None,
}

/// Factors of `(i, j)`, `(j, k)` and `(k, i)` for motifs 1..=13.
const TABLE: [[F; 3]; MOTIFS] = [
    [F::In, F::Out, F::None],
    [F::Out, F::Out, F::None],
    [F::Rec, F::Out, F::None],
    [F::None, F::Out, F::In],
    [F::In, F::Out, F::In],
    [F::Rec, F::Out, F::In],
    [F::Rec, F::In, F::None],
    [F::Rec, F::Rec, F::None],
    [F::In, F::In, F::In],
    [F::In, F::Rec, F::In],
    [F::Out, F::Rec, F::In],
    [F::Rec, F::Rec, F::In],
    [F::Rec, F::Rec, F::Rec],
];

fn is_two_link(m: usize) -> bool {
    TABLE[m].contains(&F::None)
}

/// Binary state of a dyad: 0 none, 1 out, 2 in, 3 reciprocated.
#[inline]
fn state(g: &WeightedDigraph, i: usize, j: usize) -> usize {
    usize::from(g.has_link(i, j)) | usize::from(g.has_link(j, i)) << 1
}

const fn state_of(f: F) -> usize {
    match f {
        F::None => 0,
        F::Out => 1,
        F::In => 2,
        F::Rec => 3,
    }
}

/// Motif index for the binary states of `(i, j)`, `(j, k)`, `(k, i)`.
const LOOKUP: [Option<u8>; 64] = {
    let mut t = [None; 64];
    let mut m = 0;
    while m < MOTIFS {
        let f = TABLE[m];
        t[state_of(f[0]) * 16 + state_of(f[1]) * 4 + state_of(f[2])] = Some(m as u8);
        m += 1;
    }
    t
};

/// `[w^→, w^←, w^↔, a^≁]` of the dyad `(i, j)` as floats.
#[inline]
fn components(g: &WeightedDigraph, i: usize, j: usize) -> [f64; 4] {
    let (a, b) = (g.weight(i, j), g.weight(j, i));
    let rec = a.min(b);
    [
        (a - rec) as f64,
        (b - rec) as f64,
        rec as f64,
        f64::from(u8::from(a == 0 && b == 0)),
    ]
}

#[inline]
fn pick(c: &[f64; 4], f: F) -> f64 {
    match f {
        F::Out => c[0],
        F::In => c[1],
        F::Rec => c[2],
        F::None => c[3],
    }
}

/// Abundance of the 13 motifs, indexed `0..13` for motifs `1..=13`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotifVector {
    pub unweighted: [u64; MOTIFS],
    pub weighted: [f64; MOTIFS],
}

impl Default for MotifVector {
    fn default() -> Self {
        Self {
            unweighted: [0; MOTIFS],
            weighted: [0.0; MOTIFS],
        }
    }
}

#[derive(Clone, Copy)]
struct Partial {
    unweighted: [u64; MOTIFS],
    weighted: [f64; MOTIFS],
}

impl Partial {
    fn zero() -> Self {
        Self {
            unweighted: [0; MOTIFS],
            weighted: [0.0; MOTIFS],
        }
    }

    fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        for m in 0..MOTIFS {
            out.unweighted[m] += o.unweighted[m];
            out.weighted[m] += o.weighted[m];
        }
        out
    }
}

/// Sum in a fixed binary tree so the result does not depend on scheduling.
fn pairwise(parts: &[Partial]) -> Partial {
    match parts.len() {
        0 => Partial::zero(),
        1 => parts[0],
        len => {
            let (a, b) = parts.split_at(len / 2);
            pairwise(a).add(&pairwise(b))
        }
    }
}

/// Triples whose middle node is `j`. Every motif has a link on `(j, k)`, so
/// only linked partners `k` are visited.
fn census_from(g: &WeightedDigraph, j: usize) -> Partial {
    let n = g.n();
    let mut acc = Partial::zero();
    for k in 0..n {
        if k == j || (!g.has_link(j, k) && !g.has_link(k, j)) {
            continue;
        }
        let s_jk = state(g, j, k);
        let c_jk = components(g, j, k);
        for i in 0..n {
            if i == j || i == k {
                continue;
            }
            let (s_ij, s_ki) = (state(g, i, j), state(g, k, i));
            if let Some(m) = LOOKUP[s_ij * 16 + s_jk * 4 + s_ki] {
                acc.unweighted[m as usize] += 1;
            }
            let (c_ij, c_ki) = (components(g, i, j), components(g, k, i));
            for (m, f) in TABLE.iter().enumerate() {
                let prod = pick(&c_ij, f[0]) * pick(&c_jk, f[1]) * pick(&c_ki, f[2]);
                if prod > 0.0 {
                    acc.weighted[m] += if is_two_link(m) {
                        prod.sqrt()
                    } else {
                        prod.cbrt()
                    };
                }
            }
        }
    }
    acc
}

/// Full census, `O(n · L)` for `L` linked ordered pairs.
pub fn motif_census(g: &WeightedDigraph) -> MotifVector {
    if g.n() < 3 {
        return MotifVector::default();
    }
    let parts: Vec<Partial> = (0..g.n())
        .into_par_iter()
        .map(|j| census_from(g, j))
        .collect();
    let total = pairwise(&parts);
    MotifVector {
        unweighted: total.unweighted,
        weighted: total.weighted,
    }
}

/// Per-motif z-scores of the empirical census against an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotifZScores {
    pub unweighted: [ZScore; MOTIFS],
    pub weighted: [ZScore; MOTIFS],
}

pub fn motif_zscores(empirical: &MotifVector, ensemble: &[MotifVector]) -> Result<MotifZScores> {
    if ensemble.len() < 2 {
        return Err(Error::EmptySample);
    }
    let z = |values: Vec<f64>, x: f64| -> Result<ZScore> {
        Ok(StatDistribution::from_values("", values)?.z(x))
    };
    let mut out = MotifZScores {
        unweighted: [ZScore::Undefined; MOTIFS],
        weighted: [ZScore::Undefined; MOTIFS],
    };
    for m in 0..MOTIFS {
        out.unweighted[m] = z(
            ensemble.iter().map(|v| v.unweighted[m] as f64).collect(),
            empirical.unweighted[m] as f64,
        )?;
        out.weighted[m] = z(
            ensemble.iter().map(|v| v.weighted[m]).collect(),
            empirical.weighted[m],
        )?;
    }
    Ok(out)
}

/// 13 rows `motif_id,unweighted,weighted`.
pub fn write_motif_csv<W: Write>(out: W, v: &MotifVector) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["motif_id", "unweighted", "weighted"])?;
    for m in 0..MOTIFS {
        w.write_record([
            (m + 1).to_string(),
            v.unweighted[m].to_string(),
            v.weighted[m].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct transcription of the motif table over all ordered triples.
    fn naive(g: &WeightedDigraph) -> MotifVector {
        let n = g.n();
        let a = |i: usize, j: usize| g.weight(i, j) > 0;
        let flag = |i: usize, j: usize, f: F| match f {
            F::Out => a(i, j) && !a(j, i),
            F::In => !a(i, j) && a(j, i),
            F::Rec => a(i, j) && a(j, i),
            F::None => !a(i, j) && !a(j, i),
        };
        let comp = |i: usize, j: usize, f: F| {
            let (x, y) = (g.weight(i, j), g.weight(j, i));
            match f {
                F::Out => x.saturating_sub(y) as f64,
                F::In => y.saturating_sub(x) as f64,
                F::Rec => x.min(y) as f64,
                F::None => f64::from(u8::from(x == 0 && y == 0)),
            }
        };
        let mut v = MotifVector::default();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || k == i {
                        continue;
                    }
                    for (m, f) in TABLE.iter().enumerate() {
                        if flag(i, j, f[0]) && flag(j, k, f[1]) && flag(k, i, f[2]) {
                            v.unweighted[m] += 1;
                        }
                        let prod = comp(i, j, f[0]) * comp(j, k, f[1]) * comp(k, i, f[2]);
                        let root = if f.contains(&F::None) { 2.0 } else { 3.0 };
                        v.weighted[m] += prod.powf(1.0 / root);
                    }
                }
            }
        }
        v
    }

    fn arb_graph(max_n: usize, max_w: u64) -> impl Strategy<Value = WeightedDigraph> {
        (0usize..=max_n).prop_flat_map(move |n| {
            let n = n.max(1);
            proptest::collection::vec(0..=max_w, n * n).prop_map(move |mut w| {
                for i in 0..n {
                    w[i * n + i] = 0;
                }
                WeightedDigraph::from_raw(n, w)
            })
        })
    }

    #[test]
    fn three_cycle() {
        let g = WeightedDigraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (2, 0, 1)]).unwrap();
        let v = motif_census(&g);
        let mut expected = [0u64; MOTIFS];
        expected[8] = 3;
        assert_eq!(v.unweighted, expected);

        let g = WeightedDigraph::from_edges(3, [(0, 1, 8), (1, 2, 8), (2, 0, 8)]).unwrap();
        let v = motif_census(&g);
        assert!((v.weighted[8] - 24.0).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_is_all_motif_13() {
        let n = 5;
        let mut g = WeightedDigraph::empty(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    g.set_weight(i, j, 1).unwrap();
                }
            }
        }
        let v = motif_census(&g);
        for m in 0..12 {
            assert_eq!(v.unweighted[m], 0);
        }
        assert_eq!(v.unweighted[12], (n * (n - 1) * (n - 2)) as u64);
    }

    #[test]
    fn small_graphs_have_no_motifs() {
        let g = WeightedDigraph::from_edges(2, [(0, 1, 3), (1, 0, 1)]).unwrap();
        assert_eq!(motif_census(&g), MotifVector::default());
    }

    #[test]
    fn hand_built_zscore() {
        let ens: Vec<MotifVector> = [1u64, 2, 3]
            .iter()
            .map(|&c| {
                let mut v = MotifVector::default();
                v.unweighted[8] = c;
                v
            })
            .collect();
        let mut emp = MotifVector::default();
        emp.unweighted[8] = 4;
        let z = motif_zscores(&emp, &ens).unwrap();
        assert_eq!(z.unweighted[8], ZScore::Finite(2.0));
        assert_eq!(z.unweighted[0], ZScore::Undefined);
    }

    #[test]
    fn csv_has_thirteen_rows() {
        let mut buf = Vec::new();
        write_motif_csv(&mut buf, &MotifVector::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 14);
        assert!(text.ends_with("13,0,0\n"));
    }

    proptest! {
        #[test]
        fn census_matches_naive(g in arb_graph(9, 4)) {
            let fast = motif_census(&g);
            let slow = naive(&g);
            prop_assert_eq!(fast.unweighted, slow.unweighted);
            for m in 0..MOTIFS {
                prop_assert!((fast.weighted[m] - slow.weighted[m]).abs() <= 1e-9 * slow.weighted[m].max(1.0));
            }
        }

        #[test]
        fn binary_graphs_have_equal_variants(g in arb_graph(9, 1)) {
            let v = motif_census(&g);
            for m in 0..MOTIFS {
                prop_assert_eq!(v.weighted[m], v.unweighted[m] as f64);
            }
        }

        #[test]
        fn relabelling_preserves_census(g in arb_graph(8, 3), seed in any::<u64>()) {
            let n = g.n();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let a = motif_census(&g);
            let b = motif_census(&g.permuted(&perm).unwrap());
            prop_assert_eq!(a.unweighted, b.unweighted);
            for m in 0..MOTIFS {
                prop_assert!((a.weighted[m] - b.weighted[m]).abs() <= 1e-9 * a.weighted[m].max(1.0));
            }
        }

        #[test]
        fn triples_hit_at_most_one_motif(g in arb_graph(7, 3)) {
            let n = g.n();
            for i in 0..n { for j in 0..n { for k in 0..n {
                if i == j || j == k || k == i { continue; }
                let hits = TABLE.iter().filter(|f| {
                    state(&g, i, j) == state_of(f[0]) && state(&g, j, k) == state_of(f[1]) && state(&g, k, i) == state_of(f[2])
                }).count();
                prop_assert!(hits <= 1);
            }}}
        }
    }
}
