//! Exact dyad-wise sampling from fitted ensembles.
//!
//! Each reciprocal dyad is drawn in two steps: a categorical draw over the six
//! topological cases, then independent shifted geometric weights for the
//! components that the case switches on. RWCM uses the same scheme with every
//! degree multiplier equal to one. DECM draws each directed edge on its own.
//!
//! Sample `s` of a run with seed `seed` uses a ChaCha8 stream keyed by
//! `(seed, s)` and visits dyads in a fixed order, so the output does not
//! depend on how samples are spread across threads.

mod stats;

pub use stats::{
    ensemble_statistics, percentile, write_values_csv, z_score, StatDistribution, Welford, ZScore,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::dyad::{checked_directed_edge, checked_reciprocal_pair};
use crate::ensembles::{ModelKind, ParamSet};
use crate::error::{Error, Result};
use crate::graph::{WeightedDigraph, MAX_WEIGHT};

/// Shifted geometric variable on `{1, 2, ...}` with `P(k) = (1 - q) q^(k-1)`,
/// drawn by inverse transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedGeometric {
    /// `1 / ln q`, or zero when `q == 0` (the variable is always 1).
    inv_ln_q: f64,
}

impl ShiftedGeometric {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidParams(format!(
                "geometric ratio {q} outside [0, 1)"
            )));
        }
        Ok(Self {
            inv_ln_q: if q == 0.0 { 0.0 } else { 1.0 / q.ln() },
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        if self.inv_ln_q == 0.0 {
            return Ok(1);
        }
        // u in (0, 1], so ln u is finite; P(K > k) = P(u < q^k) = q^k.
        let u = 1.0 - rng.random::<f64>();
        let k = (u.ln() * self.inv_ln_q).ceil();
        if k >= MAX_WEIGHT as f64 {
            return Err(Error::WeightOverflow);
        }
        Ok((k as u64).max(1))
    }
}

#[derive(Debug, Clone)]
enum DyadLaw {
    Reciprocal {
        /// Cumulative probabilities of the first five cases.
        cumulative: [f64; 5],
        x: ShiftedGeometric,
        y: ShiftedGeometric,
        r: ShiftedGeometric,
    },
    Directed {
        p_ij: f64,
        x_ij: ShiftedGeometric,
        p_ji: f64,
        x_ji: ShiftedGeometric,
    },
}

impl DyadLaw {
    fn new(p: &ParamSet, i: usize, j: usize) -> Result<Self> {
        Ok(match p.model {
            ModelKind::Decm => {
                let (a, b) = (
                    checked_directed_edge(p, i, j)?,
                    checked_directed_edge(p, j, i)?,
                );
                DyadLaw::Directed {
                    p_ij: a.link_probability(),
                    x_ij: ShiftedGeometric::new(a.x)?,
                    p_ji: b.link_probability(),
                    x_ji: ShiftedGeometric::new(b.x)?,
                }
            }
            ModelKind::Rwcm | ModelKind::Recm => {
                let q = checked_reciprocal_pair(p, i, j)?;
                let c = q.cases().as_array();
                let mut cumulative = [0.0; 5];
                let mut acc = 0.0;
                for (slot, pc) in cumulative.iter_mut().zip(c) {
                    acc += pc;
                    *slot = acc;
                }
                DyadLaw::Reciprocal {
                    cumulative,
                    x: ShiftedGeometric::new(q.x)?,
                    y: ShiftedGeometric::new(q.y)?,
                    r: ShiftedGeometric::new(q.r)?,
                }
            }
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u64, u64)> {
        match self {
            DyadLaw::Directed {
                p_ij,
                x_ij,
                p_ji,
                x_ji,
            } => {
                let mut edge = |p: f64, x: &ShiftedGeometric| -> Result<u64> {
                    if rng.random::<f64>() < p {
                        x.sample(rng)
                    } else {
                        Ok(0)
                    }
                };
                let w_ij = edge(*p_ij, x_ij)?;
                let w_ji = edge(*p_ji, x_ji)?;
                Ok((w_ij, w_ji))
            }
            DyadLaw::Reciprocal {
                cumulative,
                x,
                y,
                r,
            } => {
                let u = rng.random::<f64>();
                let case = cumulative.iter().position(|&c| u < c).unwrap_or(5);
                let (out, inn, rec) = match case {
                    0 => (0, 0, 0),
                    1 => (x.sample(rng)?, 0, 0),
                    2 => (0, y.sample(rng)?, 0),
                    3 => (0, 0, r.sample(rng)?),
                    4 => {
                        let rec = r.sample(rng)?;
                        (x.sample(rng)?, 0, rec)
                    }
                    _ => {
                        let rec = r.sample(rng)?;
                        (0, y.sample(rng)?, rec)
                    }
                };
                let total = |a: u64| {
                    a.checked_add(rec)
                        .filter(|&w| w <= MAX_WEIGHT)
                        .ok_or(Error::WeightOverflow)
                };
                Ok((total(out)?, total(inn)?))
            }
        }
    }
}

/// Draws one dyad `(w_ij, w_ji)` from the ensemble law.
pub fn sample_dyad<R: Rng + ?Sized>(
    p: &ParamSet,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<(u64, u64)> {
    DyadLaw::new(p, i, j)?.sample(rng)
}

/// Precomputed dyad laws of one parameter set, for repeated sampling.
#[derive(Debug, Clone)]
pub struct GraphSampler {
    model: ModelKind,
    n: usize,
    /// Laws of the dyads `i < j`, in row-major order.
    laws: Vec<DyadLaw>,
}

impl GraphSampler {
    pub fn new(p: &ParamSet) -> Result<Self> {
        p.validate()?;
        let n = p.n;
        let mut laws = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                laws.push(DyadLaw::new(p, i, j)?);
            }
        }
        Ok(Self {
            model: p.model,
            n,
            laws,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WeightedDigraph> {
        let n = self.n;
        let mut weights = vec![0u64; n * n];
        let mut laws = self.laws.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let law = laws.next().expect("one law per dyad");
                let (w_ij, w_ji) = law.sample(rng)?;
                weights[i * n + j] = w_ij;
                weights[j * n + i] = w_ji;
            }
        }
        Ok(WeightedDigraph::from_raw(n, weights))
    }

    /// Sample number `index` of the stream keyed by `seed`.
    pub fn sample_indexed(&self, seed: u64, index: u64) -> Result<WeightedDigraph> {
        self.sample(&mut sample_rng(seed, index))
    }

    /// Applies `f` to samples `0..count` in parallel and returns the results
    /// in index order. Graphs are dropped as soon as `f` returns.
    pub fn map<T, F>(&self, seed: u64, count: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &WeightedDigraph) -> T + Sync,
    {
        (0..count)
            .into_par_iter()
            .map(|s| self.sample_indexed(seed, s as u64).map(|g| f(s, &g)))
            .collect()
    }
}

/// Generator for sample `index` of the run keyed by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_graph<R: Rng + ?Sized>(p: &ParamSet, rng: &mut R) -> Result<WeightedDigraph> {
    GraphSampler::new(p)?.sample(rng)
}

/// A materialised ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub model: ModelKind,
    pub seed: u64,
    pub count: usize,
    pub graphs: Vec<WeightedDigraph>,
}

pub fn sample_ensemble(p: &ParamSet, seed: u64, count: usize) -> Result<EnsembleSample> {
    let sampler = GraphSampler::new(p)?;
    let graphs = (0..count)
        .into_par_iter()
        .map(|s| sampler.sample_indexed(seed, s as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSample {
        model: p.model,
        seed,
        count,
        graphs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::dyad::dyad_probability;
    use crate::ensembles::recm_case_probabilities;

    #[test]
    fn geometric_mean_matches() {
        for q in [0.0, 0.3, 0.9] {
            let g = ShiftedGeometric::new(q).unwrap();
            let mut rng = sample_rng(1, 0);
            let draws = 200_000;
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..draws {
                let k = g.sample(&mut rng).unwrap() as f64;
                assert!(k >= 1.0);
                sum += k;
                sq += k * k;
            }
            let mean = sum / draws as f64;
            let var = sq / draws as f64 - mean * mean;
            let expected = 1.0 / (1.0 - q);
            let se = (var / draws as f64).sqrt().max(1e-12);
            assert!(
                (mean - expected).abs() <= 4.0 * se,
                "q={q}: {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn dead_links_give_empty_dyads() {
        let p = ParamSet::homogeneous(ModelKind::Recm, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let mut rng = sample_rng(3, 0);
        // With every weight ratio at zero only the empty case has mass.
        for _ in 0..1000 {
            assert_eq!(sample_dyad(&p, 0, 1, &mut rng).unwrap(), (0, 0));
        }
    }

    #[test]
    fn case_frequencies_match() {
        let p = ParamSet::uniform(ModelKind::Recm, 2, 0.5).unwrap();
        let c = recm_case_probabilities(&p, 0, 1).unwrap().as_array();
        let draws = 200_000;
        let mut counts = [0usize; 6];
        let mut rng = sample_rng(5, 0);
        for _ in 0..draws {
            let (a, b) = sample_dyad(&p, 0, 1, &mut rng).unwrap();
            let case = match (a > 0, b > 0) {
                (false, false) => 0,
                (true, false) => 1,
                (false, true) => 2,
                _ if a == b => 3,
                _ if a > b => 4,
                _ => 5,
            };
            counts[case] += 1;
        }
        for k in 0..6 {
            let f = counts[k] as f64 / draws as f64;
            let sigma = (c[k] * (1.0 - c[k]) / draws as f64).sqrt();
            assert!((f - c[k]).abs() <= 4.0 * sigma, "case {k}: {f} vs {}", c[k]);
        }
    }

    #[test]
    fn small_support_total_variation() {
        for model in ModelKind::ALL {
            let per_family: Vec<f64> = (0..model.families())
                .map(|f| if model.is_weight_family(f) { 0.55 } else { 0.9 })
                .collect();
            let p = ParamSet::homogeneous(model, 2, &per_family).unwrap();
            let draws = 100_000;
            let cap = 6u64;
            let mut hist = vec![0usize; ((cap + 1) * (cap + 1)) as usize];
            let mut rng = sample_rng(9, model as u64);
            for _ in 0..draws {
                let (a, b) = sample_dyad(&p, 0, 1, &mut rng).unwrap();
                if a <= cap && b <= cap {
                    hist[(a * (cap + 1) + b) as usize] += 1;
                }
            }
            let mut tv = 0.0;
            let mut inside = 0.0;
            for a in 0..=cap {
                for b in 0..=cap {
                    let pr = dyad_probability(&p, 0, 1, a, b).unwrap();
                    inside += pr;
                    tv += (hist[(a * (cap + 1) + b) as usize] as f64 / draws as f64 - pr).abs();
                }
            }
            let outside_emp = 1.0 - hist.iter().sum::<usize>() as f64 / draws as f64;
            tv = 0.5 * (tv + (outside_emp - (1.0 - inside)).abs());
            assert!(tv < 0.01, "{model}: {tv}");
        }
    }

    #[test]
    fn same_seed_same_graphs() {
        let p = ParamSet::uniform(ModelKind::Decm, 6, 0.6).unwrap();
        let a = sample_ensemble(&p, 42, 8).unwrap();
        let b = sample_ensemble(&p, 42, 8).unwrap();
        assert_eq!(a.graphs, b.graphs);
        let c = sample_ensemble(&p, 43, 8).unwrap();
        assert_ne!(a.graphs, c.graphs);
        let s = GraphSampler::new(&p).unwrap();
        assert_eq!(s.sample_indexed(42, 5).unwrap(), a.graphs[5]);
    }

    #[test]
    fn single_node_graph_is_empty() {
        let p = ParamSet::uniform(ModelKind::Rwcm, 1, 0.5).unwrap();
        let g = sample_graph(&p, &mut sample_rng(0, 0)).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.link_count(), 0);
    }
}
