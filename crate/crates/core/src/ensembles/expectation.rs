//! Ensemble expectations of the constrained node statistics, and the
//! log-likelihood they are the gradient of.

use super::dyad::{
    directed_edge, directed_log_probability, reciprocal_log_probability, reciprocal_pair,
    rwcm_log_probability,
};
use super::model::{constraints_from_graph, ModelKind, NodeConstraintSet, ParamSet};
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

/// Right-hand sides of the first-order conditions: the expected value of every
/// constrained node statistic under `p`. `O(n^2)`.
pub fn expected_constraints(p: &ParamSet) -> Result<NodeConstraintSet> {
    p.validate()?;
    Ok(expected_unchecked(p))
}

pub(crate) fn expected_unchecked(p: &ParamSet) -> NodeConstraintSet {
    let n = p.n;
    let mut out = NodeConstraintSet::zeros(p.model, n);
    match p.model {
        ModelKind::Decm => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let e = directed_edge(p, i, j);
                    let kx = e.k * e.x;
                    let den = 1.0 - e.x + kx;
                    let link = kx / den;
                    let weight = kx / ((1.0 - e.x) * den);
                    out.add(0, i, link);
                    out.add(1, j, link);
                    out.add(2, i, weight);
                    out.add(3, j, weight);
                }
            }
        }
        ModelKind::Rwcm => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let q = reciprocal_pair(p, i, j);
                    let (x, y, r) = (q.x, q.y, q.r);
                    let xy = 1.0 - x * y;
                    let w_out = x * (1.0 - y) / ((1.0 - x) * xy);
                    let w_in = y * (1.0 - x) / ((1.0 - y) * xy);
                    let w_rec = r / (1.0 - r);
                    out.add(0, i, w_out);
                    out.add(1, i, w_in);
                    out.add(2, i, w_rec);
                    out.add(0, j, w_in);
                    out.add(1, j, w_out);
                    out.add(2, j, w_rec);
                }
            }
        }
        ModelKind::Recm => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let q = reciprocal_pair(p, i, j);
                    let (x, y, r) = (q.x, q.y, q.r);
                    let norm = q.normalizer();
                    let d_out = q.k_out * (1.0 - r) * x * (1.0 - y) / norm;
                    let d_in = q.k_in * (1.0 - r) * y * (1.0 - x) / norm;
                    let d_rec = q.k_rec * r * (1.0 - x * y) / norm;
                    let s_out =
                        (q.k_out * (1.0 - r) + q.k_rec * r) * x * (1.0 - y) / ((1.0 - x) * norm);
                    let s_in =
                        (q.k_in * (1.0 - r) + q.k_rec * r) * y * (1.0 - x) / ((1.0 - y) * norm);
                    let s_rec = d_rec / (1.0 - r);
                    for (f, v) in [d_out, d_in, d_rec, s_out, s_in, s_rec]
                        .into_iter()
                        .enumerate()
                    {
                        out.add(f, i, v);
                    }
                    for (f, v) in [d_in, d_out, d_rec, s_in, s_out, s_rec]
                        .into_iter()
                        .enumerate()
                    {
                        out.add(f, j, v);
                    }
                }
            }
        }
    }
    out
}

/// `ln Z`, summed over dyads.
pub fn log_partition(p: &ParamSet) -> Result<f64> {
    p.validate()?;
    Ok(log_partition_unchecked(p))
}

pub(crate) fn log_partition_unchecked(p: &ParamSet) -> f64 {
    let n = p.n;
    let mut total = 0.0;
    match p.model {
        ModelKind::Decm => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        total += directed_edge(p, i, j).log_partition();
                    }
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in (i + 1)..n {
                    total += reciprocal_pair(p, i, j).log_partition();
                }
            }
        }
    }
    total
}

fn check_sizes(g: &WeightedDigraph, p: &ParamSet) -> Result<()> {
    if g.n() != p.n {
        return Err(Error::InvalidParams(format!(
            "parameters for {} nodes, graph has {}",
            p.n,
            g.n()
        )));
    }
    Ok(())
}

/// `ln P(G)` as the sum of dyad log-probabilities.
pub fn log_likelihood(g: &WeightedDigraph, p: &ParamSet) -> Result<f64> {
    check_sizes(g, p)?;
    p.validate()?;
    let n = p.n;
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (w_ij, w_ji) = (g.weight(i, j), g.weight(j, i));
            total += match p.model {
                ModelKind::Decm => {
                    directed_log_probability(&directed_edge(p, i, j), w_ij)
                        + directed_log_probability(&directed_edge(p, j, i), w_ji)
                }
                ModelKind::Rwcm => rwcm_log_probability(&reciprocal_pair(p, i, j), w_ij, w_ji),
                ModelKind::Recm => {
                    reciprocal_log_probability(&reciprocal_pair(p, i, j), w_ij, w_ji)
                }
            };
        }
    }
    Ok(total)
}

/// Gradient of `ln P(G)` with respect to the log-multipliers `ln k`, `ln l`:
/// observed statistics minus their expectation.
pub fn log_likelihood_gradient(g: &WeightedDigraph, p: &ParamSet) -> Result<NodeConstraintSet> {
    check_sizes(g, p)?;
    let mut grad = constraints_from_graph(g, p.model);
    let expected = expected_constraints(p)?;
    for (a, b) in grad.values.iter_mut().zip(&expected.values) {
        *a -= b;
    }
    Ok(grad)
}
