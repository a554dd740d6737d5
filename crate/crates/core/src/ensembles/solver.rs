//! Maximum-likelihood fitting of the multipliers to node constraints.
//!
//! The objective `F(θ) = Σ ln Z_ij(θ) − θ · t` is convex in the log-multipliers
//! `θ = ln k, ln l`. Its gradient is `E[T] − t` and its Hessian is the
//! covariance of the sufficient statistics, which factorises over dyads.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dyad::{
    directed_edge, directed_moments, first_violation, reciprocal_moments, reciprocal_pair,
};
use super::expectation::{expected_unchecked, log_partition_unchecked};
use super::model::{ModelKind, NodeConstraintSet, ParamSet};
use crate::error::{Error, Result};

/// Role of node `j` in a dyad statistic seen from node `i`.
const SWAP: [usize; 6] = [1, 0, 2, 4, 3, 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Sup-norm tolerance on `target − expectation`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: ParamSet,
    pub residual_sup_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `target − expectation`, per node and family.
    pub residuals: NodeConstraintSet,
    pub newton_steps: usize,
    pub fixed_point_steps: usize,
    /// Multipliers held at zero because their constraints are zero.
    pub pinned: usize,
}

/// Rejects targets that no graph (and no limit of the ensemble) can match.
pub fn check_feasibility(t: &NodeConstraintSet) -> Result<()> {
    let n = t.n;
    if n == 0 || t.values.len() != t.model.families() * n {
        return Err(Error::Infeasible(
            "constraint vector has the wrong shape".into(),
        ));
    }
    for (idx, v) in t.values.iter().enumerate() {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Infeasible(format!(
                "{} of node {} is {v}",
                t.model.constraint_names()[idx / n],
                idx % n
            )));
        }
    }
    let bad = |i: usize, what: &str| Err(Error::Infeasible(format!("node {i}: {what}")));
    let partners = (n - 1) as f64;
    for i in 0..n {
        let v = |f: usize| t.get(f, i);
        match t.model {
            ModelKind::Decm => {
                for (d, s, side) in [(v(0), v(2), "out"), (v(1), v(3), "in")] {
                    if s < d {
                        return bad(i, &format!("{side}-strength below {side}-degree"));
                    }
                    if d == 0.0 && s > 0.0 {
                        return bad(i, &format!("{side}-strength without {side}-links"));
                    }
                    if d > partners {
                        return bad(i, &format!("{side}-degree above n - 1"));
                    }
                }
            }
            ModelKind::Rwcm => {}
            ModelKind::Recm => {
                let (d_out, d_in, d_rec) = (v(0), v(1), v(2));
                let (s_out, s_in, s_rec) = (v(3), v(4), v(5));
                if s_out < d_out || s_in < d_in || s_rec < d_rec {
                    return bad(i, "a strength is below its degree");
                }
                if d_rec == 0.0 && s_rec > 0.0 {
                    return bad(i, "reciprocated strength without reciprocated links");
                }
                if d_out == 0.0 && d_rec == 0.0 && s_out > 0.0 {
                    return bad(i, "non-reciprocated out-strength without any out-link");
                }
                if d_in == 0.0 && d_rec == 0.0 && s_in > 0.0 {
                    return bad(i, "non-reciprocated in-strength without any in-link");
                }
                if d_out + d_in + d_rec > partners {
                    return bad(i, "more linked partners than n - 1");
                }
            }
        }
    }
    let balance: &[(usize, usize)] = match t.model {
        ModelKind::Decm => &[(0, 1), (2, 3)],
        ModelKind::Rwcm => &[(0, 1)],
        ModelKind::Recm => &[(0, 1), (3, 4)],
    };
    for &(a, b) in balance {
        let (sa, sb): (f64, f64) = (t.family(a).iter().sum(), t.family(b).iter().sum());
        if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
            let names = t.model.constraint_names();
            return Err(Error::Infeasible(format!(
                "sum of {} ({sa}) differs from sum of {} ({sb})",
                names[a], names[b]
            )));
        }
    }
    Ok(())
}

/// Multipliers whose value is forced to zero by zero targets.
fn pinned_mask(t: &NodeConstraintSet) -> Vec<bool> {
    let n = t.n;
    let mut pin = vec![false; t.values.len()];
    for i in 0..n {
        let zero = |f: usize| t.get(f, i) == 0.0;
        let pinned_families: Vec<usize> = match t.model {
            ModelKind::Decm => {
                let mut v = Vec::new();
                if zero(0) {
                    v.extend([0, 2]);
                }
                if zero(1) {
                    v.extend([1, 3]);
                }
                v
            }
            ModelKind::Rwcm => (0..3).filter(|&f| zero(f)).collect(),
            ModelKind::Recm => (0..6).filter(|&f| zero(f)).collect(),
        };
        for f in pinned_families {
            pin[f * n + i] = true;
        }
    }
    pin
}

fn products_ok(p: &ParamSet) -> bool {
    p.values.iter().all(|v| v.is_finite()) && first_violation(p).is_none()
}

/// Covariance of the node statistics, in the family-major layout.
pub(crate) fn statistics_covariance(p: &ParamSet) -> DMatrix<f64> {
    let n = p.n;
    let dim = p.model.families() * n;
    let mut h = DMatrix::zeros(dim, dim);
    match p.model {
        ModelKind::Decm => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let (_, c) = directed_moments(&directed_edge(p, i, j));
                    let slots = [(i, 0), (2 * n + i, 1), (n + j, 0), (3 * n + j, 1)];
                    for &(a, sa) in &slots {
                        for &(b, sb) in &slots {
                            h[(a, b)] += c[sa][sb];
                        }
                    }
                }
            }
        }
        ModelKind::Rwcm | ModelKind::Recm => {
            let (families, offset) = if p.model == ModelKind::Rwcm {
                (3, 3)
            } else {
                (6, 0)
            };
            let mut slots = Vec::with_capacity(2 * families);
            for i in 0..n {
                for j in (i + 1)..n {
                    let (_, c) = reciprocal_moments(&reciprocal_pair(p, i, j));
                    slots.clear();
                    for f in 0..families {
                        slots.push((f * n + i, f + offset));
                        slots.push((f * n + j, SWAP[f + offset]));
                    }
                    for &(a, sa) in &slots {
                        for &(b, sb) in &slots {
                            h[(a, b)] += c[sa][sb];
                        }
                    }
                }
            }
        }
    }
    h
}

struct Problem<'a> {
    targets: &'a NodeConstraintSet,
    free: Vec<usize>,
    base: ParamSet,
}

impl Problem<'_> {
    fn params(&self, theta: &DVector<f64>) -> ParamSet {
        let mut p = self.base.clone();
        for (k, &idx) in self.free.iter().enumerate() {
            p.values[idx] = theta[k].exp();
        }
        p
    }

    fn objective(&self, p: &ParamSet, theta: &DVector<f64>) -> f64 {
        let linear: f64 = self
            .free
            .iter()
            .enumerate()
            .map(|(k, &idx)| theta[k] * self.targets.values[idx])
            .sum();
        log_partition_unchecked(p) - linear
    }

    /// Expectation, free-coordinate gradient `E − t`, and sup-norm residual.
    fn evaluate(&self, p: &ParamSet) -> (NodeConstraintSet, DVector<f64>, f64) {
        let e = expected_unchecked(p);
        let grad = DVector::from_iterator(
            self.free.len(),
            self.free
                .iter()
                .map(|&idx| e.values[idx] - self.targets.values[idx]),
        );
        let sup = e.sup_distance(self.targets);
        (e, grad, sup)
    }
}

/// Solves the first-order conditions for `targets` by damped Newton in
/// log-multiplier space, falling back to scaled fixed-point steps.
pub fn fit(targets: &NodeConstraintSet, options: &FitOptions) -> Result<FitReport> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    check_feasibility(targets)?;
    let init = if targets.n > 2 {
        homogeneous_start(targets)
    } else {
        default_start(targets)
    };
    solve(targets, init, options)
}

fn default_start(t: &NodeConstraintSet) -> ParamSet {
    let model = t.model;
    let values = (0..model.families() * t.n)
        .map(|idx| {
            if model.is_weight_family(idx / t.n) {
                0.5
            } else {
                1.0
            }
        })
        .collect();
    ParamSet {
        model,
        n: t.n,
        values,
    }
}

/// One shared multiplier per family, matching the node-averaged targets, then
/// broadcast to every node.
fn homogeneous_start(t: &NodeConstraintSet) -> ParamSet {
    let (model, n, families) = (t.model, t.n, t.model.families());
    let scale = 1.0 / (n - 1) as f64;
    let mut values = Vec::with_capacity(2 * families);
    for f in 0..families {
        let mean = t.family(f).iter().sum::<f64>() / n as f64;
        values.extend([mean * scale; 2]);
    }
    let pair = NodeConstraintSet {
        model,
        n: 2,
        values,
    };
    let small = FitOptions {
        tol: 1e-10,
        max_iter: 200,
    };
    let shared = match solve(&pair, default_start(&pair), &small) {
        Ok(r) => r.params,
        Err(_) => default_start(&pair),
    };
    let fallback = default_start(t);
    let values = (0..families * n)
        .map(|idx| {
            let v = shared.values[(idx / n) * 2];
            if v > 0.0 {
                v
            } else {
                fallback.values[idx]
            }
        })
        .collect();
    ParamSet { model, n, values }
}

fn solve(targets: &NodeConstraintSet, init: ParamSet, options: &FitOptions) -> Result<FitReport> {
    let pin = pinned_mask(targets);
    let mut base = init;
    for (v, &pinned) in base.values.iter_mut().zip(&pin) {
        if pinned {
            *v = 0.0;
        }
    }
    if !products_ok(&base) {
        base = default_start(targets);
        for (v, &pinned) in base.values.iter_mut().zip(&pin) {
            if pinned {
                *v = 0.0;
            }
        }
    }
    let free: Vec<usize> = (0..pin.len()).filter(|&k| !pin[k]).collect();
    let mut theta = DVector::from_iterator(free.len(), free.iter().map(|&k| base.values[k].ln()));
    let prob = Problem {
        targets,
        free,
        base,
    };

    let mut p = prob.params(&theta);
    let (mut e, mut grad, mut sup) = prob.evaluate(&p);
    let mut obj = prob.objective(&p, &theta);
    let mut best = (sup, p.clone(), e.clone());
    let mut mu = 1e-8;
    let (mut newton_steps, mut fixed_point_steps, mut iterations) = (0, 0, 0);

    while sup > options.tol && iterations < options.max_iter && !prob.free.is_empty() {
        iterations += 1;
        let accepted = newton_step(&prob, &p, &theta, &grad, obj, &mut mu)
            .map(|t| (t, true))
            .or_else(|| fixed_point_step(&prob, &theta, &e).map(|t| (t, false)));
        let Some((next, newton)) = accepted else {
            break;
        };
        if newton {
            newton_steps += 1;
        } else {
            fixed_point_steps += 1;
        }
        theta = next;
        p = prob.params(&theta);
        (e, grad, sup) = prob.evaluate(&p);
        obj = prob.objective(&p, &theta);
        if sup < best.0 {
            best = (sup, p.clone(), e.clone());
        }
    }

    let (sup, params, e) = best;
    let mut residuals = targets.clone();
    for (r, v) in residuals.values.iter_mut().zip(&e.values) {
        *r -= v;
    }
    Ok(FitReport {
        params,
        residual_sup_norm: sup,
        iterations,
        converged: sup <= options.tol,
        residuals,
        newton_steps,
        fixed_point_steps,
        pinned: pin.iter().filter(|&&b| b).count(),
    })
}

fn newton_step(
    prob: &Problem,
    p: &ParamSet,
    theta: &DVector<f64>,
    grad: &DVector<f64>,
    obj: f64,
    mu: &mut f64,
) -> Option<DVector<f64>> {
    let full = statistics_covariance(p);
    let m = prob.free.len();
    let h = DMatrix::from_fn(m, m, |a, b| full[(prob.free[a], prob.free[b])]);
    let max_diag = (0..m).map(|k| h[(k, k)]).fold(0.0, f64::max).max(1e-300);
    let grad_norm = grad.norm();

    for _ in 0..12 {
        let mut damped = h.clone();
        for k in 0..m {
            damped[(k, k)] += *mu * h[(k, k)] + 1e-14 * max_diag;
        }
        let Some(chol) = damped.cholesky() else {
            *mu *= 100.0;
            continue;
        };
        let mut delta = -chol.solve(grad);
        let largest = delta.amax();
        if largest > 5.0 {
            delta *= 5.0 / largest;
        }
        let slope = grad.dot(&delta);
        let mut alpha = 1.0;
        for _ in 0..40 {
            let trial = theta + &delta * alpha;
            let q = prob.params(&trial);
            if products_ok(&q) {
                let f = prob.objective(&q, &trial);
                let armijo = f <= obj + 1e-4 * alpha * slope + 1e-13 * obj.abs().max(1.0);
                if armijo || prob.evaluate(&q).1.norm() < (1.0 - 1e-4 * alpha) * grad_norm {
                    *mu = (*mu * 0.1).max(1e-12);
                    return Some(trial);
                }
            }
            alpha *= 0.5;
        }
        *mu *= 100.0;
    }
    None
}

/// Multiplicative update `θ ← θ + ω ln(t / E)`, one coordinate at a time in
/// log space, with the step halved until the series stay convergent.
fn fixed_point_step(
    prob: &Problem,
    theta: &DVector<f64>,
    e: &NodeConstraintSet,
) -> Option<DVector<f64>> {
    let dir = DVector::from_iterator(
        prob.free.len(),
        prob.free.iter().map(|&idx| {
            let (t, ev) = (prob.targets.values[idx], e.values[idx]);
            if ev <= 0.0 {
                1.0
            } else {
                (t / ev).ln().clamp(-1.0, 1.0)
            }
        }),
    );
    let mut omega = 0.5;
    for _ in 0..40 {
        let trial = theta + &dir * omega;
        if products_ok(&prob.params(&trial)) {
            return Some(trial);
        }
        omega *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::expectation::expected_constraints;
    use crate::ensembles::model::constraints_from_graph;
    use crate::graph::WeightedDigraph;

    fn ring(n: usize, w: u64) -> WeightedDigraph {
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((i, (i + 1) % n, w));
            edges.push(((i + 1) % n, i, w + 1));
            edges.push((i, (i + 3) % n, 1));
        }
        WeightedDigraph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn saturated_reciprocity_converges() {
        // Node 0 must reciprocate with both 1 and 2, the only nodes that can.
        let g = WeightedDigraph::from_edges(
            6,
            [
                (0, 1, 5),
                (1, 0, 3),
                (0, 2, 2),
                (2, 0, 4),
                (1, 2, 1),
                (3, 0, 2),
                (4, 1, 1),
                (2, 5, 3),
                (5, 0, 1),
            ],
        )
        .unwrap();
        for model in ModelKind::ALL {
            let t = constraints_from_graph(&g, model);
            let r = fit(&t, &FitOptions::default()).unwrap();
            assert!(r.converged, "{model}: {}", r.residual_sup_norm);
        }
    }

    #[test]
    fn exchangeable_graph_gives_equal_multipliers() {
        let g = ring(8, 2);
        for model in ModelKind::ALL {
            let t = constraints_from_graph(&g, model);
            let r = fit(&t, &FitOptions::default()).unwrap();
            assert!(r.converged, "{model}: {}", r.residual_sup_norm);
            // The k_out/k_in gauge is fixed by the symmetric start, so values
            // stay equal across nodes.
            for f in 0..model.families() {
                let fam = r.params.family(f);
                let spread = fam.iter().fold(0.0f64, |m, v| m.max((v - fam[0]).abs()));
                assert!(
                    spread < 1e-3 * fam[0].max(1.0),
                    "{model} family {f}: {fam:?}"
                );
            }
        }
    }

    #[test]
    fn zero_targets_pin_everything() {
        let t = NodeConstraintSet::zeros(ModelKind::Recm, 4);
        let r = fit(&t, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.params.values.iter().all(|&v| v == 0.0));
        assert_eq!(r.pinned, 24);
        let e = expected_constraints(&r.params).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hessian_matches_finite_difference_of_expectations() {
        let p = ParamSet::new(
            ModelKind::Recm,
            3,
            vec![
                0.8, 1.3, 0.6, 1.1, 0.5, 0.9, 0.7, 1.6, 0.4, 0.3, 0.5, 0.4, 0.6, 0.2, 0.5, 0.3,
                0.6, 0.7,
            ],
        )
        .unwrap();
        let h = statistics_covariance(&p);
        let step: f64 = 1e-6;
        for col in 0..p.values.len() {
            let mut up = p.clone();
            let mut down = p.clone();
            up.values[col] *= step.exp();
            down.values[col] *= (-step).exp();
            let (eu, ed) = (expected_unchecked(&up), expected_unchecked(&down));
            for row in 0..p.values.len() {
                let fd = (eu.values[row] - ed.values[row]) / (2.0 * step);
                assert!((fd - h[(row, col)]).abs() < 1e-6, "({row}, {col})");
            }
        }
    }

    #[test]
    fn infeasible_targets_are_diagnosed() {
        let mut t = NodeConstraintSet::zeros(ModelKind::Decm, 3);
        t.values[2 * 3] = 4.0; // s_out of node 0 with no out-link
        t.values[3 * 3 + 1] = 4.0;
        assert!(matches!(
            fit(&t, &FitOptions::default()),
            Err(Error::Infeasible(_))
        ));

        let mut t = NodeConstraintSet::zeros(ModelKind::Rwcm, 3);
        t.values[0] = 2.0;
        assert!(matches!(
            fit(&t, &FitOptions::default()),
            Err(Error::Infeasible(_))
        ));

        // Surplus on a reciprocated dyad is reachable without one-way links.
        let g = WeightedDigraph::from_edges(2, [(0, 1, 5), (1, 0, 3)]).unwrap();
        assert!(check_feasibility(&constraints_from_graph(&g, ModelKind::Recm)).is_ok());
    }

    #[test]
    fn fit_is_deterministic() {
        let g = WeightedDigraph::from_edges(
            5,
            [
                (0, 1, 3),
                (1, 0, 1),
                (1, 2, 2),
                (2, 3, 7),
                (3, 4, 1),
                (4, 0, 2),
                (2, 0, 1),
            ],
        )
        .unwrap();
        let t = constraints_from_graph(&g, ModelKind::Recm);
        let a = fit(&t, &FitOptions::default()).unwrap();
        let b = fit(&t, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_convergence_returns_best_iterate() {
        let mut g = ring(7, 3);
        g.set_weight(0, 4, 9).unwrap();
        g.set_weight(5, 2, 2).unwrap();
        let t = constraints_from_graph(&g, ModelKind::Decm);
        let r = fit(
            &t,
            &FitOptions {
                tol: 1e-12,
                max_iter: 1,
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.residual_sup_norm.is_finite());
    }
}
