//! Closed-form dyad laws of the three ensembles.
//!
//! All three partition functions factorise over dyads. DECM further
//! factorises into two independent directed edges; RWCM and RECM treat the
//! unordered pair `{i, j}` as the atomic unit and describe it through the
//! min-decomposition `(w^→, w^←, w^↔)`.
//!
//! Every reciprocal dyad is a mixture of six topological cases. Given the
//! case, each present weight component is an independent shifted geometric
//! variable with ratio `x = l_i^→ l_j^←`, `y = l_i^← l_j^→` or
//! `r = l_i^↔ l_j^↔`. RWCM is the special case where every `k` product is 1.

use serde::{Deserialize, Serialize};

use super::model::{ModelKind, ParamSet, PRODUCT_LIMIT};
use crate::error::{Error, Result};
use crate::graph::dyad_decompose;

/// Multiplier products of a reciprocal dyad seen from node `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ReciprocalPair {
    pub k_out: f64,
    pub k_in: f64,
    pub k_rec: f64,
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

/// Multiplier products of the directed edge `i -> j` in DECM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DirectedEdge {
    pub k: f64,
    pub x: f64,
}

pub(crate) fn reciprocal_pair(p: &ParamSet, i: usize, j: usize) -> ReciprocalPair {
    match p.model {
        ModelKind::Rwcm => ReciprocalPair {
            k_out: 1.0,
            k_in: 1.0,
            k_rec: 1.0,
            x: p.get(0, i) * p.get(1, j),
            y: p.get(1, i) * p.get(0, j),
            r: p.get(2, i) * p.get(2, j),
        },
        ModelKind::Recm => {
            let k_out = p.get(0, i) * p.get(1, j);
            let k_in = p.get(1, i) * p.get(0, j);
            let k_rec = p.get(2, i) * p.get(2, j);
            // A weight ratio whose cases all carry a zero link factor drops out
            // of the law; zeroing it keeps the formulas finite.
            let live = |on: bool, v: f64| if on { v } else { 0.0 };
            ReciprocalPair {
                k_out,
                k_in,
                k_rec,
                x: live(k_out > 0.0 || k_rec > 0.0, p.get(3, i) * p.get(4, j)),
                y: live(k_in > 0.0 || k_rec > 0.0, p.get(4, i) * p.get(3, j)),
                r: live(k_rec > 0.0, p.get(5, i) * p.get(5, j)),
            }
        }
        ModelKind::Decm => unreachable!("DECM dyads are pairs of directed edges"),
    }
}

pub(crate) fn directed_edge(p: &ParamSet, i: usize, j: usize) -> DirectedEdge {
    debug_assert_eq!(p.model, ModelKind::Decm);
    let k = p.get(0, i) * p.get(1, j);
    DirectedEdge {
        k,
        x: if k > 0.0 {
            p.get(2, i) * p.get(3, j)
        } else {
            0.0
        },
    }
}

fn check_product(i: usize, j: usize, product: f64) -> Result<()> {
    if product >= PRODUCT_LIMIT || !product.is_finite() {
        Err(Error::ConvergenceViolation { i, j, product })
    } else {
        Ok(())
    }
}

fn check_indices(p: &ParamSet, i: usize, j: usize) -> Result<()> {
    for index in [i, j] {
        if index >= p.n {
            return Err(Error::NodeOutOfRange { index, n: p.n });
        }
    }
    if i == j {
        return Err(Error::SelfLoop(i));
    }
    Ok(())
}

/// First ordered pair whose effective weight ratio leaves the unit interval.
pub(crate) fn first_violation(p: &ParamSet) -> Option<(usize, usize, f64)> {
    let n = p.n;
    let over = |v: f64| v >= PRODUCT_LIMIT || !v.is_finite();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            match p.model {
                ModelKind::Decm => {
                    let x = directed_edge(p, i, j).x;
                    if over(x) {
                        return Some((i, j, x));
                    }
                }
                _ => {
                    let q = reciprocal_pair(p, i, j);
                    if over(q.x) {
                        return Some((i, j, q.x));
                    }
                    if over(q.r) {
                        return Some((i, j, q.r));
                    }
                }
            }
        }
    }
    None
}

pub(crate) fn checked_reciprocal_pair(p: &ParamSet, i: usize, j: usize) -> Result<ReciprocalPair> {
    check_indices(p, i, j)?;
    let q = reciprocal_pair(p, i, j);
    check_product(i, j, q.x)?;
    check_product(j, i, q.y)?;
    check_product(i, j, q.r)?;
    Ok(q)
}

pub(crate) fn checked_directed_edge(p: &ParamSet, i: usize, j: usize) -> Result<DirectedEdge> {
    check_indices(p, i, j)?;
    let e = directed_edge(p, i, j);
    check_product(i, j, e.x)?;
    Ok(e)
}

/// The six mutually exclusive outcomes of a reciprocal dyad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseProbabilities {
    /// No link.
    pub none: f64,
    /// Only `i -> j`.
    pub out: f64,
    /// Only `j -> i`.
    pub in_: f64,
    /// Both directions with equal weights.
    pub rec_exact: f64,
    /// Both directions, `w_ij > w_ji`.
    pub rec_out: f64,
    /// Both directions, `w_ij < w_ji`.
    pub rec_in: f64,
}

impl CaseProbabilities {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.none,
            self.out,
            self.in_,
            self.rec_exact,
            self.rec_out,
            self.rec_in,
        ]
    }

    /// Probability of a binary reciprocated link.
    pub fn reciprocated(&self) -> f64 {
        self.rec_exact + self.rec_out + self.rec_in
    }
}

impl ReciprocalPair {
    /// Normalising numerator `X_ij`, the dyad partition function times
    /// `(1 - x)(1 - y)(1 - r)`.
    pub fn normalizer(&self) -> f64 {
        let (x, y, r) = (self.x, self.y, self.r);
        // Written so that swapping i and j only permutes commutative operands.
        let one_way = self.k_out * x * (1.0 - y) + self.k_in * y * (1.0 - x);
        (1.0 - r) * ((1.0 - x) * (1.0 - y) + one_way) + self.k_rec * r * (1.0 - x * y)
    }

    pub fn cases(&self) -> CaseProbabilities {
        let (x, y, r) = (self.x, self.y, self.r);
        let norm = self.normalizer();
        let rec = self.k_rec * r;
        CaseProbabilities {
            none: (1.0 - r) * (1.0 - x) * (1.0 - y) / norm,
            out: self.k_out * (1.0 - r) * x * (1.0 - y) / norm,
            in_: self.k_in * (1.0 - r) * y * (1.0 - x) / norm,
            rec_exact: rec * (1.0 - x) * (1.0 - y) / norm,
            rec_out: rec * x * (1.0 - y) / norm,
            rec_in: rec * y * (1.0 - x) / norm,
        }
    }

    /// `ln Z_ij`.
    pub fn log_partition(&self) -> f64 {
        self.normalizer().ln() - (1.0 - self.x).ln() - (1.0 - self.y).ln() - (1.0 - self.r).ln()
    }
}

impl DirectedEdge {
    pub fn link_probability(&self) -> f64 {
        let kx = self.k * self.x;
        kx / (1.0 - self.x + kx)
    }

    pub fn log_partition(&self) -> f64 {
        (1.0 - self.x + self.k * self.x).ln() - (1.0 - self.x).ln()
    }
}

/// `w * ln(q)` with the convention `0 * ln(0) = 0`.
#[inline]
fn log_power(q: f64, w: u64) -> f64 {
    if w == 0 {
        0.0
    } else {
        w as f64 * q.ln()
    }
}

/// Log-pmf of the shifted geometric law `(1 - q) q^(k - 1)` on `k >= 1`.
#[inline]
fn log_shifted_geometric(q: f64, k: u64) -> f64 {
    (1.0 - q).ln() + log_power(q, k - 1)
}

pub fn recm_case_probabilities(p: &ParamSet, i: usize, j: usize) -> Result<CaseProbabilities> {
    if p.model != ModelKind::Recm {
        return Err(Error::ModelMismatch {
            expected: "recm".into(),
            found: p.model.to_string(),
        });
    }
    Ok(checked_reciprocal_pair(p, i, j)?.cases())
}

/// `X_ij` for RECM parameters; symmetric in `(i, j)`.
pub fn recm_normalizer(p: &ParamSet, i: usize, j: usize) -> Result<f64> {
    if p.model != ModelKind::Recm {
        return Err(Error::ModelMismatch {
            expected: "recm".into(),
            found: p.model.to_string(),
        });
    }
    Ok(checked_reciprocal_pair(p, i, j)?.normalizer())
}

/// Six-case log-probability of the dyad `(w_ij, w_ji)`.
pub(crate) fn reciprocal_log_probability(q: &ReciprocalPair, w_ij: u64, w_ji: u64) -> f64 {
    let d = dyad_decompose(w_ij, w_ji);
    let c = q.cases();
    match (d.w_out_nonrec > 0, d.w_in_nonrec > 0, d.w_rec > 0) {
        (false, false, false) => c.none.ln(),
        (true, false, false) => c.out.ln() + log_shifted_geometric(q.x, d.w_out_nonrec),
        (false, true, false) => c.in_.ln() + log_shifted_geometric(q.y, d.w_in_nonrec),
        (false, false, true) => c.rec_exact.ln() + log_shifted_geometric(q.r, d.w_rec),
        (true, false, true) => {
            c.rec_out.ln()
                + log_shifted_geometric(q.r, d.w_rec)
                + log_shifted_geometric(q.x, d.w_out_nonrec)
        }
        (false, true, true) => {
            c.rec_in.ln()
                + log_shifted_geometric(q.r, d.w_rec)
                + log_shifted_geometric(q.y, d.w_in_nonrec)
        }
        (true, true, _) => unreachable!("min-decomposition leaves one side empty"),
    }
}

/// RWCM dyad law in its product form
/// `x^{w→} y^{w←} r^{w↔} (1-x)(1-y)(1-r) / (1 - x y)`.
pub(crate) fn rwcm_log_probability(q: &ReciprocalPair, w_ij: u64, w_ji: u64) -> f64 {
    let d = dyad_decompose(w_ij, w_ji);
    log_power(q.x, d.w_out_nonrec)
        + log_power(q.y, d.w_in_nonrec)
        + log_power(q.r, d.w_rec)
        + (1.0 - q.x).ln()
        + (1.0 - q.y).ln()
        + (1.0 - q.r).ln()
        - (1.0 - q.x * q.y).ln()
}

/// DECM law of a single directed edge weight.
pub(crate) fn directed_log_probability(e: &DirectedEdge, w: u64) -> f64 {
    let base = (1.0 - e.x).ln() - (1.0 - e.x + e.k * e.x).ln();
    if w == 0 {
        base
    } else {
        base + e.k.ln() + log_power(e.x, w)
    }
}

pub fn log_dyad_probability(p: &ParamSet, i: usize, j: usize, w_ij: u64, w_ji: u64) -> Result<f64> {
    Ok(match p.model {
        ModelKind::Decm => {
            let (a, b) = (
                checked_directed_edge(p, i, j)?,
                checked_directed_edge(p, j, i)?,
            );
            directed_log_probability(&a, w_ij) + directed_log_probability(&b, w_ji)
        }
        ModelKind::Rwcm => rwcm_log_probability(&checked_reciprocal_pair(p, i, j)?, w_ij, w_ji),
        ModelKind::Recm => {
            reciprocal_log_probability(&checked_reciprocal_pair(p, i, j)?, w_ij, w_ji)
        }
    })
}

/// Probability that the dyad `{i, j}` carries weights `(w_ij, w_ji)`.
pub fn dyad_probability(p: &ParamSet, i: usize, j: usize, w_ij: u64, w_ji: u64) -> Result<f64> {
    log_dyad_probability(p, i, j, w_ij, w_ji).map(f64::exp)
}

/// Mean and variance of a shifted geometric variable with ratio `q`.
#[inline]
pub(crate) fn shifted_geometric_moments(q: f64) -> (f64, f64) {
    let m = 1.0 / (1.0 - q);
    (m, q * m * m)
}

/// Mean vector and covariance matrix of the reciprocal dyad statistics
/// `(a^→, a^←, a^↔, w^→, w^←, w^↔)`, by the law of total covariance over the
/// six cases.
pub(crate) fn reciprocal_moments(q: &ReciprocalPair) -> ([f64; 6], [[f64; 6]; 6]) {
    let c = q.cases().as_array();
    let (mx, vx) = shifted_geometric_moments(q.x);
    let (my, vy) = shifted_geometric_moments(q.y);
    let (mr, vr) = shifted_geometric_moments(q.r);
    // Conditional means and variances per case.
    let conditional: [([f64; 6], [f64; 6]); 6] = [
        ([0.0; 6], [0.0; 6]),
        ([1.0, 0.0, 0.0, mx, 0.0, 0.0], [0.0, 0.0, 0.0, vx, 0.0, 0.0]),
        ([0.0, 1.0, 0.0, 0.0, my, 0.0], [0.0, 0.0, 0.0, 0.0, vy, 0.0]),
        ([0.0, 0.0, 1.0, 0.0, 0.0, mr], [0.0, 0.0, 0.0, 0.0, 0.0, vr]),
        ([0.0, 0.0, 1.0, mx, 0.0, mr], [0.0, 0.0, 0.0, vx, 0.0, vr]),
        ([0.0, 0.0, 1.0, 0.0, my, mr], [0.0, 0.0, 0.0, 0.0, vy, vr]),
    ];
    let mut mean = [0.0; 6];
    for (pc, (mu, _)) in c.iter().zip(&conditional) {
        for a in 0..6 {
            mean[a] += pc * mu[a];
        }
    }
    let mut cov = [[0.0; 6]; 6];
    for (pc, (mu, var)) in c.iter().zip(&conditional) {
        if *pc == 0.0 {
            continue;
        }
        let dev: [f64; 6] = std::array::from_fn(|a| mu[a] - mean[a]);
        for a in 0..6 {
            cov[a][a] += pc * var[a];
            for b in 0..6 {
                cov[a][b] += pc * dev[a] * dev[b];
            }
        }
    }
    (mean, cov)
}

/// Mean and covariance of `(a_ij, w_ij)` for a DECM edge.
pub(crate) fn directed_moments(e: &DirectedEdge) -> ([f64; 2], [[f64; 2]; 2]) {
    let p = e.link_probability();
    let (m, v) = shifted_geometric_moments(e.x);
    let mean = [p, p * m];
    let q = 1.0 - p;
    let cov = [[p * q, p * q * m], [p * q * m, p * v + p * q * m * m]];
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn recm(values: [f64; 6], n: usize) -> ParamSet {
        ParamSet::homogeneous(ModelKind::Recm, n, &values).unwrap()
    }

    #[test]
    fn vanishing_weight_multipliers_kill_links() {
        let p = recm([1.0, 1.0, 1.0, 1e-9, 1e-9, 1e-9], 3);
        let c = recm_case_probabilities(&p, 0, 1).unwrap();
        assert!(c.none > 1.0 - 1e-8);
        assert!(c.out < 1e-8 && c.in_ < 1e-8 && c.reciprocated() < 1e-8);
    }

    #[test]
    fn symmetric_params_give_symmetric_cases() {
        let p = recm([0.7, 0.7, 0.4, 0.3, 0.3, 0.6], 2);
        let c = recm_case_probabilities(&p, 0, 1).unwrap();
        assert_relative_eq!(c.out, c.in_, max_relative = 1e-15);
        assert_relative_eq!(c.rec_out, c.rec_in, max_relative = 1e-15);
    }

    #[test]
    fn normalizer_is_symmetric() {
        let values = vec![
            0.3, 1.7, 0.9, 2.0, 0.2, 0.6, 1.1, 0.8, 0.4, 0.5, 0.7, 0.9, 0.3, 0.6, 0.2, 0.5, 0.8,
            0.1,
        ];
        let p = ParamSet::new(ModelKind::Recm, 3, values).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(
                recm_normalizer(&p, i, j).unwrap(),
                recm_normalizer(&p, j, i).unwrap()
            );
        }
    }

    #[test]
    fn empty_dyad_has_probability_of_no_link() {
        let p = recm([0.8, 1.2, 0.6, 0.5, 0.4, 0.7], 2);
        let c = recm_case_probabilities(&p, 0, 1).unwrap();
        assert_relative_eq!(
            dyad_probability(&p, 0, 1, 0, 0).unwrap(),
            c.none,
            max_relative = 1e-14
        );
    }

    #[test]
    fn one_way_dyad_matches_second_case() {
        let p = recm([0.8, 1.2, 0.6, 0.5, 0.4, 0.7], 2);
        let c = recm_case_probabilities(&p, 0, 1).unwrap();
        let x: f64 = 0.5 * 0.4;
        for w in 1..6u64 {
            let expected = c.out * x.powi(w as i32 - 1) * (1.0 - x);
            assert_relative_eq!(
                dyad_probability(&p, 0, 1, w, 0).unwrap(),
                expected,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn reverse_dyad_swaps_roles() {
        let values = vec![0.3, 1.7, 0.9, 2.0, 0.2, 0.6, 0.5, 0.3, 0.8, 0.1, 0.4, 0.9];
        let p = ParamSet::new(ModelKind::Recm, 2, values).unwrap();
        for (a, b) in [(0, 0), (3, 0), (2, 5), (4, 4), (7, 1)] {
            assert_relative_eq!(
                dyad_probability(&p, 0, 1, a, b).unwrap(),
                dyad_probability(&p, 1, 0, b, a).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn ratios_without_live_cases_are_inert() {
        // Node 0 never sends: no out or reciprocated links from it.
        let base = vec![0.0, 1.3, 0.0, 0.9, 0.7, 0.0, 0.2, 0.6, 0.5, 0.4, 0.3, 0.8];
        let p = ParamSet::new(ModelKind::Recm, 2, base.clone()).unwrap();
        let mut wild = base;
        wild[6] = 7.0; // l_out of node 0, so x_01 = 7 * 0.3 > 1
        let q = ParamSet::new(ModelKind::Recm, 2, wild).unwrap();
        for (a, b) in [(0, 0), (0, 3), (1, 0)] {
            assert_eq!(
                dyad_probability(&p, 0, 1, a, b).unwrap(),
                dyad_probability(&q, 0, 1, a, b).unwrap()
            );
        }
        assert_eq!(dyad_probability(&q, 0, 1, 2, 0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_divergent_and_wrong_model() {
        let mut p = recm([1.0, 1.0, 1.0, 0.5, 0.5, 0.5], 2);
        p.values[7] = 3.0; // l_out of node 1, so y = 0.5 * 3 > 1
        assert!(matches!(
            recm_case_probabilities(&p, 0, 1),
            Err(Error::ConvergenceViolation { .. })
        ));
        let d = ParamSet::uniform(ModelKind::Decm, 2, 0.5).unwrap();
        assert!(matches!(
            recm_case_probabilities(&d, 0, 1),
            Err(Error::ModelMismatch { .. })
        ));
        assert!(dyad_probability(&d, 0, 0, 1, 1).is_err());
    }

    #[test]
    fn moments_match_truncated_sums() {
        let q = ReciprocalPair {
            k_out: 1.3,
            k_in: 0.4,
            k_rec: 2.1,
            x: 0.35,
            y: 0.2,
            r: 0.45,
        };
        let (mean, cov) = reciprocal_moments(&q);
        let mut m = [0.0; 6];
        let mut s = [[0.0; 6]; 6];
        for a in 0..80u64 {
            for b in 0..80u64 {
                let pr = reciprocal_log_probability(&q, a, b).exp();
                let d = dyad_decompose(a, b);
                let v = [
                    f64::from(u8::from(d.a_out_nonrec)),
                    f64::from(u8::from(d.a_in_nonrec)),
                    f64::from(u8::from(d.a_rec)),
                    d.w_out_nonrec as f64,
                    d.w_in_nonrec as f64,
                    d.w_rec as f64,
                ];
                for x in 0..6 {
                    m[x] += pr * v[x];
                    for y in 0..6 {
                        s[x][y] += pr * v[x] * v[y];
                    }
                }
            }
        }
        for x in 0..6 {
            assert_relative_eq!(mean[x], m[x], epsilon = 1e-12);
            for y in 0..6 {
                assert_relative_eq!(cov[x][y], s[x][y] - m[x] * m[y], epsilon = 1e-11);
            }
        }

        let e = DirectedEdge { k: 0.7, x: 0.6 };
        let (mean, cov) = directed_moments(&e);
        let (mut m0, mut m1, mut s01, mut s11) = (0.0, 0.0, 0.0, 0.0);
        for w in 0..200u64 {
            let pr = directed_log_probability(&e, w).exp();
            let a = f64::from(u8::from(w > 0));
            m0 += pr * a;
            m1 += pr * w as f64;
            s01 += pr * a * w as f64;
            s11 += pr * (w * w) as f64;
        }
        assert_relative_eq!(mean[0], m0, epsilon = 1e-12);
        assert_relative_eq!(mean[1], m1, epsilon = 1e-12);
        assert_relative_eq!(cov[0][1], s01 - m0 * m1, epsilon = 1e-11);
        assert_relative_eq!(cov[1][1], s11 - m1 * m1, epsilon = 1e-10);
    }
}
