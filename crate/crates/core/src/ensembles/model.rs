use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{node_stats, WeightedDigraph};

/// Which maximum-entropy ensemble a parameter or constraint vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Directed enhanced configuration model: out/in degrees and strengths.
    Decm,
    /// Reciprocal weighted configuration model: non-reciprocated and
    /// reciprocated strengths.
    Rwcm,
    /// Reciprocal enhanced configuration model: non-reciprocated and
    /// reciprocated degrees and strengths.
    Recm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Decm, ModelKind::Rwcm, ModelKind::Recm];

    /// Number of per-node constraints (and multipliers).
    pub fn families(self) -> usize {
        match self {
            ModelKind::Decm => 4,
            ModelKind::Rwcm => 3,
            ModelKind::Recm => 6,
        }
    }

    pub fn constraint_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Decm => &["d_out", "d_in", "s_out", "s_in"],
            ModelKind::Rwcm => &["s_out_nonrec", "s_in_nonrec", "s_rec"],
            ModelKind::Recm => &[
                "d_out_nonrec",
                "d_in_nonrec",
                "d_rec",
                "s_out_nonrec",
                "s_in_nonrec",
                "s_rec",
            ],
        }
    }

    pub fn multiplier_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Decm => &["k_out", "k_in", "l_out", "l_in"],
            ModelKind::Rwcm => &["l_out_nonrec", "l_in_nonrec", "l_rec"],
            ModelKind::Recm => &[
                "k_out_nonrec",
                "k_in_nonrec",
                "k_rec",
                "l_out_nonrec",
                "l_in_nonrec",
                "l_rec",
            ],
        }
    }

    /// Whether family `f` is a weight (strength) multiplier rather than a
    /// degree multiplier.
    pub fn is_weight_family(self, f: usize) -> bool {
        match self {
            ModelKind::Decm => f >= 2,
            ModelKind::Rwcm => true,
            ModelKind::Recm => f >= 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Decm => "decm",
            ModelKind::Rwcm => "rwcm",
            ModelKind::Recm => "recm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decm" => Ok(ModelKind::Decm),
            "rwcm" => Ok(ModelKind::Rwcm),
            "recm" => Ok(ModelKind::Recm),
            other => Err(Error::Schema(format!("unknown model '{other}'"))),
        }
    }
}

pub fn param_count(model: ModelKind, n: usize) -> usize {
    model.families() * n
}

/// Per-node constraint values in family-major layout: entry `(f, i)` lives at
/// `f * n + i`. Used both for targets and for ensemble expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConstraintSet {
    pub model: ModelKind,
    pub n: usize,
    pub values: Vec<f64>,
}

impl NodeConstraintSet {
    pub fn zeros(model: ModelKind, n: usize) -> Self {
        Self {
            model,
            n,
            values: vec![0.0; param_count(model, n)],
        }
    }

    pub fn new(model: ModelKind, n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != param_count(model, n) {
            return Err(Error::Infeasible(format!(
                "{} constraint values for {model} with n = {n}",
                values.len()
            )));
        }
        Ok(Self { model, n, values })
    }

    #[inline]
    pub fn get(&self, family: usize, node: usize) -> f64 {
        self.values[family * self.n + node]
    }

    #[inline]
    pub(crate) fn add(&mut self, family: usize, node: usize, v: f64) {
        self.values[family * self.n + node] += v;
    }

    pub fn family(&self, f: usize) -> &[f64] {
        &self.values[f * self.n..(f + 1) * self.n]
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn constraints_from_graph(g: &WeightedDigraph, model: ModelKind) -> NodeConstraintSet {
    let n = g.n();
    let stats = node_stats(g);
    let mut out = NodeConstraintSet::zeros(model, n);
    for (i, s) in stats.iter().enumerate() {
        let row: Vec<u64> = match model {
            ModelKind::Decm => vec![s.d_out, s.d_in, s.s_out, s.s_in],
            ModelKind::Rwcm => vec![s.s_out_nonrec, s.s_in_nonrec, s.s_rec],
            ModelKind::Recm => vec![
                s.d_out_nonrec,
                s.d_in_nonrec,
                s.d_rec,
                s.s_out_nonrec,
                s.s_in_nonrec,
                s.s_rec,
            ],
        };
        for (f, v) in row.into_iter().enumerate() {
            out.values[f * n + i] = v as f64;
        }
    }
    out
}

/// Exponentiated Lagrange multipliers, family-major like
/// [`NodeConstraintSet`]. Family order follows
/// [`ModelKind::multiplier_names`]; multiplier family `f` couples to
/// constraint family `f`.
///
/// A multiplier of exactly zero marks a constraint pinned at the boundary
/// (the corresponding link type has probability zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub model: ModelKind,
    pub n: usize,
    pub values: Vec<f64>,
}

/// Products at or above this bound are treated as divergent.
pub(crate) const PRODUCT_LIMIT: f64 = 1.0 - 1e-12;

impl ParamSet {
    pub fn new(model: ModelKind, n: usize, values: Vec<f64>) -> Result<Self> {
        let p = Self { model, n, values };
        p.validate()?;
        Ok(p)
    }

    /// Every multiplier set to `value`.
    pub fn uniform(model: ModelKind, n: usize, value: f64) -> Result<Self> {
        Self::new(model, n, vec![value; param_count(model, n)])
    }

    /// Builds a parameter set from per-family values that are equal across
    /// nodes.
    pub fn homogeneous(model: ModelKind, n: usize, per_family: &[f64]) -> Result<Self> {
        if per_family.len() != model.families() {
            return Err(Error::InvalidParams(format!(
                "{} family values for {model}",
                per_family.len()
            )));
        }
        let values = per_family
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, n))
            .collect();
        Self::new(model, n, values)
    }

    #[inline]
    pub fn get(&self, family: usize, node: usize) -> f64 {
        self.values[family * self.n + node]
    }

    pub fn family(&self, f: usize) -> &[f64] {
        &self.values[f * self.n..(f + 1) * self.n]
    }

    /// Checks shape, finiteness, non-negativity, and that every pairwise
    /// weight-multiplier product that enters the law stays strictly below one.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.values.len() != param_count(self.model, self.n) {
            return Err(Error::InvalidParams(format!(
                "{} values for {} with n = {}",
                self.values.len(),
                self.model,
                self.n
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParams(format!(
                "multiplier {v} is not finite and >= 0"
            )));
        }
        if let Some((i, j, product)) = super::dyad::first_violation(self) {
            return Err(Error::ConvergenceViolation { i, j, product });
        }
        Ok(())
    }
}
