//! Ensemble summaries: streaming moments, percentiles and z-scores.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize, Serializer};

use super::EnsembleSample;
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two accumulators as if all values had been pushed into one.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Self {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }

    /// Sample variance with `count - 1` in the denominator.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }

    pub fn std(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }
}

/// Linear interpolation between order statistics (`h = (N - 1) q`).
/// `sorted` must be ascending and non-empty; `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Distribution of one statistic over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDistribution {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub std: Option<f64>,
    pub p2_5: f64,
    pub p97_5: f64,
}

impl StatDistribution {
    pub fn from_values(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::with_percentiles(name, values, 0.025, 0.975)
    }

    pub fn with_percentiles(
        name: impl Into<String>,
        values: Vec<f64>,
        lower: f64,
        upper: f64,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut acc = Welford::default();
        for &v in &values {
            acc.push(v);
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            name: name.into(),
            mean: acc.mean,
            std: acc.std(),
            p2_5: percentile(&sorted, lower),
            p97_5: percentile(&sorted, upper),
            values,
        })
    }

    pub fn z(&self, empirical: f64) -> ZScore {
        match self.std {
            Some(std) => z_score(empirical, self.mean, std),
            None => ZScore::Undefined,
        }
    }
}

/// Applies `statistic` to every graph of the ensemble.
pub fn ensemble_statistics<F>(
    samples: &EnsembleSample,
    name: &str,
    statistic: F,
) -> Result<StatDistribution>
where
    F: Fn(&WeightedDigraph) -> f64,
{
    StatDistribution::from_values(name, samples.graphs.iter().map(statistic).collect())
}

/// `(x − mean) / std`, with sentinels where the ratio is not a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZScore {
    Finite(f64),
    /// Zero spread and the empirical value above the mean.
    PlusInfinity,
    /// Zero spread and the empirical value below the mean.
    MinusInfinity,
    /// Zero spread and zero deviation, or no spread available.
    Undefined,
}

pub fn z_score(x: f64, mean: f64, std: f64) -> ZScore {
    let dev = x - mean;
    if std > 0.0 && std.is_finite() {
        ZScore::Finite(dev / std)
    } else if dev > 0.0 {
        ZScore::PlusInfinity
    } else if dev < 0.0 {
        ZScore::MinusInfinity
    } else {
        ZScore::Undefined
    }
}

impl ZScore {
    pub fn value(&self) -> Option<f64> {
        match self {
            ZScore::Finite(z) => Some(*z),
            ZScore::PlusInfinity => Some(f64::INFINITY),
            ZScore::MinusInfinity => Some(f64::NEG_INFINITY),
            ZScore::Undefined => None,
        }
    }

    /// `|z| > threshold`; infinite deviations are significant, undefined ones
    /// are not.
    pub fn is_significant(&self, threshold: f64) -> bool {
        self.value().is_some_and(|z| z.abs() > threshold)
    }
}

/// `inf`, `-inf`, empty for undefined, otherwise the shortest round-trip
/// decimal.
impl fmt::Display for ZScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZScore::Finite(z) => write!(f, "{z}"),
            ZScore::PlusInfinity => f.write_str("inf"),
            ZScore::MinusInfinity => f.write_str("-inf"),
            ZScore::Undefined => Ok(()),
        }
    }
}

/// Numbers stay numbers; infinities become the strings `"inf"`/`"-inf"`,
/// undefined becomes `null`.
impl Serialize for ZScore {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ZScore::Finite(z) => s.serialize_f64(*z),
            ZScore::PlusInfinity => s.serialize_str("inf"),
            ZScore::MinusInfinity => s.serialize_str("-inf"),
            ZScore::Undefined => s.serialize_none(),
        }
    }
}

/// Long-format CSV `sample_index,statistic,value`.
pub fn write_values_csv<W: Write>(out: W, dists: &[StatDistribution]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_index", "statistic", "value"])?;
    for d in dists {
        for (idx, v) in d.values.iter().enumerate() {
            w.write_record([idx.to_string(), d.name.clone(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_statistic_has_zero_spread() {
        let d = StatDistribution::from_values("c", vec![3.5; 10]).unwrap();
        assert_eq!(d.std, Some(0.0));
        assert_eq!((d.p2_5, d.p97_5), (3.5, 3.5));
        assert_eq!(d.z(3.5), ZScore::Undefined);
        assert_eq!(d.z(4.0), ZScore::PlusInfinity);
    }

    #[test]
    fn hand_built_z() {
        let d = StatDistribution::from_values("m", vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.z(4.0), ZScore::Finite(2.0));
        assert_eq!(d.z(d.mean), ZScore::Finite(0.0));
    }

    #[test]
    fn scaling_leaves_z_unchanged() {
        let xs = vec![4.0, 7.0, 1.0, 9.0, 3.0];
        let c = 6.0;
        let a = StatDistribution::from_values("a", xs.clone())
            .unwrap()
            .z(8.0);
        let b = StatDistribution::from_values("b", xs.iter().map(|x| x * c).collect())
            .unwrap()
            .z(8.0 * c);
        assert!((a.value().unwrap() - b.value().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn percentiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&s, 0.5), 3.0);
        assert_eq!(percentile(&s, 0.0), 1.0);
        assert_eq!(percentile(&s, 1.0), 5.0);
        assert!((percentile(&s, 0.025) - 1.1).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn merged_welford_equals_sequential() {
        let xs: Vec<f64> = (0..50).map(|k| ((k * 37) % 11) as f64 * 0.7).collect();
        let mut all = Welford::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Welford::default(), Welford::default());
        xs[..17].iter().for_each(|&x| a.push(x));
        xs[17..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.variance().unwrap() - all.variance().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(
            StatDistribution::from_values("e", vec![]),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn values_csv_layout() {
        let d = StatDistribution::from_values("links", vec![3.0, 4.5]).unwrap();
        let mut buf = Vec::new();
        write_values_csv(&mut buf, &[d]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "sample_index,statistic,value\n0,links,3\n1,links,4.5\n"
        );
    }
}
