//! Structural sums of several RSA samples and their means.

use effcond::conductivity::{f3_coefficient, fmt};
use effcond::geometry::generate_rsa;
use effcond::{EisensteinEvaluator, StructuralSums};

use crate::error::CliError;

/// Sums reported for one sample, or the means over several samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub e11: f64,
    pub conv_11_11: f64,
    pub conv_12_12: f64,
    pub conv_13_13: f64,
}

impl Row {
    pub fn from_sums(s: &StructuralSums) -> Self {
        Self {
            e11: s.e11(),
            conv_11_11: s.conv_labels(1, 1, 1, 1),
            conv_12_12: s.conv_labels(1, 2, 1, 2),
            conv_13_13: s.conv_labels(1, 3, 1, 3),
        }
    }

    /// Generates the packing for `seed` and computes its row.
    pub fn for_seed(seed: u64, n: usize, f: f64, eval: &EisensteinEvaluator) -> Result<Self, CliError> {
        let config = generate_rsa(n, f, seed)?;
        Ok(Self::from_sums(&StructuralSums::compute(&config, eval)))
    }

    /// Isotropic `f^3` coefficient built from this row.
    pub fn f3_coefficient(&self) -> f64 {
        f3_coefficient(self.conv_11_11, self.conv_12_12, self.conv_13_13)
    }

    /// Componentwise mean of several rows.
    pub fn mean(rows: &[Row]) -> Option<Row> {
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let avg = |pick: fn(&Row) -> f64| rows.iter().map(pick).sum::<f64>() / n;
        Some(Row {
            e11: avg(|r| r.e11),
            conv_11_11: avg(|r| r.conv_11_11),
            conv_12_12: avg(|r| r.conv_12_12),
            conv_13_13: avg(|r| r.conv_13_13),
        })
    }

    /// `key=value` pairs, each key prefixed with `prefix.`.
    pub fn key_values(&self, prefix: &str) -> Vec<(String, String)> {
        [
            ("e11", self.e11),
            ("conv_11_11", self.conv_11_11),
            ("conv_12_12", self.conv_12_12),
            ("conv_13_13", self.conv_13_13),
            ("f3_coefficient", self.f3_coefficient()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("{prefix}.{k}"), fmt(v)))
        .collect()
    }
}

/// Key prefix of a per-seed row.
pub fn seed_prefix(seed: u64) -> String {
    format!("seed_{seed:02}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_rows_is_componentwise() {
        let a = Row {
            e11: 1.0,
            conv_11_11: 2.0,
            conv_12_12: 3.0,
            conv_13_13: 4.0,
        };
        let b = Row {
            e11: 3.0,
            conv_11_11: 4.0,
            conv_12_12: 5.0,
            conv_13_13: 6.0,
        };
        let m = Row::mean(&[a, b]).unwrap();
        assert_eq!(
            m,
            Row {
                e11: 2.0,
                conv_11_11: 3.0,
                conv_12_12: 4.0,
                conv_13_13: 5.0
            }
        );
        assert!(Row::mean(&[]).is_none());
    }

    #[test]
    fn keys_carry_the_prefix() {
        let a = Row {
            e11: 1.0,
            conv_11_11: 2.0,
            conv_12_12: 3.0,
            conv_13_13: 4.0,
        };
        let kv = a.key_values(&seed_prefix(3));
        assert_eq!(kv[0].0, "seed_03.e11");
        assert_eq!(kv[4].0, "seed_03.f3_coefficient");
    }
}
