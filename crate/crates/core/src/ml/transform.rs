//! Fitted input encoding: z-scored numeric cells, passthrough binary cells
//! and one-hot categorical cells.

use serde::{Deserialize, Serialize};

use crate::features::{FeatureKind, FeatureSchema, FeatureVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub schema_version: String,
    pub kinds: Vec<FeatureKind>,
    /// Per schema entry; only meaningful for numeric cells.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Category count per schema entry; 0 for non-categorical cells.
    pub categories: Vec<usize>,
}

impl Transform {
    /// Fits standardisation statistics on `rows` only.
    pub fn fit<'a>(
        schema: &FeatureSchema,
        rows: impl IntoIterator<Item = &'a FeatureVector>,
    ) -> Transform {
        let d = schema.len();
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut n = 0usize;
        for v in rows {
            n += 1;
            for (j, x) in v.values.iter().enumerate() {
                sum[j] += x;
                sq[j] += x * x;
            }
        }
        let mut means = vec![0.0; d];
        let mut stds = vec![1.0; d];
        for (j, e) in schema.entries.iter().enumerate() {
            if e.kind == FeatureKind::Numeric && n > 0 {
                let mean = sum[j] / n as f64;
                let var = (sq[j] / n as f64 - mean * mean).max(0.0);
                means[j] = mean;
                stds[j] = if var > 1e-12 { var.sqrt() } else { 1.0 };
            }
        }
        Transform {
            schema_version: schema.version.clone(),
            kinds: schema.entries.iter().map(|e| e.kind).collect(),
            means,
            stds,
            categories: schema
                .entries
                .iter()
                .map(|e| e.categories.as_ref().map_or(0, Vec::len))
                .collect(),
        }
    }

    /// Width of the encoded vector.
    pub fn width(&self) -> usize {
        self.kinds
            .iter()
            .zip(&self.categories)
            .map(|(k, c)| if *k == FeatureKind::Categorical { *c } else { 1 })
            .sum()
    }

    pub fn apply(&self, v: &FeatureVector) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for (j, x) in v.values.iter().enumerate() {
            match self.kinds[j] {
                FeatureKind::Numeric => out.push((x - self.means[j]) / self.stds[j]),
                FeatureKind::Binary => out.push(*x),
                FeatureKind::Categorical => {
                    let k = *x as usize;
                    out.extend((0..self.categories[j]).map(|c| if c == k { 1.0 } else { 0.0 }));
                }
            }
        }
        out
    }
}
