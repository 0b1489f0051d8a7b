//! Jet and tangent JSON documents.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::num::round12;

/// `rows[j][b] = Δ^j h(p_{b+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetDoc {
    pub k: usize,
    pub boundary_labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn labels(nb: usize) -> Vec<String> {
    (1..=nb).map(|p| format!("p{p}")).collect()
}

impl JetDoc {
    pub fn from_vector(v: &DVector<f64>, nb: usize) -> Self {
        let k = v.len() / nb - 1;
        let rows = (0..=k).map(|j| (0..nb).map(|b| round12(v[j * nb + b])).collect()).collect();
        JetDoc { k, boundary_labels: labels(nb), rows }
    }

    pub fn to_vector(&self, nb: usize) -> AppResult<DVector<f64>> {
        if self.rows.len() != self.k + 1 || self.rows.iter().any(|r| r.len() != nb) {
            return Err(AppError::Format(format!("jet must have {} rows of {nb} values", self.k + 1)));
        }
        Ok(DVector::from_iterator((self.k + 1) * nb, self.rows.iter().flatten().copied()))
    }
}

pub fn parse_jet(json: &str, nb: usize) -> AppResult<DVector<f64>> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: JetDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| AppError::Format(format!("jet schema error at `{}`: {}", e.path(), e.inner())))?;
    doc.to_vector(nb)
}

/// `slope` is `null` when every residual vanished.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentDoc {
    pub omega: String,
    pub sigma: f64,
    pub l: i64,
    pub jet: JetDoc,
    pub residuals: Vec<f64>,
    pub slope: Option<f64>,
}
