//! Target-sample ("canary") construction.
//!
//! * `blank`: the all-zero feature vector.
//! * `clipbkd`: the right singular vector of the data matrix with the smallest
//!   singular value, scaled to a chosen norm. Gradients of the other samples
//!   have the least component along this direction.
//! * `fixed`: a caller-supplied sample.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{argmax, logits, Dataset, ModelSpec, ParamVector, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum CanarySpec {
    Blank {
        #[serde(default)]
        label: usize,
    },
    #[serde(rename = "clipbkd")]
    ClipBkd {
        /// Defaults to the class the initial model least favours.
        label: Option<usize>,
        scale: f64,
    },
    FixedSample {
        features: Vec<f64>,
        label: usize,
    },
}

impl Default for CanarySpec {
    fn default() -> Self {
        CanarySpec::Blank { label: 0 }
    }
}

impl CanarySpec {
    /// Builds the canary for a given private dataset and initial model.
    pub fn build(&self, data: &Dataset, spec: &ModelSpec, theta0: &ParamVector) -> Result<Sample> {
        let sample = match self {
            CanarySpec::Blank { label } => make_blank_canary(data.dim(), *label),
            CanarySpec::ClipBkd { label, scale } => {
                let direction = make_clipbkd_canary(data, 0, *scale)?;
                let label = match label {
                    Some(l) => *l,
                    None => least_favored_label(spec, theta0, &direction.features)?,
                };
                Sample::new(direction.features, label)
            }
            CanarySpec::FixedSample { features, label } => Sample::new(features.clone(), *label),
        };
        spec.check_sample(&sample)?;
        Ok(sample)
    }
}

pub fn make_blank_canary(dim: usize, label: usize) -> Sample {
    Sample::new(vec![0.0; dim], label)
}

/// Unit right singular vector of the `n × d` feature matrix with the smallest
/// singular value, times `scale`. Sign is fixed so the first non-negligible
/// entry is positive.
pub fn make_clipbkd_canary(data: &Dataset, label: usize, scale: f64) -> Result<Sample> {
    if data.is_empty() {
        return Err(Error::domain("ClipBKD needs a non-empty dataset"));
    }
    if data.dim() < 2 {
        return Err(Error::domain("ClipBKD needs feature dimension ≥ 2"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!("canary scale {scale} must be > 0")));
    }
    let direction = least_singular_direction(data)?;
    Ok(Sample::new(direction.into_iter().map(|v| v * scale).collect(), label))
}

/// Eigenvector of AᵀA with the smallest eigenvalue.
fn least_singular_direction(data: &Dataset) -> Result<Vec<f64>> {
    let d = data.dim();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for s in data.samples() {
        let x = &s.features;
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in i..d {
                gram[(i, j)] += x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let eig = SymmetricEigen::try_new(gram, 1e-14, 10_000)
        .ok_or_else(|| Error::domain("eigen-decomposition of the Gram matrix did not converge"))?;
    // Ties go to the lowest index.
    let mut best = 0;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut v: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
    let norm = crate::nncore::l2_norm(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-10) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(v)
}

/// The class with the smallest logit for `features` under `params`.
pub fn least_favored_label(spec: &ModelSpec, params: &ParamVector, features: &[f64]) -> Result<usize> {
    let z = logits(spec, params, features)?;
    let negated: Vec<f64> = z.iter().map(|v| -v).collect();
    Ok(argmax(&negated))
}
