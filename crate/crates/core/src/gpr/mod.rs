//! Gaussian process regression with a squared-exponential kernel, used to
//! learn the voltage and temperature model-mismatch signals.

mod dataset;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{build_thermal_dataset, build_voltage_dataset, DatasetKind, UncertaintyDataset};

pub const GP_SCHEMA: &str = "cellguard.gp/1";
const JITTER_ESCALATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    /// Signal variance (output units²).
    pub sigma_p2: f64,
    /// One per input dimension, in standardized units.
    pub length_scales: Vec<f64>,
    /// Diagonal regularization (output units²).
    pub jitter: f64,
}

impl GpHyper {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.length_scales.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: self.length_scales.len(),
            });
        }
        if !(self.sigma_p2 > 0.0 && self.sigma_p2.is_finite()) {
            return Err(Error::config("sigma_p2 must be positive"));
        }
        if self
            .length_scales
            .iter()
            .any(|l| !(*l > 0.0 && l.is_finite()))
        {
            return Err(Error::config("length scales must be positive"));
        }
        if !(self.jitter >= 1e-12 * self.sigma_p2) {
            return Err(Error::config("jitter must be at least 1e-12 * sigma_p2"));
        }
        Ok(())
    }
}

/// User-facing hyperparameter choices; unset values take data-driven
/// defaults at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpSettings {
    pub sigma_p2: Option<f64>,
    pub length_scale: f64,
    /// Absolute jitter; defaults to `1e-6·sigma_p2`.
    pub jitter: Option<f64>,
    pub max_points: usize,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            sigma_p2: None,
            length_scale: 1.0,
            jitter: None,
            max_points: 500,
        }
    }
}

impl GpSettings {
    pub fn hyper_for(&self, data: &UncertaintyDataset) -> GpHyper {
        let n = data.labels.len() as f64;
        let mean = data.labels.iter().sum::<f64>() / n.max(1.0);
        let var = data.labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n.max(1.0);
        let sigma_p2 = self.sigma_p2.unwrap_or(if var > 0.0 { var } else { 1e-12 });
        GpHyper {
            sigma_p2,
            length_scales: vec![self.length_scale; data.dim()],
            jitter: self.jitter.unwrap_or(1e-6 * sigma_p2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    fn from_rows(rows: &[Vec<f64>], dim: usize) -> Self {
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    fn apply(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .map(|((v, m), s)| (v - m) / s),
        )
    }
}

/// `σ²·exp(−½ Σ ((a_i − b_i)/ℓ_i)²)`.
pub fn kernel(a: &[f64], b: &[f64], hyper: &GpHyper) -> Result<f64> {
    let d = hyper.length_scales.len();
    if a.len() != d || b.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: if a.len() != d { a.len() } else { b.len() },
        });
    }
    Ok(kernel_unchecked(a, b, hyper))
}

fn kernel_unchecked(a: &[f64], b: &[f64], hyper: &GpHyper) -> f64 {
    let mut s = 0.0;
    for ((x, y), l) in a.iter().zip(b).zip(&hyper.length_scales) {
        let u = (x - y) / l;
        s += u * u;
    }
    hyper.sigma_p2 * (-0.5 * s).exp()
}

/// Kernel matrix over standardized rows.
pub fn covariance(rows: &[DVector<f64>], hyper: &GpHyper) -> DMatrix<f64> {
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_unchecked(rows[i].as_slice(), rows[j].as_slice(), hyper);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[derive(Debug, Clone)]
pub struct GpModel {
    kind: DatasetKind,
    source_cycle: usize,
    raw_inputs: Vec<Vec<f64>>,
    labels: Vec<f64>,
    hyper: GpHyper,
    standardization: Standardization,
    x: Vec<DVector<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

/// Indices of `cap` samples spread uniformly over `0..n`.
pub fn stride_indices(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    if cap == 1 {
        return vec![0];
    }
    (0..cap)
        .map(|k| ((k as f64) * (n - 1) as f64 / (cap - 1) as f64).round() as usize)
        .collect()
}

impl GpModel {
    pub fn fit(data: &UncertaintyDataset, hyper: &GpHyper, max_points: usize) -> Result<Self> {
        data.validate()?;
        if data.labels.is_empty() {
            return Err(Error::invalid("cannot fit a GP to an empty dataset"));
        }
        hyper.validate(data.dim())?;
        let idx = stride_indices(data.labels.len(), max_points.max(1));
        let raw: Vec<Vec<f64>> = idx.iter().map(|&i| data.inputs[i].clone()).collect();
        let labels: Vec<f64> = idx.iter().map(|&i| data.labels[i]).collect();
        let standardization = Standardization::from_rows(&raw, data.dim());
        Self::assemble(
            data.kind,
            data.source_cycle,
            raw,
            labels,
            hyper.clone(),
            standardization,
        )
    }

    /// Like `fit`, but with a given input standardization instead of one
    /// computed from the data, so models on nested datasets share inputs.
    pub fn fit_standardized(
        data: &UncertaintyDataset,
        hyper: &GpHyper,
        standardization: &Standardization,
    ) -> Result<Self> {
        data.validate()?;
        if data.labels.is_empty() {
            return Err(Error::invalid("cannot fit a GP to an empty dataset"));
        }
        hyper.validate(data.dim())?;
        if standardization.mean.len() != data.dim()
            || standardization.scale.len() != data.dim()
            || standardization.scale.iter().any(|s| !(*s > 0.0))
        {
            return Err(Error::invalid("standardization does not match the inputs"));
        }
        Self::assemble(
            data.kind,
            data.source_cycle,
            data.inputs.clone(),
            data.labels.clone(),
            hyper.clone(),
            standardization.clone(),
        )
    }

    fn assemble(
        kind: DatasetKind,
        source_cycle: usize,
        raw_inputs: Vec<Vec<f64>>,
        labels: Vec<f64>,
        mut hyper: GpHyper,
        standardization: Standardization,
    ) -> Result<Self> {
        let x: Vec<DVector<f64>> = raw_inputs
            .iter()
            .map(|r| standardization.apply(r))
            .collect();
        let base = covariance(&x, &hyper);
        let n = x.len();
        let mut attempt = 0;
        let chol = loop {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += hyper.jitter;
            }
            if let Some(c) = Cholesky::new(k) {
                break c;
            }
            if attempt == JITTER_ESCALATIONS {
                return Err(Error::Conditioning {
                    jitter: hyper.jitter,
                });
            }
            attempt += 1;
            hyper.jitter *= 10.0;
        };
        let alpha = chol.solve(&DVector::from_column_slice(&labels));
        Ok(Self {
            kind,
            source_cycle,
            raw_inputs,
            labels,
            hyper,
            standardization,
            x,
            chol,
            alpha,
        })
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn source_cycle(&self) -> usize {
        self.source_cycle
    }

    /// Hyperparameters including any jitter escalation applied at fit time.
    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Jittered covariance over the standardized training inputs.
    pub fn jittered_covariance(&self) -> DMatrix<f64> {
        let mut k = covariance(&self.x, &self.hyper);
        for i in 0..k.nrows() {
            k[(i, i)] += self.hyper.jitter;
        }
        k
    }

    pub fn standardize(&self, query: &[f64]) -> Result<DVector<f64>> {
        if query.len() != self.hyper.length_scales.len() {
            return Err(Error::Dimension {
                expected: self.hyper.length_scales.len(),
                got: query.len(),
            });
        }
        Ok(self.standardization.apply(query))
    }

    fn cross(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .map(|xi| kernel_unchecked(q.as_slice(), xi.as_slice(), &self.hyper)),
        )
    }

    pub fn predict_mean(&self, query: &[f64]) -> Result<f64> {
        let q = self.standardize(query)?;
        Ok(self.cross(&q).dot(&self.alpha))
    }

    /// Posterior mean and variance at a raw (unstandardized) query.
    pub fn predict(&self, query: &[f64]) -> Result<(f64, f64)> {
        let q = self.standardize(query)?;
        let ks = self.cross(&q);
        let mean = ks.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("Cholesky factor has a positive diagonal");
        let var = (self.hyper.sigma_p2 - v.dot(&v)).max(0.0);
        Ok((mean, var))
    }

    pub fn to_artifact(&self, version: u64) -> GpArtifact {
        GpArtifact {
            schema: GP_SCHEMA.to_string(),
            version,
            kind: self.kind,
            source_cycle: self.source_cycle,
            hyper: self.hyper.clone(),
            standardization: self.standardization.clone(),
            inputs: self.raw_inputs.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Rebuilds the model; the factorization is recomputed.
    pub fn from_artifact(a: &GpArtifact) -> Result<Self> {
        if a.schema != GP_SCHEMA {
            return Err(Error::config(format!(
                "unsupported GP schema {:?}",
                a.schema
            )));
        }
        let dim = a.kind.dim();
        a.hyper.validate(dim)?;
        if a.inputs.len() != a.labels.len() || a.inputs.iter().any(|r| r.len() != dim) {
            return Err(Error::config(
                "GP artifact inputs and labels are inconsistent",
            ));
        }
        if a.labels.is_empty() {
            return Err(Error::config("GP artifact has no training points"));
        }
        Self::assemble(
            a.kind,
            a.source_cycle,
            a.inputs.clone(),
            a.labels.clone(),
            a.hyper.clone(),
            a.standardization.clone(),
        )
    }
}

/// Persisted form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpArtifact {
    pub schema: String,
    pub version: u64,
    pub kind: DatasetKind,
    pub source_cycle: usize,
    pub hyper: GpHyper,
    pub standardization: Standardization,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}
