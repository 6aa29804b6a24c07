//! Structural fidelity: degree and spectra MMD plus power-law analysis.

mod mmd;
mod powerlaw;
mod spectrum;
mod zeta;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{degree_sequence, DyTag, Side};

pub use mmd::{mmd_squared, mmd_squared_raw, mmd_squared_scalar, rbf_kernel, resolve_width, MmdConfig, SmoothingMode};
pub use powerlaw::{
    fit_power_law, fit_power_law_with, ks_distance, power_law_validity, AlphaEstimator, PowerLawFit, VALID_ALPHA,
    VALID_DK,
};
pub use spectrum::{dense_spectrum, lanczos_extremes, laplacian_spectrum, SimpleGraph, SpectrumConfig};
pub use zeta::hurwitz_zeta;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructuralError {
    #[error("empty sample set")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("kernel width must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("k_min must be positive")]
    InvalidKMin,
    #[error("power-law tail needs at least 2 samples, found {n_tail}")]
    InsufficientTail { n_tail: usize },
    #[error("degenerate tail: all samples equal")]
    DegenerateTail,
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("{graph} graph: {source}")]
    InGraph { graph: &'static str, source: Box<StructuralError> },
}

impl StructuralError {
    fn within(self, graph: &'static str) -> Self {
        StructuralError::InGraph { graph, source: Box::new(self) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructuralConfig {
    pub mmd: MmdConfig,
    pub spectrum: SpectrumConfig,
    pub degree_side: Side,
    pub k_min: u64,
    pub estimator: AlphaEstimator,
}

impl Default for StructuralConfig {
    fn default() -> Self {
        Self {
            mmd: MmdConfig::default(),
            spectrum: SpectrumConfig::default(),
            degree_side: Side::All,
            k_min: 2,
            estimator: AlphaEstimator::default(),
        }
    }
}

/// Degrees of the nodes on `side` that have at least one counted edge.
pub fn active_degrees(g: &DyTag, side: Side) -> Vec<u64> {
    degree_sequence(g, side).into_iter().filter(|d| *d > 0).collect()
}

fn as_samples(values: &[f64]) -> Vec<Vec<f64>> {
    values.iter().map(|v| vec![*v]).collect()
}

pub fn degree_mmd_side(
    generated: &DyTag,
    truth: &DyTag,
    side: Side,
    config: &MmdConfig,
) -> Result<f64, StructuralError> {
    let to_f = |d: Vec<u64>| d.into_iter().map(|x| x as f64).collect::<Vec<_>>();
    let g = to_f(active_degrees(generated, side));
    let t = to_f(active_degrees(truth, side));
    if g.is_empty() {
        return Err(StructuralError::EmptySample.within("generated"));
    }
    if t.is_empty() {
        return Err(StructuralError::EmptySample.within("truth"));
    }
    mmd_squared(&as_samples(&g), &as_samples(&t), config)
}

/// MMD² between the total-degree distributions of the active nodes.
pub fn degree_mmd(generated: &DyTag, truth: &DyTag, config: &MmdConfig) -> Result<f64, StructuralError> {
    degree_mmd_side(generated, truth, Side::All, config)
}

pub fn spectra_mmd_with(
    generated: &DyTag,
    truth: &DyTag,
    config: &MmdConfig,
    spectrum: &SpectrumConfig,
) -> Result<f64, StructuralError> {
    let g = laplacian_spectrum(generated, spectrum).map_err(|e| e.within("generated"))?;
    let t = laplacian_spectrum(truth, spectrum).map_err(|e| e.within("truth"))?;
    if g.is_empty() {
        return Err(StructuralError::EmptySample.within("generated"));
    }
    if t.is_empty() {
        return Err(StructuralError::EmptySample.within("truth"));
    }
    mmd_squared(&as_samples(&g), &as_samples(&t), config)
}

/// MMD² between normalized-Laplacian eigenvalue multisets.
pub fn spectra_mmd(generated: &DyTag, truth: &DyTag, config: &MmdConfig) -> Result<f64, StructuralError> {
    spectra_mmd_with(generated, truth, config, &SpectrumConfig::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSummary {
    pub fit: Option<PowerLawFit>,
    pub valid: bool,
    pub error: Option<String>,
}

impl PowerLawSummary {
    pub fn of(g: &DyTag, config: &StructuralConfig) -> Self {
        match fit_power_law_with(&degree_sequence(g, config.degree_side), config.k_min, config.estimator) {
            Ok(fit) => Self { valid: power_law_validity(&fit), fit: Some(fit), error: None },
            Err(e) => Self { fit: None, valid: false, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub degree_mmd: Option<f64>,
    pub spectra_mmd: Option<f64>,
    pub generated_power_law: PowerLawSummary,
    pub truth_power_law: PowerLawSummary,
    pub errors: Vec<String>,
}

pub fn structural_report(generated: &DyTag, truth: &DyTag, config: &StructuralConfig) -> StructuralReport {
    let mut errors = Vec::new();
    let degree = degree_mmd_side(generated, truth, config.degree_side, &config.mmd)
        .map_err(|e| errors.push(format!("degree MMD: {e}")))
        .ok();
    let spectra = spectra_mmd_with(generated, truth, &config.mmd, &config.spectrum)
        .map_err(|e| errors.push(format!("spectra MMD: {e}")))
        .ok();
    StructuralReport {
        degree_mmd: degree,
        spectra_mmd: spectra,
        generated_power_law: PowerLawSummary::of(generated, config),
        truth_power_law: PowerLawSummary::of(truth, config),
        errors,
    }
}
