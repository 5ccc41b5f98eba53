//! Concave seller-outcome regularizers.
//!
//! All functions assume the spec already passed [`crate::domain::validate`].

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::domain::{RegularizerKind, RegularizerSpec};
use crate::error::{Error, Result};

/// Accumulated per-seller outcome `a_j`, all entries nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutcome(Vec<f64>);

impl AggregateOutcome {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::NegativeParameter {
                what: "aggregate outcome",
                index,
                value,
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(sellers: usize) -> Self {
        Self(vec![0.0; sellers])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for AggregateOutcome {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `r(a)`.
pub fn value(a: &[f64], spec: &RegularizerSpec) -> f64 {
    match spec.kind {
        RegularizerKind::None => 0.0,
        RegularizerKind::AboveTarget => a
            .iter()
            .zip(&spec.alpha)
            .zip(&spec.beta)
            .map(|((&a, &alpha), &beta)| beta * a.min(alpha))
            .sum(),
        RegularizerKind::MaxMin => {
            let min = a.iter().copied().fold(f64::INFINITY, f64::min);
            if min.is_finite() {
                spec.beta[0] * min
            } else {
                0.0
            }
        }
    }
}

/// One element of the superdifferential of `r` at `a`.
///
/// At a kink `a_j = α_j` the left slope `β_j` is returned. Max-min puts the
/// whole weight on the lowest-index minimizing seller.
pub fn supergradient(a: &[f64], spec: &RegularizerSpec) -> Vec<f64> {
    let mut g = vec![0.0; a.len()];
    match spec.kind {
        RegularizerKind::None => {}
        RegularizerKind::AboveTarget => {
            for (j, gj) in g.iter_mut().enumerate() {
                if a[j] <= spec.alpha[j] {
                    *gj = spec.beta[j];
                }
            }
        }
        RegularizerKind::MaxMin => {
            let mut arg = 0;
            for j in 1..a.len() {
                if a[j] < a[arg] {
                    arg = j;
                }
            }
            if !a.is_empty() {
                g[arg] = spec.beta[0];
            }
        }
    }
    g
}

/// Box `[0, β_j]` for each dual variable.
pub fn dual_box(spec: &RegularizerSpec) -> Vec<(f64, f64)> {
    (0..spec.num_sellers()).map(|j| (0.0, spec.effective_beta(j))).collect()
}

/// Per-round target `α_j / T` used by the dual step.
pub fn target_rate(spec: &RegularizerSpec, horizon: u64) -> Vec<f64> {
    match spec.kind {
        RegularizerKind::AboveTarget if horizon > 0 => {
            let t = horizon as f64;
            spec.alpha.iter().map(|&a| a / t).collect()
        }
        _ => vec![0.0; spec.num_sellers()],
    }
}
