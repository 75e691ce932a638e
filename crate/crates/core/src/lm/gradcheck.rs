use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use super::{LmParameters, TENSOR_NAMES};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (tensor, coordinates checked, worst relative error)
    pub per_tensor: Vec<(String, usize, f64)>,
    pub failure: Option<String>,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.failure.is_none() && self.max_rel_error < tol
    }
}

/// Compares the analytic gradient from `loss` against central differences
/// with step `h` on up to `per_tensor` random coordinates of every tensor
/// (all coordinates of smaller tensors).
///
/// Relative error is `|g_a - g_n| / max(1, |g_a|, |g_n|)`.
pub fn gradient_check<F, R>(
    params: &LmParameters,
    loss: F,
    h: f64,
    per_tensor: usize,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Fn(&LmParameters) -> Result<(f64, LmParameters)>,
    R: Rng,
{
    let (base, analytic) = loss(params)?;
    if !base.is_finite() {
        return Ok(GradCheckReport {
            max_rel_error: f64::INFINITY,
            per_tensor: Vec::new(),
            failure: Some(format!("non-finite loss {base}")),
        });
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_tensor: Vec::new(),
        failure: None,
    };
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        let len = params.tensors()[t].len();
        let coords: Vec<usize> = if len <= per_tensor {
            (0..len).collect()
        } else {
            sample(rng, len, per_tensor).into_vec()
        };
        let mut worst = 0.0f64;
        for &i in &coords {
            let orig = params.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + h;
            let (up, _) = loss(&probe)?;
            probe.tensors_mut()[t][i] = orig - h;
            let (down, _) = loss(&probe)?;
            probe.tensors_mut()[t][i] = orig;
            if !(up.is_finite() && down.is_finite()) {
                report.failure = Some(format!("non-finite loss probing {name}[{i}]"));
                report.max_rel_error = f64::INFINITY;
                return Ok(report);
            }
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.tensors()[t][i];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(rel);
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        report.per_tensor.push((name.to_string(), coords.len(), worst));
    }
    Ok(report)
}
