use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::domain(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::domain("correlation needs at least two points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("correlation inputs must be finite"));
    }
    Ok(())
}

/// Tau-b with tie corrections. `None` when either side is entirely tied.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap();
            let dy = y[i].partial_cmp(&y[j]).unwrap();
            use std::cmp::Ordering::Equal;
            if dx == Equal {
                tied_x += 1;
            }
            if dy == Equal {
                tied_y += 1;
            }
            if dx == Equal || dy == Equal {
                continue;
            }
            if dx == dy {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((concordant - discordant) as f64 / denom))
}

/// 1-based ranks; tied values share their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Product-moment correlation. `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub kendall: Option<f64>,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
}

/// All three coefficients of each named column against `target`.
pub fn correlation_table(columns: &[(String, Vec<f64>)], target: &[f64]) -> Result<Vec<CorrelationRow>> {
    columns
        .iter()
        .map(|(name, col)| {
            Ok(CorrelationRow {
                metric: name.clone(),
                kendall: kendall_tau_b(col, target)?,
                spearman: spearman(col, target)?,
                pearson: pearson(col, target)?,
            })
        })
        .collect()
}
