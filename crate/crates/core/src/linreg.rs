//! Least-squares baselines solved by Householder QR with column pivoting.
//!
//! An intercept is always fitted (by centring). Columns whose pivot falls
//! below `1e-10` times the largest pivot are treated as collinear and dropped.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DesignMatrix, FeatureSpec, Matrix, Scaler};

pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub observations: usize,
    pub rank: usize,
    pub residual_sum_of_squares: f64,
}

/// Raw solution of a least-squares problem with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// One entry per input column; zero for dropped columns.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub dropped: Vec<usize>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub feature_spec: FeatureSpec,
    pub column_names: Vec<String>,
    pub scaler: Scaler,
    /// EUR per standardized unit, aligned with `column_names`; zero where dropped.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub dropped_columns: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

/// Least squares of `y[rows]` on `x[rows]` plus an intercept.
pub fn least_squares(x: &Matrix, y: &[f64], rows: &[usize]) -> Result<LeastSquares> {
    let n = rows.len();
    let p = x.cols();
    if n <= p {
        return Err(Error::Range(format!("{n} rows cannot identify {p} columns plus an intercept")));
    }
    let nf = n as f64;
    let x_mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|&i| x.get(i, j)).sum::<f64>() / nf).collect();
    let y_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / nf;

    // Centred design, column-major.
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| rows.iter().map(|&i| x.get(i, j) - x_mean[j]).collect()).collect();
    let mut b: Vec<f64> = rows.iter().map(|&i| y[i] - y_mean).collect();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut diag = Vec::with_capacity(p);
    let mut rank = 0;

    for k in 0..p {
        // Pivot: largest remaining column norm.
        let (jmax, norm2) = (k..p)
            .map(|j| (j, a[j][k..].iter().map(|v| v * v).sum::<f64>()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        a.swap(k, jmax);
        perm.swap(k, jmax);
        let alpha = norm2.sqrt();
        if !alpha.is_finite() {
            return Err(Error::Singular("non-finite column norm".into()));
        }
        if k > 0 && alpha <= PIVOT_TOLERANCE * diag[0] || alpha == 0.0 {
            break;
        }
        // Householder reflector mapping a[k][k..] onto -sign * alpha * e1.
        let col = &mut a[k];
        let r_kk = if col[k] > 0.0 { -alpha } else { alpha };
        col[k] -= r_kk;
        let v: Vec<f64> = col[k..].to_vec();
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        col[k] = r_kk;
        col[k + 1..].iter_mut().for_each(|x| *x = 0.0);
        diag.push(r_kk.abs());
        rank += 1;
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            target.iter_mut().zip(&v).for_each(|(t, vi)| *t -= f * vi);
        };
        for col in a.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut b[k..]);
    }

    // Back substitution on the leading rank x rank block.
    let mut beta_perm = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = b[i];
        for j in i + 1..rank {
            s -= a[j][i] * beta_perm[j];
        }
        beta_perm[i] = s / a[i][i];
    }
    if beta_perm.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("back substitution produced non-finite coefficients".into()));
    }
    let mut coefficients = vec![0.0; p];
    for (k, &j) in perm.iter().take(rank).enumerate() {
        coefficients[j] = beta_perm[k];
    }
    let mut dropped: Vec<usize> = perm[rank..].to_vec();
    dropped.sort_unstable();
    let intercept = y_mean - x_mean.iter().zip(&coefficients).map(|(m, c)| m * c).sum::<f64>();
    let rss = rows
        .iter()
        .map(|&i| {
            let fit = intercept + x.row(i).iter().zip(&coefficients).map(|(a, c)| a * c).sum::<f64>();
            (y[i] - fit).powi(2)
        })
        .sum();
    Ok(LeastSquares {
        coefficients,
        intercept,
        dropped,
        diagnostics: FitDiagnostics { observations: n, rank, residual_sum_of_squares: rss },
    })
}

pub fn fit_ols(design: &DesignMatrix, rows: &[usize]) -> Result<OlsModel> {
    let fit = least_squares(&design.x, &design.y, rows)?;
    let dropped_columns: Vec<String> = fit.dropped.iter().map(|&j| design.column_names[j].clone()).collect();
    if !dropped_columns.is_empty() {
        log::warn!("dropped {} collinear columns: {}", dropped_columns.len(), dropped_columns.join(", "));
    }
    Ok(OlsModel {
        feature_spec: design.spec.clone(),
        column_names: design.column_names.clone(),
        scaler: design.scaler.clone(),
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        dropped_columns,
        diagnostics: fit.diagnostics,
    })
}

pub fn predict_ols(model: &OlsModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.coefficients.len() {
        return Err(Error::Shape { expected: model.coefficients.len(), actual: x.cols() });
    }
    Ok((0..x.rows())
        .map(|i| model.intercept + x.row(i).iter().zip(&model.coefficients).map(|(a, c)| a * c).sum::<f64>())
        .collect())
}

impl OlsModel {
    pub fn predict(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        if design.column_names != self.column_names {
            return Err(Error::Spec("design columns differ from the model's fitted columns".into()));
        }
        predict_ols(self, &design.x)
    }

    pub fn write_coefficients_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["name", "estimate"])?;
        wtr.write_record(["(intercept)".to_string(), self.intercept.to_string()])?;
        for (name, c) in self.column_names.iter().zip(&self.coefficients) {
            if self.dropped_columns.contains(name) {
                wtr.write_record([name.as_str(), ""])?;
            } else {
                wtr.write_record([name.clone(), c.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("writing coefficient csv", e))?;
        Ok(())
    }
}
