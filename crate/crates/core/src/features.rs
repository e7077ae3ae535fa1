//! Design matrices: regressor selection, polynomial expansion, lag/lead
//! windows and standardization fitted on training rows.

use std::fmt;
use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{format_timestamp, ZoneId};
use crate::net_demand::NetDemandPanel;
use crate::splits::{Fold, SplitPlan};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape { expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Concatenates columns of matrices with equal row counts.
    pub fn hstack(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if let Some(bad) = parts.iter().find(|m| m.rows != rows) {
            return Err(Error::Shape { expected: rows, actual: bad.rows });
        }
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok(Matrix { rows, cols, data })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceColumn {
    DaPrice,
    GasPrice,
}

impl fmt::Display for PriceColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriceColumn::DaPrice => "da_price",
            PriceColumn::GasPrice => "gas_price",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub price_column: PriceColumn,
    pub include_zonal_nd: bool,
    pub include_zonal_ndfc: bool,
    pub lags_system_nd: usize,
    pub leads_system_ndfc: usize,
    /// Degree of the polynomial basis over continuous columns (1, 2 or 3).
    pub poly_degree: u8,
    pub workday: bool,
    pub winter: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self::preferred()
    }
}

impl FeatureSpec {
    /// Price, 7 zonal net demands, 7 zonal forecasts and 2 indicators.
    pub fn preferred() -> Self {
        Self {
            price_column: PriceColumn::DaPrice,
            include_zonal_nd: true,
            include_zonal_ndfc: true,
            lags_system_nd: 0,
            leads_system_ndfc: 0,
            poly_degree: 1,
            workday: true,
            winter: true,
        }
    }

    /// Preferred specification plus 24 lags of system net demand and 24
    /// leads of its forecast.
    pub fn dynamic() -> Self {
        Self { lags_system_nd: 24, leads_system_ndfc: 24, ..Self::preferred() }
    }

    /// Dynamic specification with the gas price replacing the day-ahead price.
    pub fn counterfactual() -> Self {
        Self { price_column: PriceColumn::GasPrice, ..Self::dynamic() }
    }

    pub fn polynomial(degree: u8) -> Self {
        Self { poly_degree: degree, ..Self::preferred() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.poly_degree) {
            return Err(Error::Spec(format!("polynomial degree {} not in {{1, 2, 3}}", self.poly_degree)));
        }
        Ok(())
    }

    pub fn continuous_names(&self) -> Vec<String> {
        let mut names = vec![self.price_column.to_string()];
        if self.include_zonal_nd {
            names.extend(ZoneId::ALL.iter().map(|z| format!("nd_{z}")));
        }
        if self.include_zonal_ndfc {
            names.extend(ZoneId::ALL.iter().map(|z| format!("ndfc_{z}")));
        }
        names
    }

    /// Column names in design order; a pure function of the specification.
    pub fn column_names(&self) -> Result<Vec<String>> {
        self.validate()?;
        let base = self.continuous_names();
        let mut names = if self.poly_degree > 1 {
            monomials(base.len(), self.poly_degree).iter().map(|m| monomial_name(m, &base)).collect()
        } else {
            base
        };
        names.extend((1..=self.lags_system_nd).map(|k| format!("nd_system_lag{k}")));
        names.extend((1..=self.leads_system_ndfc).map(|k| format!("ndfc_system_lead{k}")));
        if self.workday {
            names.push("workday".into());
        }
        if self.winter {
            names.push("winter".into());
        }
        Ok(names)
    }
}

/// All multisets of column indices of size 1..=degree, graded then lexicographic.
fn monomials(n: usize, degree: u8) -> Vec<Vec<usize>> {
    fn rec(n: usize, start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for d in 1..=degree as usize {
        rec(n, 0, d, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

fn monomial_name(m: &[usize], names: &[String]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < m.len() {
        let mut j = i;
        while j < m.len() && m[j] == m[i] {
            j += 1;
        }
        let p = j - i;
        parts.push(if p == 1 { names[m[i]].clone() } else { format!("{}^{p}", names[m[i]]) });
        i = j;
    }
    parts.join("*")
}

/// Full polynomial basis (without constant) of total degree at most `degree`.
pub fn expand_polynomial(xc: &Matrix, names: &[String], degree: u8) -> Result<(Matrix, Vec<String>)> {
    if !(2..=3).contains(&degree) {
        return Err(Error::Spec(format!("polynomial expansion degree {degree} not in {{2, 3}}")));
    }
    if names.len() != xc.cols() {
        return Err(Error::Shape { expected: xc.cols(), actual: names.len() });
    }
    let terms = monomials(xc.cols(), degree);
    let mut out = Matrix::zeros(xc.rows(), terms.len());
    for i in 0..xc.rows() {
        let src = xc.row(i);
        let dst = out.row_mut(i);
        for (k, m) in terms.iter().enumerate() {
            dst[k] = m.iter().map(|&j| src[j]).product();
        }
    }
    let names = terms.iter().map(|m| monomial_name(m, names)).collect();
    Ok((out, names))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub timestamp: DateTime<Utc>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LagLeadColumns {
    /// One row per retained panel row.
    pub columns: Matrix,
    pub names: Vec<String>,
    /// Panel row indices kept, in order.
    pub retained: Vec<usize>,
    pub dropped: Vec<DroppedRow>,
}

/// Lags of actual system net demand and leads of its day-ahead forecast,
/// built on the whole chronological panel before any split.
pub fn add_lags_leads(panel: &NetDemandPanel, lags: usize, leads: usize) -> Result<LagLeadColumns> {
    let n = panel.len();
    if lags + leads >= n.max(1) && (lags > 0 || leads > 0) {
        return Err(Error::Range(format!("{lags} lags and {leads} leads exceed a panel of {n} rows")));
    }
    if !panel.is_contiguous() {
        return Err(Error::Range("panel is not a contiguous hourly series".into()));
    }
    let retained: Vec<usize> = (lags..n - leads).collect();
    let mut dropped = Vec::new();
    for i in 0..lags.min(n) {
        dropped.push(DroppedRow { timestamp: panel.rows[i].timestamp, reason: format!("incomplete {lags}-hour lag window") });
    }
    for i in (n - leads)..n {
        dropped.push(DroppedRow { timestamp: panel.rows[i].timestamp, reason: format!("incomplete {leads}-hour lead window") });
    }
    let mut columns = Matrix::zeros(retained.len(), lags + leads);
    for (r, &t) in retained.iter().enumerate() {
        let row = columns.row_mut(r);
        for k in 1..=lags {
            row[k - 1] = panel.rows[t - k].nd_system;
        }
        for k in 1..=leads {
            row[lags + k - 1] = panel.rows[t + k].ndfc_system;
        }
    }
    let mut names: Vec<String> = (1..=lags).map(|k| format!("nd_system_lag{k}")).collect();
    names.extend((1..=leads).map(|k| format!("ndfc_system_lead{k}")));
    Ok(LagLeadColumns { columns, names, retained, dropped })
}

/// Per-column standardization statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    /// Population standard deviations; 1 for constant columns.
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

pub fn fit_scaler(x: &Matrix, training_rows: &[usize]) -> Result<Scaler> {
    if training_rows.is_empty() {
        return Err(Error::Range("no training rows to fit the scaler".into()));
    }
    let n = training_rows.len() as f64;
    let mut means = vec![0.0; x.cols()];
    for &i in training_rows {
        for (m, v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; x.cols()];
    for &i in training_rows {
        for ((s, v), m) in vars.iter_mut().zip(x.row(i)).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let mut stds = Vec::with_capacity(x.cols());
    let mut constant = Vec::with_capacity(x.cols());
    for (j, s) in vars.iter().enumerate() {
        let sd = (s / n).sqrt();
        let degenerate = !(sd > 1e-12 * means[j].abs().max(1.0));
        if degenerate {
            log::warn!("column {j} is constant on training rows; left centred with unit scale");
        }
        constant.push(degenerate);
        stds.push(if degenerate { 1.0 } else { sd });
    }
    Ok(Scaler { means, stds, constant })
}

impl Scaler {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::Shape { expected: self.means.len(), actual: x.cols() });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::Shape { expected: self.means.len(), actual: x.cols() });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }
}

/// Standardized regressors and raw EUR target, one row per usable hour.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub timestamps: Vec<DateTime<Utc>>,
    pub dates: Vec<NaiveDate>,
    pub folds: Vec<Fold>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub column_names: Vec<String>,
    pub scaler: Scaler,
    pub spec: FeatureSpec,
    pub dropped: Vec<DroppedRow>,
}

impl DesignMatrix {
    pub fn rows_in(&self, folds: &[Fold]) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| folds.contains(&self.folds[i])).collect()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["timestamp".to_string(), "fold".to_string()];
        header.extend(self.column_names.iter().cloned());
        header.push("y".into());
        wtr.write_record(&header)?;
        for i in 0..self.x.rows() {
            let mut row = vec![format_timestamp(self.timestamps[i]), fold_label(self.folds[i]).to_string()];
            row.extend(self.x.row(i).iter().map(f64::to_string));
            row.push(self.y[i].to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("writing design csv", e))?;
        Ok(())
    }
}

pub(crate) fn fold_label(f: Fold) -> &'static str {
    match f {
        Fold::Train => "train",
        Fold::Validation => "validation",
        Fold::PreLockdown => "pre_lockdown",
        Fold::Lockdown => "lockdown",
        Fold::Unassigned => "unassigned",
    }
}

/// Unstandardized regressors for the retained panel rows.
pub struct RawFeatures {
    pub x: Matrix,
    pub names: Vec<String>,
    pub retained: Vec<usize>,
    pub dropped: Vec<DroppedRow>,
}

pub fn raw_features(panel: &NetDemandPanel, spec: &FeatureSpec) -> Result<RawFeatures> {
    spec.validate()?;
    let window = add_lags_leads(panel, spec.lags_system_nd, spec.leads_system_ndfc)?;
    let base_names = spec.continuous_names();
    let mut cont = Matrix::zeros(window.retained.len(), base_names.len());
    for (r, &t) in window.retained.iter().enumerate() {
        let p = &panel.rows[t];
        let row = cont.row_mut(r);
        row[0] = match spec.price_column {
            PriceColumn::DaPrice => p.da_price,
            PriceColumn::GasPrice => p.gas_price,
        };
        let mut k = 1;
        if spec.include_zonal_nd {
            row[k..k + ZoneId::COUNT].copy_from_slice(&p.nd);
            k += ZoneId::COUNT;
        }
        if spec.include_zonal_ndfc {
            row[k..k + ZoneId::COUNT].copy_from_slice(&p.nd_fc);
        }
    }
    let (cont, mut names) = if spec.poly_degree > 1 {
        expand_polynomial(&cont, &base_names, spec.poly_degree)?
    } else {
        (cont, base_names)
    };
    names.extend(window.names.iter().cloned());
    let mut ind_names = Vec::new();
    if spec.workday {
        ind_names.push("workday".to_string());
    }
    if spec.winter {
        ind_names.push("winter".to_string());
    }
    let mut ind = Matrix::zeros(window.retained.len(), ind_names.len());
    for (r, &t) in window.retained.iter().enumerate() {
        let f = panel.rows[t].flags;
        let mut k = 0;
        if spec.workday {
            ind.set(r, k, f64::from(u8::from(f.workday)));
            k += 1;
        }
        if spec.winter {
            ind.set(r, k, f64::from(u8::from(f.winter)));
        }
    }
    names.extend(ind_names);
    let x = Matrix::hstack(&[&cont, &window.columns, &ind])?;
    debug_assert_eq!(names, spec.column_names()?);
    Ok(RawFeatures { x, names, retained: window.retained, dropped: window.dropped })
}

/// Builds the design and fits the scaler on the plan's training days.
pub fn build_design(panel: &NetDemandPanel, spec: &FeatureSpec, split: &SplitPlan) -> Result<DesignMatrix> {
    let raw = raw_features(panel, spec)?;
    let folds: Vec<Fold> = raw.retained.iter().map(|&t| split.fold_of(panel.rows[t].date)).collect();
    let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == Fold::Train).collect();
    let scaler = fit_scaler(&raw.x, &train)?;
    finish(panel, spec, raw, folds, scaler)
}

/// Builds a design with a previously fitted scaler (inference on new panels).
pub fn build_design_with_scaler(
    panel: &NetDemandPanel,
    spec: &FeatureSpec,
    scaler: &Scaler,
    split: Option<&SplitPlan>,
) -> Result<DesignMatrix> {
    let raw = raw_features(panel, spec)?;
    let folds = raw
        .retained
        .iter()
        .map(|&t| split.map_or(Fold::Unassigned, |s| s.fold_of(panel.rows[t].date)))
        .collect();
    finish(panel, spec, raw, folds, scaler.clone())
}

fn finish(panel: &NetDemandPanel, spec: &FeatureSpec, raw: RawFeatures, folds: Vec<Fold>, scaler: Scaler) -> Result<DesignMatrix> {
    let x = scaler.transform(&raw.x)?;
    Ok(DesignMatrix {
        timestamps: raw.retained.iter().map(|&t| panel.rows[t].timestamp).collect(),
        dates: raw.retained.iter().map(|&t| panel.rows[t].date).collect(),
        folds,
        y: raw.retained.iter().map(|&t| panel.rows[t].redispatch_cost).collect(),
        x,
        column_names: raw.names,
        scaler,
        spec: spec.clone(),
        dropped: raw.dropped,
    })
}
