//! Survey-weighted least squares with cluster-robust inference.
//!
//! Coefficients come from a Householder QR factorization of the weighted
//! system `W^(1/2) X`, never from forming `X'WX` explicitly. The covariance is
//! the usual sandwich
//!
//! ```text
//! V = (X'WX)^-1 [ sum_g s_g s_g' ] (X'WX)^-1,    s_g = sum_{i in g} w_i x_i e_i
//! ```
//!
//! optionally scaled by `G/(G-1) * (n-1)/(n-k)` (CR1).

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::design::{interaction_name, DesignMatrix, ModelId, ModelSpec, LOG_PF, LOG_PI, LOG_PT};

/// Columns whose orthogonal remainder falls below this fraction of their
/// norm are treated as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("design is rank deficient; dependent columns: {}", describe_columns(columns, names))]
    RankDeficient { columns: Vec<usize>, names: Vec<String> },
    #[error("weight at row {row} is not positive ({value})")]
    NonPositiveWeight { row: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("only one cluster; cluster-robust inference is unreliable")]
    SingleCluster,
    #[error("response has zero weighted variance; pseudo R^2 is undefined")]
    DegenerateResponse,
    #[error("fit has no coefficient {0:?} required by the model specification")]
    MissingCoefficient(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

fn describe_columns(columns: &[usize], names: &[String]) -> String {
    if names.len() == columns.len() && !names.is_empty() {
        names.join(", ")
    } else {
        columns.iter().map(|c| format!("#{c}")).collect::<Vec<_>>().join(", ")
    }
}

/// Small-sample correction for the cluster-robust covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Correction {
    CR0,
    #[default]
    CR1,
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::CR0 => "CR0",
            Correction::CR1 => "CR1",
        })
    }
}

/// Weighted least-squares solution.
#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub beta: DVector<f64>,
    /// Unweighted residuals `y - X beta`.
    pub residuals: DVector<f64>,
    /// `(X'WX)^-1`.
    pub xtwx_inv: DMatrix<f64>,
}

fn check_inputs(x: &DMatrix<f64>, n_other: usize, w: &DVector<f64>, what: &str) -> Result<(), EstimatorError> {
    if x.nrows() != n_other || x.nrows() != w.len() {
        return Err(EstimatorError::Dimension(format!(
            "X has {} rows, {what} has {n_other}, weights have {}",
            x.nrows(),
            w.len()
        )));
    }
    if let Some((row, &value)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(EstimatorError::NonPositiveWeight { row, value });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite("regressors"));
    }
    Ok(())
}

/// QR of `W^(1/2) X`; returns the factorization of the scaled matrix after
/// checking for dependent columns.
fn weighted_qr(
    x: &DMatrix<f64>,
    w: &DVector<f64>,
) -> Result<(nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>, DVector<f64>), EstimatorError> {
    let (n, k) = x.shape();
    let sqrt_w = w.map(f64::sqrt);
    let mut a = x.clone();
    for mut col in a.column_iter_mut() {
        col.component_mul_assign(&sqrt_w);
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if n < k {
        return Err(EstimatorError::RankDeficient { columns: (n..k).collect(), names: Vec::new() });
    }
    let qr = a.qr();
    let r = qr.r();
    let dependent: Vec<usize> =
        (0..k).filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * norms[j]).collect();
    if !dependent.is_empty() {
        return Err(EstimatorError::RankDeficient { columns: dependent, names: Vec::new() });
    }
    Ok((qr, sqrt_w))
}

fn r_inverse(r: &DMatrix<f64>) -> DMatrix<f64> {
    let k = r.nrows();
    r.solve_upper_triangular(&DMatrix::identity(k, k)).expect("R has a non-zero diagonal after the rank check")
}

/// Minimize `sum_i w_i (y_i - x_i' beta)^2`.
pub fn wls_fit(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<WlsSolution, EstimatorError> {
    check_inputs(x, y.len(), w, "y")?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite("response"));
    }
    let k = x.ncols();
    let (qr, sqrt_w) = weighted_qr(x, w)?;
    let mut qty = y.component_mul(&sqrt_w);
    qr.q_tr_mul(&mut qty);
    let r = qr.r();
    let beta = r
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .expect("R has a non-zero diagonal after the rank check");
    let residuals = y - x * &beta;
    let r_inv = r_inverse(&r);
    let xtwx_inv = &r_inv * r_inv.transpose();
    Ok(WlsSolution { beta, residuals, xtwx_inv })
}

/// Map cluster labels to dense indices in sorted-label order.
fn cluster_index(clusters: &[String]) -> (Vec<usize>, usize) {
    let mut labels: BTreeMap<&str, usize> = clusters.iter().map(|c| (c.as_str(), 0)).collect();
    for (i, v) in labels.values_mut().enumerate() {
        *v = i;
    }
    (clusters.iter().map(|c| labels[c.as_str()]).collect(), labels.len())
}

/// Cluster-robust sandwich covariance of WLS coefficients.
///
/// A single cluster is an error unless `allow_single_cluster` is set, in
/// which case CR1 falls back to CR0 scaling.
pub fn cluster_robust_cov(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    w: &DVector<f64>,
    clusters: &[String],
    correction: Correction,
    allow_single_cluster: bool,
) -> Result<DMatrix<f64>, EstimatorError> {
    check_inputs(x, residuals.len(), w, "residuals")?;
    if clusters.len() != x.nrows() {
        return Err(EstimatorError::Dimension(format!(
            "{} cluster labels for {} rows",
            clusters.len(),
            x.nrows()
        )));
    }
    let (n, k) = x.shape();
    let (qr, _) = weighted_qr(x, w)?;
    let r_inv = r_inverse(&qr.r());
    let bread = &r_inv * r_inv.transpose();

    let (idx, g) = cluster_index(clusters);
    if g < 2 && !allow_single_cluster {
        return Err(EstimatorError::SingleCluster);
    }
    let mut scores = DMatrix::<f64>::zeros(g, k);
    for i in 0..n {
        let we = w[i] * residuals[i];
        let c = idx[i];
        for j in 0..k {
            scores[(c, j)] += we * x[(i, j)];
        }
    }
    let meat = scores.transpose() * &scores;
    let mut v = &bread * meat * &bread;
    if correction == Correction::CR1 && g > 1 && n > k {
        let gf = g as f64;
        v *= gf / (gf - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    }
    let v = (&v + v.transpose()) * 0.5;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub correction: Correction,
    pub allow_single_cluster: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { correction: Correction::CR1, allow_single_cluster: false }
    }
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupElasticity {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_f: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_t: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_vmt: Option<Estimate>,
}

/// Elasticities read off a fitted model, overall and per income group.
///
/// For an interacted fit the overall fields are empty and `per_group` holds
/// base + interaction for each group. For an uninteracted fit every group
/// carries the overall value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticitySet {
    pub model: ModelId,
    pub interacted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_f: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_t: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_vmt: Option<Estimate>,
    #[serde(default)]
    pub per_group: BTreeMap<u8, GroupElasticity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub vcov: Vec<Vec<f64>>,
    pub pseudo_r2: f64,
    pub n: usize,
    pub n_clusters: usize,
    pub sum_weights: f64,
    pub correction: Correction,
    /// How p-values were computed.
    pub p_value_method: String,
    pub income_groups: Vec<u8>,
    pub elasticities: ElasticitySet,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<Estimate> {
        self.index(name).map(|i| Estimate { value: self.beta[i], se: self.se[i] })
    }

    pub fn cov(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.vcov[self.index(a)?][self.index(b)?])
    }
}

/// Two-sided p-value under the standard normal.
pub fn normal_p_value(z: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * std.sf(z.abs())).min(1.0)
}

/// Weighted `1 - SSR/SST` with SST about the weighted mean.
pub fn pseudo_r2(y: &DVector<f64>, residuals: &DVector<f64>, w: &DVector<f64>) -> Result<f64, EstimatorError> {
    let sw: f64 = w.sum();
    let mean = y.dot(w) / sw;
    let sst: f64 = y.iter().zip(w.iter()).map(|(yi, wi)| wi * (yi - mean).powi(2)).sum();
    let ssr: f64 = residuals.iter().zip(w.iter()).map(|(e, wi)| wi * e * e).sum();
    if !(sst > 0.0) || sst <= 1e-300 || sst <= f64::EPSILON * f64::EPSILON * y.dot(&y.component_mul(w)) {
        return Err(EstimatorError::DegenerateResponse);
    }
    Ok((1.0 - ssr / sst).clamp(0.0, 1.0))
}

/// Fit one model specification: WLS, clustered covariance, fit statistics,
/// and elasticities.
pub fn fit_model(design: &DesignMatrix, spec: &ModelSpec, options: FitOptions) -> Result<FitResult, EstimatorError> {
    let name_cols = |e: EstimatorError| match e {
        EstimatorError::RankDeficient { columns, .. } => {
            let names = columns.iter().map(|&c| design.column_names.get(c).cloned().unwrap_or_default()).collect();
            EstimatorError::RankDeficient { columns, names }
        }
        other => other,
    };
    let sol = wls_fit(&design.x, &design.y, &design.w).map_err(name_cols)?;
    let r2 = pseudo_r2(&design.y, &sol.residuals, &design.w)?;
    let vcov = cluster_robust_cov(
        &design.x,
        &sol.residuals,
        &design.w,
        &design.clusters,
        options.correction,
        options.allow_single_cluster,
    )
    .map_err(name_cols)?;
    let k = design.k();
    let se: Vec<f64> = (0..k).map(|j| vcov[(j, j)].max(0.0).sqrt()).collect();
    let beta: Vec<f64> = sol.beta.iter().copied().collect();
    let z: Vec<f64> = beta
        .iter()
        .zip(&se)
        .map(|(b, s)| if *s > 0.0 { b / s } else if *b == 0.0 { 0.0 } else { b.signum() * f64::INFINITY })
        .collect();
    let p_values = z.iter().map(|&z| normal_p_value(z)).collect();
    let (_, n_clusters) = cluster_index(&design.clusters);

    let mut fit = FitResult {
        spec: spec.clone(),
        names: design.column_names.clone(),
        beta,
        se,
        z,
        p_values,
        vcov: (0..k).map(|i| (0..k).map(|j| vcov[(i, j)]).collect()).collect(),
        pseudo_r2: r2,
        n: design.n(),
        n_clusters,
        sum_weights: design.w.sum(),
        correction: options.correction,
        p_value_method: "normal approximation".into(),
        income_groups: design.group_levels.clone(),
        elasticities: ElasticitySet {
            model: spec.model,
            interacted: spec.interact_income,
            eps_f: None,
            eps_t: None,
            eps_vmt: None,
            per_group: BTreeMap::new(),
        },
    };
    fit.elasticities = extract_elasticities(&fit, spec)?;
    Ok(fit)
}

/// Per-group and overall elasticities from a fit.
pub fn extract_elasticities(fit: &FitResult, spec: &ModelSpec) -> Result<ElasticitySet, EstimatorError> {
    let mut set = ElasticitySet {
        model: spec.model,
        interacted: spec.interact_income,
        eps_f: None,
        eps_t: None,
        eps_vmt: None,
        per_group: fit.income_groups.iter().map(|&g| (g, GroupElasticity::default())).collect(),
    };
    let base_group = fit.income_groups.first().copied();
    for &price in spec.model.price_columns() {
        let base = fit.coef(price).ok_or_else(|| EstimatorError::MissingCoefficient(price.to_string()))?;
        for (&g, slot) in set.per_group.iter_mut() {
            let est = if !spec.interact_income || Some(g) == base_group {
                base
            } else {
                let inter = interaction_name(price, g);
                let i = fit.coef(&inter).ok_or_else(|| EstimatorError::MissingCoefficient(inter.clone()))?;
                let cov = fit.cov(price, &inter).unwrap_or(0.0);
                Estimate { value: base.value + i.value, se: (base.se.powi(2) + i.se.powi(2) + 2.0 * cov).max(0.0).sqrt() }
            };
            let field = match price {
                LOG_PF => &mut slot.eps_f,
                LOG_PT => &mut slot.eps_t,
                _ => &mut slot.eps_vmt,
            };
            *field = Some(est);
        }
        if !spec.interact_income {
            let field = match price {
                LOG_PF => &mut set.eps_f,
                LOG_PT => &mut set.eps_t,
                LOG_PI => &mut set.eps_vmt,
                _ => unreachable!(),
            };
            *field = Some(base);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dm(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn exact_fit_through_origin() {
        let x = dm(&[&[1.0], &[2.0], &[3.0]]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let w = DVector::from_element(3, 1.0);
        let sol = wls_fit(&x, &y, &w).unwrap();
        assert_relative_eq!(sol.beta[0], 2.0, max_relative = 1e-14);
        assert!(sol.residuals.amax() < 1e-14);
    }

    #[test]
    fn duplicate_column_detected() {
        let x = dm(&[&[1.0, 0.5, 0.5], &[1.0, 1.5, 1.5], &[1.0, 2.0, 2.0], &[1.0, 4.0, 4.0]]);
        let y = DVector::from_vec(vec![1.0, 2.0, 2.5, 3.0]);
        let w = DVector::from_element(4, 1.0);
        let err = wls_fit(&x, &y, &w).unwrap_err();
        assert_eq!(err, EstimatorError::RankDeficient { columns: vec![2], names: vec![] });
    }

    #[test]
    fn zero_weight_rejected() {
        let x = dm(&[&[1.0], &[2.0]]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let w = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(wls_fit(&x, &y, &w), Err(EstimatorError::NonPositiveWeight { row: 1, .. })));
    }

    #[test]
    fn single_cluster_is_an_error_unless_allowed() {
        let x = dm(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0]]);
        let e = DVector::from_vec(vec![0.1, -0.2, 0.1]);
        let w = DVector::from_element(3, 1.0);
        let c = vec!["a".to_string(); 3];
        assert_eq!(cluster_robust_cov(&x, &e, &w, &c, Correction::CR1, false), Err(EstimatorError::SingleCluster));
        assert!(cluster_robust_cov(&x, &e, &w, &c, Correction::CR1, true).is_ok());
    }

    #[test]
    fn singleton_clusters_equal_hc0() {
        let x = dm(&[&[1.0, 0.3], &[1.0, 1.1], &[1.0, 2.0], &[1.0, 2.9], &[1.0, 4.2]]);
        let y = DVector::from_vec(vec![0.9, 1.7, 3.2, 3.8, 5.5]);
        let w = DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5, 1.0]);
        let sol = wls_fit(&x, &y, &w).unwrap();
        let clusters: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let v = cluster_robust_cov(&x, &sol.residuals, &w, &clusters, Correction::CR0, false).unwrap();
        // HC0: B (sum w_i^2 e_i^2 x_i x_i') B
        let mut meat = DMatrix::zeros(2, 2);
        for i in 0..5 {
            let xi = x.row(i).transpose();
            meat += &xi * xi.transpose() * (w[i] * sol.residuals[i]).powi(2);
        }
        let hc0 = &sol.xtwx_inv * meat * &sol.xtwx_inv;
        for (a, b) in v.iter().zip(hc0.iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_response() {
        let y = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        let e = DVector::zeros(3);
        let w = DVector::from_element(3, 1.0);
        assert_eq!(pseudo_r2(&y, &e, &w), Err(EstimatorError::DegenerateResponse));
    }

    #[test]
    fn p_values() {
        assert_relative_eq!(normal_p_value(1.959_963_984_540_054), 0.05, max_relative = 1e-9);
        assert_eq!(normal_p_value(0.0), 1.0);
        assert_eq!(normal_p_value(f64::INFINITY), 0.0);
    }
}
