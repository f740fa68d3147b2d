//! Ordinary least squares with an intercept, solved through a Householder QR
//! factorisation of the design matrix.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OlsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("covariate '{name}' has {got} values, response has {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("design matrix is rank deficient (column '{column}')")]
    Singular { column: String },
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    /// Intercept first, then covariates in the order given to [`fit_ols`].
    pub rows: Vec<CoefficientRow>,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub residual_variance: f64,
    pub n_samples: usize,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    coefficients: IndexMap<&'a str, f64>,
    std_errors: IndexMap<&'a str, f64>,
    t_stats: IndexMap<&'a str, f64>,
    p_values: IndexMap<&'a str, f64>,
    ci_95: IndexMap<&'a str, [f64; 2]>,
    adj_r_squared: f64,
    n: usize,
}

impl RegressionReport {
    pub fn row(&self, name: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.row(name).map(|r| r.coefficient)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map = |f: fn(&CoefficientRow) -> f64| -> IndexMap<&str, f64> {
            self.rows.iter().map(|r| (r.name.as_str(), f(r))).collect()
        };
        let json = ReportJson {
            coefficients: map(|r| r.coefficient),
            std_errors: map(|r| r.std_error),
            t_stats: map(|r| r.t_statistic),
            p_values: map(|r| r.p_value),
            ci_95: self
                .rows
                .iter()
                .map(|r| (r.name.as_str(), [r.ci_low, r.ci_high]))
                .collect(),
            adj_r_squared: self.adjusted_r_squared,
            n: self.n_samples,
        };
        serde_json::to_value(json).expect("report serialises")
    }
}

/// Fits `response ~ 1 + covariates`. Standard errors use the unbiased
/// residual variance; intervals and two-sided p-values use Student's t with
/// `n - p` degrees of freedom, `p` counting the intercept.
pub fn fit_ols(covariates: &[(&str, &[f64])], response: &[f64]) -> Result<RegressionReport, OlsError> {
    let n = response.len();
    let p = covariates.len() + 1;
    let needed = (p + 1).max(5);
    if n < needed {
        return Err(OlsError::TooFewSamples { needed, got: n });
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(OlsError::NonFinite("response".into()));
    }
    for (name, col) in covariates {
        if col.len() != n {
            return Err(OlsError::LengthMismatch {
                name: name.to_string(),
                got: col.len(),
                expected: n,
            });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(OlsError::NonFinite(name.to_string()));
        }
    }
    let names: Vec<&str> = std::iter::once(INTERCEPT)
        .chain(covariates.iter().map(|(name, _)| *name))
        .collect();

    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[j - 1].1[i] });
    let y = DVector::from_column_slice(response);
    let qr = x.clone().qr();
    let r = qr.r();

    let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(j) = (0..p).find(|&j| r[(j, j)].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(OlsError::Singular {
            column: names[j].to_string(),
        });
    }

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty_head = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&qty_head)
        .ok_or_else(|| OlsError::Singular {
            column: names[p - 1].to_string(),
        })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| OlsError::Singular {
            column: names[p - 1].to_string(),
        })?;

    let residuals = &y - &x * &beta;
    let rss = residuals.norm_squared();
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let adjusted_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df;

    let t_dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let t_crit = t_dist.inverse_cdf(0.975);

    let rows = (0..p)
        .map(|j| {
            // (X'X)^-1 = R^-1 R^-T, so its diagonal is the squared row norm of R^-1
            let std_error = (sigma2 * r_inv.row(j).norm_squared()).sqrt();
            let coefficient = beta[j];
            let t_statistic = coefficient / std_error;
            let p_value = if t_statistic.is_nan() {
                f64::NAN
            } else {
                2.0 * t_dist.sf(t_statistic.abs())
            };
            CoefficientRow {
                name: names[j].to_string(),
                coefficient,
                std_error,
                t_statistic,
                p_value,
                ci_low: coefficient - t_crit * std_error,
                ci_high: coefficient + t_crit * std_error,
            }
        })
        .collect();

    Ok(RegressionReport {
        rows,
        r_squared,
        adjusted_r_squared,
        residual_variance: sigma2,
        n_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data_recovered() {
        let x1: Vec<f64> = (0..20).map(|k| (k as f64 * 0.37).sin()).collect();
        let x2: Vec<f64> = (0..20).map(|k| (k as f64 * 1.3).cos()).collect();
        let x3: Vec<f64> = (0..20).map(|k| (k as f64 * 0.11).powi(2)).collect();
        let y: Vec<f64> = (0..20).map(|k| 0.5 * x1[k] + 0.0 * x2[k] - 0.3 * x3[k]).collect();
        let rep = fit_ols(&[("x1", &x1), ("x2", &x2), ("x3", &x3)], &y).unwrap();
        assert!(rep.coefficient(INTERCEPT).unwrap().abs() < 1e-10);
        assert!((rep.coefficient("x1").unwrap() - 0.5).abs() < 1e-10);
        assert!(rep.coefficient("x2").unwrap().abs() < 1e-10);
        assert!((rep.coefficient("x3").unwrap() + 0.3).abs() < 1e-10);
        assert!((rep.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let x1: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v + 1.0).collect();
        let y: Vec<f64> = (0..10).map(|k| (k * k) as f64).collect();
        let err = fit_ols(&[("x1", &x1), ("x2", &x2)], &y).unwrap_err();
        assert!(matches!(err, OlsError::Singular { .. }), "{err}");
    }

    #[test]
    fn too_few_samples_rejected() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let err = fit_ols(&[("x", &x)], &[1.0, 2.0, 3.0, 5.0]).unwrap_err();
        assert_eq!(err, OlsError::TooFewSamples { needed: 5, got: 4 });
    }

    #[test]
    fn simple_regression_textbook_values() {
        // y = 1 + 2x with residuals (+1, -1, -1, +1, 0) around the line
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [4.0, 4.0, 6.0, 10.0, 11.0];
        let rep = fit_ols(&[("x", &x)], &y).unwrap();
        let slope = rep.row("x").unwrap();
        // Sxy = 20, Sxx = 10
        assert!((slope.coefficient - 2.0).abs() < 1e-12);
        assert!((rep.coefficient(INTERCEPT).unwrap() - 1.0).abs() < 1e-12);
        // rss = 4, sigma^2 = 4/3, se(slope) = sqrt(sigma^2 / Sxx)
        assert!((slope.std_error - (4.0f64 / 30.0).sqrt()).abs() < 1e-12);
        // reference t-distribution values (df = 3) from scipy.stats
        assert!((slope.p_value - 0.011966912298547419).abs() < 1e-9);
        let half_width = 3.182446305284263 * slope.std_error;
        assert!((slope.ci_high - slope.coefficient - half_width).abs() < 1e-9);
        assert!((slope.coefficient - slope.ci_low - half_width).abs() < 1e-9);
        // tss = 44
        assert!((rep.r_squared - (1.0 - 1.0 / 11.0)).abs() < 1e-12);
        assert!((rep.adjusted_r_squared - (1.0 - 4.0 / 33.0)).abs() < 1e-12);
    }

    #[test]
    fn json_field_names() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.1, 1.9, 3.2, 3.9, 5.1, 6.2];
        let json = fit_ols(&[("x", &x)], &y).unwrap().to_json();
        let obj = json.as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            ["coefficients", "std_errors", "t_stats", "p_values", "ci_95", "adj_r_squared", "n"]
        );
        assert_eq!(obj["n"], 6);
        assert!(obj["ci_95"]["x"].as_array().unwrap().len() == 2);
    }
}
