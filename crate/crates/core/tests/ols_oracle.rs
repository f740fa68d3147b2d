use exosir_core::ols::{fit_ols, INTERCEPT};
use rand::{Rng, SeedableRng};

/// Normal equations X'X b = X'y solved by Gaussian elimination with partial
/// pivoting. Returns the coefficients and the diagonal of (X'X)^-1.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = x[0].len();
    // augmented [X'X | X'y | I]
    let mut a = vec![vec![0.0; 2 * p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = x.iter().map(|row| row[i] * row[j]).sum();
        }
        a[i][p] = x.iter().zip(y).map(|(row, v)| row[i] * v).sum();
        a[i][p + 1 + i] = 1.0;
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..2 * p + 1 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let beta = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    let inv_diag = (0..p).map(|i| a[i][p + 1 + i] / a[i][i]).collect();
    (beta, inv_diag)
}

#[test]
fn qr_matches_normal_equations() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let n = rng.gen_range(8..40);
        let cols = rng.gen_range(1..5);
        let xs: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let truth: Vec<f64> = (0..=cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| truth[0] + (0..cols).map(|j| truth[j + 1] * xs[j][i]).sum::<f64>() + rng.gen_range(-0.3..0.3))
            .collect();

        let names: Vec<String> = (0..cols).map(|j| format!("x{j}")).collect();
        let covariates: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(xs.iter().map(Vec::as_slice)).collect();
        let report = fit_ols(&covariates, &y).unwrap();

        let design: Vec<Vec<f64>> = (0..n)
            .map(|i| std::iter::once(1.0).chain((0..cols).map(|j| xs[j][i])).collect())
            .collect();
        let (beta, inv_diag) = normal_equations(&design, &y);
        let rss: f64 = (0..n)
            .map(|i| {
                let fitted: f64 = design[i].iter().zip(&beta).map(|(a, b)| a * b).sum();
                (y[i] - fitted).powi(2)
            })
            .sum();
        let sigma2 = rss / (n - cols - 1) as f64;

        assert_eq!(report.rows[0].name, INTERCEPT);
        for (j, row) in report.rows.iter().enumerate() {
            assert!((row.coefficient - beta[j]).abs() < 1e-8, "case {case} coef {j}");
            let se = (sigma2 * inv_diag[j]).sqrt();
            assert!((row.std_error - se).abs() < 1e-8, "case {case} se {j}");
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        assert!((report.r_squared - (1.0 - rss / tss)).abs() < 1e-8);
    }
}
