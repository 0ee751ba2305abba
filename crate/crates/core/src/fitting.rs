//! Least-squares slope fitting in log-log coordinates, shared by the oracle
//! rate measurements and the convergence harness.

/// Fit log(err) = slope * log(x) + c; returns (slope, rms residual).
/// Pairs with nonpositive entries are skipped.
pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    (slope, (rss / n).sqrt())
}

/// Pairwise observed order log2(e_coarse / e_fine) for a tau-halving sequence.
pub fn pairwise_orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
