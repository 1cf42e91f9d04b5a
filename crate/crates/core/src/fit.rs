//! Ordinary least squares for scaling-exponent extraction.
//!
//! Sweeps in this crate produce (log2 N, log2 value) pairs; the slope of the
//! best-fit line is the measured scaling exponent and the residuals say how
//! clean the power law is.

/// Result of a straight-line fit y = slope * x + intercept.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// maximum absolute residual over the sample points
    pub max_residual: f64,
    /// root-mean-square residual
    pub rms_residual: f64,
}

/// Least-squares line through (x, y) pairs. Panics if fewer than two points
/// or if all x coincide.
pub fn fit_line(points: &[(f64, f64)]) -> LineFit {
    assert!(points.len() >= 2, "need at least two points to fit a line");
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    assert!(sxx > 0.0, "abscissae are all identical");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut max_residual: f64 = 0.0;
    let mut ss = 0.0;
    for &(x, y) in points {
        let r = y - (slope * x + intercept);
        max_residual = max_residual.max(r.abs());
        ss += r * r;
    }
    LineFit { slope, intercept, max_residual, rms_residual: (ss / n).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let pts: Vec<(f64, f64)> = (0..7).map(|i| (i as f64, 3.5 * i as f64 - 2.0)).collect();
        let fit = fit_line(&pts);
        assert!((fit.slope - 3.5).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn symmetric_noise_leaves_slope_alone() {
        // residuals +e, -e at mirrored abscissae cancel in the normal equations
        let e = 0.25;
        let pts = vec![
            (-2.0, -4.0 + e),
            (-1.0, -2.0 - e),
            (1.0, 2.0 - e),
            (2.0, 4.0 + e),
        ];
        let fit = fit_line(&pts);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 0.0).abs() < 1e-12);
        assert!((fit.max_residual - e).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "identical")]
    fn vertical_data_rejected() {
        fit_line(&[(1.0, 0.0), (1.0, 5.0)]);
    }
}
