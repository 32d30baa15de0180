//! Empirical convergence order from a trace.

use qpush_core::report::TraceCsvRow;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeOutcome {
    /// Least-squares slope of `log₁₀(f(x̄(t)) − f*)` against `log₁₀ t`.
    Slope { slope: f64, points: usize },
    /// Some error in the window was not positive, i.e. the average already
    /// sits at or below `f*`; no slope is reported.
    BelowFloor { t: usize, error: f64 },
}

/// Fits the log-log slope of the objective error over the recorded rows
/// with `lo ≤ t ≤ hi`. `f_star` is in minimization form, like the trace.
pub fn slope_check(
    rows: &[TraceCsvRow],
    f_star: f64,
    lo: usize,
    hi: usize,
) -> Result<SlopeOutcome, CliError> {
    if lo == 0 || lo >= hi {
        return Err(CliError::Config(format!("bad slope window [{lo}, {hi}]")));
    }
    let window: Vec<&TraceCsvRow> = rows.iter().filter(|r| (lo..=hi).contains(&r.t)).collect();
    if window.len() < 2 {
        return Err(CliError::Config(format!(
            "trace has {} rows in [{lo}, {hi}]; need at least 2",
            window.len()
        )));
    }
    let mut pts = Vec::with_capacity(window.len());
    for r in window {
        let error = r.f_xbar - f_star;
        if !(error > 0.0) {
            return Ok(SlopeOutcome::BelowFloor { t: r.t, error });
        }
        pts.push(((r.t as f64).log10(), error.log10()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(SlopeOutcome::Slope {
        slope: sxy / sxx,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(err: impl Fn(f64) -> f64) -> Vec<TraceCsvRow> {
        (1..=1000)
            .map(|t| TraceCsvRow {
                t,
                f_xbar: 2.0 + err(t as f64),
                max_violation: 0.0,
                queue_norm: 0.0,
                drift: 0.0,
                drift_bound: 0.0,
                obj_bound_residual: None,
                cons_bound_residual: None,
            })
            .collect()
    }

    fn slope(outcome: SlopeOutcome) -> f64 {
        match outcome {
            SlopeOutcome::Slope { slope, .. } => slope,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_power_laws() {
        let s = slope(slope_check(&trace(|t| 3.0 / t), 2.0, 10, 1000).unwrap());
        assert!((s + 1.0).abs() < 1e-6, "{s}");
        let s = slope(slope_check(&trace(|t| 3.0 / t.sqrt()), 2.0, 10, 1000).unwrap());
        assert!((s + 0.5).abs() < 1e-6, "{s}");
    }

    #[test]
    fn nonpositive_error_is_reported_not_fitted() {
        let out = slope_check(
            &trace(|t| if t > 500.0 { 0.0 } else { 1.0 / t }),
            2.0,
            10,
            1000,
        )
        .unwrap();
        assert!(matches!(out, SlopeOutcome::BelowFloor { t: 501, .. }));
    }

    #[test]
    fn window_must_cover_rows() {
        assert!(slope_check(&trace(|t| 1.0 / t), 2.0, 2000, 3000).is_err());
        assert!(slope_check(&trace(|t| 1.0 / t), 2.0, 0, 3000).is_err());
    }
}
