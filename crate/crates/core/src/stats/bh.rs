use super::StatsError;

/// Benjamini-Hochberg step-up adjustment.
///
/// With the p-values sorted ascending, the adjusted value at rank `i` is
/// `min_{j >= i} m * p_(j) / j`, capped at 1 and never below the raw value
/// (tied p-values can otherwise round just under it). Results come back in
/// input order.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = p_values.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(StatsError::BadPValue(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let mut adjusted = vec![0.0; m];
    let mut running = f64::INFINITY;
    for (rank0, &idx) in order.iter().enumerate().rev() {
        let candidate = m as f64 * p_values[idx] / (rank0 + 1) as f64;
        running = running.min(candidate);
        adjusted[idx] = running.min(1.0).max(p_values[idx]);
    }
    Ok(adjusted)
}
