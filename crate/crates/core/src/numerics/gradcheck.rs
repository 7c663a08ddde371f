use super::{GradBuffer, ParamStore};

/// Denominator floor for the relative error, so components whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst component.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares analytic gradients against central differences
/// `(L(theta + h) - L(theta - h)) / 2h` for every parameter component.
///
/// `loss` returns the loss and its analytic gradient at the given values.
/// Parameter values are restored before returning.
pub fn check_gradients<F>(store: &mut ParamStore, loss: F, h: f64) -> GradCheckReport
where
    F: Fn(&ParamStore) -> (f64, GradBuffer),
{
    let (_, analytic) = loss(store);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let ids: Vec<_> = (0..store.len()).map(super::ParamId).collect();
    for id in ids {
        let n = store.value(id).len();
        for k in 0..n {
            let orig = store.value(id)[k];
            store.value_mut(id)[k] = orig + h;
            let (up, _) = loss(store);
            store.value_mut(id)[k] = orig - h;
            let (down, _) = loss(store);
            store.value_mut(id)[k] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic.get(id)[k];
            let denom = a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error || !rel.is_finite() {
                report.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
                report.worst = Some((store.get(id).name.clone(), k));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}
