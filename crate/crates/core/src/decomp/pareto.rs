/// Indices of the non-dominated `(error, cost)` points, ascending.
///
/// A point is dominated when another point is no worse in both coordinates and
/// strictly better in at least one. Identical points do not dominate each other.
/// `NaN` coordinates never dominate and are never dominated.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let dominates = |a: (f64, f64), b: (f64, f64)| {
        a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
    };
    (0..points.len())
        .filter(|&i| !points.iter().any(|&p| dominates(p, points[i])))
        .collect()
}
