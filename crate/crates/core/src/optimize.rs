//! One-dimensional maximization.

use crate::scalar::Real;

/// Golden-section search for a maximum of `f` on `[a, b]`.
///
/// Stops once the bracket is narrower than `x_tol`. Every evaluation is
/// recorded in the returned probe list; the reported point is the best
/// probe, with ties going to the smaller abscissa.
pub fn golden_section_maximize<T, F>(mut f: F, mut a: T, mut b: T, x_tol: T) -> (T, T, Vec<(T, T)>)
where
    T: Real,
    F: FnMut(T) -> T,
{
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut probes = Vec::new();
    let mut eval = |x: T, probes: &mut Vec<(T, T)>| {
        let y = f(x);
        probes.push((x, y));
        y
    };
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(x1, &mut probes);
    let mut f2 = eval(x2, &mut probes);
    let mut guard = 0;
    while (b - a).abs() > x_tol && guard < 500 {
        guard += 1;
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(x1, &mut probes);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(x2, &mut probes);
        }
    }
    let (x, y) = best_probe(&probes);
    (x, y, probes)
}

/// Highest probe; ties resolved toward the smaller abscissa.
pub fn best_probe<T: Real>(probes: &[(T, T)]) -> (T, T) {
    let mut best = probes[0];
    for &(x, y) in &probes[1..] {
        if y > best.1 || (y == best.1 && x < best.0) {
            best = (x, y);
        }
    }
    best
}
