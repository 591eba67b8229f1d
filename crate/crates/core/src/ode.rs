//! Adaptive Dormand–Prince 5(4) integrator with per-component error control.
//!
//! The integrator lands exactly on every requested stop time instead of
//! interpolating, so snapshots are reproducible bit for bit.

use crate::scalar::{Real, C};

/// Element of an ODE state vector.
pub trait OdeValue<T: Real>: Copy + Send + Sync {
    fn zero() -> Self;
    /// `self + a·x`
    fn axpy(self, a: T, x: Self) -> Self;
    fn magnitude(self) -> T;
}

impl<T: Real> OdeValue<T> for T {
    #[inline]
    fn zero() -> Self {
        T::zero()
    }
    #[inline]
    fn axpy(self, a: T, x: Self) -> Self {
        self + a * x
    }
    #[inline]
    fn magnitude(self) -> T {
        self.abs()
    }
}

impl<T: Real> OdeValue<T> for C<T> {
    #[inline]
    fn zero() -> Self {
        C::new(T::zero(), T::zero())
    }
    #[inline]
    fn axpy(self, a: T, x: Self) -> Self {
        C::new(self.re + a * x.re, self.im + a * x.im)
    }
    #[inline]
    fn magnitude(self) -> T {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl<T: Real = f64> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub max_steps: usize,
}

impl<T: Real> Default for StepControl<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-12),
            max_step: T::infinity(),
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeFailure<T: Real> {
    /// Step size fell below the resolvable minimum; `component` carried the
    /// largest scaled error on the last rejected step.
    Underflow { t: T, step: T, component: usize },
    StepLimit(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// `out = y + h Σ_j a_j k_j`
fn combine<T: Real, V: OdeValue<T>>(out: &mut [V], y: &[V], h: T, terms: &[(f64, &[V])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = y[i];
        for &(a, k) in terms {
            acc = acc.axpy(h * T::lit(a), k[i]);
        }
        *o = acc;
    }
}

/// Integrates `dy/dt = rhs(t, y)` from `t0`, stopping exactly at each time
/// in `stops` (sorted, all `> t0`) and handing the state to `on_stop`.
pub fn integrate<T, V, F, S>(
    mut rhs: F,
    t0: T,
    y: &mut [V],
    stops: &[T],
    control: &StepControl<T>,
    mut on_stop: S,
) -> Result<OdeStats, OdeFailure<T>>
where
    T: Real,
    V: OdeValue<T>,
    F: FnMut(T, &[V], &mut [V]),
    S: FnMut(T, &[V]),
{
    let n = y.len();
    let mut stats = OdeStats::default();
    let Some(&t_final) = stops.last() else {
        return Ok(stats);
    };
    let mut k: Vec<Vec<V>> = (0..7).map(|_| vec![V::zero(); n]).collect();
    let mut tmp = vec![V::zero(); n];
    let mut y_new = vec![V::zero(); n];

    // Decaying components would otherwise sink into subnormal range, where
    // arithmetic is orders of magnitude slower; they sit far below any
    // tolerance, so they are set to zero.
    let flush = T::min_positive_value().sqrt();
    let mut t = t0;
    rhs(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    let mut h = initial_step(y, &k[0], control, t_final - t0);
    let mut stop_idx = 0;
    let mut last_bad = 0usize;

    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        if t >= target {
            on_stop(target, y);
            stop_idx += 1;
            continue;
        }
        if stats.accepted + stats.rejected >= control.max_steps {
            return Err(OdeFailure::StepLimit(control.max_steps));
        }
        let h_min = T::epsilon() * T::lit(16.0) * t.abs().max(T::one());
        if h < h_min {
            return Err(OdeFailure::Underflow { t, step: h, component: last_bad });
        }
        let mut lands = false;
        let mut step = h.min(control.max_step);
        if t + step >= target - h_min {
            step = target - t;
            lands = true;
        }

        {
            let (k1, rest) = k.split_at_mut(1);
            let k1 = &k1[0];
            let (k2, rest) = rest.split_first_mut().unwrap();
            combine(&mut tmp, y, step, &[(A21, k1)]);
            rhs(t + T::lit(C2) * step, &tmp, k2);
            let (k3, rest) = rest.split_first_mut().unwrap();
            combine(&mut tmp, y, step, &[(A31, k1), (A32, k2)]);
            rhs(t + T::lit(C3) * step, &tmp, k3);
            let (k4, rest) = rest.split_first_mut().unwrap();
            combine(&mut tmp, y, step, &[(A41, k1), (A42, k2), (A43, k3)]);
            rhs(t + T::lit(C4) * step, &tmp, k4);
            let (k5, rest) = rest.split_first_mut().unwrap();
            combine(&mut tmp, y, step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            rhs(t + T::lit(C5) * step, &tmp, k5);
            let (k6, rest) = rest.split_first_mut().unwrap();
            combine(&mut tmp, y, step, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
            rhs(t + step, &tmp, k6);
            let k7 = &mut rest[0];
            combine(&mut y_new, y, step, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
            rhs(t + step, &y_new, k7);
            stats.rhs_evals += 6;
        }

        let mut err = T::zero();
        for i in 0..n {
            let mut e = V::zero();
            for (coef, kj) in [(E1, &k[0]), (E3, &k[2]), (E4, &k[3]), (E5, &k[4]), (E6, &k[5]), (E7, &k[6])] {
                e = e.axpy(step * T::lit(coef), kj[i]);
            }
            let sc = control.abs_tol + control.rel_tol * y[i].magnitude().max(y_new[i].magnitude());
            let ratio = e.magnitude() / sc;
            if !(ratio <= err) {
                err = ratio;
                last_bad = i;
            }
        }

        if err <= T::one() {
            stats.accepted += 1;
            for (yi, &yn) in y.iter_mut().zip(&y_new) {
                *yi = if yn.magnitude() < flush { V::zero() } else { yn };
            }
            k.swap(0, 6);
            t = if lands { target } else { t + step };
            let grow = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
            };
            // Keep the controller's step rather than a truncated landing step.
            h = if lands { h.max(step) } else { step * grow };
        } else {
            stats.rejected += 1;
            let shrink = if err.is_finite() {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2))
            } else {
                T::lit(0.2)
            };
            h = step * shrink.min(T::one());
        }
    }
    Ok(stats)
}

fn initial_step<T: Real, V: OdeValue<T>>(y: &[V], f: &[V], control: &StepControl<T>, span: T) -> T {
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for (yi, fi) in y.iter().zip(f) {
        let sc = control.abs_tol + control.rel_tol * yi.magnitude();
        d0 = d0.max(yi.magnitude() / sc);
        d1 = d1.max(fi.magnitude() / sc);
    }
    let guess = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    guess.min(control.max_step).min(span.abs().max(T::epsilon()))
}
