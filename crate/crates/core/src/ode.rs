//! Adaptive Dormand-Prince 5(4) integrator for small autonomous-in-form systems.

/// Tolerances and step limits for [`integrate_interval`].
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_substeps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: f64::INFINITY,
            max_substeps: 100_000,
        }
    }
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [f64; 2];

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns the state at `t1`,
/// or `None` when the step size collapses or the substep budget is exhausted.
///
/// `h` carries the step-size suggestion between calls.
pub fn integrate_interval<F>(
    f: &F,
    t0: f64,
    y0: State,
    t1: f64,
    h: &mut f64,
    ctl: &StepControl,
) -> Option<State>
where
    F: Fn(f64, &State) -> State,
{
    let mut t = t0;
    let mut y = y0;
    let span = t1 - t0;
    if span <= 0.0 {
        return Some(y);
    }
    let mut k1 = f(t, &y);
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > ctl.max_substeps {
            return None;
        }
        let mut step = h.min(ctl.max_step).min(t1 - t);
        let last = t + step >= t1;
        if last {
            step = t1 - t;
        }
        let k2 = f(t + C2 * step, &axpy(&y, &[(A21, &k1)], step));
        let k3 = f(t + C3 * step, &axpy(&y, &[(A31, &k1), (A32, &k2)], step));
        let k4 = f(
            t + C4 * step,
            &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], step),
        );
        let k5 = f(
            t + C5 * step,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], step),
        );
        let k6 = f(
            t + step,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                step,
            ),
        );
        let y_new = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            step,
        );
        let k7 = f(t + step, &y_new);
        let mut err = 0.0f64;
        for i in 0..2 {
            let e = step
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            *h = step * 0.1;
            if *h < 1e-14 * span.max(1.0) {
                return None;
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y_new;
            k1 = k7;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || grow < 1.0 {
                *h = step * grow;
            }
        } else {
            *h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if *h < 1e-14 * span.max(1.0) {
                return None;
            }
        }
    }
    Some(y)
}
