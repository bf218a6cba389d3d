//! Explicit adaptive Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! The integrator works on fixed-size states `[f64; N]` so the planar model,
//! its sensitivity system and the scalar frontier equation share one code
//! path without heap allocation. Accepted steps are handed to an observer
//! together with the fourth-order continuous extension, which is how output
//! grids and event locations are produced.

use std::ops::ControlFlow;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("maximum number of steps ({max_steps}) exceeded at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
}

/// Error control and step limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|.
    pub h_max: f64,
    /// Initial step; estimated from the right-hand side when absent.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }

    pub fn h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 1_000_000,
        }
    }
}

// Butcher tableau.
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

// Difference between the fifth and fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its dense-output polynomial.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t_old: f64,
    pub t_new: f64,
    pub y_old: [f64; N],
    pub y_new: [f64; N],
    cont: [[f64; N]; 4],
}

impl<const N: usize> DenseStep<N> {
    /// Evaluates the continuous extension at `t ∈ [t_old, t_new]`.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        if t == self.t_new {
            return self.y_new;
        }
        if t == self.t_old {
            return self.y_old;
        }
        let h = self.t_new - self.t_old;
        let s = (t - self.t_old) / h;
        let s1 = 1.0 - s;
        let [r2, r3, r4, r5] = &self.cont;
        std::array::from_fn(|i| {
            self.y_old[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])))
        })
    }

    pub fn h(&self) -> f64 {
        self.t_new - self.t_old
    }
}

/// Final state of an integration run.
#[derive(Debug, Clone, Copy)]
pub struct OdeOutcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    /// Step size proposed for continuing from `t`.
    pub next_h: f64,
    /// True when the observer requested an early stop.
    pub stopped: bool,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        y[i] + h * acc
    })
}

struct StageResult<const N: usize> {
    y_new: [f64; N],
    k: [[f64; N]; 7],
}

fn stages<const N: usize, F>(
    rhs: &mut F,
    t: f64,
    y: &[f64; N],
    k1: [f64; N],
    h: f64,
) -> StageResult<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k2 = rhs(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
    let k3 = rhs(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = rhs(
        t + C4 * h,
        &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
    );
    let k5 = rhs(
        t + C5 * h,
        &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        t + h,
        &axpy(
            y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    );
    let y_new = axpy(
        y,
        h,
        &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = rhs(t + h, &y_new);
    StageResult {
        y_new,
        k: [k1, k2, k3, k4, k5, k6, k7],
    }
}

/// Takes a single fifth-order step of length `h` without error control.
///
/// Used to relocate events inside an accepted step.
pub fn single_step<const N: usize, F>(mut rhs: F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = rhs(t, y);
    stages(&mut rhs, t, y, k1, h).y_new
}

fn error_norm<const N: usize>(
    y: &[f64; N],
    y_new: &[f64; N],
    k: &[[f64; N]; 7],
    h: f64,
    opts: &OdeOptions,
) -> f64 {
    let mut sum = 0.0;
    for i in 0..N {
        let e = h
            * (E1 * k[0][i]
                + E3 * k[2][i]
                + E4 * k[3][i]
                + E5 * k[4][i]
                + E6 * k[5][i]
                + E7 * k[6][i]);
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        sum += (e / sc) * (e / sc);
    }
    (sum / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    rhs: &mut F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    opts: &OdeOptions,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let scale = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let norm = |v: &[f64; N]| {
        (v.iter()
            .enumerate()
            .map(|(i, x)| (x / scale(i)).powi(2))
            .sum::<f64>()
            / N as f64)
            .sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(opts.h_max);
    let y1 = axpy(y, dir * h0, &[(1.0, f0)]);
    let f1 = rhs(t + dir * h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end` (either direction).
///
/// The last step is clamped so the run ends exactly at `t_end` unless the
/// observer breaks out first. The observer sees every accepted step.
pub fn integrate<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeOutcome<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(&DenseStep<N>) -> ControlFlow<()>,
{
    let mut t = t0;
    let mut y = y0;
    let mut outcome = OdeOutcome {
        t,
        y,
        accepted: 0,
        rejected: 0,
        next_h: opts.h_init.unwrap_or(0.0),
        stopped: false,
    };
    if t_end == t0 {
        return Ok(outcome);
    }
    let dir = (t_end - t0).signum();
    let mut k1 = rhs(t, &y);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFinite { t });
    }
    let mut h = match opts.h_init {
        Some(h) if h > 0.0 => h.min(opts.h_max),
        _ => initial_step(&mut rhs, t, &y, &k1, dir, opts),
    };
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeError::TooManySteps {
                t,
                max_steps: opts.max_steps,
            });
        }
        let mut last = false;
        if h >= remaining || (remaining - h) <= 1e-12 * remaining.max(t.abs()) {
            h = remaining;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }

        let hs = dir * h;
        let st = stages(&mut rhs, t, &y, k1, hs);
        let err = error_norm(&y, &st.y_new, &st.k, hs, opts);
        if !err.is_finite() || st.y_new.iter().any(|v| !v.is_finite()) {
            // Treat as a rejection with aggressive shrinking.
            outcome.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let t_new = if last { t_end } else { t + hs };
            let [k1_, _, k3, k4, k5, k6, k7] = &st.k;
            let ydiff: [f64; N] = std::array::from_fn(|i| st.y_new[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| hs * k1_[i] - ydiff[i]);
            let r4: [f64; N] = std::array::from_fn(|i| ydiff[i] - hs * k7[i] - bspl[i]);
            let r5: [f64; N] = std::array::from_fn(|i| {
                hs * (D1 * k1_[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            let step = DenseStep {
                t_old: t,
                t_new,
                y_old: y,
                y_new: st.y_new,
                cont: [ydiff, bspl, r4, r5],
            };
            outcome.accepted += 1;
            t = t_new;
            y = st.y_new;
            k1 = *k7;

            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
            let proposed = (h * fac).min(opts.h_max);
            // Do not let a clamped final step shrink the carried step size.
            outcome.next_h = if last { proposed.max(h) } else { proposed };
            let flow = observer(&step);
            h = proposed;
            if flow.is_break() {
                outcome.stopped = true;
                break;
            }
        } else {
            outcome.rejected += 1;
            last_rejected = true;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }

    outcome.t = t;
    outcome.y = y;
    Ok(outcome)
}

/// Locates a sign change of `event` inside `[t_old, t_old + h]` by bisection,
/// re-integrating from the start of the step for every trial point.
///
/// `event` must have opposite signs (or a zero) at the two ends of the
/// step. Returns the bracket end where the event value has the sign of the
/// terminal side, so the returned state has already crossed.
pub fn locate_crossing<const N: usize, F, G>(
    mut rhs: F,
    t_old: f64,
    y_old: &[f64; N],
    h: f64,
    mut event: G,
    tol: f64,
) -> (f64, [f64; N])
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    G: FnMut(f64, &[f64; N]) -> f64,
{
    let start = event(t_old, y_old);
    let mut lo = 0.0_f64;
    let mut hi = h;
    let mut y_hi = single_step(&mut rhs, t_old, y_old, hi);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let y_mid = single_step(&mut rhs, t_old, y_old, mid);
        let g = event(t_old + mid, &y_mid);
        if g == 0.0 || g.signum() != start.signum() {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
        }
    }
    (t_old + hi, y_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = OdeOptions::with_tolerance(1e-10);
        let out = integrate(
            |_, y: &[f64; 1]| [-0.5 * y[0]],
            0.0,
            [2.0],
            10.0,
            &opts,
            |_| ControlFlow::Continue(()),
        )
        .unwrap();
        assert_eq!(out.t, 10.0);
        assert!((out.y[0] - 2.0 * (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let opts = OdeOptions::with_tolerance(1e-10);
        let mut worst = 0.0f64;
        integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            6.0,
            &opts,
            |step| {
                for k in 0..=10 {
                    let t = step.t_old + step.h() * k as f64 / 10.0;
                    let y = step.interpolate(t);
                    worst = worst.max((y[0] - t.sin()).abs());
                }
                ControlFlow::Continue(())
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn backward_integration() {
        let opts = OdeOptions::with_tolerance(1e-10);
        let out = integrate(
            |_, y: &[f64; 1]| [y[0]],
            1.0,
            [1.0],
            0.0,
            &opts,
            |_| ControlFlow::Continue(()),
        )
        .unwrap();
        assert!((out.y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn observer_can_stop() {
        let opts = OdeOptions::with_tolerance(1e-8);
        let out = integrate(
            |_, _: &[f64; 1]| [1.0],
            0.0,
            [0.0],
            100.0,
            &opts,
            |s| {
                if s.y_new[0] > 1.0 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        )
        .unwrap();
        assert!(out.stopped);
        assert!(out.t < 100.0);
    }

    #[test]
    fn crossing_is_located_to_tolerance() {
        // y' = -1 from y = 1 crosses zero at t = 1.
        let rhs = |_: f64, _: &[f64; 1]| [-1.0];
        let (t, y) = locate_crossing(rhs, 0.5, &[0.5], 1.0, |_, y| y[0], 1e-13);
        assert!((t - 1.0).abs() < 1e-12);
        assert!(y[0] <= 0.0);
    }

    #[test]
    fn zero_length_interval_is_a_no_op() {
        let out = integrate(
            |_, y: &[f64; 1]| [y[0]],
            3.0,
            [1.0],
            3.0,
            &OdeOptions::default(),
            |_| ControlFlow::Continue(()),
        )
        .unwrap();
        assert_eq!(out.accepted, 0);
        assert_eq!(out.y, [1.0]);
    }
}
