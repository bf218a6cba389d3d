//! Closed- and open-loop simulation of the controlled system.

use std::ops::ControlFlow;

use crate::dynamics::{ModelRates, State};
use crate::error::{Error, Result};
use crate::kernel::{distance_to_frontier, KernelDescription, MediumKernel};
use crate::ode::{self, OdeOptions};

/// Default spacing of the output grid, in days.
pub const DEFAULT_DT_OUT: f64 = 0.1;
/// Default absolute and relative integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlPolicy {
    Constant {
        u: f64,
    },
    /// `u = (1 - e^{-d}) u_min + e^{-d} u_max`, with `d` the distance to the
    /// kernel frontier. Evaluated continuously along the trajectory.
    SaturatingFeedback {
        kernel: KernelDescription,
        u_min: f64,
        u_max: f64,
    },
    /// `(start_time, u)` pairs; the first must start at 0.
    PiecewiseConstant {
        breakpoints: Vec<(f64, f64)>,
    },
}

impl ControlPolicy {
    fn validate(&self, rates: &ModelRates) -> Result<()> {
        match self {
            ControlPolicy::Constant { u } => rates.check_control(*u),
            ControlPolicy::SaturatingFeedback {
                kernel,
                u_min,
                u_max,
            } => {
                if kernel.as_medium().is_none() {
                    return Err(Error::NotMedium(kernel.regime()));
                }
                rates.check_control(*u_min)?;
                rates.check_control(*u_max)?;
                if u_min > u_max {
                    return Err(Error::invalid("u_min", "exceeds u_max"));
                }
                Ok(())
            }
            ControlPolicy::PiecewiseConstant { breakpoints } => {
                let Some(first) = breakpoints.first() else {
                    return Err(Error::invalid("breakpoints", "empty schedule"));
                };
                if first.0 != 0.0 {
                    return Err(Error::invalid(
                        "breakpoints",
                        "first breakpoint must be at t = 0",
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::invalid(
                        "breakpoints",
                        "times must be strictly increasing",
                    ));
                }
                breakpoints
                    .iter()
                    .try_for_each(|&(_, u)| rates.check_control(u))
            }
        }
    }
}

/// Saturating viable feedback for a state inside a medium kernel.
pub fn feedback_control(
    state: State,
    kernel: &KernelDescription,
    u_min: f64,
    u_max: f64,
) -> Result<f64> {
    let d = distance_to_frontier(kernel, state)?;
    Ok(blend(d, u_min, u_max))
}

#[inline]
fn blend(d: f64, u_min: f64, u_max: f64) -> f64 {
    let w = (-d).exp();
    ((1.0 - w) * u_min + w * u_max).clamp(u_min, u_max)
}

/// Feedback on raw coordinates; points outside the kernel get `u_max`.
#[inline]
fn feedback_raw(kernel: &MediumKernel, m: f64, h: f64, u_min: f64, u_max: f64) -> (f64, bool) {
    match kernel.distance_if_inside(m, h) {
        Some(d) => (blend(d, u_min, u_max), true),
        None => (u_max, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub m: f64,
    pub h: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Samples on the output grid; states are raw integrator values.
    pub samples: Vec<Sample>,
    pub dt_out: f64,
    pub tol: f64,
    /// Set when a feedback run visited states outside the kernel and the
    /// policy fell back to `u_max`.
    pub left_kernel: bool,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are never empty")
    }

    pub fn final_state(&self) -> [f64; 2] {
        let s = self.last();
        [s.m, s.h]
    }
}

fn output_grid(horizon: f64, dt_out: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * dt_out;
        if t >= horizon - 1e-9 * dt_out {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(horizon);
    grid
}

pub fn simulate(
    initial: State,
    policy: &ControlPolicy,
    rates: &ModelRates,
    horizon: f64,
    dt_out: f64,
) -> Result<Trajectory> {
    simulate_with_tol(initial, policy, rates, horizon, dt_out, DEFAULT_TOL)
}

pub fn simulate_with_tol(
    initial: State,
    policy: &ControlPolicy,
    rates: &ModelRates,
    horizon: f64,
    dt_out: f64,
    tol: f64,
) -> Result<Trajectory> {
    let initial = State::new(initial.m, initial.h)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(
            "horizon",
            format!("{horizon} must be positive"),
        ));
    }
    if !(dt_out > 0.0 && dt_out.is_finite()) {
        return Err(Error::invalid(
            "dt_out",
            format!("{dt_out} must be positive"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("{tol} must be positive")));
    }
    rates.validate()?;
    policy.validate(rates)?;

    // Segments of constant open-loop control.
    let segments: Vec<(f64, f64, Option<f64>)> = match policy {
        ControlPolicy::Constant { u } => vec![(0.0, horizon, Some(*u))],
        ControlPolicy::SaturatingFeedback { .. } => vec![(0.0, horizon, None)],
        ControlPolicy::PiecewiseConstant { breakpoints } => {
            let mut segs = Vec::new();
            for (i, &(start, u)) in breakpoints.iter().enumerate() {
                if start >= horizon {
                    break;
                }
                let end = breakpoints
                    .get(i + 1)
                    .map_or(horizon, |next| next.0.min(horizon));
                segs.push((start, end, Some(u)));
            }
            segs
        }
    };

    let feedback = match policy {
        ControlPolicy::SaturatingFeedback {
            kernel,
            u_min,
            u_max,
        } => Some((kernel.as_medium().expect("validated"), *u_min, *u_max)),
        _ => None,
    };
    let control_at = |m: f64, h: f64, open_loop: Option<f64>| -> (f64, bool) {
        match (open_loop, feedback) {
            (Some(u), _) => (u, true),
            (None, Some((k, lo, hi))) => feedback_raw(k, m, h, lo, hi),
            (None, None) => unreachable!("feedback policy without kernel"),
        }
    };

    let grid = output_grid(horizon, dt_out);
    let mut samples = Vec::with_capacity(grid.len());
    let mut left_kernel = false;
    let mut next_out = 0usize;
    let mut y = initial.as_array();
    let mut opts = OdeOptions::with_tolerance(tol);

    let n_segments = segments.len();
    for (seg, &(start, end, open_loop)) in segments.iter().enumerate() {
        let closes_run = seg + 1 == n_segments;
        // Samples at the segment start use the control of this segment.
        while next_out < grid.len() && grid[next_out] <= start {
            let (u, inside) = control_at(y[0], y[1], open_loop);
            left_kernel |= !inside;
            samples.push(Sample {
                t: grid[next_out],
                m: y[0],
                h: y[1],
                u,
            });
            next_out += 1;
        }
        let rhs = |_: f64, z: &[f64; 2]| {
            let (u, _) = control_at(z[0], z[1], open_loop);
            rates.field(z[0], z[1], u)
        };
        let outcome = ode::integrate(rhs, start, y, end, &opts, |step| {
            left_kernel |= !control_at(step.y_new[0], step.y_new[1], open_loop).1;
            while next_out < grid.len()
                && grid[next_out] <= step.t_new
                && (closes_run || grid[next_out] < end)
            {
                let t = grid[next_out];
                let z = step.interpolate(t);
                let (u, inside) = control_at(z[0], z[1], open_loop);
                left_kernel |= !inside;
                samples.push(Sample {
                    t,
                    m: z[0],
                    h: z[1],
                    u,
                });
                next_out += 1;
            }
            ControlFlow::Continue(())
        })?;
        y = outcome.y;
        if outcome.next_h > 0.0 {
            opts.h_init = Some(outcome.next_h);
        }
    }
    debug_assert_eq!(samples.len(), grid.len());

    Ok(Trajectory {
        samples,
        dt_out,
        tol,
        left_kernel,
    })
}

/// Earliest sample time with `h > H̄`, if any.
pub fn audit_viability(traj: &Trajectory, h_bar: f64) -> Option<f64> {
    traj.samples.iter().find(|s| s.h > h_bar).map(|s| s.t)
}
