//! Viability kernel of the constraint box `[0, 1] × [0, H̄]`.
//!
//! Under maximal fumigation the kernel takes one of three shapes depending
//! on the cap `H̄`:
//!
//! * **Low**: only the origin is viable.
//! * **High**: the whole constraint box is viable.
//! * **Medium**: the rectangle `[0, M̄] × [0, H̄]` joined with the region
//!   under a decreasing curve `Y` on `[M̄, M∞]`, where `Y` solves
//!   `Y'(m) = g_h(m, Y) / g_m(m, Y, ū)` with `Y(M̄) = H̄`.
//!
//! The curve is an orbit of the field under `ū`, so the kernel is bounded
//! by trajectories that just touch the cap at `(M̄, H̄)`.

use std::fmt;
use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::dynamics::{ModelRates, State};
use crate::error::{Error, Result};
use crate::interp::{MonotoneCubic, Polyline};
use crate::ode::{self, OdeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Low,
    Medium,
    High,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::Medium => "medium",
            Regime::High => "high",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Low => "Low",
            Regime::Medium => "Medium",
            Regime::High => "High",
        })
    }
}

/// The state constraint `h ≤ H̄` over the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintBox {
    h_bar: f64,
}

impl ConstraintBox {
    pub fn new(h_bar: f64) -> Result<Self> {
        check_cap(h_bar)?;
        Ok(Self { h_bar })
    }

    pub fn h_bar(&self) -> f64 {
        self.h_bar
    }

    pub fn contains(&self, state: State) -> bool {
        state.h <= self.h_bar
    }
}

fn check_cap(h_bar: f64) -> Result<()> {
    if !(h_bar > 0.0 && h_bar < 1.0) {
        return Err(Error::invalid("h_bar", format!("{h_bar} outside (0, 1)")));
    }
    Ok(())
}

/// Both sides of the medium-regime inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `(A_h - γ ū / A_m) / (A_h + γ)`: the equilibrium `h*` under `ū`
    /// when positive.
    pub lower: f64,
    /// `A_h / (A_h + γ)`.
    pub upper: f64,
}

impl Thresholds {
    pub fn new(rates: &ModelRates) -> Result<Self> {
        if rates.a_m <= 0.0 {
            return Err(Error::ThresholdUndefined(
                "A_m = 0 makes the lower threshold undefined",
            ));
        }
        let denom = rates.a_h + rates.gamma;
        if denom <= 0.0 {
            return Err(Error::ThresholdUndefined("A_h + gamma = 0"));
        }
        Ok(Self {
            lower: (rates.a_h - rates.gamma * rates.u_max / rates.a_m) / denom,
            upper: rates.a_h / denom,
        })
    }

    /// True when the medium characterization is backed by a positive lower
    /// threshold.
    pub fn proven(&self) -> bool {
        self.lower > 0.0
    }

    pub fn classify(&self, h_bar: f64) -> Regime {
        if h_bar >= self.upper {
            Regime::High
        } else if self.lower > 0.0 && h_bar < self.lower {
            Regime::Low
        } else {
            Regime::Medium
        }
    }
}

pub fn classify_regime(rates: &ModelRates, h_bar: f64) -> Result<Regime> {
    check_cap(h_bar)?;
    Ok(Thresholds::new(rates)?.classify(h_bar))
}

/// Mosquito proportion where `g_h` vanishes on the line `h = H̄`.
pub fn m_bar(rates: &ModelRates, h_bar: f64) -> Result<f64> {
    check_cap(h_bar)?;
    if rates.a_h <= 0.0 {
        return Err(Error::invalid("a_h", "must be positive to define M_bar"));
    }
    Ok(rates.gamma * h_bar / (rates.a_h * (1.0 - h_bar)))
}

/// Settings for the frontier integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierOptions {
    /// Largest step in `m`; also bounds the sample spacing.
    pub step: f64,
    pub tol: f64,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tol: 1e-9,
        }
    }
}

/// Samples of the frontier curve `Y` on `[M̄, M∞]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub m_bar: f64,
    pub m_inf: f64,
    /// `(m, Y(m))`, ascending in `m`.
    pub samples: Vec<[f64; 2]>,
}

/// Right-hand side of the frontier equation in the independent variable `m`.
fn frontier_slope(rates: &ModelRates, m: f64, y: f64) -> f64 {
    rates.g_h(m, y) / rates.g_m(m, y, rates.u_max)
}

/// Integrates the frontier equation for a medium-regime instance.
pub fn boundary_curve(rates: &ModelRates, h_bar: f64, step: f64) -> Result<BoundaryCurve> {
    boundary_curve_with(
        rates,
        h_bar,
        &FrontierOptions {
            step,
            ..FrontierOptions::default()
        },
    )
}

pub fn boundary_curve_with(
    rates: &ModelRates,
    h_bar: f64,
    opts: &FrontierOptions,
) -> Result<BoundaryCurve> {
    let regime = classify_regime(rates, h_bar)?;
    if regime != Regime::Medium {
        return Err(Error::NotMedium(regime));
    }
    integrate_frontier(rates, h_bar, opts)
}

/// Integrates the frontier equation without checking the regime.
///
/// Fails with [`Error::DenominatorSignChange`] as soon as `g_m` stops being
/// negative along the curve, which is what happens outside the medium
/// regime.
pub fn integrate_frontier(
    rates: &ModelRates,
    h_bar: f64,
    opts: &FrontierOptions,
) -> Result<BoundaryCurve> {
    if !(opts.step > 0.0) {
        return Err(Error::invalid(
            "step",
            format!("{} must be positive", opts.step),
        ));
    }
    let m_bar = m_bar(rates, h_bar)?;
    if !(m_bar < 1.0) {
        return Err(Error::invalid(
            "h_bar",
            format!("M_bar = {m_bar} is not below 1"),
        ));
    }
    let start_denominator = rates.g_m(m_bar, h_bar, rates.u_max);
    if !(start_denominator < 0.0) {
        return Err(Error::DenominatorSignChange {
            m: m_bar,
            value: start_denominator,
        });
    }

    let rhs = |m: f64, y: &[f64; 1]| [frontier_slope(rates, m, y[0])];
    let ode_opts = OdeOptions::with_tolerance(opts.tol).h_max(opts.step);

    let mut samples = vec![[m_bar, h_bar]];
    let mut failure = None;
    let mut crossing = None;
    let outcome = ode::integrate(rhs, m_bar, [h_bar], 1.0, &ode_opts, |step| {
        let (m, y) = (step.t_new, step.y_new[0]);
        if y <= 0.0 {
            let (m_star, _) =
                ode::locate_crossing(rhs, step.t_old, &step.y_old, step.h(), |_, y| y[0], 1e-12);
            crossing = Some(m_star);
            return ControlFlow::Break(());
        }
        let g = rates.g_m(m, y, rates.u_max);
        if !(g < 0.0) {
            failure = Some(Error::DenominatorSignChange { m, value: g });
            return ControlFlow::Break(());
        }
        samples.push([m, y]);
        ControlFlow::Continue(())
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome.map_err(|_| Error::DenominatorSignChange {
        m: samples.last().map_or(m_bar, |s| s[0]),
        value: f64::NAN,
    })?;

    let m_inf = match crossing {
        Some(m_star) => {
            // Keep the abscissae strictly increasing.
            while samples.len() > 1 && samples[samples.len() - 1][0] >= m_star {
                samples.pop();
            }
            samples.push([m_star, 0.0]);
            m_star
        }
        None => {
            debug_assert_eq!(outcome.t, 1.0);
            1.0
        }
    };
    Ok(BoundaryCurve {
        m_bar,
        m_inf,
        samples,
    })
}

/// Number of interpolated points inserted between frontier samples when
/// building the distance outline.
const OUTLINE_REFINEMENT: usize = 4;

/// Medium-regime kernel with its interpolated frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumKernel {
    h_bar: f64,
    m_bar: f64,
    m_inf: f64,
    proven: bool,
    curve: MonotoneCubic,
    outline: Polyline,
}

impl MediumKernel {
    /// Rebuilds the kernel from frontier samples, e.g. read back from CSV.
    ///
    /// Node slopes are taken from the frontier equation itself, so the
    /// interpolant agrees with the integrated curve to higher order than a
    /// finite-difference estimate would.
    pub fn from_samples(rates: &ModelRates, h_bar: f64, samples: &[[f64; 2]]) -> Result<Self> {
        let thresholds = Thresholds::new(rates)?;
        check_cap(h_bar)?;
        if samples.len() < 2 {
            return Err(Error::invalid("frontier", "needs at least two samples"));
        }
        let m_bar = m_bar(rates, h_bar)?;
        let first = samples[0];
        if (first[0] - m_bar).abs() > 1e-9 || (first[1] - h_bar).abs() > 1e-9 {
            return Err(Error::invalid(
                "frontier",
                format!(
                    "first sample ({}, {}) is not (M_bar, H_bar) = ({m_bar}, {h_bar})",
                    first[0], first[1]
                ),
            ));
        }
        let mut xs = Vec::with_capacity(samples.len());
        let mut ys = Vec::with_capacity(samples.len());
        xs.push(m_bar);
        ys.push(h_bar);
        for (i, s) in samples.iter().enumerate().skip(1) {
            let (m, y) = (s[0], s[1]);
            if !(0.0..=1.0).contains(&m) || !(0.0..=1.0).contains(&y) {
                return Err(Error::invalid(
                    "frontier",
                    format!("sample {i} outside [0, 1]^2"),
                ));
            }
            if !(m > xs[i - 1]) || !(y < ys[i - 1]) {
                return Err(Error::invalid(
                    "frontier",
                    format!("sample {i} breaks monotonicity (m ascending, Y descending)"),
                ));
            }
            xs.push(m);
            ys.push(y);
        }
        let slopes: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .enumerate()
            .map(|(i, (&m, &y))| {
                if i == 0 {
                    0.0
                } else {
                    frontier_slope(rates, m, y)
                }
            })
            .collect();
        let m_inf = xs[xs.len() - 1];
        let curve = MonotoneCubic::new(xs, ys, Some(slopes));

        let mut outline = vec![[0.0, h_bar]];
        let nodes = curve.xs();
        for w in 0..nodes.len() - 1 {
            let (a, b) = (nodes[w], nodes[w + 1]);
            outline.push([a, curve.ys()[w]]);
            for k in 1..OUTLINE_REFINEMENT {
                let m = a + (b - a) * k as f64 / OUTLINE_REFINEMENT as f64;
                outline.push([m, curve.eval(m).unwrap_or(0.0)]);
            }
        }
        outline.push([m_inf, curve.ys()[nodes.len() - 1]]);

        Ok(Self {
            h_bar,
            m_bar,
            m_inf,
            proven: thresholds.proven(),
            curve,
            outline: Polyline::new(outline),
        })
    }

    pub fn h_bar(&self) -> f64 {
        self.h_bar
    }

    pub fn m_bar(&self) -> f64 {
        self.m_bar
    }

    pub fn m_inf(&self) -> f64 {
        self.m_inf
    }

    /// False when the lower threshold is nonpositive, i.e. the instance lies
    /// outside the hypotheses under which the shape is established.
    pub fn proven(&self) -> bool {
        self.proven
    }

    /// Frontier samples `(m, Y(m))` from `(M̄, H̄)` to `M∞`.
    pub fn frontier(&self) -> Vec<[f64; 2]> {
        self.curve
            .xs()
            .iter()
            .zip(self.curve.ys())
            .map(|(&m, &y)| [m, y])
            .collect()
    }

    /// Interpolated frontier height; `None` outside `[M̄, M∞]`.
    pub fn frontier_height(&self, m: f64) -> Option<f64> {
        self.curve.eval(m)
    }

    /// Slope `Y'(m)` of the interpolated frontier; `None` outside `[M̄, M∞]`.
    pub fn frontier_slope(&self, m: f64) -> Option<f64> {
        self.curve.derivative(m)
    }

    /// Membership on raw coordinates (no range validation).
    pub fn contains(&self, m: f64, h: f64) -> bool {
        if m <= self.m_bar {
            return h <= self.h_bar;
        }
        match self.curve.eval(m) {
            Some(y) => h <= y,
            None => false,
        }
    }

    /// Distance to the upper frontier for member points, `None` otherwise.
    pub fn distance_if_inside(&self, m: f64, h: f64) -> Option<f64> {
        self.contains(m, h).then(|| self.outline.distance([m, h]))
    }

    /// Unsigned distance to the upper frontier from any point.
    pub fn frontier_distance(&self, m: f64, h: f64) -> f64 {
        self.outline.distance([m, h])
    }

    /// Polyline used for distance queries: the cap segment followed by the
    /// refined curve.
    pub fn outline(&self) -> &[[f64; 2]] {
        self.outline.points()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelDescription {
    /// Only the origin.
    Low {
        h_bar: f64,
    },
    /// The whole constraint box.
    High {
        h_bar: f64,
    },
    Medium(MediumKernel),
}

impl KernelDescription {
    pub fn regime(&self) -> Regime {
        match self {
            KernelDescription::Low { .. } => Regime::Low,
            KernelDescription::High { .. } => Regime::High,
            KernelDescription::Medium(_) => Regime::Medium,
        }
    }

    pub fn h_bar(&self) -> f64 {
        match self {
            KernelDescription::Low { h_bar } | KernelDescription::High { h_bar } => *h_bar,
            KernelDescription::Medium(k) => k.h_bar,
        }
    }

    pub fn as_medium(&self) -> Option<&MediumKernel> {
        match self {
            KernelDescription::Medium(k) => Some(k),
            _ => None,
        }
    }
}

/// Classifies the instance and, for the medium regime, builds the frontier.
pub fn describe_kernel(
    rates: &ModelRates,
    h_bar: f64,
    opts: &FrontierOptions,
) -> Result<KernelDescription> {
    match classify_regime(rates, h_bar)? {
        Regime::Low => Ok(KernelDescription::Low { h_bar }),
        Regime::High => Ok(KernelDescription::High { h_bar }),
        Regime::Medium => {
            let curve = integrate_frontier(rates, h_bar, opts)?;
            Ok(KernelDescription::Medium(MediumKernel::from_samples(
                rates,
                h_bar,
                &curve.samples,
            )?))
        }
    }
}

pub fn kernel_membership(desc: &KernelDescription, state: State) -> bool {
    match desc {
        KernelDescription::Low { .. } => state.m == 0.0 && state.h == 0.0,
        KernelDescription::High { h_bar } => state.h <= *h_bar,
        KernelDescription::Medium(k) => k.contains(state.m, state.h),
    }
}

/// Euclidean distance from a kernel state to the upper frontier.
pub fn distance_to_frontier(desc: &KernelDescription, state: State) -> Result<f64> {
    let kernel = desc.as_medium().ok_or(Error::NotMedium(desc.regime()))?;
    kernel
        .distance_if_inside(state.m, state.h)
        .ok_or(Error::OutsideKernel {
            m: state.m,
            h: state.h,
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramCell {
    pub u_max: f64,
    pub h_bar: f64,
    pub regime: Result<Regime>,
}

/// Regime of every `(ū, H̄)` pair, `u_grid` outer and `h_grid` inner.
///
/// Cells are evaluated in parallel; order matches sequential evaluation.
pub fn regime_diagram(base: &ModelRates, u_grid: &[f64], h_grid: &[f64]) -> Vec<DiagramCell> {
    let cells: Vec<(f64, f64)> = u_grid
        .iter()
        .flat_map(|&u| h_grid.iter().map(move |&h| (u, h)))
        .collect();
    cells
        .into_par_iter()
        .map(|(u, h)| DiagramCell {
            u_max: u,
            h_bar: h,
            regime: classify_cell(base, u, h),
        })
        .collect()
}

fn classify_cell(base: &ModelRates, u: f64, h_bar: f64) -> Result<Regime> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::invalid(
            "u_max",
            format!("{u} must be finite and nonnegative"),
        ));
    }
    // Grid values may sit below the natural death rate (e.g. the u = 0
    // column); only u_max enters the thresholds.
    let rates = ModelRates {
        u_max: u,
        u_min: base.u_min.min(u),
        ..*base
    };
    classify_regime(&rates, h_bar)
}
