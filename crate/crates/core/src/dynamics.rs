//! Controlled Ross-Macdonald vector field.
//!
//! State is `(m, h)`, the infected proportions of mosquitoes and humans.
//! Fumigation acts as a mosquito mortality rate `u ∈ [u_min, u_max]`:
//!
//! ```text
//! dm/dt = A_m h (1 - m) - u m
//! dh/dt = A_h m (1 - h) - γ h
//! ```
//!
//! All rates are per day.

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Raw epidemiological parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpiParams {
    /// Biting rate per day.
    pub alpha: f64,
    /// Probability that an infected bite infects a susceptible human.
    pub p_h: f64,
    /// Probability that biting an infected human infects a mosquito.
    pub p_m: f64,
    /// Female mosquitoes per human.
    pub xi: f64,
    /// Natural mosquito death rate per day.
    pub delta: f64,
    /// Human recovery rate per day.
    pub gamma: f64,
}

impl EpiParams {
    /// Best-fit values for the 2013 Cali outbreak, γ = 0.1.
    pub const CALI_2013_ESTIMATE: EpiParams = EpiParams {
        alpha: 0.3365,
        p_h: 0.2287,
        p_m: 0.1532,
        xi: 1.0359,
        delta: 0.0333,
        gamma: 0.1,
    };

    /// Starting point used for the Cali fit.
    pub const CALI_2013_INITIAL: EpiParams = EpiParams {
        alpha: 1.0,
        p_h: 0.5,
        p_m: 0.5,
        xi: 1.0,
        delta: 0.035,
        gamma: 0.1,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("p_h", self.p_h),
            ("p_m", self.p_m),
            ("xi", self.xi),
            ("delta", self.delta),
            ("gamma", self.gamma),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(
                    name,
                    format!("{v} must be finite and nonnegative"),
                ));
            }
        }
        for (name, v) in [("p_h", self.p_h), ("p_m", self.p_m)] {
            if v > 1.0 {
                return Err(Error::invalid(name, format!("{v} is not a probability")));
            }
        }
        Ok(())
    }

    /// Fitted parameter vector `(α, p_h, p_m, ξ, δ)`.
    pub fn theta(&self) -> [f64; 5] {
        [self.alpha, self.p_h, self.p_m, self.xi, self.delta]
    }

    pub fn from_theta(theta: [f64; 5], gamma: f64) -> Self {
        let [alpha, p_h, p_m, xi, delta] = theta;
        Self {
            alpha,
            p_h,
            p_m,
            xi,
            delta,
            gamma,
        }
    }

    /// `A_m = α p_m`.
    pub fn a_m(&self) -> f64 {
        self.alpha * self.p_m
    }

    /// `A_h = α p_h ξ`.
    pub fn a_h(&self) -> f64 {
        self.alpha * self.p_h * self.xi
    }
}

/// Reduced transmission rates plus fumigation bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelRates {
    pub a_m: f64,
    pub a_h: f64,
    pub gamma: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl ModelRates {
    pub fn new(a_m: f64, a_h: f64, gamma: f64, u_min: f64, u_max: f64) -> Result<Self> {
        let rates = Self {
            a_m,
            a_h,
            gamma,
            u_min,
            u_max,
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_m", self.a_m),
            ("a_h", self.a_h),
            ("gamma", self.gamma),
            ("u_min", self.u_min),
            ("u_max", self.u_max),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(
                    name,
                    format!("{v} must be finite and nonnegative"),
                ));
            }
        }
        if self.u_min > self.u_max {
            return Err(Error::invalid(
                "u_max",
                format!("{} is below u_min = {}", self.u_max, self.u_min),
            ));
        }
        Ok(())
    }

    /// Same rates with a different maximal fumigation rate.
    pub fn with_u_max(&self, u_max: f64) -> Result<Self> {
        Self::new(self.a_m, self.a_h, self.gamma, self.u_min, u_max)
    }

    pub fn check_control(&self, u: f64) -> Result<()> {
        if !(u >= self.u_min && u <= self.u_max) {
            return Err(Error::ControlOutOfBounds {
                u,
                u_min: self.u_min,
                u_max: self.u_max,
            });
        }
        Ok(())
    }

    /// Mosquito component of the field; no validation.
    #[inline]
    pub fn g_m(&self, m: f64, h: f64, u: f64) -> f64 {
        self.a_m * h * (1.0 - m) - u * m
    }

    /// Human component of the field; no validation.
    #[inline]
    pub fn g_h(&self, m: f64, h: f64) -> f64 {
        self.a_h * m * (1.0 - h) - self.gamma * h
    }

    #[inline]
    pub fn field(&self, m: f64, h: f64, u: f64) -> [f64; 2] {
        [self.g_m(m, h, u), self.g_h(m, h)]
    }
}

/// A point of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub m: f64,
    pub h: f64,
}

impl State {
    pub const ORIGIN: State = State { m: 0.0, h: 0.0 };

    pub fn new(m: f64, h: f64) -> Result<Self> {
        if !m.is_finite() || !h.is_finite() {
            return Err(Error::NonFiniteState { m, h });
        }
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::invalid("m", format!("{m} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::invalid("h", format!("{h} outside [0, 1]")));
        }
        Ok(Self { m, h })
    }

    /// Clamps integration drift back into the unit square.
    pub fn clamped(m: f64, h: f64) -> Self {
        Self {
            m: m.clamp(0.0, 1.0),
            h: h.clamp(0.0, 1.0),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.m, self.h]
    }
}

pub fn derive_rates(params: &EpiParams, u_max: f64) -> Result<ModelRates> {
    params.validate()?;
    if !u_max.is_finite() || u_max < params.delta {
        return Err(Error::invalid(
            "u_max",
            format!(
                "{u_max} is below the natural death rate delta = {}",
                params.delta
            ),
        ));
    }
    ModelRates::new(
        params.a_m(),
        params.a_h(),
        params.gamma,
        params.delta,
        u_max,
    )
}

pub fn vector_field(state: State, u: f64, rates: &ModelRates) -> Result<(f64, f64)> {
    if !state.m.is_finite() || !state.h.is_finite() {
        return Err(Error::NonFiniteState {
            m: state.m,
            h: state.h,
        });
    }
    rates.check_control(u)?;
    Ok((rates.g_m(state.m, state.h, u), rates.g_h(state.m, state.h)))
}

/// Nonzero steady state under constant fumigation `u`.
///
/// Exists iff `A_m A_h - γ u > 0`; equality returns `None` because the
/// closed form collapses onto the origin.
pub fn endemic_equilibrium(rates: &ModelRates, u: f64) -> Result<Option<State>> {
    rates.check_control(u)?;
    let ModelRates {
        a_m, a_h, gamma, ..
    } = *rates;
    if !(a_m * a_h - gamma * u > 0.0) {
        return Ok(None);
    }
    let m = (a_m - gamma * u / a_h) / (a_m + u);
    let h = (a_h - gamma * u / a_m) / (a_h + gamma);
    Ok(Some(State::clamped(m, h)))
}

pub fn is_viable_equilibrium(rates: &ModelRates, u: f64, h_bar: f64) -> Result<bool> {
    if !(h_bar > 0.0 && h_bar < 1.0) {
        return Err(Error::invalid("h_bar", format!("{h_bar} outside (0, 1)")));
    }
    Ok(endemic_equilibrium(rates, u)?.is_some_and(|e| e.h <= h_bar))
}

/// Componentwise ordering `low ≤ high + tol` at every shared sample.
pub fn check_dominance(low: &Trajectory, high: &Trajectory, tol: f64) -> Result<bool> {
    if low.samples.len() != high.samples.len()
        || low
            .samples
            .iter()
            .zip(&high.samples)
            .any(|(a, b)| a.t != b.t)
    {
        return Err(Error::MismatchedGrids);
    }
    Ok(low
        .samples
        .iter()
        .zip(&high.samples)
        .all(|(a, b)| a.m <= b.m + tol && a.h <= b.h + tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_rates() -> ModelRates {
        ModelRates::new(0.2, 0.3, 0.1, 0.05, 0.5).unwrap()
    }

    #[test]
    fn derived_rates_from_cali_estimate() {
        let r = derive_rates(&EpiParams::CALI_2013_ESTIMATE, 0.1).unwrap();
        assert!((r.a_m - 0.3365 * 0.1532).abs() < 1e-15);
        assert!((r.a_m - 0.051552).abs() < 1e-6);
        assert!((r.a_h - 0.3365 * 0.2287 * 1.0359).abs() < 1e-15);
        assert!((r.a_h - 0.0797197).abs() < 1e-6);
        assert_eq!(r.u_min, 0.0333);
        assert_eq!(r.gamma, 0.1);
    }

    #[test]
    fn zero_biting_rate_gives_zero_transmission() {
        let p = EpiParams {
            alpha: 0.0,
            ..EpiParams::CALI_2013_ESTIMATE
        };
        let r = derive_rates(&p, 0.1).unwrap();
        assert_eq!((r.a_m, r.a_h), (0.0, 0.0));
    }

    #[test]
    fn control_weaker_than_natural_mortality_is_rejected() {
        let err = derive_rates(&EpiParams::CALI_2013_ESTIMATE, 0.01).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "u_max", .. }));
    }

    #[test]
    fn invalid_probability_is_rejected() {
        let p = EpiParams {
            p_h: 1.5,
            ..EpiParams::CALI_2013_ESTIMATE
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn field_examples() {
        let rates = example_rates();
        assert_eq!(
            vector_field(State::ORIGIN, 0.3, &rates).unwrap(),
            (0.0, 0.0)
        );
        let (dm, _) = vector_field(State::new(1.0, 0.7).unwrap(), 0.3, &rates).unwrap();
        assert!((dm + 0.3).abs() < 1e-15);
        let (dm, dh) = vector_field(State::new(0.5, 0.5).unwrap(), 0.2, &rates).unwrap();
        assert!((dm + 0.05).abs() < 1e-15);
        assert!((dh - 0.025).abs() < 1e-15);
    }

    #[test]
    fn field_rejects_bad_inputs() {
        let rates = example_rates();
        assert!(matches!(
            vector_field(State::ORIGIN, 0.6, &rates),
            Err(Error::ControlOutOfBounds { .. })
        ));
        let bad = State {
            m: f64::NAN,
            h: 0.0,
        };
        assert!(matches!(
            vector_field(bad, 0.2, &rates),
            Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn equilibrium_example() {
        let rates = example_rates();
        let e = endemic_equilibrium(&rates, 0.2).unwrap().unwrap();
        assert!((e.m - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.h - 0.5).abs() < 1e-15);
        let (dm, dh) = vector_field(e, 0.2, &rates).unwrap();
        assert!(dm.abs() < 1e-12 && dh.abs() < 1e-12);
    }

    #[test]
    fn equilibrium_absent_at_and_beyond_threshold() {
        // A_m A_h / γ = 0.6
        let rates = ModelRates::new(0.2, 0.3, 0.1, 0.05, 1.0).unwrap();
        assert_eq!(endemic_equilibrium(&rates, 0.6).unwrap(), None);
        assert_eq!(endemic_equilibrium(&rates, 0.9).unwrap(), None);
        assert!(endemic_equilibrium(&rates, 0.59).unwrap().is_some());
    }

    #[test]
    fn viable_equilibrium_examples() {
        let rates = example_rates();
        assert!(is_viable_equilibrium(&rates, 0.2, 0.5).unwrap());
        assert!(!is_viable_equilibrium(&rates, 0.2, 0.4).unwrap());
        let none = ModelRates::new(0.01, 0.01, 0.1, 0.05, 0.5).unwrap();
        assert!(!is_viable_equilibrium(&none, 0.2, 0.9).unwrap());
    }

    fn rates_strategy() -> impl Strategy<Value = (ModelRates, f64)> {
        (
            0.01f64..1.0,
            0.01f64..1.0,
            0.01f64..0.5,
            0.0f64..0.3,
            0.0f64..1.0,
        )
            .prop_map(|(a_m, a_h, gamma, u_min, frac)| {
                let u_max = u_min + 0.5;
                let r = ModelRates::new(a_m, a_h, gamma, u_min, u_max).unwrap();
                (r, u_min + frac * 0.5)
            })
    }

    proptest! {
        #[test]
        fn equilibrium_residual_is_tiny((rates, u) in rates_strategy()) {
            if let Some(e) = endemic_equilibrium(&rates, u).unwrap() {
                let (dm, dh) = vector_field(e, u, &rates).unwrap();
                prop_assert!(dm.abs().max(dh.abs()) < 1e-10);
                prop_assert!(e.m > 0.0 && e.h > 0.0);
            }
        }

        #[test]
        fn field_is_quasi_monotone(
            (rates, u) in rates_strategy(),
            m in 0.0f64..=1.0,
            h in 0.0f64..=1.0,
        ) {
            let step = 1e-6;
            let dgm_dh = (rates.g_m(m, h + step, u) - rates.g_m(m, h - step, u)) / (2.0 * step);
            let dgh_dm = (rates.g_h(m + step, h) - rates.g_h(m - step, h)) / (2.0 * step);
            let exact_m = rates.a_m * (1.0 - m);
            let exact_h = rates.a_h * (1.0 - h);
            prop_assert!(dgm_dh >= -1e-6 * exact_m.max(1.0));
            prop_assert!(dgh_dm >= -1e-6 * exact_h.max(1.0));
            prop_assert!((dgm_dh - exact_m).abs() <= 1e-6 * exact_m.max(1e-3));
            prop_assert!((dgh_dm - exact_h).abs() <= 1e-6 * exact_h.max(1e-3));
        }
    }
}
