//! Fitting the epidemiological parameters to daily case data.
//!
//! Reported daily incidence is turned into a prevalence series `ĥ_j`, and
//! `θ = (α, p_h, p_m, ξ, δ)` is chosen to minimise
//! `½ Σ_{j≥1} (h(t_j; θ) - ĥ_j)²` over a box, with the model started from
//! `h(0) = ĥ_0`, `m(0) = 3 ĥ_0`.
//!
//! The dynamics only see `A_m = α p_m`, `A_h = α p_h ξ` and `δ`, so the raw
//! vector is not identifiable; [`FitResult::reduced`] is the meaningful
//! output.

use std::io::{Read, Write};
use std::ops::ControlFlow;

use nalgebra::{SMatrix, SVector};

use crate::dynamics::{EpiParams, ModelRates};
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::report::fmt_num;

/// Human recovery rate used throughout the fitting pipeline (10-day
/// infectious period).
pub const DEFAULT_GAMMA: f64 = 0.1;
/// Length of the fitting window in days.
pub const DEFAULT_WINDOW: usize = 60;
/// Ratio `m(0) / ĥ_0`.
pub const MOSQUITO_TO_HUMAN_START: f64 = 3.0;

/// Daily counts of newly reported cases, day 0 onward.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceSeries {
    pub new_cases: Vec<u64>,
    /// Human population size `N_h`.
    pub population: u64,
}

/// How incidence is accumulated into prevalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrevalenceRule {
    /// `P_{j+1} = (1 - γ) P_j + c_{j+1}`.
    #[default]
    GeometricDecay,
    /// Sum of the last `round(1/γ)` days of incidence.
    MovingSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceDataset {
    days: Vec<u32>,
    h_hat: Vec<f64>,
}

impl PrevalenceDataset {
    pub fn new(days: Vec<u32>, h_hat: Vec<f64>) -> Result<Self> {
        if days.len() != h_hat.len() {
            return Err(Error::invalid("h_hat", "length differs from day list"));
        }
        if days.first() != Some(&0) {
            return Err(Error::invalid("day", "series must start at day 0"));
        }
        if days.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("day", "days must be strictly increasing"));
        }
        if let Some(v) = h_hat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("h_hat", format!("{v} is not a proportion")));
        }
        Ok(Self { days, h_hat })
    }

    pub fn days(&self) -> &[u32] {
        &self.days
    }

    pub fn h_hat(&self) -> &[f64] {
        &self.h_hat
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Observations with `t_j ≤ last_day`.
    pub fn window(&self, last_day: u32) -> Self {
        let n = self.days.partition_point(|&d| d <= last_day);
        Self {
            days: self.days[..n].to_vec(),
            h_hat: self.h_hat[..n].to_vec(),
        }
    }

    fn initial_state(&self) -> [f64; 2] {
        let h0 = self.h_hat[0];
        [(MOSQUITO_TO_HUMAN_START * h0).min(1.0), h0]
    }
}

pub fn incidence_to_prevalence(series: &IncidenceSeries, gamma: f64) -> Result<PrevalenceDataset> {
    incidence_to_prevalence_with(series, gamma, PrevalenceRule::GeometricDecay)
}

pub fn incidence_to_prevalence_with(
    series: &IncidenceSeries,
    gamma: f64,
    rule: PrevalenceRule,
) -> Result<PrevalenceDataset> {
    if series.population == 0 {
        return Err(Error::invalid("population", "N_h must be positive"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} outside (0, 1]")));
    }
    if series.new_cases.is_empty() {
        return Err(Error::invalid("new_cases", "empty series"));
    }
    let n_h = series.population as f64;
    let prevalence: Vec<f64> = match rule {
        PrevalenceRule::GeometricDecay => series
            .new_cases
            .iter()
            .scan(None::<f64>, |p, &c| {
                let next = match *p {
                    None => c as f64,
                    Some(prev) => prev * (1.0 - gamma) + c as f64,
                };
                *p = Some(next);
                Some(next)
            })
            .collect(),
        PrevalenceRule::MovingSum => {
            let width = (1.0 / gamma).round().max(1.0) as usize;
            (0..series.new_cases.len())
                .map(|j| {
                    let lo = (j + 1).saturating_sub(width);
                    series.new_cases[lo..=j].iter().map(|&c| c as f64).sum()
                })
                .collect()
        }
    };
    let h_hat = prevalence.iter().map(|p| (p / n_h).min(1.0)).collect();
    let days = (0..series.new_cases.len() as u32).collect();
    PrevalenceDataset::new(days, h_hat)
}

/// Per-parameter intervals for `(α, p_h, p_m, ξ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: [f64; 5],
    pub upper: [f64; 5],
}

impl Bounds {
    pub fn new(lower: [f64; 5], upper: [f64; 5]) -> Result<Self> {
        for i in 0..5 {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] <= upper[i]) {
                return Err(Error::invalid(
                    "bounds",
                    format!("interval {i} is [{}, {}]", lower[i], upper[i]),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, theta: &[f64; 5]) -> bool {
        (0..5).all(|i| theta[i] >= self.lower[i] && theta[i] <= self.upper[i])
    }

    fn project(&self, theta: [f64; 5]) -> [f64; 5] {
        std::array::from_fn(|i| theta[i].clamp(self.lower[i], self.upper[i]))
    }

    /// A single point.
    pub fn point(theta: [f64; 5]) -> Self {
        Self {
            lower: theta,
            upper: theta,
        }
    }
}

impl Default for Bounds {
    /// Ranges used for the Cali fit.
    fn default() -> Self {
        Self {
            lower: [0.0, 0.0, 0.0, 1.0, 1.0 / 30.0],
            upper: [5.0, 1.0, 1.0, 5.0, 1.0 / 15.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Integrator tolerance for the model and sensitivity solves.
    pub ode_tol: f64,
    pub max_iterations: usize,
    /// Relative threshold on both step length and objective decrease.
    pub stop_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ode_tol: 1e-12,
            max_iterations: 500,
            stop_tol: 1e-10,
        }
    }
}

/// `(A_m, A_h, δ)`: the combinations the dynamics actually depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedRates {
    pub a_m: f64,
    pub a_h: f64,
    pub delta: f64,
}

impl ReducedRates {
    pub fn from_params(p: &EpiParams) -> Self {
        Self {
            a_m: p.a_m(),
            a_h: p.a_h(),
            delta: p.delta,
        }
    }

    pub fn to_model_rates(&self, gamma: f64, u_max: f64) -> Result<ModelRates> {
        ModelRates::new(self.a_m, self.a_h, gamma, self.delta, u_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: EpiParams,
    pub objective_value: f64,
    pub reduced: ReducedRates,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iterate, starting with `theta0`.
    pub history: Vec<f64>,
}

impl FitResult {
    /// Flat `key = value` report.
    pub fn report(&self) -> String {
        let t = &self.theta_hat;
        let rows = [
            ("alpha", fmt_num(t.alpha)),
            ("p_h", fmt_num(t.p_h)),
            ("p_m", fmt_num(t.p_m)),
            ("xi", fmt_num(t.xi)),
            ("delta", fmt_num(t.delta)),
            ("gamma", fmt_num(t.gamma)),
            ("a_m", fmt_num(self.reduced.a_m)),
            ("a_h", fmt_num(self.reduced.a_h)),
            ("objective", fmt_num(self.objective_value)),
            ("iterations", self.iterations.to_string()),
            ("converged", self.converged.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn model_rates(theta: &[f64; 5], gamma: f64) -> ModelRates {
    let p = EpiParams::from_theta(*theta, gamma);
    ModelRates {
        a_m: p.a_m(),
        a_h: p.a_h(),
        gamma,
        u_min: p.delta,
        u_max: p.delta,
    }
}

/// Model prevalence `h(t_j; θ)` at every observation day.
pub fn model_prevalence(theta: &EpiParams, data: &PrevalenceDataset, tol: f64) -> Result<Vec<f64>> {
    let rates = model_rates(&theta.theta(), theta.gamma);
    let delta = theta.delta;
    let days = data.days();
    let mut out = vec![data.h_hat[0]; days.len()];
    let t_end = *days.last().expect("nonempty") as f64;
    if days.len() == 1 {
        return Ok(out);
    }
    let mut next = 1usize;
    ode::integrate(
        |_, z: &[f64; 2]| rates.field(z[0], z[1], delta),
        0.0,
        data.initial_state(),
        t_end,
        &OdeOptions::with_tolerance(tol),
        |step| {
            while next < days.len() && days[next] as f64 <= step.t_new {
                out[next] = step.interpolate(days[next] as f64)[1];
                next += 1;
            }
            ControlFlow::Continue(())
        },
    )?;
    Ok(out)
}

fn sum_sq_half(model: &[f64], data: &[f64]) -> f64 {
    0.5 * model
        .iter()
        .zip(data)
        .skip(1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
}

/// Least-squares objective; infinite when the model cannot be integrated.
pub fn objective(theta: &EpiParams, data: &PrevalenceDataset, gamma: f64) -> f64 {
    objective_with_tol(theta, data, gamma, FitOptions::default().ode_tol)
}

pub fn objective_with_tol(
    theta: &EpiParams,
    data: &PrevalenceDataset,
    gamma: f64,
    tol: f64,
) -> f64 {
    let theta = EpiParams { gamma, ..*theta };
    match model_prevalence(&theta, data, tol) {
        Ok(h) => sum_sq_half(&h, data.h_hat()),
        Err(_) => f64::INFINITY,
    }
}

/// Residuals `h(t_j) - ĥ_j` for `j ≥ 1` and their Jacobian with respect to
/// `θ`, from forward sensitivity equations.
pub fn residuals_and_jacobian(
    theta: &EpiParams,
    data: &PrevalenceDataset,
    gamma: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<[f64; 5]>)> {
    let [alpha, p_h, p_m, xi, delta] = theta.theta();
    let a_m = alpha * p_m;
    let a_h = alpha * p_h * xi;
    // Derivatives of (A_m, A_h, δ) with respect to θ.
    let d_am = [p_m, 0.0, alpha, 0.0, 0.0];
    let d_ah = [p_h * xi, alpha * xi, 0.0, alpha * p_h, 0.0];
    let d_delta = [0.0, 0.0, 0.0, 0.0, 1.0];

    // z = (m, h, ∂m/∂q, ∂h/∂q) with q = (A_m, A_h, δ).
    let rhs = |_: f64, z: &[f64; 8]| -> [f64; 8] {
        let (m, h) = (z[0], z[1]);
        let sm = [z[2], z[3], z[4]];
        let sh = [z[5], z[6], z[7]];
        let jmm = -a_m * h - delta;
        let jmh = a_m * (1.0 - m);
        let jhm = a_h * (1.0 - h);
        let jhh = -a_h * m - gamma;
        let fq_m = [h * (1.0 - m), 0.0, -m];
        let fq_h = [0.0, m * (1.0 - h), 0.0];
        let mut dz = [0.0; 8];
        dz[0] = a_m * h * (1.0 - m) - delta * m;
        dz[1] = a_h * m * (1.0 - h) - gamma * h;
        for k in 0..3 {
            dz[2 + k] = jmm * sm[k] + jmh * sh[k] + fq_m[k];
            dz[5 + k] = jhm * sm[k] + jhh * sh[k] + fq_h[k];
        }
        dz
    };

    let days = data.days();
    let n = days.len();
    let mut residuals = Vec::with_capacity(n.saturating_sub(1));
    let mut jacobian = Vec::with_capacity(n.saturating_sub(1));
    if n <= 1 {
        return Ok((residuals, jacobian));
    }
    let [m0, h0] = data.initial_state();
    let mut z0 = [0.0; 8];
    z0[0] = m0;
    z0[1] = h0;
    let mut next = 1usize;
    ode::integrate(
        rhs,
        0.0,
        z0,
        days[n - 1] as f64,
        &OdeOptions::with_tolerance(tol),
        |step| {
            while next < n && days[next] as f64 <= step.t_new {
                let z = step.interpolate(days[next] as f64);
                residuals.push(z[1] - data.h_hat[next]);
                jacobian.push(std::array::from_fn(|i| {
                    z[5] * d_am[i] + z[6] * d_ah[i] + z[7] * d_delta[i]
                }));
                next += 1;
            }
            ControlFlow::Continue(())
        },
    )?;
    Ok((residuals, jacobian))
}

/// Gradient of the objective, `Jᵀ r`.
pub fn gradient(theta: &EpiParams, data: &PrevalenceDataset, gamma: f64) -> Result<[f64; 5]> {
    let (r, j) = residuals_and_jacobian(theta, data, gamma, FitOptions::default().ode_tol)?;
    Ok(std::array::from_fn(|i| {
        r.iter().zip(&j).map(|(ri, row)| ri * row[i]).sum()
    }))
}

type Mat5 = SMatrix<f64, 5, 5>;
type Vec5 = SVector<f64, 5>;

fn normal_equations(r: &[f64], j: &[[f64; 5]]) -> (Mat5, Vec5) {
    let mut a = Mat5::zeros();
    let mut g = Vec5::zeros();
    for (ri, row) in r.iter().zip(j) {
        for p in 0..5 {
            g[p] += row[p] * ri;
            for q in 0..5 {
                a[(p, q)] += row[p] * row[q];
            }
        }
    }
    (a, g)
}

/// Gradient with components that point out of the box at an active bound
/// removed.
fn projected_gradient(g: &Vec5, x: &[f64; 5], bounds: &Bounds) -> Vec5 {
    Vec5::from_fn(|i, _| {
        let at_lower = x[i] <= bounds.lower[i] && g[i] > 0.0;
        let at_upper = x[i] >= bounds.upper[i] && g[i] < 0.0;
        if at_lower || at_upper {
            0.0
        } else {
            g[i]
        }
    })
}

pub fn fit(
    data: &PrevalenceDataset,
    bounds: &Bounds,
    theta0: &EpiParams,
    gamma: f64,
) -> Result<FitResult> {
    fit_with(data, bounds, theta0, gamma, &FitOptions::default())
}

/// Box-constrained Levenberg-Marquardt.
///
/// Trial steps solve `(JᵀJ + λ D) p = -Jᵀr` with Marquardt scaling
/// `D = diag(JᵀJ)` and are projected onto the box; `λ` follows the
/// gain-ratio update. Iteration stops once both the relative step and the
/// relative objective decrease fall below `stop_tol`, when the projected
/// gradient vanishes, or when damping can no longer find a decrease.
pub fn fit_with(
    data: &PrevalenceDataset,
    bounds: &Bounds,
    theta0: &EpiParams,
    gamma: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::invalid("data", "empty dataset"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must be positive")));
    }
    let mut x = theta0.theta();
    if !bounds.contains(&x) {
        return Err(Error::invalid("theta0", "outside the parameter bounds"));
    }
    let params = |x: &[f64; 5]| EpiParams::from_theta(*x, gamma);
    let eval = |x: &[f64; 5]| residuals_and_jacobian(&params(x), data, gamma, opts.ode_tol);
    let phi_of = |x: &[f64; 5]| objective_with_tol(&params(x), data, gamma, opts.ode_tol);

    let (mut r, mut jac) = eval(&x)?;
    let mut phi = phi_of(&x);
    let mut history = vec![phi];
    let (mut a, mut g) = normal_equations(&r, &jac);
    let max_diag = (0..5).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let mut lambda = if max_diag > 0.0 { 1e-3 } else { 1.0 };
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let pg = projected_gradient(&g, &x, bounds);
        if phi == 0.0 || pg.amax() == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;

        let diag_floor = 1e-12 * (0..5).map(|i| a[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut lhs = a;
        let mut rhs = -g;
        for i in 0..5 {
            lhs[(i, i)] += lambda * a[(i, i)].max(diag_floor);
        }
        // Variables held at a bound by the gradient are frozen for this step.
        for i in (0..5).filter(|&i| pg[i] == 0.0) {
            for k in 0..5 {
                lhs[(i, k)] = 0.0;
                lhs[(k, i)] = 0.0;
            }
            lhs[(i, i)] = 1.0;
            rhs[i] = 0.0;
        }
        let step = match lhs.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                lambda *= nu;
                nu *= 2.0;
                continue;
            }
        };
        let trial = bounds.project(std::array::from_fn(|i| x[i] + step[i]));
        let s = Vec5::from_fn(|i, _| trial[i] - x[i]);
        let x_norm = Vec5::from_column_slice(&x).norm();
        let small_step = s.norm() <= opts.stop_tol * (x_norm + opts.stop_tol);

        let phi_trial = phi_of(&trial);
        let predicted = -(g.dot(&s) + 0.5 * s.dot(&(a * s)));
        if phi_trial < phi && predicted > 0.0 {
            let rho = (phi - phi_trial) / predicted;
            let decrease = phi - phi_trial;
            x = trial;
            phi = phi_trial;
            history.push(phi);
            (r, jac) = eval(&x)?;
            (a, g) = normal_equations(&r, &jac);
            lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
            if small_step && decrease <= opts.stop_tol * (phi + decrease) {
                converged = true;
                break;
            }
        } else {
            if small_step {
                // No decrease even along a vanishing step: stationary to
                // working precision.
                converged = true;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if !lambda.is_finite() || lambda > 1e30 {
                converged = true;
                break;
            }
        }
    }
    let _ = &r;

    let theta_hat = params(&x);
    Ok(FitResult {
        theta_hat,
        objective_value: phi,
        reduced: ReducedRates::from_params(&theta_hat),
        iterations,
        converged,
        history,
    })
}

/// Noiseless prevalence series produced by the model itself.
pub fn synthetic_prevalence(
    params: &EpiParams,
    h0: f64,
    days: u32,
    tol: f64,
) -> Result<PrevalenceDataset> {
    params.validate()?;
    if !(h0 > 0.0 && h0 <= 1.0 / MOSQUITO_TO_HUMAN_START) {
        return Err(Error::invalid("h0", format!("{h0} outside (0, 1/3]")));
    }
    let day_list: Vec<u32> = (0..=days).collect();
    let mut placeholder = vec![0.0; day_list.len()];
    placeholder[0] = h0;
    let scaffold = PrevalenceDataset::new(day_list.clone(), placeholder)?;
    let h = model_prevalence(params, &scaffold, tol)?;
    PrevalenceDataset::new(day_list, h.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Reads `day,new_cases` rows. Days must run 0, 1, 2, … without gaps.
pub fn read_incidence_csv<R: Read>(reader: R) -> Result<Vec<u64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["day", "new_cases"] {
        return Err(Error::Parse {
            line: 1,
            reason: "expected header `day,new_cases`".into(),
        });
    }
    let mut cases = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| csv_error(&e, line))?;
        let line = row.position().map_or(line, |p| p.line() as usize);
        let day: u64 = parse_field(&row, 0, line)?;
        let count: u64 = parse_field(&row, 1, line)?;
        if day != cases.len() as u64 {
            return Err(Error::Parse {
                line,
                reason: format!("expected day {}, found {day}", cases.len()),
            });
        }
        cases.push(count);
    }
    if cases.is_empty() {
        return Err(Error::Parse {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    Ok(cases)
}

/// Reads `day,h_hat` rows.
pub fn read_prevalence_csv<R: Read>(reader: R) -> Result<PrevalenceDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["day", "h_hat"] {
        return Err(Error::Parse {
            line: 1,
            reason: "expected header `day,h_hat`".into(),
        });
    }
    let mut days = Vec::new();
    let mut h_hat = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| csv_error(&e, line))?;
        let line = row.position().map_or(line, |p| p.line() as usize);
        let day: u32 = parse_field(&row, 0, line)?;
        let h: f64 = parse_field(&row, 1, line)?;
        days.push(day);
        h_hat.push(h);
    }
    if days.is_empty() {
        return Err(Error::Parse {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    PrevalenceDataset::new(days, h_hat).map_err(|e| Error::Parse {
        line: 0,
        reason: e.to_string(),
    })
}

pub fn write_prevalence_csv<W: Write>(mut w: W, data: &PrevalenceDataset) -> Result<()> {
    writeln!(w, "day,h_hat")?;
    for (d, h) in data.days().iter().zip(data.h_hat()) {
        writeln!(w, "{d},{}", fmt_num(*h))?;
    }
    Ok(())
}

pub fn write_incidence_csv<W: Write>(mut w: W, new_cases: &[u64]) -> Result<()> {
    writeln!(w, "day,new_cases")?;
    for (d, c) in new_cases.iter().enumerate() {
        writeln!(w, "{d},{c}")?;
    }
    Ok(())
}

/// Inverts the geometric-decay rule, rounding to whole cases.
pub fn prevalence_to_incidence(data: &PrevalenceDataset, population: u64, gamma: f64) -> Vec<u64> {
    let n_h = population as f64;
    let counts: Vec<f64> = data.h_hat().iter().map(|h| h * n_h).collect();
    let mut out = Vec::with_capacity(counts.len());
    let mut carried = 0.0;
    for (j, &p) in counts.iter().enumerate() {
        let c = if j == 0 {
            p.round()
        } else {
            (p - (1.0 - gamma) * carried).round().max(0.0)
        };
        carried = if j == 0 {
            c
        } else {
            (1.0 - gamma) * carried + c
        };
        out.push(c as u64);
    }
    out
}

fn csv_error(e: &csv::Error, fallback: usize) -> Error {
    let line = e.position().map_or(fallback, |p| p.line() as usize);
    Error::Parse {
        line,
        reason: e.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(
    row: &csv::StringRecord,
    idx: usize,
    line: usize,
) -> Result<T> {
    let raw = row.get(idx).ok_or_else(|| Error::Parse {
        line,
        reason: format!("missing column {}", idx + 1),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("cannot parse `{raw}`"),
    })
}
