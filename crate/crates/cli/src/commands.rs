use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rmviab::estimation::{
    self, Bounds, FitOptions, IncidenceSeries, PrevalenceDataset, PrevalenceRule, DEFAULT_WINDOW,
};
use rmviab::kernel::boundary_curve_with;
use rmviab::report::fmt_num;
use rmviab::trajectory::DEFAULT_TOL;
use rmviab::{
    audit_viability, describe_kernel, regime_diagram, simulate_with_tol, ControlPolicy, EpiParams,
    Error, FrontierOptions, Regime, State, Thresholds,
};

use crate::config::{
    CliError, CliResult, RunConfig, EXIT_CONFIG, EXIT_FAILURE, EXIT_NOT_MEDIUM_BOUNDARY,
    EXIT_NOT_MEDIUM_FEEDBACK,
};
use crate::svg;

fn emit(key: &str, value: impl std::fmt::Display) {
    println!("{key} = {value}");
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.path("out").unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| {
        CliError::new(
            EXIT_FAILURE,
            format!("cannot create {}: {e}", dir.display()),
        )
    })?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| {
        CliError::new(
            EXIT_FAILURE,
            format!("cannot write {}: {e}", path.display()),
        )
    })
}

fn tol(cfg: &RunConfig, default: f64) -> CliResult<f64> {
    let tol = cfg.f64_or("tol", default)?;
    if !(tol > 0.0) {
        return Err(CliError::config("tol", format!("{tol} must be positive")));
    }
    Ok(tol)
}

fn h_bar(cfg: &RunConfig) -> CliResult<f64> {
    let h = cfg.require_f64("h_bar")?;
    if !(h > 0.0 && h < 1.0) {
        return Err(CliError::config("h_bar", format!("{h} outside (0, 1)")));
    }
    Ok(h)
}

fn frontier_options(cfg: &RunConfig) -> CliResult<FrontierOptions> {
    let defaults = FrontierOptions::default();
    let step = cfg.f64_or("step", defaults.step)?;
    if !(step > 0.0) {
        return Err(CliError::config("step", format!("{step} must be positive")));
    }
    Ok(FrontierOptions {
        step,
        tol: tol(cfg, defaults.tol)?,
    })
}

pub fn classify(cfg: &RunConfig) -> CliResult<()> {
    let rates = cfg.rates(None)?;
    let h_bar = h_bar(cfg)?;
    let th = Thresholds::new(&rates).map_err(CliError::from_core)?;
    let regime = th.classify(h_bar);
    emit("regime", regime);
    emit("h_bar", fmt_num(h_bar));
    emit("lower_threshold", fmt_num(th.lower));
    emit("upper_threshold", fmt_num(th.upper));
    if regime == Regime::Medium {
        emit(
            "m_bar",
            fmt_num(rmviab::m_bar(&rates, h_bar).map_err(CliError::from_core)?),
        );
    }
    let unproven = regime == Regime::Medium && !th.proven();
    emit("outside_proven_hypotheses", unproven);
    if unproven {
        eprintln!("warning: lower threshold is not positive; the medium-regime kernel is outside the proven hypotheses");
    }
    Ok(())
}

pub fn boundary(cfg: &RunConfig) -> CliResult<()> {
    let rates = cfg.rates(None)?;
    let h_bar = h_bar(cfg)?;
    let opts = frontier_options(cfg)?;
    let curve = boundary_curve_with(&rates, h_bar, &opts).map_err(|e| match e {
        Error::NotMedium(r) => CliError::new(
            EXIT_NOT_MEDIUM_BOUNDARY,
            format!(
                "regime is {r}: no frontier curve to compute (the low-regime kernel is the origin, the high-regime kernel is the whole box [0,1]x[0,{}])",
                fmt_num(h_bar)
            ),
        ),
        other => CliError::from_core(other),
    })?;
    let dir = out_dir(cfg)?;

    let mut csv = String::from("m,Y\n");
    for [m, y] in &curve.samples {
        let _ = writeln!(csv, "{},{}", fmt_num(*m), fmt_num(*y));
    }
    let csv_path = dir.join("frontier.csv");
    write_file(&csv_path, &csv)?;
    let svg_path = dir.join("frontier.svg");
    write_file(&svg_path, &svg::kernel(h_bar, &curve.samples))?;

    emit("regime", Regime::Medium);
    emit("m_bar", fmt_num(curve.m_bar));
    emit("m_inf", fmt_num(curve.m_inf));
    emit("samples", curve.samples.len());
    emit("csv", csv_path.display());
    emit("svg", svg_path.display());
    Ok(())
}

fn parse_schedule(text: &str) -> CliResult<Vec<(f64, f64)>> {
    text.split(',')
        .map(|item| {
            let (t, u) = item.split_once(':').ok_or_else(|| {
                CliError::config("schedule", format!("`{}` is not `t:u`", item.trim()))
            })?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        CliError::config("schedule", format!("`{}` is not a number", s.trim()))
                    })
            };
            Ok((num(t)?, num(u)?))
        })
        .collect()
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let rates = cfg.rates(None)?;
    let init =
        State::new(cfg.require_f64("m0")?, cfg.require_f64("h0")?).map_err(CliError::from_core)?;
    let horizon = cfg.require_f64("horizon")?;
    let dt_out = cfg.f64_or("dt_out", 0.1)?;
    let cap = if cfg.has("h_bar") {
        Some(h_bar(cfg)?)
    } else {
        None
    };

    let policy = match cfg.str("policy").unwrap_or("constant") {
        "constant" => ControlPolicy::Constant {
            u: cfg.f64_or("u", rates.u_max)?,
        },
        "piecewise" => ControlPolicy::PiecewiseConstant {
            breakpoints: parse_schedule(cfg.require_str("schedule")?)?,
        },
        "feedback" => {
            let Some(h_bar) = cap else {
                return Err(CliError::config(
                    "h_bar",
                    "missing (required by feedback policy)",
                ));
            };
            let kernel = describe_kernel(&rates, h_bar, &frontier_options(cfg)?)
                .map_err(CliError::from_core)?;
            if kernel.regime() != Regime::Medium {
                return Err(CliError::new(
                    EXIT_NOT_MEDIUM_FEEDBACK,
                    format!(
                        "feedback policy needs the medium regime, got {}",
                        kernel.regime()
                    ),
                ));
            }
            ControlPolicy::SaturatingFeedback {
                kernel,
                u_min: rates.u_min,
                u_max: rates.u_max,
            }
        }
        other => {
            return Err(CliError::config(
                "policy",
                format!("`{other}` is not one of constant, piecewise, feedback"),
            ))
        }
    };

    let traj = simulate_with_tol(
        init,
        &policy,
        &rates,
        horizon,
        dt_out,
        tol(cfg, DEFAULT_TOL)?,
    )
    .map_err(CliError::from_core)?;
    let dir = out_dir(cfg)?;
    let mut csv = String::from("t,m,h,u\n");
    for s in &traj.samples {
        let clamped = State::clamped(s.m, s.h);
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_num(s.t),
            fmt_num(clamped.m),
            fmt_num(clamped.h),
            fmt_num(s.u)
        );
    }
    let csv_path = dir.join("trajectory.csv");
    write_file(&csv_path, &csv)?;

    let last = traj.last();
    emit("samples", traj.samples.len());
    emit("final_m", fmt_num(last.m.clamp(0.0, 1.0)));
    emit("final_h", fmt_num(last.h.clamp(0.0, 1.0)));
    match cap.map(|h| audit_viability(&traj, h)) {
        None => emit("audit", "skipped"),
        Some(None) => emit("audit", "viable"),
        Some(Some(t)) => {
            emit("audit", "violated");
            emit("first_violation_t", fmt_num(t));
        }
    }
    if matches!(policy, ControlPolicy::SaturatingFeedback { .. }) {
        emit("left_kernel", traj.left_kernel);
        if traj.left_kernel {
            eprintln!("warning: trajectory left the kernel; control fell back to u_max");
        }
    }
    emit("csv", csv_path.display());
    Ok(())
}

pub fn diagram(cfg: &RunConfig) -> CliResult<()> {
    let u_grid = cfg.grid("u_grid")?;
    let h_grid = cfg.grid("h_grid")?;
    if u_grid.is_empty() || h_grid.is_empty() {
        return Err(CliError::config("u_grid", "grids must be nonempty"));
    }
    let mut base = cfg.rates(Some(u_grid.iter().copied().fold(0.0, f64::max)))?;
    base.u_min = 0.0;
    let cells = regime_diagram(&base, &u_grid, &h_grid);

    let mut csv = String::from("u,H,regime\n");
    let mut counts = [0usize; 4];
    for cell in &cells {
        let label = match &cell.regime {
            Ok(r) => {
                counts[*r as usize] += 1;
                r.as_str()
            }
            Err(e) => {
                counts[3] += 1;
                eprintln!(
                    "cell u = {}, H = {}: {e}",
                    fmt_num(cell.u_max),
                    fmt_num(cell.h_bar)
                );
                "error"
            }
        };
        let _ = writeln!(
            csv,
            "{},{},{label}",
            fmt_num(cell.u_max),
            fmt_num(cell.h_bar)
        );
    }
    let dir = out_dir(cfg)?;
    let csv_path = dir.join("diagram.csv");
    write_file(&csv_path, &csv)?;
    emit("cells", cells.len());
    for r in [Regime::Low, Regime::Medium, Regime::High] {
        emit(r.as_str(), counts[r as usize]);
    }
    emit("error", counts[3]);
    emit("csv", csv_path.display());
    if counts[3] > 0 {
        return Err(CliError::new(
            EXIT_FAILURE,
            format!("{} diagram cells failed", counts[3]),
        ));
    }
    Ok(())
}

fn read_file(path: &Path) -> CliResult<fs::File> {
    fs::File::open(path)
        .map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot read {}: {e}", path.display())))
}

fn dataset(cfg: &RunConfig, gamma: f64) -> CliResult<PrevalenceDataset> {
    match (cfg.path("incidence"), cfg.path("prevalence")) {
        (Some(_), Some(_)) => Err(CliError::config(
            "prevalence",
            "give either incidence or prevalence, not both",
        )),
        (Some(path), None) => {
            let new_cases =
                estimation::read_incidence_csv(read_file(&path)?).map_err(CliError::from_core)?;
            let population = cfg.u64("population")?.ok_or_else(|| {
                CliError::config("population", "missing (required with incidence)")
            })?;
            let rule = match cfg.str("prevalence_rule").unwrap_or("geometric") {
                "geometric" => PrevalenceRule::GeometricDecay,
                "moving_sum" => PrevalenceRule::MovingSum,
                other => {
                    return Err(CliError::config(
                        "prevalence_rule",
                        format!("`{other}` is not one of geometric, moving_sum"),
                    ))
                }
            };
            estimation::incidence_to_prevalence_with(
                &IncidenceSeries {
                    new_cases,
                    population,
                },
                gamma,
                rule,
            )
            .map_err(CliError::from_core)
        }
        (None, Some(path)) => {
            estimation::read_prevalence_csv(read_file(&path)?).map_err(CliError::from_core)
        }
        (None, None) => Err(CliError::config(
            "incidence",
            "missing (or give prevalence)",
        )),
    }
}

pub fn fit(cfg: &RunConfig) -> CliResult<()> {
    let gamma = cfg.f64_or("gamma", estimation::DEFAULT_GAMMA)?;
    let window = cfg.u64("window")?.unwrap_or(DEFAULT_WINDOW as u64);
    let window = u32::try_from(window).map_err(|_| CliError::config("window", "too large"))?;
    let data = dataset(cfg, gamma)?.window(window);

    let theta0 = match cfg.f64_list("theta0")? {
        None => EpiParams::CALI_2013_INITIAL.theta(),
        Some(v) => <[f64; 5]>::try_from(v).map_err(|_| {
            CliError::config("theta0", "expected five values alpha, p_h, p_m, xi, delta")
        })?,
    };
    let bounds = Bounds::default();
    if !bounds.contains(&theta0) {
        return Err(CliError::config("theta0", "outside the parameter box"));
    }
    let opts = FitOptions {
        ode_tol: tol(cfg, FitOptions::default().ode_tol)?,
        ..FitOptions::default()
    };
    let result = estimation::fit_with(
        &data,
        &bounds,
        &EpiParams::from_theta(theta0, gamma),
        gamma,
        &opts,
    )
    .map_err(CliError::from_core)?;

    let model = estimation::model_prevalence(&result.theta_hat, &data, opts.ode_tol)
        .map_err(CliError::from_core)?;
    let mut csv = String::from("day,h_hat,h_model\n");
    for ((d, h), hm) in data.days().iter().zip(data.h_hat()).zip(&model) {
        let _ = writeln!(csv, "{d},{},{}", fmt_num(*h), fmt_num(*hm));
    }
    let dir = out_dir(cfg)?;
    let csv_path = dir.join("fit.csv");
    write_file(&csv_path, &csv)?;

    print!("{}", result.report());
    emit("observations", data.len());
    emit("csv", csv_path.display());
    if !result.converged {
        eprintln!("warning: fit stopped at the iteration limit");
    }
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.epi_params(&EpiParams::CALI_2013_ESTIMATE)?;
    let h0 = cfg.f64_or("h0", 1e-4)?;
    let days = cfg.u64("days")?.unwrap_or(DEFAULT_WINDOW as u64);
    let days = u32::try_from(days).map_err(|_| CliError::config("days", "too large"))?;
    let data = estimation::synthetic_prevalence(&params, h0, days, tol(cfg, 1e-12)?).map_err(
        |e| match e {
            Error::InvalidParameter { name: "h0", reason } => CliError::config("h0", reason),
            other => CliError::from_core(other),
        },
    )?;
    let dir = out_dir(cfg)?;

    let mut buf = Vec::new();
    estimation::write_prevalence_csv(&mut buf, &data).map_err(CliError::from_core)?;
    let prevalence_path = dir.join("prevalence.csv");
    write_file(&prevalence_path, &String::from_utf8_lossy(&buf))?;
    emit("prevalence", prevalence_path.display());

    if let Some(population) = cfg.u64("population")? {
        if population == 0 {
            return Err(CliError::new(
                EXIT_CONFIG,
                "invalid config key `population`: must be positive",
            ));
        }
        let counts = estimation::prevalence_to_incidence(&data, population, params.gamma);
        let mut buf = Vec::new();
        estimation::write_incidence_csv(&mut buf, &counts).map_err(CliError::from_core)?;
        let incidence_path = dir.join("incidence.csv");
        write_file(&incidence_path, &String::from_utf8_lossy(&buf))?;
        emit("incidence", incidence_path.display());
    }
    emit("a_m", fmt_num(params.a_m()));
    emit("a_h", fmt_num(params.a_h()));
    emit("delta", fmt_num(params.delta));
    Ok(())
}
