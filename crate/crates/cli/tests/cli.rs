use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use rmviab::kernel::MediumKernel;
use rmviab::{describe_kernel, kernel_membership, FrontierOptions, ModelRates, State};

const FIGURE: [&str; 6] = [
    "--set",
    "a_m=0.02906",
    "--set",
    "a_h=0.31066",
    "--set",
    "u_max=0.03733",
];

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn values(&self) -> BTreeMap<String, String> {
        self.stdout
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn value(&self, key: &str) -> String {
        self.values()
            .remove(key)
            .unwrap_or_else(|| panic!("no `{key}` in output:\n{}", self.stdout))
    }
}

fn rmviab(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_rmviab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Subcommand first, then the figure rates, then the remaining flags.
fn with_figure<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let (cmd, rest) = extra.split_first().expect("subcommand");
    std::iter::once(*cmd)
        .chain(FIGURE)
        .chain(rest.iter().copied())
        .collect()
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn numeric_rows(path: &Path) -> Vec<Vec<f64>> {
    read_rows(path)
        .into_iter()
        .map(|r| r.iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn classify_reports_regime_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&["classify", "--set", "h_bar=0.5"]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.value("regime"), "Medium");
    let m_bar: f64 = run.value("m_bar").parse().unwrap();
    assert!((m_bar - 0.321896).abs() < 1e-6);
    let lower: f64 = run.value("lower_threshold").parse().unwrap();
    assert!((lower - 0.44368).abs() < 1e-5);
    assert_eq!(run.value("outside_proven_hypotheses"), "false");
}

#[test]
fn classify_high_with_raw_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cali.cfg");
    fs::write(
        &cfg,
        "# table estimates\nalpha = 0.3365\np_h = 0.2287\np_m = 0.1532\nxi = 1.0359\ndelta = 0.0333\nu_max = 0.0333\nh_bar = 0.5\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let run = rmviab(
        dir.path(),
        &["classify", "--config", cfg, "--set", "h_bar=0.9"],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.value("regime"), "High");
    assert_eq!(run.value("h_bar"), "0.9");
}

#[test]
fn flags_unproven_medium_instances() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &[
            "classify",
            "--set",
            "a_m=0.1",
            "--set",
            "a_h=0.2",
            "--set",
            "u_max=0.5",
            "--set",
            "h_bar=0.3",
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.value("regime"), "Medium");
    assert_eq!(run.value("outside_proven_hypotheses"), "true");
    assert!(run.stderr.contains("proven hypotheses"));
}

#[test]
fn invalid_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let missing = rmviab(dir.path(), &with_figure(&["classify"]));
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.contains("`h_bar`"), "{}", missing.stderr);

    let bad = rmviab(
        dir.path(),
        &with_figure(&["classify", "--set", "h_bar=abc"]),
    );
    assert_eq!(bad.code, 2);
    assert!(bad.stderr.contains("`h_bar`"));

    let typo = rmviab(dir.path(), &with_figure(&["classify", "--set", "hbar=0.5"]));
    assert_eq!(typo.code, 2);
    assert!(typo.stderr.contains("`hbar`"));

    let negative = rmviab(
        dir.path(),
        &[
            "classify",
            "--set",
            "a_m=-1",
            "--set",
            "a_h=0.3",
            "--set",
            "u_max=0.1",
            "--set",
            "h_bar=0.5",
        ],
    );
    assert_eq!(negative.code, 2);
    assert!(negative.stderr.contains("`a_m`"));
}

#[test]
fn boundary_csv_runs_from_cap_to_m_inf() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&["boundary", "--set", "h_bar=0.7", "--out", "o"]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let rows = numeric_rows(&dir.path().join("o/frontier.csv"));
    let m_bar: f64 = run.value("m_bar").parse().unwrap();
    assert_eq!(rows[0], vec![m_bar, 0.7]);
    assert_eq!(rows.last().unwrap()[0], 1.0);
    assert!(rows
        .windows(2)
        .all(|w| w[1][0] > w[0][0] && w[1][1] < w[0][1]));
    let svg = fs::read_to_string(dir.path().join("o/frontier.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polygon"));
}

#[test]
fn boundary_refuses_non_medium_regimes() {
    let dir = tempfile::tempdir().unwrap();
    for h in ["h_bar=0.3", "h_bar=0.8"] {
        let run = rmviab(dir.path(), &with_figure(&["boundary", "--set", h]));
        assert_eq!(run.code, 3, "{h}");
        assert!(run.stderr.contains("no frontier curve"));
    }
}

#[test]
fn boundary_csv_round_trips_membership() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&["boundary", "--set", "h_bar=0.5", "--out", "o"]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let samples: Vec<[f64; 2]> = numeric_rows(&dir.path().join("o/frontier.csv"))
        .into_iter()
        .map(|r| [r[0], r[1]])
        .collect();
    let rates = ModelRates::new(0.02906, 0.31066, 0.1, 0.0, 0.03733).unwrap();
    let reread = MediumKernel::from_samples(&rates, 0.5, &samples).unwrap();
    let direct = describe_kernel(&rates, 0.5, &FrontierOptions::default()).unwrap();

    let n = 200;
    for i in 0..=n {
        for j in 0..=n {
            let (m, h) = (i as f64 / n as f64, j as f64 / n as f64);
            let state = State::new(m, h).unwrap();
            assert_eq!(
                reread.contains(m, h),
                kernel_membership(&direct, state),
                "({m}, {h})"
            );
        }
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let jobs: [&[&str]; 3] = [
        &["boundary", "--set", "h_bar=0.5"],
        &[
            "simulate",
            "--set",
            "h_bar=0.5",
            "--set",
            "policy=feedback",
            "--set",
            "u_min=0.0333",
            "--set",
            "m0=0.1",
            "--set",
            "h0=0.4",
            "--set",
            "horizon=50",
        ],
        &[
            "diagram",
            "--set",
            "u_grid=0:0.2:9",
            "--set",
            "h_grid=0.05:0.95:7",
        ],
    ];
    for (k, job) in jobs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = format!("run{k}_{rep}");
            let mut args = with_figure(job);
            args.extend(["--out", &out]);
            let run = rmviab(dir.path(), &args);
            assert_eq!(run.code, 0, "{}", run.stderr);
            let mut files: Vec<_> = fs::read_dir(dir.path().join(&out))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            outputs.push(
                files
                    .iter()
                    .map(|f| fs::read(f).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        assert_eq!(outputs[0], outputs[1], "job {k}");
    }
}

#[test]
fn simulate_from_origin_stays_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&[
            "simulate",
            "--set",
            "m0=0",
            "--set",
            "h0=0",
            "--set",
            "horizon=30",
        ]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.value("audit"), "skipped");
    let rows = read_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 301);
    assert!(rows.iter().all(|r| r[1] == "0" && r[2] == "0"));
}

#[test]
fn constant_run_settles_at_endemic_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let (a_m, a_h, gamma, u) = (0.3, 0.4, 0.1, 0.05);
    let run = rmviab(
        dir.path(),
        &[
            "simulate",
            "--set",
            "a_m=0.3",
            "--set",
            "a_h=0.4",
            "--set",
            "u_max=0.05",
            "--set",
            "m0=0.9",
            "--set",
            "h0=0.05",
            "--set",
            "horizon=1500",
            "--set",
            "dt_out=5",
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r0 = a_m * a_h / (gamma * u);
    let (m_star, h_star) = ((r0 - 1.0) / (r0 + a_h / gamma), (r0 - 1.0) / (r0 + a_m / u));
    let m: f64 = run.value("final_m").parse().unwrap();
    let h: f64 = run.value("final_h").parse().unwrap();
    assert!(
        (m - m_star).abs() < 1e-6 && (h - h_star).abs() < 1e-6,
        "({m}, {h}) vs ({m_star}, {h_star})"
    );
}

#[test]
fn feedback_inside_kernel_is_viable() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&[
            "simulate",
            "--set",
            "u_min=0.0333",
            "--set",
            "h_bar=0.5",
            "--set",
            "policy=feedback",
            "--set",
            "m0=0.35",
            "--set",
            "h0=0.3",
            "--set",
            "horizon=200",
        ]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.value("audit"), "viable");
    assert_eq!(run.value("left_kernel"), "false");
    let rows = numeric_rows(&dir.path().join("trajectory.csv"));
    assert!(rows
        .iter()
        .all(|r| r[2] <= 0.5 && (0.0333..=0.03733).contains(&r[3])));
}

#[test]
fn feedback_outside_medium_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&[
            "simulate",
            "--set",
            "h_bar=0.3",
            "--set",
            "policy=feedback",
            "--set",
            "m0=0",
            "--set",
            "h0=0",
            "--set",
            "horizon=10",
        ]),
    );
    assert_eq!(run.code, 4);
    assert!(run.stderr.contains("Low"));
}

#[test]
fn piecewise_schedule_is_reported_in_u_column() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&[
            "simulate",
            "--set",
            "policy=piecewise",
            "--set",
            "schedule=0:0.01, 5:0.03",
            "--set",
            "m0=0.2",
            "--set",
            "h0=0.2",
            "--set",
            "horizon=10",
            "--set",
            "dt_out=1",
        ]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let u: Vec<String> = read_rows(&dir.path().join("trajectory.csv"))
        .into_iter()
        .map(|r| r[3].clone())
        .collect();
    assert_eq!(u[..5], ["0.01"; 5]);
    assert_eq!(u[5..], ["0.03"; 6]);
}

#[test]
fn diagram_rows_follow_the_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&[
            "diagram",
            "--set",
            "u_grid=0, 0.03733, 0.1",
            "--set",
            "h_grid=0.3, 0.5, 0.76, 0.9",
        ]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let rows = read_rows(&dir.path().join("diagram.csv"));
    assert_eq!(rows.len(), 12);
    let regime = |u: &str, h: &str| {
        rows.iter()
            .find(|r| r[0] == u && r[1] == h)
            .map(|r| r[2].clone())
            .unwrap()
    };
    assert_eq!(regime("0.03733", "0.5"), "medium");
    for u in ["0", "0.03733", "0.1"] {
        assert_eq!(regime(u, "0.76"), "high");
        assert_eq!(regime(u, "0.9"), "high");
    }
    assert!(rows
        .iter()
        .filter(|r| r[0] == "0")
        .all(|r| r[2] != "medium"));
    // lower threshold is negative at u = 0.1: medium, outside the proven hypotheses
    assert_eq!(regime("0.1", "0.3"), "medium");
    assert_eq!(run.value("medium"), "3");
}

#[test]
fn diagram_error_cells_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = rmviab(
        dir.path(),
        &with_figure(&["diagram", "--set", "u_grid=0.03", "--set", "h_grid=0.5, 1"]),
    );
    assert_ne!(run.code, 0);
    let rows = read_rows(&dir.path().join("diagram.csv"));
    assert_eq!(rows[1][2], "error");
    assert_eq!(run.value("error"), "1");
}

fn synth(dir: &Path, days: &str) {
    let run = rmviab(
        dir,
        &[
            "synth",
            "--set",
            "population=100000000",
            "--set",
            &format!("days={days}"),
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
}

#[test]
fn fit_recovers_synthetic_reduced_rates() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "60");
    let run = rmviab(
        dir.path(),
        &[
            "fit",
            "--set",
            "incidence=incidence.csv",
            "--set",
            "population=100000000",
            "--out",
            "fit",
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let rel = |key: &str, truth: f64| {
        let v: f64 = run.value(key).parse().unwrap();
        (v - truth).abs() / truth
    };
    assert!(rel("a_m", 0.3365 * 0.1532) < 0.02);
    assert!(rel("a_h", 0.3365 * 0.2287 * 1.0359) < 0.02);
    assert!(rel("delta", 0.0333) < 0.02);
    let rows = read_rows(&dir.path().join("fit/fit.csv"));
    assert_eq!(rows.len(), 61);
    assert_eq!(rows[0][0], "0");
}

#[test]
fn fit_honors_the_sixty_day_window() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "90");
    let run = rmviab(dir.path(), &["fit", "--set", "prevalence=prevalence.csv"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.value("observations"), "61");
    let last = read_rows(&dir.path().join("fit.csv")).pop().unwrap();
    assert_eq!(last[0], "60");
}

#[test]
fn malformed_csv_exits_5_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "day,new_cases\n0,3\n1,4\n2,-1\n",
    )
    .unwrap();
    fs::write(dir.path().join("gap.csv"), "day,new_cases\n0,3\n2,4\n").unwrap();
    for (file, line) in [
        ("empty.csv", "line 1"),
        ("bad.csv", "line 4"),
        ("gap.csv", "line 3"),
    ] {
        let run = rmviab(
            dir.path(),
            &[
                "fit",
                "--set",
                &format!("incidence={file}"),
                "--set",
                "population=1000",
            ],
        );
        assert_eq!(run.code, 5, "{file}: {}", run.stderr);
        assert!(run.stderr.contains(line), "{file}: {}", run.stderr);
    }
}
