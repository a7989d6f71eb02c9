//! Subcommand implementations. Each reads its keys from the config, runs,
//! and returns a report plus a short human-readable summary.

use std::fmt::Write as _;

use hdustat::cpdetect::{bridge_grid_for, detect_change_on_grid, DEFAULT_BRIDGE_PATHS};
use hdustat::sntest::{DEFAULT_W_GRID, DEFAULT_W_PATHS};
use hdustat::studies::{
    coupling_check, lemma1_check, power_study, quantile_table, size_study, CouplingConfig,
    DeltaRule, Lemma1Config, QuantileTableConfig, StudyConfig, StudyOutcome, StudyTest,
    BRIDGE_STREAM, LIMIT_STREAM,
};
use hdustat::{
    run_relevant_test, simulate_dataset, Design, KernelSpec, Marginal, RelevantTestConfig, RngSpec,
};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::ingest::{read_csv, write_csv_file};
use crate::report::{to_value, Diagnostics, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    RelevantTest,
    Changepoint,
    SizeStudy,
    PowerStudy,
    CouplingCheck,
    Lemma1Check,
    QuantileTable,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RelevantTest => "relevant-test",
            Command::Changepoint => "changepoint",
            Command::SizeStudy => "size-study",
            Command::PowerStudy => "power-study",
            Command::CouplingCheck => "coupling-check",
            Command::Lemma1Check => "lemma1-check",
            Command::QuantileTable => "quantile-table",
            Command::Simulate => "simulate",
        }
    }
}

pub struct Outcome {
    pub report: Report,
    pub summary: String,
}

pub fn run(command: Command, mut cfg: Config) -> CliResult<Outcome> {
    let seed = cfg.u64_or("seed", 0)?;
    let (config, results, diagnostics, summary) = match command {
        Command::RelevantTest => relevant_test(cfg, seed)?,
        Command::Changepoint => changepoint(cfg, seed)?,
        Command::SizeStudy => study(cfg, seed, false)?,
        Command::PowerStudy => study(cfg, seed, true)?,
        Command::CouplingCheck => coupling(cfg, seed)?,
        Command::Lemma1Check => lemma1(cfg, seed)?,
        Command::QuantileTable => quantiles(cfg, seed)?,
        Command::Simulate => simulate(cfg, seed)?,
    };
    Ok(Outcome {
        report: Report::new(command.name(), seed, config, results, diagnostics),
        summary,
    })
}

type Parts = (
    std::collections::BTreeMap<String, String>,
    serde_json::Value,
    Diagnostics,
    String,
);

/// The growth heuristic `d <= n^(1/3)`; larger dimensions get a warning.
pub fn dimension_warning(d: usize, n: usize) -> Option<String> {
    ((d as f64) > (n as f64).cbrt()).then(|| {
        format!("kernel dimension d = {d} exceeds n^(1/3) = {:.2} for n = {n}; asymptotic calibration may be poor", (n as f64).cbrt())
    })
}

fn warnings(pairs: &[(usize, usize)]) -> Vec<String> {
    let mut out: Vec<String> = pairs
        .iter()
        .filter_map(|&(d, n)| dimension_warning(d, n))
        .collect();
    out.dedup();
    out
}

fn at_least(name: &str, v: usize, min: usize) -> CliResult<usize> {
    match v >= min {
        true => Ok(v),
        false => Err(CliError::Config(format!(
            "`{name}` must be >= {min}, got {v}"
        ))),
    }
}

fn bridge_grid_opt(cfg: &mut Config) -> CliResult<Option<usize>> {
    cfg.usize_opt("bridge_grid")?
        .map(|g| at_least("bridge_grid", g, 2))
        .transpose()
}

fn positive(name: &str, v: usize) -> CliResult<usize> {
    at_least(name, v, 1)
}

fn relevant_test(mut cfg: Config, seed: u64) -> CliResult<Parts> {
    let kernel = cfg.kernel()?;
    let alpha = cfg.alpha()?;
    let x_path = cfg.path_req("x")?;
    let y_path = cfg.path_req("y")?;
    let delta = cfg.f64_req("delta")?;
    if delta < 0.0 {
        return Err(CliError::Config(format!(
            "`delta` must be >= 0, got {delta}"
        )));
    }
    let lambda_grid_size = cfg.usize_opt("lambda_grid")?;
    if matches!(lambda_grid_size, Some(m) if m < 8) {
        return Err(CliError::Config("`lambda_grid` must be >= 8".into()));
    }
    let w_paths = at_least("w_paths", cfg.usize_or("w_paths", DEFAULT_W_PATHS)?, 100)?;
    let w_grid_size = at_least("w_grid", cfg.usize_or("w_grid", DEFAULT_W_GRID)?, 16)?;
    let echo = cfg.finish()?;

    let x = read_csv(&x_path)?;
    let y = read_csv(&y_path)?;
    if x.p() != y.p() {
        return Err(CliError::Data(format!(
            "samples have {} and {} columns",
            x.p(),
            y.p()
        )));
    }
    let d = kernel.dimension(x.p());
    let test = RelevantTestConfig {
        lambda_grid_size,
        w_paths,
        w_grid_size,
        ..RelevantTestConfig::new(delta, alpha, RngSpec::new(seed, LIMIT_STREAM))
    };
    let rep = run_relevant_test(&x, &y, &kernel, &test)?;
    let diagnostics = Diagnostics {
        degenerate: rep.degenerate,
        warnings: warnings(&[(d, x.n().min(y.n()))]),
        ..Diagnostics::default()
    };
    let mut results = to_value(&rep);
    results["n_x"] = json!(x.n());
    results["n_y"] = json!(y.n());
    results["d"] = json!(d);
    let summary = format!(
        "relevant test |theta_x - theta_y|^2 <= {delta} ({kernel}, n_x = {}, n_y = {}, d = {d})\n  \
         S = {:.6}, D(1) = {:.6e}, V = {:.6e}, q = {:.6}\n  decision: {}\n",
        x.n(),
        y.n(),
        rep.s,
        rep.d1,
        rep.v,
        rep.q,
        if rep.reject { "reject (difference is relevant)" } else { "do not reject" }
    );
    Ok((echo, results, diagnostics, summary))
}

fn changepoint(mut cfg: Config, seed: u64) -> CliResult<Parts> {
    let kernel = cfg.kernel()?;
    let alpha = cfg.alpha()?;
    let data = cfg.path_req("data")?;
    let n_paths = at_least(
        "n_paths",
        cfg.usize_or("n_paths", DEFAULT_BRIDGE_PATHS)?,
        1000,
    )?;
    let grid = bridge_grid_opt(&mut cfg)?;
    let echo = cfg.finish()?;

    let sample = read_csv(&data)?;
    let grid = grid.unwrap_or_else(|| bridge_grid_for(sample.n()));
    let d = kernel.dimension(sample.p());
    let res = detect_change_on_grid(
        &sample,
        &kernel,
        alpha,
        n_paths,
        grid,
        RngSpec::new(seed, BRIDGE_STREAM),
    )?;
    let mut results = to_value(&res);
    results["n"] = json!(sample.n());
    results["d"] = json!(d);
    results["cusum_norms"] = to_value(&res.path.as_ref().map(|p| p.norms()).unwrap_or_default());
    let diagnostics = Diagnostics {
        lambda_min: Some(res.lambda_min),
        clipped_mass: Some(res.clipped_mass),
        degenerate: res.q == 0.0,
        warnings: warnings(&[(d, sample.n())]),
    };
    let summary = format!(
        "CUSUM change-point test ({kernel}, n = {}, d = {d})\n  T_n = {:.6}, q = {:.6}, k_hat = {}, tau_hat = {:.4}\n  decision: {}\n",
        sample.n(),
        res.t_n,
        res.q,
        res.k_hat,
        res.tau_hat,
        if res.reject { "reject (change detected)" } else { "do not reject" }
    );
    Ok((echo, results, diagnostics, summary))
}

/// Per-coordinate laws from `<prefix>family`, `<prefix>loc`, `<prefix>scale`.
/// `loc` and `scale` take one value or one per coordinate.
fn marginals(
    cfg: &mut Config,
    prefix: &str,
    p: usize,
    default: &[Marginal],
) -> CliResult<Vec<Marginal>> {
    let key = |k: &str| format!("{prefix}{k}");
    let family = cfg.string_or(&key("family"), default[0].family())?;
    let locs: Vec<f64> = default.iter().map(Marginal::loc).collect();
    let scales: Vec<f64> = default.iter().map(Marginal::scale).collect();
    let loc = broadcast(
        &key("loc"),
        cfg.f64_list_or(&key("loc"), &compress(&locs))?,
        p,
    )?;
    let scale = broadcast(
        &key("scale"),
        cfg.f64_list_or(&key("scale"), &compress(&scales))?,
        p,
    )?;
    let laws = loc
        .iter()
        .zip(&scale)
        .map(|(&l, &s)| match family.as_str() {
            "normal" => Ok(Marginal::normal(l, s)),
            "cauchy" => Ok(Marginal::cauchy(l, s)),
            "laplace" => Ok(Marginal::laplace(l, s)),
            other => Err(CliError::Config(format!(
                "`{}`: unknown family `{other}`",
                key("family")
            ))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    for m in &laws {
        m.validate()?;
    }
    Ok(laws)
}

fn compress(v: &[f64]) -> Vec<f64> {
    match v.iter().all(|x| *x == v[0]) {
        true => vec![v[0]],
        false => v.to_vec(),
    }
}

fn broadcast(key: &str, v: Vec<f64>, p: usize) -> CliResult<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; p]),
        len if len == p => Ok(v),
        len => Err(CliError::Config(format!(
            "`{key}` has {len} entries, expected 1 or p = {p}"
        ))),
    }
}

/// A design from `n_key`, `p`, the pre-break laws and an optional break.
fn design(
    cfg: &mut Config,
    n_key: &str,
    n_default: usize,
    p: usize,
    with_break: bool,
) -> CliResult<Design> {
    let n = cfg.usize_or(n_key, n_default)?;
    let pre = marginals(cfg, "", p, &[Marginal::normal(0.0, 1.0)])?;
    let mut design = Design {
        n,
        marginals: pre.clone(),
        change: None,
    };
    if with_break {
        if let Some(tau) = cfg.f64_opt("tau_star")? {
            let post = marginals(cfg, "post_", p, &pre)?;
            design = design.with_change(tau, post);
        }
    }
    design.validate()?;
    Ok(design)
}

fn study(mut cfg: Config, seed: u64, power: bool) -> CliResult<Parts> {
    let kernel = cfg.kernel()?;
    let alpha = cfg.alpha()?;
    let replications = positive("replications", cfg.usize_or("replications", 500)?)?;
    let kind = cfg.string_or("test", "changepoint")?;
    let p = positive("p", cfg.usize_or("p", 4)?)?;
    let d = kernel.dimension(p);
    let (test, dims) = match kind.as_str() {
        "changepoint" => {
            let design = design(&mut cfg, "n", 400, p, true)?;
            if design.n < 5 {
                return Err(CliError::Config("`n` must be >= 5".into()));
            }
            let n_paths = at_least("n_paths", cfg.usize_or("n_paths", DEFAULT_BRIDGE_PATHS)?, 1000)?;
            let bridge_grid = bridge_grid_opt(&mut cfg)?;
            let n = design.n;
            (
                StudyTest::Changepoint {
                    design,
                    n_paths,
                    bridge_grid,
                },
                vec![(d, n)],
            )
        }
        "relevant" => {
            let x = design(&mut cfg, "n_x", 400, p, false)?;
            let y_n = cfg.usize_or("n_y", x.n)?;
            let y_laws = marginals(&mut cfg, "y_", p, &x.marginals)?;
            let y = Design {
                n: y_n,
                marginals: y_laws,
                change: None,
            };
            if x.n < 4 || y.n < 4 {
                return Err(CliError::Config("`n_x` and `n_y` must be >= 4".into()));
            }
            let delta = match (cfg.contains("delta"), cfg.contains("delta_factor")) {
                (true, true) => {
                    return Err(CliError::Config(
                        "give either `delta` or `delta_factor`, not both".into(),
                    ))
                }
                (true, false) => DeltaRule::Fixed(cfg.f64_req("delta")?),
                (false, _) => DeltaRule::BoundaryScaled(cfg.f64_or("delta_factor", 1.0)?),
            };
            let lambda_grid_size = cfg.usize_opt("lambda_grid")?;
            if matches!(lambda_grid_size, Some(m) if m < 8) {
                return Err(CliError::Config("`lambda_grid` must be >= 8".into()));
            }
            let w_paths = at_least("w_paths", cfg.usize_or("w_paths", DEFAULT_W_PATHS)?, 100)?;
            let w_grid_size = at_least("w_grid", cfg.usize_or("w_grid", DEFAULT_W_GRID)?, 16)?;
            let dims = vec![(d, x.n.min(y.n))];
            (
                StudyTest::Relevant {
                    x,
                    y,
                    delta,
                    lambda_grid_size,
                    w_paths,
                    w_grid_size,
                },
                dims,
            )
        }
        other => {
            return Err(CliError::Config(format!(
                "`test` must be `changepoint` or `relevant`, got `{other}`"
            )))
        }
    };
    let echo = cfg.finish()?;
    let study = StudyConfig {
        kernel,
        alpha,
        replications,
        seed,
        test,
    };
    let outcome = if power {
        power_study(&study)?
    } else {
        size_study(&study)?
    };
    let diagnostics = Diagnostics {
        degenerate: outcome.per_replication.iter().any(|r| r.degenerate),
        warnings: warnings(&dims),
        ..Diagnostics::default()
    };
    let summary = study_summary(
        if power { "power" } else { "size" },
        &kind,
        &kernel,
        alpha,
        &outcome,
    );
    Ok((echo, to_value(&outcome), diagnostics, summary))
}

fn study_summary(
    label: &str,
    kind: &str,
    kernel: &KernelSpec,
    alpha: f64,
    o: &StudyOutcome,
) -> String {
    let mut s = format!(
        "{label} study, {kind} test ({kernel}, alpha = {alpha})\n  rejections: {}/{} = {:.4} (binomial SE at alpha {:.4})\n",
        o.rejections, o.replications, o.rate, o.standard_error
    );
    if let Some(delta) = o.delta {
        let _ = writeln!(s, "  delta = {delta:.6e}");
    }
    if let Some(t) = o.median_tau_hat {
        let _ = writeln!(s, "  median tau_hat = {t:.4}");
    }
    if let Some(e) = o.median_abs_tau_error {
        let _ = writeln!(s, "  median |tau_hat - tau*| = {e:.4}");
    }
    if o.low_replication {
        s.push_str("  warning: few replications, the rate is unreliable\n");
    }
    s
}

fn coupling(mut cfg: Config, seed: u64) -> CliResult<Parts> {
    let kernel = cfg.kernel()?;
    let p = positive("p", cfg.usize_or("p", 3)?)?;
    let design = design(&mut cfg, "n", 500, p, false)?;
    if design.n < 4 {
        return Err(CliError::Config("`n` must be >= 4".into()));
    }
    let replications = positive("replications", cfg.usize_or("replications", 1000)?)?;
    let bridge_paths = at_least(
        "bridge_paths",
        cfg.usize_or("bridge_paths", DEFAULT_BRIDGE_PATHS)?,
        100,
    )?;
    let bridge_grid = bridge_grid_opt(&mut cfg)?;
    let echo = cfg.finish()?;
    let d = kernel.dimension(p);
    let n = design.n;
    let out = coupling_check(&CouplingConfig {
        kernel,
        design,
        replications,
        bridge_paths,
        bridge_grid,
        seed,
    })?;
    let summary = format!(
        "coupling check ({kernel}, n = {n}, d = {d})\n  KS distance = {:.4}\n  mean T_n = {:.4} vs bridge {:.4}; q95 {:.4} vs {:.4}\n",
        out.ks_distance, out.statistic_mean, out.bridge_mean, out.statistic_q95, out.bridge_q95
    );
    let diagnostics = Diagnostics {
        degenerate: out.sigma_diag.iter().all(|v| *v == 0.0),
        warnings: warnings(&[(d, n)]),
        ..Diagnostics::default()
    };
    Ok((echo, to_value(&out), diagnostics, summary))
}

fn lemma1(mut cfg: Config, seed: u64) -> CliResult<Parts> {
    let n_ladder = cfg.usize_list_or("n_ladder", &[250, 500, 1000, 2000])?;
    let dims = cfg.usize_list_or("dims", &[8])?;
    let replications = positive("replications", cfg.usize_or("replications", 200)?)?;
    let mu = cfg.f64_or("mu", 0.0)?;
    let echo = cfg.finish()?;
    let out = lemma1_check(&Lemma1Config {
        n_ladder: n_ladder.clone(),
        dims,
        replications,
        mu,
        seed,
    })?;
    let mut summary = format!("degenerate maximal inequality, n ladder {n_ladder:?}\n");
    for row in &out.rows {
        let means: Vec<String> = row
            .mean_statistic
            .iter()
            .map(|m| format!("{m:.4}"))
            .collect();
        let _ = writeln!(
            summary,
            "  d = {}: means [{}], fitted exponent {:.4}",
            row.d,
            means.join(", "),
            row.exponent
        );
    }
    Ok((echo, to_value(&out), Diagnostics::default(), summary))
}

fn quantiles(mut cfg: Config, seed: u64) -> CliResult<Parts> {
    let alphas = cfg.f64_list_or("alphas", &[0.1, 0.05, 0.01])?;
    if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(CliError::Config(
            "`alphas` entries must lie in (0, 1)".into(),
        ));
    }
    let w_paths = at_least("w_paths", cfg.usize_or("w_paths", DEFAULT_W_PATHS)?, 100)?;
    let w_grid_size = at_least("w_grid", cfg.usize_or("w_grid", DEFAULT_W_GRID)?, 16)?;
    let sigma = match cfg.contains("sigma_diag") {
        true => Some(cfg.f64_list_or("sigma_diag", &[])?),
        false => None,
    };
    let bridge_paths = at_least(
        "bridge_paths",
        cfg.usize_or("bridge_paths", DEFAULT_BRIDGE_PATHS)?,
        100,
    )?;
    let bridge_grid = at_least("bridge_grid", cfg.usize_or("bridge_grid", 512)?, 2)?;
    let echo = cfg.finish()?;
    if matches!(&sigma, Some(s) if s.iter().any(|v| *v < 0.0)) {
        return Err(CliError::Config("`sigma_diag` entries must be >= 0".into()));
    }
    let rows = quantile_table(&QuantileTableConfig {
        alphas,
        w_paths,
        w_grid_size,
        sigma: sigma.map(|s| DMatrix::from_diagonal(&DVector::from_vec(s))),
        bridge_paths,
        bridge_grid,
        seed,
    })?;
    let mut summary =
        String::from("simulated upper quantiles\n  alpha      W         bridge sup\n");
    for r in &rows {
        let b = r
            .bridge_quantile
            .map(|b| format!("{b:.6}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(summary, "  {:<8}   {:<9.6} {b}", r.alpha, r.w_quantile);
    }
    Ok((
        echo,
        json!({ "rows": to_value(&rows) }),
        Diagnostics::default(),
        summary,
    ))
}

fn simulate(mut cfg: Config, seed: u64) -> CliResult<Parts> {
    let p = positive("p", cfg.usize_or("p", 4)?)?;
    let design = design(&mut cfg, "n", 400, p, true)?;
    let csv = cfg.out_path_req("csv")?;
    let echo = cfg.finish()?;
    let sample = simulate_dataset(&design, RngSpec::new(seed, 0))?;
    write_csv_file(&sample, &csv)?;
    let results = json!({
        "n": sample.n(),
        "p": sample.p(),
        "break_index": design.change.as_ref().map(|_| design.break_index()),
        "design": to_value(&design),
    });
    let summary = format!(
        "wrote {} x {} sample to {}\n",
        sample.n(),
        sample.p(),
        echo["csv"]
    );
    Ok((echo, results, Diagnostics::default(), summary))
}
