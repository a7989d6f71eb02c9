//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Monte Carlo criteria use fixed seeds (the criterion
//! number) and take several minutes in total on one core.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hdustat::cpdetect::cusum_process;
use hdustat::gaussmc::{brownian_bridge_sups, sn_limit_sample, sup_quantile, upper_quantile};
use hdustat::kernels::GMD_PROJECTION_CONSTANT;
use hdustat::sntest::{distance_process, uniform_grid};
use hdustat::studies::{
    coupling_check, lemma1_check, median, power_study, size_study, CouplingConfig, DeltaRule,
    Lemma1Config, StudyConfig, StudyTest,
};
use hdustat::useq::PairSums;
use hdustat::{
    covariance_estimate, full_ustat, jackknife_projections, sequential_t, simulate_dataset, Design,
    KernelSpec, Marginal, RngSpec, Sample,
};
use hdustat_cli::report::strip_wall_clock;
use hdustat_cli::{execute, Args, Command};
use nalgebra::{DMatrix, SymmetricEigen};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- oracles

fn ustat_rows(s: &Sample, spec: &KernelSpec, lo: usize, hi: usize) -> Vec<f64> {
    let d = spec.dimension(s.p());
    let mut acc = vec![0.0; d];
    let mut pairs = 0.0;
    for i in lo..hi {
        for j in i + 1..hi {
            for (a, h) in acc.iter_mut().zip(spec.eval(s.row(i), s.row(j)).unwrap()) {
                *a += h;
            }
            pairs += 1.0;
        }
    }
    acc.iter().map(|a| a / pairs).collect()
}

/// `|a - b| / max(|b|, 1)`, the largest over paired entries.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Kolmogorov distribution function by its alternating series.
fn kolmogorov_cdf(x: f64) -> f64 {
    let tail: f64 = (1..=100)
        .map(|k| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * x * x).exp())
        .sum();
    1.0 - 2.0 * tail
}

fn kolmogorov_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.3, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

fn gaussian(n: usize, p: usize, scale: f64, rng: RngSpec) -> Sample {
    simulate_dataset(&Design::iid(n, Marginal::normal(0.0, scale), p), rng).unwrap()
}

const FAMILIES: [KernelSpec; 5] = [
    KernelSpec::GiniMeanDifference,
    KernelSpec::CharacteristicDispersion,
    KernelSpec::SpatialKendallTau,
    KernelSpec::HuberScoredCovariance { xi: 0.8 },
    KernelSpec::CoordinateProduct,
];

// -------------------------------------------------------------- criteria

fn c1_oracle_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    let mut checks = 0;
    for spec in FAMILIES {
        for i in 0..50u64 {
            // n in 5..=10; p chosen so that d <= 4
            let n = 5 + (i % 6) as usize;
            let p_max = if spec.dimension(2) == 4 { 2 } else { 4 };
            let p = 1 + (i / 6) as usize % p_max;
            let x = gaussian(n, p, 2.0, RngSpec::new(1, i));
            let y = gaussian(4 + (i % 7) as usize, p, 1.5, RngSpec::new(1, 1000 + i));
            let d = spec.dimension(p);
            let theta: Vec<f64> = (0..d).map(|l| 0.25 * l as f64).collect();

            worst = worst.max(rel_err(
                &full_ustat(&x, &spec).unwrap(),
                &ustat_rows(&x, &spec, 0, n),
            ));
            let t = sequential_t(&x, &spec, &theta).unwrap();
            for k in 2..=n {
                let u = ustat_rows(&x, &spec, 0, k);
                let brute: Vec<f64> = u
                    .iter()
                    .zip(&theta)
                    .map(|(u, th)| k as f64 / (2.0 * (n as f64).sqrt()) * (u - th))
                    .collect();
                worst = worst.max(rel_err(t.at(k), &brute));
            }
            let c = cusum_process(&x, &spec).unwrap();
            for k in 2..=n - 2 {
                let (pre, post) = (ustat_rows(&x, &spec, 0, k), ustat_rows(&x, &spec, k, n));
                let f = k as f64 / n as f64;
                let brute: Vec<f64> = pre
                    .iter()
                    .zip(&post)
                    .map(|(a, b)| (n as f64).sqrt() * f * (1.0 - f) * (a - b))
                    .collect();
                worst = worst.max(rel_err(c.at(k), &brute));
            }
            let grid = uniform_grid(n.min(y.n()).max(8));
            let dist = distance_process(&x, &y, &spec, &grid).unwrap();
            for (lambda, v) in grid.iter().zip(&dist) {
                let k1 = (lambda * n as f64 + 1e-9).floor() as usize;
                let k2 = (lambda * y.n() as f64 + 1e-9).floor() as usize;
                let brute = if k1.min(k2) < 2 {
                    0.0
                } else {
                    let (a, b) = (ustat_rows(&x, &spec, 0, k1), ustat_rows(&y, &spec, 0, k2));
                    a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum()
                };
                worst = worst.max(rel_err(&[*v], &[brute]));
            }
            checks += 1;
        }
    }
    verdict(
        worst <= 1e-10,
        format!("{checks} instances, max relative error {worst:.2e} (tol 1e-10)"),
    )
}

fn c2_kernel_identities() -> Verdict {
    let pairs = simulate_dataset(
        &Design::iid(2000, Marginal::cauchy(0.0, 3.0), 5),
        RngSpec::new(2, 0),
    )
    .unwrap();
    let (mut norm_err, mut scale_err, mut cdp_ok) = (0.0f64, 0.0f64, true);
    for i in 0..1000 {
        let (x, y) = (pairs.row(2 * i), pairs.row(2 * i + 1));
        let h = KernelSpec::SpatialKendallTau.eval(x, y).unwrap();
        norm_err = norm_err.max((h.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs());
        let c = 0.01 + (i as f64) * 0.37;
        let (cx, cy): (Vec<f64>, Vec<f64>) = (
            x.iter().map(|v| c * v).collect(),
            y.iter().map(|v| c * v).collect(),
        );
        let hc = KernelSpec::SpatialKendallTau.eval(&cx, &cy).unwrap();
        scale_err = scale_err.max(
            h.iter()
                .zip(&hc)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        cdp_ok &= KernelSpec::CharacteristicDispersion
            .eval(x, y)
            .unwrap()
            .iter()
            .all(|v| (-1.0..=1.0).contains(v));
    }
    let s = gaussian(4000, 1, 1.0, RngSpec::new(2, 1));
    let jk = jackknife_projections(&s, &KernelSpec::GiniMeanDifference).unwrap();
    let se = covariance_estimate(&jk.projections)
        .unwrap()
        .ustat_standard_errors(4000)[0];
    let target = 2.0 / std::f64::consts::PI.sqrt();
    let z = (jk.ustat[0] - target).abs() / se;
    let pass = norm_err <= 1e-12 && scale_err <= 1e-12 && cdp_ok && z <= 3.0;
    verdict(
        pass,
        format!(
            "SKT |norm-1| {norm_err:.1e}, scale diff {scale_err:.1e}; CDP in [-1,1]: {cdp_ok}; GMD U = {:.5} vs {target:.5}, {z:.2} SE",
            jk.ustat[0]
        ),
    )
}

fn c3_jackknife_and_sigma() -> Verdict {
    let mut worst = 0.0f64;
    for (i, spec) in FAMILIES.iter().enumerate() {
        let s = gaussian(60, 2, 1.0, RngSpec::new(3, 100 + i as u64));
        let g = jackknife_projections(&s, spec).unwrap().projections;
        let total: f64 = g.row_iter().map(|r| r.norm()).sum();
        let sum = g.row_sum().norm();
        worst = worst.max(if total > 0.0 { sum / total } else { 0.0 });
    }
    let truth = DMatrix::<f64>::identity(4, 4) * GMD_PROJECTION_CONSTANT;
    let median_err = |n: usize| {
        let errs: Vec<f64> = (0..100)
            .map(|r| {
                let s = gaussian(n, 4, 1.0, RngSpec::new(3, (n * 1000 + r) as u64));
                let g = PairSums::accumulate(&s, &KernelSpec::GiniMeanDifference)
                    .unwrap()
                    .jackknife();
                op_norm(&(covariance_estimate(&g.projections).unwrap().sigma - &truth))
            })
            .collect();
        median(&errs)
    };
    let (e200, e800) = (median_err(200), median_err(800));
    verdict(
        worst <= 1e-9 && e800 < e200,
        format!("max |sum g_i| / sum |g_i| = {worst:.1e}; median |Sigma_hat - Sigma|_op n=200 {e200:.4}, n=800 {e800:.4}"),
    )
}

fn gmd_two_sample(n: usize, delta: DeltaRule, reps: usize, seed: u64) -> StudyConfig {
    let x = Design::iid(n, Marginal::normal(0.0, 1.0), 4);
    let y = Design::iid(n, Marginal::normal(0.0, 2.0), 4);
    StudyConfig {
        kernel: KernelSpec::GiniMeanDifference,
        alpha: 0.05,
        replications: reps,
        seed,
        test: StudyTest::Relevant {
            x,
            y,
            delta,
            lambda_grid_size: None,
            w_paths: 100_000,
            w_grid_size: 2048,
        },
    }
}

fn c4_sn_size() -> Verdict {
    let out = size_study(&gmd_two_sample(400, DeltaRule::BoundaryScaled(1.0), 500, 4)).unwrap();
    let pass = (0.03..=0.08).contains(&out.rate);
    verdict(
        pass,
        format!(
            "rate {:.4} ({} / {}) in [0.03, 0.08]; delta = |theta_x - theta_y|^2 = {:.5}",
            out.rate,
            out.rejections,
            out.replications,
            out.delta.unwrap()
        ),
    )
}

fn cusum_study(design: Design, kernel: KernelSpec, reps: usize, seed: u64) -> StudyConfig {
    StudyConfig {
        kernel,
        alpha: 0.05,
        replications: reps,
        seed,
        test: StudyTest::Changepoint {
            design,
            n_paths: 20_000,
            bridge_grid: None,
        },
    }
}

fn c5_cusum_size() -> Verdict {
    let design = Design::iid(400, Marginal::normal(0.0, 1.0), 4);
    let out = size_study(&cusum_study(design, KernelSpec::GiniMeanDifference, 500, 5)).unwrap();
    verdict(
        (0.02..=0.09).contains(&out.rate),
        format!(
            "rate {:.4} ({} / 500) in [0.02, 0.09]",
            out.rate, out.rejections
        ),
    )
}

fn c6_cusum_power() -> Verdict {
    // mean shift 1 -> 1.3 in every coordinate; the product kernel estimates
    // mu o mu, so delta_l = 1.3^2 - 1 and Sigma = diag(mu_l^2) per regime
    let (n, p, pre, post) = (400usize, 4usize, 1.0f64, 1.3f64);
    let design = Design::iid(n, Marginal::normal(pre, 1.0), p)
        .with_change(0.5, vec![Marginal::normal(post, 1.0); p]);
    let shift = (p as f64).sqrt() * (post * post - pre * pre);
    let trace = p as f64 * post * post;
    let snr = (n as f64).sqrt() * shift / trace.sqrt();
    let out = power_study(&cusum_study(design, KernelSpec::CoordinateProduct, 200, 6)).unwrap();
    let err = out.median_abs_tau_error.unwrap();
    verdict(
        snr >= 10.0 && out.rate >= 0.95 && err <= 0.05,
        format!("sqrt(n)|delta|/sqrt(tr Sigma) = {snr:.2}; rate {:.4} (>= 0.95); median |tau_hat - tau*| {err:.4} (<= 0.05)", out.rate),
    )
}

fn c7_sn_power() -> Verdict {
    let out = power_study(&gmd_two_sample(800, DeltaRule::BoundaryScaled(0.5), 200, 7)).unwrap();
    verdict(
        out.rate >= 0.90,
        format!(
            "true distance = 2 delta = {:.4}; rate {:.4} (>= 0.90)",
            2.0 * out.delta.unwrap(),
            out.rate
        ),
    )
}

fn c8_coupling() -> Verdict {
    let design = Design::iid(500, Marginal::normal(0.0, 1.0), 3);
    let out = coupling_check(&CouplingConfig {
        kernel: KernelSpec::GiniMeanDifference,
        design,
        replications: 1000,
        bridge_paths: 20_000,
        bridge_grid: None,
        seed: 8,
    })
    .unwrap();
    verdict(
        out.ks_distance <= 0.08,
        format!(
            "KS {:.4} (<= 0.08); q95 T_n {:.4} vs bridge {:.4}",
            out.ks_distance, out.statistic_q95, out.bridge_q95
        ),
    )
}

fn c9_quantile_oracles() -> Verdict {
    let half = DMatrix::from_element(1, 1, 0.5);
    let sups = brownian_bridge_sups(&half, 2048, 100_000, RngSpec::new(9, 0)).unwrap();
    let q = sup_quantile(&sups, 0.05).unwrap();
    let oracle = kolmogorov_quantile(0.95);
    let rel = (q - oracle).abs() / oracle;

    let root = DMatrix::from_row_slice(2, 2, &[0.7, 0.1, 0.1, 0.4]);
    let rng = RngSpec::new(9, 1);
    let base = sup_quantile(&brownian_bridge_sups(&root, 512, 2000, rng).unwrap(), 0.05).unwrap();
    let mut scale_err = 0.0f64;
    for c in [0.5, 2.0, 3.0, 7.25] {
        let scaled = sup_quantile(
            &brownian_bridge_sups(&(&root * c), 512, 2000, rng).unwrap(),
            0.05,
        )
        .unwrap();
        scale_err = scale_err.max((scaled - c * base).abs() / (c * base));
    }

    let w = sn_limit_sample(100_000, 2048, RngSpec::new(9, 2)).unwrap();
    let w_median = median(&w);
    let ordered = upper_quantile(&w, 0.01).unwrap() > upper_quantile(&w, 0.05).unwrap();
    verdict(
        rel <= 0.02 && scale_err <= 1e-12 && w_median.abs() < 0.02 && ordered,
        format!(
            "bridge q95 {q:.4} vs Kolmogorov {oracle:.4} ({:.2}%); scaling rel err {scale_err:.1e}; W median {w_median:.4}",
            100.0 * rel
        ),
    )
}

fn c10_lemma1() -> Verdict {
    let out = lemma1_check(&Lemma1Config {
        n_ladder: vec![250, 500, 1000, 2000],
        dims: vec![8],
        replications: 200,
        mu: 0.0,
        seed: 10,
    })
    .unwrap();
    let row = &out.rows[0];
    let means: Vec<String> = row
        .mean_statistic
        .iter()
        .map(|m| format!("{m:.3}"))
        .collect();
    verdict(
        row.exponent < 0.2,
        format!(
            "means [{}], fitted exponent {:.4} (< 0.2)",
            means.join(", "),
            row.exponent
        ),
    )
}

fn c11_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let run = |command: Command, config: &Path, threads: Option<usize>, tag: &str| -> String {
        let out = dir.path().join(format!("{}-{tag}.json", command.name()));
        let args = Args {
            command,
            config: Some(config.to_path_buf()),
            seed: Some(11),
            out: Some(out.clone()),
            threads,
        };
        execute(&args).unwrap_or_else(|e| panic!("{}: {e}", command.name()));
        strip_wall_clock(&std::fs::read_to_string(out).unwrap())
    };

    let sim_x = write("sim_x.cfg", "n = 60\np = 3\ncsv = x.csv\n");
    let sim_y = write(
        "sim_y.cfg",
        "n = 50\np = 3\nscale = 1.5\ntau_star = 0.4\npost_loc = 1\ncsv = y.csv\n",
    );
    let configs: Vec<(Command, std::path::PathBuf)> = vec![
        (Command::Simulate, sim_x.clone()),
        (Command::RelevantTest, write("rt.cfg", "x = x.csv\ny = y.csv\ndelta = 0.05\nw_paths = 2000\nw_grid = 256\n")),
        (Command::Changepoint, write("cp.cfg", "data = y.csv\nkernel = skt\nn_paths = 2000\n")),
        (Command::SizeStudy, write("size.cfg", "n = 40\np = 2\nreplications = 16\nn_paths = 1000\n")),
        (
            Command::PowerStudy,
            write("power.cfg", "test = relevant\nn_x = 30\np = 2\ny_scale = 1.5\ndelta_factor = 0.5\nreplications = 16\nw_paths = 1000\nw_grid = 64\n"),
        ),
        (Command::CouplingCheck, write("coup.cfg", "n = 40\np = 2\nreplications = 40\nbridge_paths = 500\n")),
        (Command::Lemma1Check, write("lemma.cfg", "n_ladder = 20, 40\ndims = 1, 3\nreplications = 20\n")),
        (Command::QuantileTable, write("qt.cfg", "w_paths = 500\nw_grid = 64\nsigma_diag = 1, 0.5\nbridge_paths = 500\nbridge_grid = 64\n")),
    ];
    // the y sample feeds the data-driven commands
    run(Command::Simulate, &sim_y, None, "y");
    let csv = || std::fs::read(dir.path().join("x.csv")).unwrap();

    let mut mismatched = Vec::new();
    let mut compared = BTreeMap::new();
    for (command, cfg) in &configs {
        let first = run(*command, cfg, None, "a");
        let csv_first = csv();
        for threads in [1, 2, 4] {
            let again = run(*command, cfg, Some(threads), &format!("t{threads}"));
            if again != first || csv() != csv_first {
                mismatched.push(format!("{} --threads {threads}", command.name()));
            }
        }
        compared.insert(command.name(), first.len());
    }
    verdict(
        mismatched.is_empty(),
        match mismatched.is_empty() {
            true => format!(
                "{} commands x 4 runs (default, --threads 1/2/4) byte-identical",
                compared.len()
            ),
            false => format!("differences: {}", mismatched.join(", ")),
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("oracle equivalence", c1_oracle_equivalence),
        ("kernel identities", c2_kernel_identities),
        ("jackknife identities and Sigma_hat", c3_jackknife_and_sigma),
        ("SN test size", c4_sn_size),
        ("CUSUM size", c5_cusum_size),
        ("CUSUM power and location", c6_cusum_power),
        ("SN test power", c7_sn_power),
        ("coupling quality", c8_coupling),
        ("bridge and quantile oracles", c9_quantile_oracles),
        ("degenerate maximal inequality", c10_lemma1),
        ("determinism", c11_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {:>2} ({name}): {} [{:.1}s]",
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
