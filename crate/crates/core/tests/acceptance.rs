//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! hard criterion fails.
//!
//! The Desharnais criteria (8 and 9) need the original 81-project table. Point
//! `DESHARNAIS_CSV` at it, or place it at `data/desharnais.csv` in the
//! workspace root.

mod common;

use fss_core::ann::{garson_eliminate, garson_importance, loss_and_gradient, Activation, GarsonConfig, MlpModel, TrainConfig};
use fss_core::cli::{cmd_ingest, cmd_run, IngestArgs, RunArgs, RunConfig, REPORT_FILE};
use fss_core::dataset::{ingest, RawTable};
use fss_core::harness::{run_experiment, ExperimentReport, MethodConfigs};
use fss_core::linreg::{stepwise, Step, StepwiseConfig};
use fss_core::metrics::{mmre, pred_from_errors, PRED_RULE};
use fss_core::rng::rng_from;
use fss_core::search::{
    backward_eliminate, exhaustive_oracle, forward_select, ga_select, GaConfig, RidgeWrapper,
};
use fss_core::{KernelConfig, MethodId, RidgeConfig, RidgeModel, TrainingSet};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

type Criterion = (u32, &'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    Warn(String),
}

use Verdict::*;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---------------------------------------------------------------- 1

/// Least squares without intercept by Gaussian elimination with partial
/// pivoting on the normal equations.
fn normal_equations(x: &DMatrix<f64>, z: &DVector<f64>) -> Vec<f64> {
    let d = x.ncols();
    let mut a = vec![vec![0.0; d + 1]; d];
    for r in 0..d {
        for c in 0..d {
            a[r][c] = (0..x.nrows()).map(|i| x[(i, r)] * x[(i, c)]).sum();
        }
        a[r][d] = (0..x.nrows()).map(|i| x[(i, r)] * z[i]).sum();
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for r in col + 1..d {
            let f = a[r][col] / a[col][col];
            for c in col..=d {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut beta = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|c| a[r][c] * beta[c]).sum();
        beta[r] = (a[r][d] - s) / a[r][r];
    }
    beta
}

fn ridge_matches_least_squares() -> Verdict {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let mut rng = rng_from(1000 + inst);
        let x = DMatrix::from_fn(30, 5, |_, _| rng.gen_range(-1.0..1.0));
        let z = DVector::from_fn(30, |_, _| rng.gen_range(1.0..10.0));
        let probe = DMatrix::from_fn(10, 5, |_, _| rng.gen_range(-1.0..1.0));
        let model = RidgeModel::fit(&x, &z, RidgeConfig::new(0.0, KernelConfig::Linear)).unwrap();
        let beta = normal_equations(&x, &z);
        for pts in [&x, &probe] {
            let got = model.predict(pts).unwrap();
            for i in 0..pts.nrows() {
                let want: f64 = (0..5).map(|j| pts[(i, j)] * beta[j]).sum();
                worst = worst.max((got[i] - want).abs());
            }
        }
    }
    let el = t.elapsed();
    check(
        worst <= 1e-6 && el < Duration::from_secs(5),
        format!("max |error| {worst:.2e} (<= 1e-6), {} (< 5s)", secs(el)),
    )
}

// ---------------------------------------------------------------- 2

fn single_project_shrinkage() -> Verdict {
    let x = DMatrix::from_row_slice(1, 3, &[0.2, 0.7, 0.4]);
    let z = DVector::from_element(1, 1234.5);
    let mut worst = 0.0f64;
    for a in [0.0, 0.05, 0.1, 1.0] {
        let model = RidgeModel::fit(&x, &z, RidgeConfig::new(a, KernelConfig::Rbf { gamma: 5.0 })).unwrap();
        let got = model.predict(&x).unwrap()[0];
        worst = worst.max(((got - 1234.5 / (1.0 + a)) / 1234.5).abs());
    }
    check(worst <= 1e-12, format!("max relative error {worst:.2e} (<= 1e-12)"))
}

// ---------------------------------------------------------------- 3

fn metric_fixtures() -> Verdict {
    let m = mmre(&[100.0, 200.0], &[110.0, 150.0]).unwrap();
    let p = pred_from_errors(&[0.1, 0.25], 0.25, PRED_RULE).unwrap();
    let mut rng = rng_from(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..40);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..1e4)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e4..2e4)).collect();
        let c = 10f64.powf(rng.gen_range(-3.0..3.0));
        let base = mmre(&a, &p).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
        let sp: Vec<f64> = p.iter().map(|v| v * c).collect();
        worst = worst.max((mmre(&sa, &sp).unwrap() - base).abs() / base.max(1e-300));
    }
    check(
        m == 0.175 && p == 1.0 && worst <= 1e-12,
        format!("mmre fixture {m}, pred fixture {p}, rescaling drift {worst:.1e} over 100 draws"),
    )
}

// ---------------------------------------------------------------- 4

fn random_model(rng: &mut impl Rng, ni: usize, nh: usize, scale: f64) -> MlpModel {
    let n = ni * nh + nh + nh + 1;
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    MlpModel::from_params(ni, nh, &p, Activation::Tanh)
}

fn garson_suite() -> Verdict {
    let mut rng = rng_from(4);
    let mut sum_err = 0.0f64;
    for _ in 0..100 {
        let (ni, nh) = (rng.gen_range(1..12), rng.gen_range(1..17));
        let ri = garson_importance(&random_model(&mut rng, ni, nh, 2.0));
        sum_err = sum_err.max((ri.iter().sum::<f64>() - 1.0).abs());
    }

    let (ni, nh) = (5, 3);
    let mut p = vec![0.7; ni * nh];
    p.extend([0.1, -0.2, 0.3, 0.5, -0.5, 0.9, 0.0]);
    let sym = garson_importance(&MlpModel::from_params(ni, nh, &p, Activation::Tanh));
    let uniform_err = sym.iter().map(|v| (v - 0.2).abs()).fold(0.0, f64::max);

    let mut grad_err = 0.0f64;
    for _ in 0..20 {
        let (ni, nh, n) = (rng.gen_range(1..5), rng.gen_range(1..5), 8);
        let model = random_model(&mut rng, ni, nh, 1.0);
        let x = DMatrix::from_fn(n, ni, |_, _| rng.gen_range(0.0..1.0));
        let t = DVector::from_fn(n, |_, _| rng.gen_range(0.0..1.0));
        let (_, g) = loss_and_gradient(&model, &x, &t);
        let base = model.params();
        let h = 1e-6;
        let mut num = Vec::with_capacity(base.len());
        for k in 0..base.len() {
            let mut up = base.clone();
            let mut down = base.clone();
            up[k] += h;
            down[k] -= h;
            let lu = loss_and_gradient(&MlpModel::from_params(ni, nh, &up, Activation::Tanh), &x, &t).0;
            let ld = loss_and_gradient(&MlpModel::from_params(ni, nh, &down, Activation::Tanh), &x, &t).0;
            num.push((lu - ld) / (2.0 * h));
        }
        let diff = g.iter().zip(&num).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let norm = g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
        grad_err = grad_err.max(diff / norm);
    }
    check(
        sum_err <= 1e-9 && uniform_err <= 1e-12 && grad_err <= 1e-4,
        format!(
            "sum error {sum_err:.1e} on 100 nets, symmetric deviation {uniform_err:.1e}, gradient relative error {grad_err:.1e} on 20 nets"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn synthetic(n: usize, d: usize, planted: &[usize], noise: f64, seed: u64) -> TrainingSet {
    let mut rng = rng_from(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.gen::<f64>());
    let z = DVector::from_fn(n, |i, _| {
        let signal: f64 = planted.iter().enumerate().map(|(k, &j)| (2.0 + k as f64) * x[(i, j)]).sum();
        (1.0 + signal) * (1.0 + noise * rng.gen_range(-1.0..1.0))
    });
    TrainingSet::new(x, z, (0..n).map(|i| i % 10).collect()).unwrap()
}

fn oracle_dominance() -> Verdict {
    let t = Instant::now();
    let eval = RidgeWrapper(RidgeConfig::desharnais());
    let mut violations = Vec::new();
    for inst in 0..20u64 {
        let mut rng = rng_from(500 + inst);
        let k = rng.gen_range(1..5);
        let planted: Vec<usize> = rand::seq::index::sample(&mut rng, 10, k).into_vec();
        let ts = synthetic(40, 10, &planted, 0.1, 600 + inst);
        let (_, best) = exhaustive_oracle(&ts, &eval).unwrap();
        let ffs = forward_select(&ts, &eval).score;
        let bfe = backward_eliminate(&ts, &eval).score;
        let ga = ga_select(&ts, &eval, &GaConfig { seed: inst, ..GaConfig::default() }).unwrap().score;
        if !(best <= ffs && best <= bfe && best <= ga) {
            violations.push(inst);
        }
    }

    let planted = [1, 4, 7];
    let ts = synthetic(60, 10, &planted, 0.05, 77);
    let hits = (0..10)
        .filter(|&seed| {
            let r = ga_select(&ts, &eval, &GaConfig { seed, ..GaConfig::default() }).unwrap();
            planted.iter().all(|&j| r.subset.contains(j))
        })
        .count();
    let el = t.elapsed();
    check(
        violations.is_empty() && hits >= 8 && el < Duration::from_secs(120),
        format!(
            "oracle beaten on {} of 20 instances, planted subset recovered in {hits}/10 GA runs (>= 8), {} (< 120s)",
            violations.len(),
            secs(el)
        ),
    )
}

// ---------------------------------------------------------------- 6

fn stepwise_recovery() -> Verdict {
    let mut exact = 0;
    for seed in 0..10 {
        let mut rng = rng_from(60 + seed);
        let x = DMatrix::from_fn(40, 7, |_, _| rng.gen::<f64>());
        let z = x.column(2) * 5.0;
        let r = stepwise(&x, &z, &StepwiseConfig::forward()).unwrap();
        if r.subset.indices() == [2] {
            exact += 1;
        }
    }

    let mut rng = rng_from(66);
    let base = DMatrix::from_fn(40, 3, |_, _| rng.gen::<f64>());
    let x = DMatrix::from_fn(40, 4, |i, j| base[(i, [0, 1, 1, 2][j])]);
    let z = DVector::from_fn(40, |i, _| 1.0 + 2.0 * x[(i, 0)] + 3.0 * x[(i, 1)] + 0.01 * rng.gen_range(-1.0..1.0));
    let r = stepwise(&x, &z, &StepwiseConfig::backward()).unwrap();
    let first_is_copy = matches!(r.steps.first(), Some(Step::Remove { feature: 1 | 2, .. }));
    let copies_kept = [1, 2].iter().filter(|&&j| r.subset.contains(j)).count();
    check(
        exact == 10 && first_is_copy && copies_kept == 1,
        format!(
            "forward returns exactly {{x3}} in {exact}/10 seeds; backward drops a copy first: {first_is_copy}, copies kept {copies_kept}"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn garson_cardinality() -> Verdict {
    let t = Instant::now();
    let small = garson_eliminate(&synthetic(60, 8, &[0, 3, 5], 0.05, 70), &GarsonConfig::default()).unwrap();
    let quick = GarsonConfig {
        train: TrainConfig {
            max_epochs: 100,
            ..TrainConfig::default()
        },
        ..GarsonConfig::default()
    };
    let wide = garson_eliminate(&synthetic(100, 82, &[3, 40, 77], 0.05, 71), &quick).unwrap();
    check(
        small.subset.count() == 4 && wide.subset.count() == 41,
        format!(
            "8 -> {} features, 82 -> {} features ({})",
            small.subset.count(),
            wide.subset.count(),
            secs(t.elapsed())
        ),
    )
}

// ---------------------------------------------------------------- 8, 9

fn desharnais_path() -> Option<PathBuf> {
    std::env::var_os("DESHARNAIS_CSV")
        .map(PathBuf::from)
        .or_else(|| Some(common::workspace_root().join("data/desharnais.csv")))
        .filter(|p| p.is_file())
}

fn desharnais_report() -> &'static Option<(ExperimentReport, Duration)> {
    static REPORT: OnceLock<Option<(ExperimentReport, Duration)>> = OnceLock::new();
    REPORT.get_or_init(|| {
        let path = desharnais_path()?;
        let rules = common::desharnais_rules();
        let bytes = std::fs::read(&path).unwrap();
        let raw = RawTable::read_csv(bytes.as_slice(), &rules.table_schema()).unwrap();
        let ds = ingest(&raw, &rules).unwrap();
        let configs = MethodConfigs {
            ridge: RidgeConfig::desharnais(),
            ..MethodConfigs::default()
        };
        let t = Instant::now();
        let report = run_experiment(&ds, &MethodId::ALL, 10, 1, &configs).unwrap();
        Some((report, t.elapsed()))
    })
}

fn desharnais_bands() -> Verdict {
    let Some((report, el)) = desharnais_report() else {
        return Fail(
            "Desharnais table not found (set DESHARNAIS_CSV or add data/desharnais.csv); the bands cannot be checked".into(),
        );
    };
    let mut out = Vec::new();
    let mut ok = report.failures.is_empty() && *el < Duration::from_secs(900);
    for a in &report.aggregates {
        let (m, p, f) = (a.test_final.mmre.mean, a.test_final.pred.mean, a.n_selected.mean);
        let in_band = (0.45..=0.85).contains(&m) && (0.20..=0.55).contains(&p) && f <= 6.0;
        ok &= in_band;
        out.push(format!("{} {m:.3}/{p:.3}/{f:.1}{}", a.method, if in_band { "" } else { "!" }));
    }
    ok &= report.aggregates.len() == MethodId::ALL.len();
    check(ok, format!("MMRE/PRED/#F per method: {}; {}", out.join(", "), secs(*el)))
}

fn desharnais_consistency() -> Verdict {
    let Some((report, _)) = desharnais_report() else {
        return Warn("skipped: Desharnais table not found".into());
    };
    let methods: Vec<String> = report
        .consistency
        .iter()
        .filter(|c| c.at_threshold.contains(&8))
        .map(|c| c.method.to_string())
        .collect();
    let detail = format!("FPNA in the 80% set of {} methods ({})", methods.len(), methods.join(" "));
    if methods.len() >= 3 {
        Pass(detail)
    } else {
        Warn(detail)
    }
}

// ---------------------------------------------------------------- 10

fn deterministic_reports() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("desharnais-like.csv");
    std::fs::write(&csv, common::desharnais_like_csv(10)).unwrap();
    cmd_ingest(
        &IngestArgs {
            input: csv,
            rules: common::workspace_root().join("rules/desharnais.toml"),
            output: None,
        },
        dir.path(),
    )
    .unwrap();
    let mut cfg = RunConfig::new("desharnais-like.dataset.json");
    cfg.n_partitions = 3;
    cfg.master_seed = 5;
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, toml::to_string(&cfg).unwrap()).unwrap();

    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let args = RunArgs {
            config: Some(cfg_path.clone()),
            ..RunArgs::default()
        };
        let outcome = cmd_run(&args, Some(&out)).unwrap();
        assert_eq!(outcome.exit_code, 0, "{}", outcome.stdout);
        std::fs::read(out.join(REPORT_FILE)).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    check(
        a == b,
        format!("nine methods x 3 partitions, {} bytes, identical: {}", a.len(), a == b),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "ridge matches least squares", ridge_matches_least_squares),
        (2, "single-project shrinkage", single_project_shrinkage),
        (3, "metric fixtures", metric_fixtures),
        (4, "Garson and backprop", garson_suite),
        (5, "oracle dominance", oracle_dominance),
        (6, "stepwise recovery", stepwise_recovery),
        (7, "Garson cardinality", garson_cardinality),
        (8, "Desharnais bands", desharnais_bands),
        (9, "Desharnais consistency", desharnais_consistency),
        (10, "deterministic reports", deterministic_reports),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match verdict {
            Pass(d) => ("PASS", d),
            Warn(d) => ("WARN", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} {tag} {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
