//! Acceptance suite. Prints one `[PASS]`, `[FAIL]` or `[SKIP]` line per
//! criterion and exits non-zero if any criterion fails.
//!
//! Criteria that need the benchmark CSV files look for them through
//! `$FUZZY_CGAN_DATA` (default `./data`). The multi-hour reproduction runs
//! additionally need `FUZZY_CGAN_FULL_ACCEPTANCE=1`.
//!
//! Positional arguments filter criteria by substring, like libtest filters.

mod common;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{gradient_error, random_tensor, random_tensor_avoiding, synthetic_dataset, FD_TOLERANCE};
use fuzzy_cgan::autodiff::{Axis, Reduction, Tape, Var};
use fuzzy_cgan::datasets::{prepare, Catalog, Dataset, DatasetKind};
use fuzzy_cgan::fuzzy::{
    fuzzy_forward, fuzzy_trace, reichenbach, sigmoidal_implication, t_conorm, t_norm,
};
use fuzzy_cgan::harness::{run_experiment, ExperimentConfig, ExperimentResult, ModelKind, Overrides};
use fuzzy_cgan::networks::{
    build_discriminator, build_generator, discriminator_forward, discriminator_loss, generator_forward,
    generator_loss, GanSpec, GeneratorLoss,
};
use fuzzy_cgan::optim::{Adam, AdamConfig};
use fuzzy_cgan::{seeded_rng, FuzzyPartition, InjectionMode, Tensor};
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;

const FULL_RUN_ENV: &str = "FUZZY_CGAN_FULL_ACCEPTANCE";

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

// ---------------------------------------------------------------------------
// 1. fuzzy operator axioms

fn scalar_op(f: fn(&Tensor, &Tensor) -> fuzzy_cgan::Result<Tensor>, a: f64, b: f64) -> f64 {
    f(&Tensor::scalar(a), &Tensor::scalar(b)).unwrap().item().unwrap()
}

fn fuzzy_axioms() -> Outcome {
    let start = Instant::now();
    let config = Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let unit = 0.0..=1.0f64;
    let result = runner.run(&(unit.clone(), unit.clone(), unit), |(a, b, c)| {
        let t = |x, y| scalar_op(t_norm, x, y);
        let s = |x, y| scalar_op(t_conorm, x, y);
        for op in [&t as &dyn Fn(f64, f64) -> f64, &s] {
            if (op(a, b) - op(b, a)).abs() > 1e-12 {
                return Err(TestCaseError::fail(format!("commutativity at ({a}, {b})")));
            }
            if (op(op(a, b), c) - op(a, op(b, c))).abs() > 1e-12 {
                return Err(TestCaseError::fail(format!("associativity at ({a}, {b}, {c})")));
            }
            if op(a.min(c), b) > op(a.max(c), b) {
                return Err(TestCaseError::fail(format!("monotonicity at ({a}, {b}, {c})")));
            }
        }
        if t(1.0, a) != a || s(0.0, a) != a {
            return Err(TestCaseError::fail(format!("identity at {a}")));
        }
        Ok(())
    });
    let mut boundary = 0.0f64;
    for implication in [reichenbach, sigmoidal_implication] {
        boundary = boundary
            .max((scalar_op(implication, 0.0, 0.0) - 1.0).abs())
            .max((scalar_op(implication, 1.0, 1.0) - 1.0).abs())
            .max(scalar_op(implication, 1.0, 0.0).abs());
    }
    let elapsed = start.elapsed();
    match result {
        Err(e) => Fail(e.to_string()),
        Ok(()) => verdict(
            boundary <= 1e-12 && elapsed < Duration::from_secs(1),
            format!(
                "10000 triples; implication boundary error {boundary:.1e}; {:.3} s",
                elapsed.as_secs_f64()
            ),
        ),
    }
}

// ---------------------------------------------------------------------------
// 2. gradient oracle

type GraphFn = Box<dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> fuzzy_cgan::Result<Var<'t>>>;

/// Draws the inputs and the function for one instance.
type MakeCase = Box<dyn Fn(&mut fuzzy_cgan::SeededRng) -> (Vec<Tensor>, GraphFn)>;

struct GradCase {
    name: &'static str,
    make: MakeCase,
}

fn case(
    name: &'static str,
    make: impl Fn(&mut fuzzy_cgan::SeededRng) -> (Vec<Tensor>, GraphFn) + 'static,
) -> GradCase {
    GradCase {
        name,
        make: Box::new(make),
    }
}

fn dims(rng: &mut fuzzy_cgan::SeededRng) -> (usize, usize) {
    (rng.gen_range(1..=4), rng.gen_range(1..=4))
}

fn op_cases() -> Vec<GradCase> {
    let mut cases = vec![
        case("matmul", |rng| {
            let (m, k) = dims(rng);
            let n = rng.gen_range(1..=4);
            let a = random_tensor(m, k, -2.0, 2.0, rng);
            let b = random_tensor(k, n, -2.0, 2.0, rng);
            (vec![a, b], Box::new(|_, v| v[0].matmul(&v[1])))
        }),
        case("add", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            let b = random_tensor(m, n, -2.0, 2.0, rng);
            (vec![a, b], Box::new(|_, v| v[0].add(&v[1])))
        }),
        case("add/row-broadcast", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            let b = random_tensor(1, n, -2.0, 2.0, rng);
            (vec![a, b], Box::new(|_, v| v[0].add(&v[1])))
        }),
        case("sub/col-broadcast", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            let b = random_tensor(m, 1, -2.0, 2.0, rng);
            (vec![a, b], Box::new(|_, v| v[0].sub(&v[1])))
        }),
        case("mul", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            let b = random_tensor(m, n, -2.0, 2.0, rng);
            (vec![a, b], Box::new(|_, v| v[0].mul(&v[1])))
        }),
        case("mul/row-broadcast", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            let b = random_tensor(1, n, -2.0, 2.0, rng);
            (vec![a, b], Box::new(|_, v| v[0].mul(&v[1])))
        }),
        case("elu", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor_avoiding(m, n, -3.0, 3.0, &[0.0], 1e-3, rng);
            (vec![a], Box::new(|_, v| Ok(v[0].elu())))
        }),
        case("relu", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor_avoiding(m, n, -3.0, 3.0, &[0.0], 1e-3, rng);
            (vec![a], Box::new(|_, v| Ok(v[0].relu())))
        }),
        case("sigmoid", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -6.0, 6.0, rng);
            (vec![a], Box::new(|_, v| Ok(v[0].sigmoid())))
        }),
        case("log", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, 0.1, 3.0, rng);
            (vec![a], Box::new(|_, v| v[0].ln()))
        }),
        case("concat_cols", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            let b = random_tensor(m, rng.gen_range(1..=3), -2.0, 2.0, rng);
            (vec![a, b], Box::new(|_, v| v[0].concat_cols(&v[1])))
        }),
        case("slice_cols", |rng| {
            let (m, n) = (rng.gen_range(1..=4), rng.gen_range(2..=5));
            let start = rng.gen_range(0..n);
            let len = rng.gen_range(1..=n - start);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            (vec![a], Box::new(move |_, v| v[0].slice_cols(start, len)))
        }),
        case("gather_cols", |rng| {
            let (m, n) = dims(rng);
            let count = rng.gen_range(1..=6);
            let idx: Vec<usize> = (0..count).map(|_| rng.gen_range(0..n)).collect();
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            (vec![a], Box::new(move |_, v| v[0].gather_cols(&idx)))
        }),
        case("affine", |rng| {
            let (m, n) = dims(rng);
            let (s, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            (vec![a], Box::new(move |_, v| Ok(v[0].affine(s, b))))
        }),
        case("neg/one_minus", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            (vec![a], Box::new(|_, v| Ok(v[0].neg().one_minus())))
        }),
        case("clamp", |rng| {
            let (m, n) = dims(rng);
            let a = random_tensor_avoiding(m, n, -2.0, 2.0, &[-0.5, 0.5], 1e-3, rng);
            (vec![a], Box::new(|_, v| Ok(v[0].clamp(-0.5, 0.5))))
        }),
        case("dropout", |rng| {
            let (m, n) = dims(rng);
            let mask_seed: u64 = rng.gen();
            let a = random_tensor(m, n, -2.0, 2.0, rng);
            (
                vec![a],
                Box::new(move |_, v| v[0].dropout(0.5, true, &mut seeded_rng(mask_seed))),
            )
        }),
        case("fuzzy_forward", |rng| {
            let m = rng.gen_range(1..=4);
            let head = random_tensor(m, 5, 0.01, 0.99, rng);
            (
                vec![head],
                Box::new(|_, v| fuzzy_forward(&v[0], &FuzzyPartition::default())),
            )
        }),
    ];
    for kind in [Reduction::Sum, Reduction::Mean, Reduction::Prod] {
        for axis in [Axis::Rows, Axis::Cols, Axis::All] {
            let name: &'static str = Box::leak(format!("reduce/{kind:?}/{axis:?}").into_boxed_str());
            cases.push(case(name, move |rng| {
                let (m, n) = dims(rng);
                let a = random_tensor(m, n, -1.5, 1.5, rng);
                (vec![a], Box::new(move |_, v| v[0].reduce(kind, axis)))
            }));
        }
    }
    cases
}

fn shrunken_spec(injection: InjectionMode) -> GanSpec {
    let mut spec = GanSpec::preset(DatasetKind::Abalone, injection);
    spec.input_dim = 3;
    spec.branch_width = 4;
    spec.generator_hidden = vec![3, 3];
    spec.discriminator_hidden = vec![3, 3];
    spec
}

/// Worst errors of the discriminator loss w.r.t. D and the generator loss
/// w.r.t. G for one random instance.
fn gan_loss_errors(spec: &GanSpec, seed: u64) -> fuzzy_cgan::Result<(f64, f64)> {
    let mut rng = seeded_rng(seed);
    let g = build_generator(spec, &mut rng)?;
    let d = build_discriminator(spec, &mut rng)?;
    let x = random_tensor(4, spec.input_dim, 0.0, 1.0, &mut rng);
    let y = random_tensor(4, 1, 0.0, 1.0, &mut rng);
    let z = random_tensor(4, 1, 0.0, 1.0, &mut rng);
    let d_spec = spec.clone();
    let (gx, dy, dz, g_fixed) = (x.clone(), y.clone(), z.clone(), g.clone());
    let d_err = gradient_error(d.tensors(), seed, move |tape, dp| {
        let gp = g_fixed.bind(tape, false);
        let xv = tape.constant(gx.clone());
        let fake = generator_forward(&d_spec, &gp, &xv, &tape.constant(dz.clone()))?;
        let real = discriminator_forward(&d_spec, dp, &xv, &tape.constant(dy.clone()))?;
        let fake = discriminator_forward(&d_spec, dp, &xv, &fake)?;
        discriminator_loss(&real, &fake)
    })?;
    let g_spec = spec.clone();
    let g_err = gradient_error(g.tensors(), seed + 1, move |tape, gp| {
        let dp = d.bind(tape, false);
        let xv = tape.constant(x.clone());
        let fake = generator_forward(&g_spec, gp, &xv, &tape.constant(z.clone()))?;
        let score = discriminator_forward(&g_spec, &dp, &xv, &fake)?;
        generator_loss(&score, GeneratorLoss::NonSaturating)
    })?;
    Ok((d_err, g_err))
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut rng = seeded_rng(2024);
    for c in op_cases() {
        let mut w = 0.0f64;
        for _ in 0..100 {
            let (inputs, f) = (c.make)(&mut rng);
            let seed: u64 = rng.gen();
            match gradient_error(&inputs, seed, |tape, v| f(tape, v)) {
                Ok(e) => w = w.max(e),
                Err(e) => return Fail(format!("{}: {e}", c.name)),
            }
        }
        worst.push((c.name.to_string(), w));
    }
    for mode in InjectionMode::ALL {
        let spec = shrunken_spec(mode);
        let mut w = 0.0f64;
        for i in 0..25 {
            match gan_loss_errors(&spec, 100 * i + 7) {
                Ok((d, g)) => w = w.max(d).max(g),
                Err(e) => return Fail(format!("cgan/{mode}: {e}")),
            }
        }
        worst.push((format!("cgan-losses/{mode}"), w));
    }
    let elapsed = start.elapsed();
    let (name, max) = worst
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |acc, (n, e)| if e > acc.1 { (n, e) } else { acc });
    let failing: Vec<String> = worst
        .iter()
        .filter(|(_, e)| *e > FD_TOLERANCE)
        .map(|(n, e)| format!("{n}={e:.1e}"))
        .collect();
    verdict(
        failing.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "{} op families x 100 instances + 4 loss modes x 25; worst {max:.2e} ({name}); {:.1} s{}",
            worst.len() - 4,
            elapsed.as_secs_f64(),
            if failing.is_empty() {
                String::new()
            } else {
                format!("; over tolerance: {}", failing.join(", "))
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Adam oracle

/// Adam written out longhand, for `f(w) = (w - 3)^2`.
fn reference_adam(lr: f64, decay: f64, w0: f64, steps: usize) -> Vec<f64> {
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
    let mut out = Vec::new();
    for t in 1..=steps {
        let g = 2.0 * (w - 3.0);
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        let m_hat = m / (1.0 - beta1.powi(t as i32));
        let v_hat = v / (1.0 - beta2.powi(t as i32));
        let rate = lr / (1.0 + decay * (t - 1) as f64);
        w -= rate * m_hat / (v_hat.sqrt() + eps);
        out.push(w);
    }
    out
}

fn adam_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for (lr, decay, w0) in [(0.1, 0.0, 0.0), (0.05, 0.1, -1.5), (1e-3, 1e-3, 10.0)] {
        let expected = reference_adam(lr, decay, w0, 10);
        let mut w = vec![Tensor::scalar(w0)];
        let mut opt = Adam::new(AdamConfig::new(lr, decay), &w);
        for e in expected {
            let g = Tensor::scalar(2.0 * (w[0].item().unwrap() - 3.0));
            opt.step(w.iter_mut(), &[g]).unwrap();
            worst = worst.max((w[0].item().unwrap() - e).abs());
        }
    }
    verdict(worst <= 1e-12, format!("3 trajectories x 10 steps; max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 4. worked example

/// `I(0.75)` and the aggregate of `I(0.856) * I(0.874)`, evaluated
/// independently at 40 significant digits.
#[allow(clippy::excessive_precision)]
const ORACLE_I_075: f64 = 0.913742055557437019;
#[allow(clippy::excessive_precision)]
const ORACLE_AGGREGATE: f64 = 0.949106579166700168;

fn worked_example() -> Outcome {
    let tape = Tape::new();
    let head = tape.constant(Tensor::row_vector(&[0.9, 0.8, 0.7, 0.6, 0.5]));
    let trace = fuzzy_trace(&head, &FuzzyPartition::default()).unwrap();
    let irc = trace.reichenbach.value();
    let irc_err = (irc.get(0, 0) - 0.856).abs().max((irc.get(0, 1) - 0.874).abs());
    let agg = trace.output.value().item().unwrap();
    let agg_err = (agg - ORACLE_AGGREGATE).abs();
    let half = scalar_op(sigmoidal_implication, 0.5, 0.5);
    let half_err = (half - ORACLE_I_075).abs();
    verdict(
        irc.shape() == (1, 2) && irc_err <= 1e-15 && agg_err <= 1e-10 && half_err <= 1e-10,
        format!(
            "I_RC = [{:.15}, {:.15}]; aggregate {agg:.15} (oracle error {agg_err:.1e}); I(0.5, 0.5) error {half_err:.1e}",
            irc.get(0, 0),
            irc.get(0, 1)
        ),
    )
}

// ---------------------------------------------------------------------------
// 5, 6. reproduction runs on the benchmark datasets

fn missing_files(catalog: &Catalog, kinds: &[DatasetKind]) -> Vec<String> {
    kinds
        .iter()
        .filter_map(|k| {
            let entry = catalog.entry(k.name()).ok()?;
            (!entry.path.is_file()).then(|| entry.path.display().to_string())
        })
        .collect()
}

fn full_run_gate(kinds: &[DatasetKind]) -> Result<Catalog, String> {
    let catalog = Catalog::from_env();
    let missing = missing_files(&catalog, kinds);
    if !missing.is_empty() {
        return Err(format!("dataset files not found: {}", missing.join(", ")));
    }
    if std::env::var(FULL_RUN_ENV).as_deref() != Ok("1") {
        return Err(format!("500-epoch runs take hours; set {FULL_RUN_ENV}=1 to enable"));
    }
    Ok(catalog)
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs (or reuses) a published-preset cell over seeds 0..=4.
fn cell(
    cache: &mut BTreeMap<String, ExperimentResult>,
    catalog: &Catalog,
    kind: DatasetKind,
    model: ModelKind,
    injection: InjectionMode,
) -> fuzzy_cgan::Result<ExperimentResult> {
    let mut config = ExperimentConfig::new(kind.name(), model, injection, std::env::temp_dir());
    config.workers = workers();
    let key = config.stem();
    if let Some(r) = cache.get(&key) {
        return Ok(r.clone());
    }
    let ds = catalog.load(kind.name())?;
    let result = run_experiment(&config, &ds)?;
    eprintln!(
        "  {key}: nmae {:.5} ± {:.2e}, nmse {:.6}",
        result.aggregate.nmae.mean, result.aggregate.nmae.std, result.aggregate.nmse.mean
    );
    cache.insert(key, result.clone());
    Ok(result)
}

fn improvement(base: f64, new: f64) -> f64 {
    (base - new) / base * 100.0
}

fn directional_reproduction(cache: &mut BTreeMap<String, ExperimentResult>) -> Outcome {
    let catalog = match full_run_gate(&[DatasetKind::Pumadyn, DatasetKind::Bank]) {
        Ok(c) => c,
        Err(reason) => return Skip(reason),
    };
    let run = |cache: &mut BTreeMap<String, ExperimentResult>, kind, inj| {
        cell(cache, &catalog, kind, ModelKind::Cgan, inj).map(|r| r.aggregate)
    };
    let outcome = (|| -> fuzzy_cgan::Result<Outcome> {
        let puma = run(cache, DatasetKind::Pumadyn, InjectionMode::None)?;
        let puma_fri = run(cache, DatasetKind::Pumadyn, InjectionMode::Regression)?;
        let puma_fci = run(cache, DatasetKind::Pumadyn, InjectionMode::Classification)?;
        let bank = run(cache, DatasetKind::Bank, InjectionMode::None)?;
        let bank_fci = run(cache, DatasetKind::Bank, InjectionMode::Classification)?;
        let a = improvement(puma.nmae.mean, puma_fri.nmae.mean);
        let b = improvement(bank.nmae.mean, bank_fci.nmae.mean);
        let c = improvement(puma.nmse.mean, puma_fci.nmse.mean);
        Ok(verdict(
            a >= 30.0 && b >= 4.0 && c >= 20.0,
            format!("pumadyn FRI NMAE {a:+.2}% (need >= 30); bank FCI NMAE {b:+.2}% (need >= 4); pumadyn FCI NMSE {c:+.2}% (need >= 20)"),
        ))
    })();
    outcome.unwrap_or_else(|e| Fail(e.to_string()))
}

fn sanity_bands(cache: &mut BTreeMap<String, ExperimentResult>) -> Outcome {
    let catalog = match full_run_gate(&[DatasetKind::Pumadyn, DatasetKind::Abalone, DatasetKind::Ailerons]) {
        Ok(c) => c,
        Err(reason) => return Skip(reason),
    };
    let checks = [
        (DatasetKind::Pumadyn, ModelKind::Cgan, InjectionMode::None, 0.062, 0.186),
        (DatasetKind::Abalone, ModelKind::Dnn, InjectionMode::None, 0.027, 0.080),
        (DatasetKind::Ailerons, ModelKind::Cgan, InjectionMode::Classification, 0.021, 0.063),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, model, inj, lo, hi) in checks {
        match cell(cache, &catalog, kind, model, inj) {
            Ok(r) => {
                let v = r.aggregate.nmae.mean;
                ok &= (lo..=hi).contains(&v);
                parts.push(format!("{} NMAE {v:.5} in [{lo}, {hi}]", r.config.stem()));
            }
            Err(e) => return Fail(format!("{kind}: {e}")),
        }
    }
    verdict(ok, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 7, 8. metric consistency and determinism on short runs

fn short_config(dataset: &str, model: ModelKind, injection: InjectionMode) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(dataset, model, injection, std::env::temp_dir());
    config.seeds = vec![0, 1];
    config.overrides = Overrides {
        epochs: Some(2),
        ..Overrides::default()
    };
    config
}

fn short_cells() -> Vec<ExperimentConfig> {
    let mut cells: Vec<ExperimentConfig> = InjectionMode::ALL
        .iter()
        .map(|&inj| short_config("abalone", ModelKind::Cgan, inj))
        .collect();
    cells.push(short_config("abalone", ModelKind::Dnn, InjectionMode::None));
    cells
}

/// Synthetic data with abalone's width, standing in when the file is absent.
fn short_run_data() -> (Dataset, &'static str) {
    let catalog = Catalog::from_env();
    match catalog.load("abalone") {
        Ok(ds) => (ds, "abalone.csv"),
        Err(_) => (synthetic_dataset("abalone", 600, 7, 11), "synthetic 600x7"),
    }
}

fn metric_consistency() -> Outcome {
    let (ds, source) = short_run_data();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for config in short_cells() {
        let result = match run_experiment(&config, &ds) {
            Ok(r) => r,
            Err(e) => return Fail(format!("{}: {e}", config.stem())),
        };
        for s in &result.seeds {
            let Some(m) = s.metrics else {
                return Fail(format!("{} seed {} failed: {:?}", config.stem(), s.seed, s.error));
            };
            let r = m.target_range;
            worst = worst
                .max((m.mae - m.nmae * r).abs())
                .max((m.mse - m.nmse * r * r).abs());
            runs += 1;
        }
    }
    verdict(
        worst <= 1e-10,
        format!("{runs} runs on {source}; max |MAE - NMAE*range|, |MSE - NMSE*range^2| = {worst:.1e}"),
    )
}

fn determinism() -> Outcome {
    let (ds, source) = short_run_data();
    let mut cells = 0;
    for mut config in short_cells() {
        let first = match run_experiment(&config, &ds) {
            Ok(r) => r,
            Err(e) => return Fail(format!("{}: {e}", config.stem())),
        };
        config.workers = 2;
        let second = match run_experiment(&config, &ds) {
            Ok(r) => r,
            Err(e) => return Fail(format!("{}: {e}", config.stem())),
        };
        for (a, b) in first.seeds.iter().zip(&second.seeds) {
            let (Some(a), Some(b)) = (a.metrics, b.metrics) else {
                return Fail(format!("{}: a seed failed", config.stem()));
            };
            if a.nmae.to_bits() != b.nmae.to_bits() || a.nmse.to_bits() != b.nmse.to_bits() {
                return Fail(format!("{}: nmae {} vs {}", config.stem(), a.nmae, b.nmae));
            }
        }
        cells += 1;
    }
    Pass(format!("{cells} cells x 2 seeds rerun on {source} (1 and 2 workers): NMAE/NMSE bit-identical"))
}

// ---------------------------------------------------------------------------
// 9. dataset contracts

fn normalized_in_unit_interval(ds: &Dataset) -> fuzzy_cgan::Result<bool> {
    let split = prepare(ds, 0.8, 0)?;
    Ok([&split.train_x, &split.train_y, &split.test_x, &split.test_y]
        .iter()
        .all(|t| t.data().iter().all(|v| (0.0..=1.0).contains(v))))
}

fn dataset_contracts() -> Outcome {
    let catalog = Catalog::from_env();
    let missing = missing_files(&catalog, &DatasetKind::ALL);
    if !missing.is_empty() {
        let ds = synthetic_dataset("synthetic", 500, 16, 3);
        let range_ok = normalized_in_unit_interval(&ds).unwrap_or(false);
        let note = if range_ok {
            "normalized range verified on synthetic data"
        } else {
            "normalized range FAILED on synthetic data"
        };
        if !range_ok {
            return Fail(note.to_string());
        }
        return Skip(format!("{note}; shapes need {}", missing.join(", ")));
    }
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in DatasetKind::ALL {
        match catalog.load(kind.name()) {
            Ok(ds) => {
                let rows_ok = kind.rows().is_none_or(|r| r == ds.len());
                let in_range = normalized_in_unit_interval(&ds).unwrap_or(false);
                ok &= rows_ok && ds.features() == kind.features() && in_range;
                parts.push(format!("{kind} {}x{}", ds.len(), ds.features()));
            }
            Err(e) => return Fail(format!("{kind}: {e}")),
        }
    }
    verdict(ok, format!("{}; normalized values in [0, 1]", parts.join(", ")))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let cache = RefCell::new(BTreeMap::new());
    type Check<'a> = Box<dyn FnMut() -> Outcome + 'a>;
    let criteria: Vec<(&str, &str, Check)> = vec![
        ("1", "fuzzy operator axioms", Box::new(fuzzy_axioms)),
        ("2", "gradient oracle", Box::new(gradient_oracle)),
        ("3", "adam oracle", Box::new(adam_oracle)),
        ("4", "worked fuzzy example", Box::new(worked_example)),
        ("5", "directional reproduction", Box::new(|| directional_reproduction(&mut cache.borrow_mut()))),
        ("6", "absolute sanity bands", Box::new(|| sanity_bands(&mut cache.borrow_mut()))),
        ("7", "normalized/unnormalized consistency", Box::new(metric_consistency)),
        ("8", "determinism", Box::new(determinism)),
        ("9", "dataset contracts", Box::new(dataset_contracts)),
    ];
    let mut failed = 0;
    for (id, name, mut check) in criteria {
        let label = format!("criterion {id}: {name}");
        if !filters.is_empty() && !filters.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(&mut check))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Fail(format!("panicked: {msg}"))
            });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Pass(d) => println!("[PASS] {label} ({secs:.2} s): {d}"),
            Skip(d) => println!("[SKIP] {label}: {d}"),
            Fail(d) => {
                failed += 1;
                println!("[FAIL] {label} ({secs:.2} s): {d}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
