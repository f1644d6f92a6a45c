//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (unbuffered, so it shows without `--nocapture`) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use koopman_pde::identify::GenerationParams;
use koopman_pde::koopman::fit_dataset;
use koopman_pde::numkernel::{eig, expm, logm, lstsq_fit, pinv, Matrix};
use koopman_pde::observables::build_burgers_basis;
use koopman_pde::operators::{graphon_candidates, pde_candidates};
use koopman_pde::simulate::IntegratorSettings;
use koopman_pde::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "[acceptance {id}] {verdict}  {name}: {detail}"
    );
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn pde1() -> &'static Model {
    static MODEL: OnceLock<Model> = OnceLock::new();
    MODEL.get_or_init(|| Model::builtin("pde1", None).unwrap().unwrap())
}

fn pde1_data(t_s: f64) -> SnapshotDataset {
    generate_pairs(pde1(), InitialConditionFamily::Pde1, 25, 50, t_s, SEED).unwrap()
}

/// The 0.3 dataset is shared by the recovery and comparison checks.
fn pde1_coarse() -> &'static (SnapshotDataset, Duration) {
    static DATA: OnceLock<(SnapshotDataset, Duration)> = OnceLock::new();
    DATA.get_or_init(|| {
        let t0 = Instant::now();
        let data = pde1_data(0.3);
        (data, t0.elapsed())
    })
}

fn describe(r: &Result<IdentificationResult>, truth: &Dictionary) -> (Option<f64>, String) {
    match r {
        Ok(r) => {
            let e = r.max_abs_error(truth);
            (Some(e), format!("{e:.4}"))
        }
        Err(e) => (None, format!("error ({e})")),
    }
}

#[test]
fn burgers_spectrum_contains_dominant_eigenvalues() {
    let t0 = Instant::now();
    let model = Model::burgers(256).unwrap();
    let data = generate_pairs(&model, InitialConditionFamily::Burgers, 10, 50, 0.2, SEED).unwrap();
    let fit = fit_dataset(&data, &build_burgers_basis(SEED)).unwrap();
    let spec = spectrum(&fit).unwrap();
    let elapsed = t0.elapsed();

    let lowest: Vec<f64> = spec
        .records
        .iter()
        .take(10)
        .filter_map(|r| r.lambda_l.map(|l| l.re))
        .collect();
    let mut found = Vec::new();
    let mut pass = true;
    for alpha in 1..=3 {
        let target = -(alpha as f64) * (PI / 2.0).powi(2);
        let best = lowest
            .iter()
            .cloned()
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()));
        let ok = best.is_some_and(|b| ((b - target) / target).abs() <= 0.10);
        pass &= ok;
        found.push(format!(
            "α={alpha}: target {target:.4}, closest {}",
            best.map_or("none".into(), |b| format!("{b:.4}"))
        ));
    }
    pass &= within(elapsed, 60);
    report(
        1,
        "Burgers spectrum, 10 lowest-residual λ_L within 10% of −α(π/2)²",
        pass,
        &format!("{}; {:.1}s", found.join("; "), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn pde_coefficients_recovered_by_lifting() {
    let truth = &pde1().dictionary;
    let dict = pde_candidates();
    let w = WeightSpec::bump(5.0);
    let t0 = Instant::now();
    let (coarse, gen_time) = pde1_coarse();
    let at_coarse = lifting_identify(coarse, &dict, &w);
    let fine_data = pde1_data(0.05);
    let at_fine = lifting_identify(&fine_data, &dict, &w);
    let elapsed = t0.elapsed() + *gen_time;

    let (e1, d1) = describe(&at_coarse, truth);
    let (e2, d2) = describe(&at_fine, truth);
    let pass =
        e1.is_some_and(|e| e <= 0.1) && e2.is_some_and(|e| e <= 0.02) && within(elapsed, 120);
    report(
        2,
        "PDE coefficients, max error ≤ 0.1 at t_s=0.3 and ≤ 0.02 at t_s=0.05",
        pass,
        &format!(
            "t_s=0.3: {d1}; t_s=0.05: {d2}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn lifting_beats_direct_on_pde() {
    let truth = &pde1().dictionary;
    let dict = pde_candidates();
    let w = WeightSpec::bump(5.0);
    let (data, _) = pde1_coarse();
    let (lift, dl) = describe(&lifting_identify(data, &dict, &w), truth);
    let (direct, dd) = describe(&direct_identify(data, &dict, &w), truth);
    let pass = matches!((lift, direct), (Some(l), Some(d)) if l < d);
    report(
        3,
        "lifting max error < direct max error at t_s=0.3",
        pass,
        &format!("lifting {dl}, direct {dd}"),
    );
    assert!(pass);
}

#[test]
fn graphon_coefficients_recovered() {
    let t0 = Instant::now();
    let model = Model::graphon(256).unwrap();
    let data = generate_pairs(&model, InitialConditionFamily::Graphon, 25, 50, 0.5, SEED).unwrap();
    let r = lifting_identify(&data, &graphon_candidates(), &WeightSpec::PowerLaw { p: 2 });
    let elapsed = t0.elapsed();
    let (e, d) = describe(&r, &model.dictionary);
    let estimates = r
        .as_ref()
        .map(|r| {
            graphon_candidates()
                .terms()
                .iter()
                .map(|t| format!("{t}={:.3}", r.estimate_of(t).unwrap()))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default();
    let pass = e.is_some_and(|e| e <= 0.05) && within(elapsed, 60);
    report(
        4,
        "graphon coefficients, max error ≤ 0.05 at t_s=0.5",
        pass,
        &format!("max error {d} [{estimates}]; {:.1}s", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn pde_error_shrinks_with_sampling_time() {
    let ts_list = [0.3, 0.15, 0.075, 0.0375];
    let params = GenerationParams {
        family: InitialConditionFamily::Pde1,
        num_trajectories: 25,
        num_pairs: 50,
        seed: SEED,
        settings: IntegratorSettings::default(),
    };
    let outcome = ts_convergence_study(
        pde1(),
        &pde_candidates(),
        &WeightSpec::bump(5.0),
        &ts_list,
        &params,
    );
    let (pass, detail) = match &outcome {
        Ok(report) => {
            let first = report.entries.first().unwrap().max_error;
            let last = report.entries.last().unwrap().max_error;
            let column: Vec<String> = report
                .entries
                .iter()
                .map(|e| format!("{}→{:.4}", e.t_s, e.max_error))
                .collect();
            (last < first, column.join(", "))
        }
        Err(Error::Study {
            t_s,
            partial,
            source,
        }) => {
            let done: Vec<String> = partial
                .entries
                .iter()
                .map(|e| format!("{}→{:.4}", e.t_s, e.max_error))
                .collect();
            (
                false,
                format!(
                    "study stopped at t_s={t_s} ({source}); completed [{}]",
                    done.join(", ")
                ),
            )
        }
        Err(e) => (false, e.to_string()),
    };
    report(
        5,
        "max error at t_s=0.0375 < max error at t_s=0.3",
        pass,
        &detail,
    );
    assert!(pass);
}

#[test]
fn heat_equation_oracles() {
    let model = Model::heat(256).unwrap();
    let data = generate_pairs(&model, InitialConditionFamily::Burgers, 10, 50, 0.1, SEED).unwrap();

    let basis: Vec<FunctionalSpec> = (1..=4).map(FunctionalSpec::sine_mode).collect();
    let spec = spectrum(&fit_dataset(&data, &basis).unwrap()).unwrap();
    let lambdas = spec.lambda_l();
    let mut pass = true;
    let mut detail = Vec::new();
    for k in 1..=4 {
        let target = -(k as f64 * PI / 2.0).powi(2);
        let best = lambdas
            .iter()
            .map(|l| l.re)
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .unwrap();
        let rel = ((best - target) / target).abs();
        pass &= rel <= 0.01;
        detail.push(format!("k={k}: {best:.4} ({:.1e} rel)", rel));
    }

    let dict =
        Dictionary::candidates(vec![TermSpec::identity(), TermSpec::monomial(0, 2)]).unwrap();
    let weight = WeightSpec::parse("sine:1+sine:2").unwrap();
    let r = lifting_identify(&data, &dict, &weight).unwrap();
    let err = r.max_abs_error(&model.dictionary);
    pass &= err <= 1e-3;
    detail.push(format!(
        "ĉ = ({:.5}, {:.5}), max error {err:.1e}",
        r.estimates[0], r.estimates[1]
    ));
    report(
        6,
        "heat equation, λ_L within 1% of −(kπ/2)² and ĉ = (0, 1) within 1e-3",
        pass,
        &detail.join("; "),
    );
    assert!(pass);
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn numerical_kernel_properties() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 7];

    for _ in 0..200 {
        let m = rng.random_range(1..=20);
        let n = rng.random_range(1..=20);
        let rank = rng.random_range(1..=m.min(n));
        let a = random_matrix(&mut rng, m, rank) * random_matrix(&mut rng, rank, n);
        let p = pinv(&a, None).unwrap();
        let ap = &a * &p;
        let pa = &p * &a;
        worst[0] = worst[0]
            .max(rel(&(&ap * &a), &a))
            .max(rel(&(&pa * &p), &p))
            .max(rel(&ap.transpose(), &ap))
            .max(rel(&pa.transpose(), &pa));
    }

    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let b = random_matrix(&mut rng, n, n);
        let b = &b / (b.norm() + 1e-3);
        worst[1] = worst[1].max(rel(&logm(&expm(&b).unwrap()).unwrap().matrix, &b));
        let a = Matrix::identity(n, n) * 0.5 + &b * 0.4;
        worst[2] = worst[2].max(rel(&expm(&logm(&a).unwrap().matrix).unwrap(), &a));
    }

    for _ in 0..100 {
        let n = rng.random_range(1..=30);
        let a = random_matrix(&mut rng, n, n);
        let dec = eig(&a).unwrap();
        let ac = a.map(|v| num_complex::Complex64::new(v, 0.0));
        for i in 0..n {
            let v = dec.vectors.column(i);
            let r = (&ac * v - v * dec.eigenvalues[i]).norm() / a.norm();
            worst[3] = worst[3].max(r);
        }
    }

    for _ in 0..100 {
        let m = rng.random_range(5..=40);
        let n = rng.random_range(1..=5.min(m));
        let x1 = random_matrix(&mut rng, m, n);
        let mm = random_matrix(&mut rng, n, n);
        let fitted = lstsq_fit(&x1, &(&x1 * &mm)).unwrap();
        worst[4] = worst[4].max(rel(&fitted, &mm));
    }

    // weight scaling on the identification path
    let model = Model::heat(64).unwrap();
    let data = generate_pairs(&model, InitialConditionFamily::Burgers, 5, 12, 0.1, SEED).unwrap();
    let dict = Dictionary::candidates(vec![
        TermSpec::identity(),
        TermSpec::monomial(0, 2),
        TermSpec::monomial(2, 0),
    ])
    .unwrap();
    let w = WeightSpec::parse("sine:1+sine:2+sine:3").unwrap();
    let w3 = WeightSpec::Sum {
        terms: vec![w.clone(), w.clone(), w.clone()],
    };
    let base = lifting_identify(&data, &dict, &w).unwrap();
    let scaled = lifting_identify(&data, &dict, &w3).unwrap();
    for (a, b) in base.estimates.iter().zip(&scaled.estimates) {
        worst[5] = worst[5].max((a - b).abs() / a.abs().max(1.0));
    }

    // common scaling of every basis functional on the spectrum path
    let basis: Vec<FunctionalSpec> = (1..=4).map(FunctionalSpec::sine_mode).collect();
    let (xi1, xi2) = build_data_matrices(&data, &basis).unwrap();
    let plain = spectrum(&edmd_fit(&xi1, &xi2, 0.1).unwrap()).unwrap();
    let scaled = spectrum(&edmd_fit(&(&xi1 * -3.7), &(&xi2 * -3.7), 0.1).unwrap()).unwrap();
    let mut a: Vec<_> = plain.records.iter().map(|r| r.lambda_u).collect();
    let mut b: Vec<_> = scaled.records.iter().map(|r| r.lambda_u).collect();
    a.sort_by(|x, y| x.re.total_cmp(&y.re));
    b.sort_by(|x, y| x.re.total_cmp(&y.re));
    for (x, y) in a.iter().zip(&b) {
        worst[6] = worst[6].max((x - y).norm());
    }

    let elapsed = t0.elapsed();
    let limits = [1e-9, 1e-8, 1e-8, 1e-8, 1e-9, 1e-10, 1e-10];
    let names = [
        "Moore–Penrose",
        "logm∘expm",
        "expm∘logm",
        "eig residual",
        "lstsq recovery",
        "weight scaling",
        "basis scaling",
    ];
    let pass = worst.iter().zip(&limits).all(|(w, l)| w <= l) && within(elapsed, 30);
    let detail: Vec<String> = names
        .iter()
        .zip(worst.iter().zip(&limits))
        .map(|(n, (w, l))| format!("{n} {w:.1e} (≤ {l:.0e})"))
        .collect();
    report(
        7,
        "numerical kernel properties",
        pass,
        &format!("{}; {:.1}s", detail.join(", "), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

fn run_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_koopman-pde"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

#[test]
fn cli_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("dict.json"),
        r#"[{"kind":"monomial","j":1,"k":0},{"kind":"monomial","j":0,"k":2}]"#,
    )
    .unwrap();
    let runs: [&[&str]; 4] = [
        &[
            "simulate",
            "--model",
            "burgers",
            "--pairs",
            "40",
            "--trajectories",
            "8",
            "--ts",
            "0.2",
            "--seed",
            "3",
            "--grid",
            "64",
            "--out",
            "OUT",
        ],
        &[
            "spectrum",
            "--data",
            "data.json",
            "--basis",
            "burgers:3",
            "--out",
            "OUT",
        ],
        &[
            "identify",
            "--data",
            "data.json",
            "--dict",
            "dict.json",
            "--weight",
            "sine:1+sine:2",
            "--method",
            "lifting",
            "--out",
            "OUT",
        ],
        &[
            "sweep-ts",
            "--model",
            "heat",
            "--dict",
            "dict.json",
            "--weight",
            "sine:1+sine:2",
            "--ts-list",
            "0.2,0.1,0.05",
            "--pairs",
            "12",
            "--trajectories",
            "4",
            "--grid",
            "64",
            "--seed",
            "3",
            "--out",
            "OUT",
        ],
    ];
    let mut identical = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = format!("out_{i}_{rep}");
            let args: Vec<&str> = args
                .iter()
                .map(|a| if *a == "OUT" { out.as_str() } else { a })
                .collect();
            run_cli(d, &args);
            outputs.push(std::fs::read(d.join(&out)).unwrap());
        }
        if i == 0 {
            std::fs::write(d.join("data.json"), &outputs[0]).unwrap();
        }
        identical.push((args[0], !outputs[0].is_empty() && outputs[0] == outputs[1]));
    }
    let pass = identical.iter().all(|(_, same)| *same);
    let detail: Vec<String> = identical
        .iter()
        .map(|(c, same)| format!("{c} {}", if *same { "identical" } else { "differs" }))
        .collect();
    report(8, "CLI determinism", pass, &detail.join(", "));
    assert!(pass);
}
