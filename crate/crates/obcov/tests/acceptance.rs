//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero if any check fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use obcov::experiments::{run_figure1, run_figure2, run_figure3, run_rate_study, ExperimentSpec};
use obcov::sigma::compound_symmetry;
use obcov::table::{ResultTable, CSV_HEADER};
use obcov_core::estimators::{estimate_adap, estimate_adap_entrywise, estimate_dith};
use obcov_core::linalg::{col_norm_1to2, fro_norm, max_norm, op_norm, sym_eigvals, Matrix};
use obcov_core::quantize::{decode_stream, encode_stream};
use obcov_core::sampling::{bounded_test_vector, gaussian_vector};
use obcov_core::{
    DitherPolicy, DitherState, GaussianModel, PolicyTag, QuantizedSample, RngStream, SampleStream,
    Scale, SymMatrix,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean_of(t: &ResultTable, sweep: f64, estimator: &str) -> f64 {
    t.find(sweep, estimator)
        .unwrap_or_else(|| panic!("missing row {sweep} {estimator}"))
        .mean_error
}

/// Uniform inputs on `[-1, 1]^5`, `lambda = 1`, `n = 10^6`: every entry of
/// the fixed-`lambda` estimate lies within 4 Monte Carlo standard errors of
/// `I / 3`.
fn dither_identity() -> Outcome {
    let p = 5;
    let n = 1_000_000;
    let mut xrng = RngStream::new(1, 0);
    let mut drng = RngStream::new(1, 1);
    let mut state = DitherState::new(p, DitherPolicy::Fixed(1.0)).unwrap();
    let mut stream = SampleStream::new(p, PolicyTag::Fixed, 1.0).unwrap();
    // Per-entry first and second moments of the symmetrized summands.
    let mut s1 = vec![0.0; p * p];
    let mut s2 = vec![0.0; p * p];
    for _ in 0..n {
        let x = bounded_test_vector(p, 1.0, &mut xrng);
        let q = state.acquire(&x, &mut drng).unwrap();
        let y = q.y.to_signs();
        let yb = q.y_bar.to_signs();
        for i in 0..p {
            for j in 0..p {
                let v = 0.5 * (y[i] * yb[j] + y[j] * yb[i]);
                s1[i * p + j] += v;
                s2[i * p + j] += v * v;
            }
        }
        stream.push(q).unwrap();
    }
    let est = estimate_dith(&stream).unwrap();
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let k = i * p + j;
            let m = s1[k] / nf;
            let se = ((s2[k] / nf - m * m) / nf).sqrt();
            let target = if i == j { 1.0 / 3.0 } else { 0.0 };
            worst = worst.max((est[(i, j)] - target).abs() / se);
        }
    }
    check(
        worst <= 4.0,
        format!("max |est - I/3| / s.e. = {worst:.3} (limit 4)"),
    )
}

fn figure1_table() -> ResultTable {
    run_figure1(&ExperimentSpec::default(), compound_symmetry).unwrap()
}

/// Sample covariance best at every `p`; adaptive over grid-optimal fixed
/// `lambda` within `[0.8, 1.5]`.
fn figure1(t: &ResultTable) -> Outcome {
    let spec = ExperimentSpec::default();
    let mut ratios = Vec::new();
    let mut cov_best = true;
    for &p in &spec.p_values {
        let pf = p as f64;
        let (cov, dith, adap) = (
            mean_of(t, pf, "sample-cov"),
            mean_of(t, pf, "dith"),
            mean_of(t, pf, "adap"),
        );
        cov_best &= cov < dith && cov < adap;
        ratios.push(adap / dith);
    }
    let in_band = ratios.iter().all(|r| (0.8..=1.5).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    check(
        cov_best && in_band,
        format!(
            "sample-cov smallest at every p: {cov_best}; adap/dith = [{}] (band [0.8, 1.5])",
            shown.join(", ")
        ),
    )
}

fn figure1_calibration(t: &ResultTable) -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/figure1_calibration.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("calibration header mismatch".into());
    }
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (line, row) in lines.zip(&t.rows) {
        let f: Vec<&str> = line.split(',').collect();
        let sweep: f64 = f[0].parse().unwrap();
        let mean: f64 = f[2].parse().unwrap();
        let se: f64 = f[3].parse().unwrap();
        if sweep != row.sweep || f[1] != row.estimator || f[4] != row.trials.to_string() {
            return Err(format!("row layout differs at {line}"));
        }
        worst = worst
            .max((mean - row.mean_error).abs())
            .max((se - row.std_error).abs());
        count += 1;
    }
    check(
        count == t.rows.len() && worst <= 1e-12,
        format!("{count} rows, max deviation {worst:e} (limit 1e-12)"),
    )
}

/// U-shaped fixed-`lambda` curve at `p = 5`.
fn figure2() -> Outcome {
    let spec = ExperimentSpec {
        p_values: vec![5],
        ..ExperimentSpec::default()
    };
    let t = run_figure2(&spec, &compound_symmetry(5)).unwrap();
    let dith = t.series("dith");
    let (imin, min) = dith
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.mean_error))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let last = dith.last().unwrap().mean_error;
    let adap = t.series("adap")[0].mean_error;
    let interior = imin > 0 && imin + 1 < dith.len();
    check(
        last >= 1.5 * min && interior && adap <= 1.3 * min,
        format!(
            "largest-lambda/min = {:.3} (>= 1.5); argmin lambda = {} at index {imin} of {}; adap/min = {:.3} (<= 1.3)",
            last / min,
            dith[imin].sweep,
            dith.len(),
            adap / min
        ),
    )
}

/// Global vs entry-wise adaptive on the rescaled compound covariance.
fn figure3() -> Outcome {
    let t = run_figure3(&ExperimentSpec::default()).unwrap();
    let adap_growth = mean_of(&t, 30.0, "sigma2/adap") / mean_of(&t, 5.0, "sigma2/adap");
    let entry_growth =
        mean_of(&t, 30.0, "sigma2/adap-entrywise") / mean_of(&t, 5.0, "sigma2/adap-entrywise");
    let vs_cov =
        mean_of(&t, 30.0, "sigma2/adap-entrywise") / mean_of(&t, 30.0, "sigma2/sample-cov");
    check(
        adap_growth >= 1.5 && entry_growth <= 1.3 && vs_cov <= 2.0,
        format!(
            "adap p30/p5 = {adap_growth:.3} (>= 1.5); entrywise p30/p5 = {entry_growth:.3} (<= 1.3); entrywise/sample-cov at p30 = {vs_cov:.3} (<= 2)"
        ),
    )
}

fn rate() -> Outcome {
    let spec = ExperimentSpec {
        p_values: vec![5],
        ..ExperimentSpec::default()
    };
    let study = run_rate_study(&spec, &compound_symmetry(5)).unwrap();
    let s = study.slope_adap;
    check(
        (-0.65..=-0.35).contains(&s),
        format!(
            "adap log-log slope = {s:.4} (band [-0.65, -0.35]); sample-cov slope = {:.4}",
            study.slope_sample_cov
        ),
    )
}

fn bits(m: &SymMatrix) -> Vec<u64> {
    m.as_matrix()
        .as_slice()
        .iter()
        .map(|v| v.to_bits())
        .collect()
}

fn restamp(
    stream: &SampleStream,
    policy: PolicyTag,
    scale: impl Fn(&Scale) -> Scale,
) -> SampleStream {
    let mut out = SampleStream::new(stream.dim(), policy, 0.2).unwrap();
    for q in stream.samples() {
        out.push(QuantizedSample {
            y: q.y.clone(),
            y_bar: q.y_bar.clone(),
            scale: scale(&q.scale),
        })
        .unwrap();
    }
    out
}

/// Constant global scales reproduce the fixed-`lambda` estimate, and
/// `s_k I` entry-wise scales reproduce the global adaptive estimate.
fn reductions() -> Outcome {
    let mut rng = RngStream::new(606, 0);
    for case in 0..1000u64 {
        let p = 1 + (rng.next_u64() % 10) as usize;
        let n = 1 + (rng.next_u64() % 60) as usize;
        let lambda = 0.05 + 3.0 * rng.uniform01();
        let sigma = SymMatrix::from_upper_fn(p, |i, j| if i == j { 1.0 } else { 0.3 });
        let model = GaussianModel::new(sigma).unwrap();
        let xs: Vec<Vec<f64>> = (0..=n).map(|_| gaussian_vector(&model, &mut rng)).collect();
        let mut drng = RngStream::new(607, case);

        let mut fixed = DitherState::new(p, DitherPolicy::Fixed(lambda)).unwrap();
        let mut f = SampleStream::new(p, PolicyTag::Fixed, lambda).unwrap();
        for x in &xs[1..] {
            f.push(fixed.acquire(x, &mut drng).unwrap()).unwrap();
        }
        let as_global = restamp(&f, PolicyTag::GlobalAdaptive, |s| s.clone());
        if bits(&estimate_dith(&f).unwrap()) != bits(&estimate_adap(&as_global).unwrap()) {
            return Err(format!("constant-scale case {case} differs"));
        }

        let mut adaptive = DitherState::new(p, DitherPolicy::GlobalAdaptive(0.2)).unwrap();
        adaptive.update(&xs[0]).unwrap();
        let mut g = SampleStream::new(p, PolicyTag::GlobalAdaptive, 0.2).unwrap();
        for x in &xs[1..] {
            g.push(adaptive.acquire(x, &mut drng).unwrap()).unwrap();
        }
        let as_entry = restamp(&g, PolicyTag::EntrywiseAdaptive, |s| {
            Scale::Entrywise(vec![s.at(0); p])
        });
        if bits(&estimate_adap(&g).unwrap()) != bits(&estimate_adap_entrywise(&as_entry).unwrap()) {
            return Err(format!("identity-scale case {case} differs"));
        }
    }
    Ok("1000 randomized cases bit-identical for both reductions".into())
}

fn run_cli(args: &[&str], dir: &Path) -> (Vec<u8>, Vec<u8>) {
    let output = Command::new(env!("CARGO_BIN_EXE_obcov"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "obcov {args:?} failed");
    let out = dir.join(args.iter().skip_while(|a| **a != "--out").nth(1).unwrap());
    (
        std::fs::read(&out).unwrap(),
        std::fs::read(out.with_extension("json")).unwrap(),
    )
}

/// Codec round trip on 100 acquired streams, then byte-identical quick
/// reproductions across runs and thread counts.
fn codec_and_determinism() -> Outcome {
    let mut rng = RngStream::new(700, 0);
    for case in 0..100u64 {
        let p = 1 + (rng.next_u64() % 20) as usize;
        let n = (rng.next_u64() % 50) as usize + 2;
        let policy = PolicyTag::ALL[(case % 5) as usize];
        let model = GaussianModel::new(SymMatrix::identity(p)).unwrap();
        let xs: Vec<Vec<f64>> = (0..=n).map(|_| gaussian_vector(&model, &mut rng)).collect();
        let mut state = match policy {
            PolicyTag::Fixed => DitherState::new(p, DitherPolicy::Fixed(1.0 + rng.uniform01())),
            PolicyTag::GlobalAdaptive => DitherState::new(p, DitherPolicy::GlobalAdaptive(0.2)),
            PolicyTag::EntrywiseAdaptive => {
                DitherState::new(p, DitherPolicy::EntrywiseAdaptive(0.75))
            }
            PolicyTag::OracleEntrywise => {
                obcov_core::quantize::build_oracle_dither(&SymMatrix::identity(p), n as u64, 0.75)
            }
            PolicyTag::MaxEntrywise => obcov_core::quantize::build_max_dither(&xs[1..]),
        }
        .unwrap();
        let mut s = SampleStream::new(p, state.policy(), state.header_param()).unwrap();
        state.update(&xs[0]).unwrap();
        for x in &xs[1..] {
            s.push(state.acquire(x, &mut rng).unwrap()).unwrap();
        }
        let bytes = encode_stream(&s);
        let back = decode_stream(&bytes).map_err(|e| format!("case {case}: {e}"))?;
        if back != s || encode_stream(&back) != bytes {
            return Err(format!("codec case {case} not bit-identical"));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let a = run_cli(
        &[
            "reproduce",
            "1",
            "--quick",
            "--threads",
            "1",
            "--out",
            "a.csv",
        ],
        dir.path(),
    );
    let b = run_cli(
        &[
            "reproduce",
            "1",
            "--quick",
            "--threads",
            "1",
            "--out",
            "b.csv",
        ],
        dir.path(),
    );
    let c = run_cli(
        &[
            "reproduce",
            "1",
            "--quick",
            "--threads",
            "8",
            "--out",
            "c.csv",
        ],
        dir.path(),
    );
    let same_csv = a.0 == b.0 && a.0 == c.0;
    let lines = a.0.iter().filter(|&&b| b == b'\n').count();
    check(
        same_csv,
        format!("100 streams round-trip; reproduce 1 --quick CSV ({lines} lines) identical across runs and 1 vs 8 threads: {same_csv}"),
    )
}

fn linalg() -> Outcome {
    let eig = sym_eigvals(&compound_symmetry(5)).unwrap();
    let expected = [1.8, 0.8, 0.8, 0.8, 0.8];
    let eig_err = eig
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut exact = true;
    for p in 1..=30 {
        let j = Matrix::from_fn(p, p, |_, _| 1.0);
        let pf = p as f64;
        exact &= op_norm(&j).unwrap() == pf
            && fro_norm(&j) == pf
            && max_norm(&j) == 1.0
            && col_norm_1to2(&j) == pf.sqrt();
    }
    check(
        eig_err <= 1e-10 && exact,
        format!("compound eigenvalue error {eig_err:e} (<= 1e-10); all-ones norms exact for p = 1..30: {exact}"),
    )
}

/// Flipping `X_k` never changes the scale recorded for sample `k`.
fn predictability() -> Outcome {
    let mut rng = RngStream::new(909, 0);
    for case in 0..10_000u64 {
        let p = 1 + (rng.next_u64() % 8) as usize;
        let n = 2 + (rng.next_u64() % 30) as usize;
        let k = 1 + (rng.next_u64() % n as u64) as usize;
        let xs: Vec<Vec<f64>> = (0..=n)
            .map(|_| bounded_test_vector(p, 4.0, &mut rng))
            .collect();
        let mut flipped = xs.clone();
        flipped[k].iter_mut().for_each(|v| *v = -*v);
        let policy = if case % 2 == 0 {
            DitherPolicy::GlobalAdaptive(0.2)
        } else {
            DitherPolicy::EntrywiseAdaptive(0.75)
        };
        let scales = |xs: &[Vec<f64>]| {
            let mut state = DitherState::new(p, policy.clone()).unwrap();
            let mut d = RngStream::new(910, case);
            state.update(&xs[0]).unwrap();
            xs[1..]
                .iter()
                .map(|x| state.acquire(x, &mut d).unwrap().scale)
                .collect::<Vec<_>>()
        };
        let (a, b) = (scales(&xs), scales(&flipped));
        if a[..k] != b[..k] {
            return Err(format!("case {case}: scale of sample {k} moved"));
        }
    }
    Ok("10000 sign flips; recorded scales up to and including sample k unchanged".into())
}

fn main() {
    let started = Instant::now();
    let mut failures = 0;
    let mut report = |id: &str, name: &str, outcome: Outcome, t: Instant| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{id}] {tag} {name}: {detail} ({:.1}s)",
            t.elapsed().as_secs_f64()
        );
    };

    let t = Instant::now();
    report("1", "dither identity", dither_identity(), t);
    let t = Instant::now();
    let table = figure1_table();
    report("2", "figure 1 comparison", figure1(&table), t);
    let t = Instant::now();
    report(
        "2b",
        "figure 1 calibration file",
        figure1_calibration(&table),
        t,
    );
    let t = Instant::now();
    report("3", "figure 2 U-shape", figure2(), t);
    let t = Instant::now();
    report("4", "figure 3 separation", figure3(), t);
    let t = Instant::now();
    report("5", "rate in n", rate(), t);
    let t = Instant::now();
    report("6", "reduction identities", reductions(), t);
    let t = Instant::now();
    report("7", "codec and determinism", codec_and_determinism(), t);
    let t = Instant::now();
    report("8", "linear algebra oracles", linalg(), t);
    let t = Instant::now();
    report("9", "predictable dither", predictability(), t);

    println!(
        "acceptance: {failures} failing check(s), {:.1}s total",
        started.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
