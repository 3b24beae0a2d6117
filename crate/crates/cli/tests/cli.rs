use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ccs_ica::{center_and_whiten, linalg};
use ccs_ica_cli::io::{read_matrix, read_numeric_csv, read_signals};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccs-ica"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_in(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    v.sort();
    v
}

/// `metric,index,value` rows as tuples.
fn metrics(path: &Path) -> Vec<(String, usize, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (
                rec[0].to_string(),
                rec[1].parse().unwrap(),
                rec[2].parse().unwrap(),
            )
        })
        .collect()
}

fn metric(m: &[(String, usize, f64)], name: &str) -> Vec<f64> {
    m.iter().filter(|r| r.0 == name).map(|r| r.2).collect()
}

/// Generates two sources and mixes them; returns (sources dir, mixture dir).
fn prepare(root: &Path, samples: usize, seed: &str) -> (PathBuf, PathBuf) {
    let src = root.join("src");
    let mixd = root.join("mix");
    ok(&[
        "gen",
        "--sources",
        "uniform,laplacian",
        "--samples",
        &samples.to_string(),
        "--seed",
        seed,
        "--out",
        s(&src),
    ]);
    let files = files_in(&src, "source_");
    let mut args = vec!["mix", "--seed", seed, "--out", s(&mixd), "--input"];
    args.extend(files.iter().map(|p| s(p)));
    ok(&args);
    (src, mixd)
}

#[test]
fn round_trip_for_every_algorithm_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let (src, mixd) = prepare(dir.path(), 200, "3");
    let truth = files_in(&src, "source_");
    for alg in ["gd", "pairwise-gd", "jacobi"] {
        for div in ["ccs", "cs"] {
            let out = dir.path().join(format!("{alg}-{div}"));
            ok(&[
                "separate",
                "--input",
                s(&mixd.join("mixture.csv")),
                "--algorithm",
                alg,
                "--divergence",
                div,
                "--max-iter",
                "15",
                "--ts",
                "2",
                "--out",
                s(&out),
            ]);
            let metrics_path = out.join("metrics.csv");
            let mixing = mixd.join("mixing.csv");
            let estimates = out.join("estimates.csv");
            let demixer = out.join("demixer.csv");
            let mut args = vec!["eval", "--estimates", s(&estimates), "--demixer", s(&demixer)];
            args.extend(["--mixing", s(&mixing), "--out", s(&metrics_path), "--truth"]);
            args.extend(truth.iter().map(|p| s(p)));
            ok(&args);
            let m = metrics(&metrics_path);
            let amari = metric(&m, "amari_x100");
            assert_eq!(amari.len(), 1);
            assert!((0.0..=100.0).contains(&amari[0]), "{alg}/{div}: {amari:?}");
            assert_eq!(metric(&m, "sir_db").len(), 2);
            let (header, trace) = header_and_lines(&out.join("trace.csv"));
            assert_eq!(header, "stage,step,value");
            assert!(!trace.is_empty());
        }
    }
}

fn header_and_lines(path: &Path) -> (String, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(str::to_owned);
    let header = lines.next().unwrap();
    (header, lines.collect())
}

#[test]
fn jacobi_separates_two_sources_above_20_db() {
    let dir = tempfile::tempdir().unwrap();
    let (src, mixd) = prepare(dir.path(), 1000, "5");
    let out = dir.path().join("sep");
    ok(&[
        "separate",
        "--input",
        s(&mixd.join("mixture.csv")),
        "--algorithm",
        "jacobi",
        "--out",
        s(&out),
    ]);
    let metrics_path = dir.path().join("m.csv");
    let truth = files_in(&src, "source_");
    ok(&[
        "eval",
        "--estimates",
        s(&out.join("estimates.csv")),
        "--truth",
        s(&truth[0]),
        s(&truth[1]),
        "--out",
        s(&metrics_path),
    ]);
    let sir = metric(&metrics(&metrics_path), "sir_db");
    assert!(sir.iter().all(|&v| v >= 20.0), "{sir:?}");
}

#[test]
fn gen_is_deterministic_and_writes_one_file_per_source() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "gen",
            "--sources",
            "uniform",
            "--samples",
            "1000",
            "--seed",
            "7",
            "--out",
            s(d),
        ]);
    }
    assert_eq!(
        fs::read(a.join("source_0_uniform.csv")).unwrap(),
        fs::read(b.join("source_0_uniform.csv")).unwrap()
    );
    let c = dir.path().join("c");
    ok(&[
        "gen",
        "--sources",
        "s1,s2,s3,s4",
        "--samples",
        "123",
        "--out",
        s(&c),
    ]);
    let files = files_in(&c, "source_");
    assert_eq!(files.len(), 4);
    for f in files {
        let (_, t) = read_numeric_csv(&f).unwrap();
        assert_eq!(t.dim(), (123, 1));
    }
}

#[test]
fn generated_laplacian_has_kurtosis_three() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "gen",
        "--sources",
        "laplacian",
        "--samples",
        "50000",
        "--seed",
        "1",
        "--out",
        s(dir.path()),
    ]);
    let m = dir.path().join("m.csv");
    ok(&[
        "eval",
        "--estimates",
        s(&dir.path().join("source_0_laplacian.csv")),
        "--out",
        s(&m),
    ]);
    let k = metric(&metrics(&m), "kurtosis");
    assert!((k[0] - 3.0).abs() < 0.5, "{k:?}");
}

#[test]
fn zero_iterations_give_the_whitening_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mixd) = prepare(dir.path(), 300, "2");
    let out = dir.path().join("sep");
    let input = mixd.join("mixture.csv");
    ok(&[
        "separate",
        "--input",
        s(&input),
        "--algorithm",
        "gd",
        "--max-iter",
        "0",
        "--out",
        s(&out),
    ]);
    let w = read_matrix(&out.join("demixer.csv")).unwrap();
    let (_, ws) = center_and_whiten(&read_signals(&[input]).unwrap()).unwrap();
    assert_eq!(w, ws.v);
}

#[test]
fn separation_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mixd) = prepare(dir.path(), 300, "4");
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("sep{k}"));
        ok(&[
            "separate",
            "--input",
            s(&mixd.join("mixture.csv")),
            "--algorithm",
            "pairwise-gd",
            "--ts",
            "3",
            "--out",
            s(&out),
        ]);
        bytes.push(["estimates.csv", "demixer.csv", "trace.csv"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn eval_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let (src, mixd) = prepare(dir.path(), 400, "6");
    let truth = files_in(&src, "source_");
    let a = read_matrix(&mixd.join("mixing.csv")).unwrap();
    let inv = dir.path().join("inv.csv");
    ccs_ica_cli::io::write_matrix(&inv, &linalg::inverse(a.view()).unwrap()).unwrap();
    let m = dir.path().join("m.csv");
    ok(&[
        "eval",
        "--estimates",
        s(&truth[0]),
        s(&truth[1]),
        "--truth",
        s(&truth[0]),
        s(&truth[1]),
        "--demixer",
        s(&inv),
        "--mixing",
        s(&mixd.join("mixing.csv")),
        "--out",
        s(&m),
    ]);
    let rows = metrics(&m);
    assert_eq!(metric(&rows, "sir_db"), vec![150.0, 150.0]);
    assert!(metric(&rows, "amari_x100")[0] < 1e-10);
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mixd) = prepare(dir.path(), 200, "1");
    let input = mixd.join("mixture.csv");
    let code = |args: &[&str]| run(args).status.code().unwrap();

    assert_eq!(
        code(&[
            "separate",
            "--input",
            s(&input),
            "--divergence",
            "kl",
            "--out",
            s(dir.path())
        ]),
        2
    );
    assert_eq!(code(&["bench", "--table", "T9"]), 2);
    assert_eq!(code(&["separate", "--input", s(&input), "--ts", "0"]), 2);
    assert_eq!(code(&["separate", "--input", s(&input), "--alpha", "nan"]), 2);
    assert_eq!(code(&["gen", "--no-such-flag"]), 2);
    assert_eq!(
        code(&["separate", "--input", s(&dir.path().join("missing.csv"))]),
        4
    );

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x0,x1\n1,oops\n").unwrap();
    assert_eq!(code(&["separate", "--input", s(&bad)]), 4);

    // Two identical channels: the covariance is singular.
    let twin = dir.path().join("twin.csv");
    let mut text = String::from("x0,x1\n");
    for k in 0..50 {
        let v = (k as f64 * 0.37).sin();
        text.push_str(&format!("{v},{v}\n"));
    }
    fs::write(&twin, text).unwrap();
    assert_eq!(
        code(&["separate", "--input", s(&twin), "--out", s(&dir.path().join("t"))]),
        3
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mixd) = prepare(dir.path(), 200, "8");
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "[optimizer]\nalgorithm = \"gd\"\nmax_iter = 3\nts = 2\n").unwrap();
    let input = mixd.join("mixture.csv");

    let out = dir.path().join("from-file");
    ok(&[
        "separate",
        "--config",
        s(&cfg),
        "--input",
        s(&input),
        "--out",
        s(&out),
    ]);
    let (_, rows) = header_and_lines(&out.join("trace.csv"));
    assert!(rows.iter().all(|r| r.starts_with("all,")));
    assert!(rows.len() <= 4);

    let out = dir.path().join("flag");
    ok(&[
        "separate",
        "--config",
        s(&cfg),
        "--algorithm",
        "jacobi",
        "--input",
        s(&input),
        "--out",
        s(&out),
    ]);
    let (_, rows) = header_and_lines(&out.join("trace.csv"));
    assert!(rows.iter().all(|r| r.starts_with("sweep,")));
}

#[test]
fn surface_and_slice_files() {
    let dir = tempfile::tempdir().unwrap();
    let slice = dir.path().join("slice.csv");
    ok(&[
        "surface",
        "--divergence",
        "ccs",
        "--alpha",
        "-1",
        "--marg2",
        "0.5,0.5",
        "--out",
        s(&slice),
    ]);
    let (header, t) = read_numeric_csv(&slice).unwrap();
    assert_eq!(header, vec!["p_aa", "p_ba", "value"]);
    assert_eq!(t.nrows(), 64);
    let surface = dir.path().join("surface.csv");
    ok(&[
        "surface",
        "--divergence",
        "kl",
        "--marg1",
        "0.6,0.4",
        "--grid",
        "16",
        "--out",
        s(&surface),
    ]);
    let (_, t) = read_numeric_csv(&surface).unwrap();
    assert_eq!(t.nrows(), 256);
    assert!(t.column(2).iter().all(|&v| v >= -1e-12));
}

#[test]
fn wav_sources_round_trip_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    ok(&[
        "gen",
        "--sources",
        "uniform,uniform",
        "--samples",
        "400",
        "--format",
        "wav",
        "--out",
        s(&src),
    ]);
    let files = files_in(&src, "source_");
    assert_eq!(files.len(), 2);
    let spec = hound_spec(&files[0]);
    assert_eq!(spec, (1, 8000, 16));
    let mixd = dir.path().join("mix");
    ok(&[
        "mix",
        "--input",
        s(&files[0]),
        s(&files[1]),
        "--format",
        "wav",
        "--out",
        s(&mixd),
    ]);
    let mixture = files_in(&mixd, "mixture_");
    assert_eq!(mixture.len(), 2);
    let out = dir.path().join("sep");
    ok(&[
        "separate",
        "--input",
        s(&mixture[0]),
        s(&mixture[1]),
        "--ts",
        "2",
        "--format",
        "wav",
        "--out",
        s(&out),
    ]);
    assert_eq!(files_in(&out, "estimates_").len(), 2);
}

fn hound_spec(path: &Path) -> (u16, u32, u16) {
    let spec = hound::WavReader::open(path).unwrap().spec();
    (spec.channels, spec.sample_rate, spec.bits_per_sample)
}

#[test]
fn noisy_mix_reaches_the_requested_snr() {
    let dir = tempfile::tempdir().unwrap();
    let (src, _) = prepare(dir.path(), 4000, "9");
    let files = files_in(&src, "source_");
    let (clean, noisy) = (dir.path().join("clean"), dir.path().join("noisy"));
    ok(&["mix", "--input", s(&files[0]), s(&files[1]), "--out", s(&clean)]);
    ok(&[
        "mix",
        "--input",
        s(&files[0]),
        s(&files[1]),
        "--snr-db",
        "20",
        "--out",
        s(&noisy),
    ]);
    let c = read_signals(&[clean.join("mixture.csv")]).unwrap();
    let n = read_signals(&[noisy.join("mixture.csv")]).unwrap();
    let signal: f64 = c.data().iter().map(|v| v * v).sum();
    let noise: f64 = (n.data() - c.data()).iter().map(|v| v * v).sum();
    let snr = 10.0 * (signal / noise).log10();
    assert!((snr - 20.0).abs() < 0.5, "{snr}");
}
