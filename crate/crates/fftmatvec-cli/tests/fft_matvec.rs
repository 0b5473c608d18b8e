use std::process::Command;

use fftmatvec::io::load_vector;
use fftmatvec::report::{read_phase_csv, read_sweep_csv, split_blocks};
use fftmatvec::PrecisionConfig;

fn fft_matvec<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fft_matvec")).args(args).output().expect("binary runs")
}

const SMALL: &[&str] = &["-nm", "50", "-nd", "5", "-Nt", "16", "-reps", "2", "-warmup", "1"];

fn with(extra: &[&str]) -> Vec<String> {
    SMALL.iter().chain(extra).map(|s| s.to_string()).collect()
}

#[test]
fn raw_phase_report_format() {
    let out = fft_matvec(&with(&["-prec", "ddddd", "-raw"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "matvec,phase,mean_s,min_s,max_s");
    assert_eq!(lines.len(), 13);
    let rows = read_phase_csv(&text).unwrap();
    let names: Vec<(&str, &str)> = rows.iter().map(|r| (r.matvec.as_str(), r.phase.as_str())).collect();
    let phases = ["pad", "fft", "sbgemv", "ifft", "unpad", "total"];
    for (i, (m, p)) in names.iter().enumerate() {
        assert_eq!(*m, if i < 6 { "forward" } else { "adjoint" });
        assert_eq!(*p, phases[i % 6]);
    }
    for r in &rows {
        assert!(r.min_s <= r.mean_s && r.mean_s <= r.max_s && r.min_s >= 0.0);
    }
}

#[test]
fn human_report_mentions_both_matvecs() {
    let out = fft_matvec(&with(&["-prec", "dssdd"]));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("forward") && text.contains("adjoint") && text.contains("prec=dssdd"));
}

#[test]
fn bad_config_exits_2_naming_position_1() {
    let out = fft_matvec(&["-prec", "xyzzy"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("position 1"), "{err}");
}

#[test]
fn unwritable_save_dir_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, b"x").unwrap();
    let out = fft_matvec(&with(&["-s", file.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_is_readable_by_report_reader() {
    let dir = tempfile::tempdir().unwrap();
    let save = dir.path().to_str().unwrap();
    let out = fft_matvec(&with(&["-sweep", "-rand", "-tol", "1e-7", "-raw", "-s", save]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let blocks = split_blocks(&text);
    assert_eq!(blocks.len(), 2);
    for (block, kind) in blocks.iter().zip(["forward", "adjoint"]) {
        assert_eq!(block.get("matvec"), Some(kind));
        let chosen: PrecisionConfig = block.get("chosen").unwrap().parse().unwrap();
        let rows = read_sweep_csv(&block.csv).unwrap();
        assert_eq!(rows.len(), 32);
        assert_eq!(rows[0].config, PrecisionConfig::ALL_DOUBLE);
        assert_eq!(rows[0].rel_error, 0.0);
        let best = rows.iter().find(|r| r.config == chosen).unwrap();
        assert!(best.rel_error <= 1e-7);
        let base = load_vector(dir.path().join(format!("{kind}_ddddd.fmv"))).unwrap();
        assert!(base.as_f64().is_some());
        load_vector(dir.path().join(format!("{kind}_{chosen}.fmv"))).unwrap();
    }
}

#[test]
fn identical_args_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let p = dir.path().to_str().unwrap();
        let out = fft_matvec(&with(&["-prec", "dssds", "-rand", "-raw", "-p", "3", "-s", p]));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["forward_dssds.fmv", "adjoint_dssds.fmv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}
