use bernoulli::field::field_to_csv;
use bernoulli::geometry::build_rectangle;
use bernoulli::{MetricComplex, VectorField};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const INTERVAL: &str = r#"
[mesh]
kind = "interval"
n = 101
end = 2.0

[problem]
q = { kind = "constant", value = 4.0 }
g = { kind = "affine_plus", xi = [1.0], offset = 1.0, gradient = [-0.5] }
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        "{body}\n[output]\ndir = \"{}\"\n",
        name.trim_end_matches(".toml")
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&Path], sub: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernoulli"))
        .arg(sub)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest_is_complete(out: &Path) {
    let m = json(out.join("manifest.json"));
    let files = m["outputs"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let len = std::fs::metadata(out.join(f.as_str().unwrap()))
            .unwrap()
            .len();
        assert!(len > 0, "{f} is empty");
    }
}

#[test]
fn solve_interval_matches_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "interval.toml", INTERVAL);
    let o = run(&[&cfg], "solve");
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = dir.path().join("interval");
    let e = json(out.join("energy.json"));
    let j = e["final_energy"].as_f64().unwrap();
    assert!((j - 4.0).abs() / 4.0 <= 5.0 * 0.02, "{j}");
    assert!(json(out.join("certificate.json"))["valid"]
        .as_bool()
        .unwrap());
    manifest_is_complete(&out);
}

#[test]
fn zero_data_gives_zero_energy() {
    let dir = TempDir::new().unwrap();
    let body = INTERVAL.replace(
        r#"g = { kind = "affine_plus", xi = [1.0], offset = 1.0, gradient = [-0.5] }"#,
        r#"g = { kind = "zero", m = 1 }"#,
    );
    let cfg = write_config(dir.path(), "zero.toml", &body);
    let o = run(&[&cfg], "solve");
    assert_eq!(o.status.code(), Some(0));
    let e = json(dir.path().join("zero/energy.json"));
    assert_eq!(e["final_energy"].as_f64(), Some(0.0));
}

#[test]
fn bad_inputs_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "q.toml",
        &INTERVAL.replace("value = 4.0", "value = -1.0"),
    );
    assert_eq!(run(&[&cfg], "solve").status.code(), Some(1));
    let typo = format!("{INTERVAL}\n[solver]\nseed = \"x\"\n");
    let cfg = write_config(dir.path(), "typo.toml", &typo);
    let o = run(&[&cfg], "solve");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 12"));
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&[&missing], "solve").status.code(), Some(1));
}

#[test]
fn failing_certificate_and_non_convergence_have_their_own_codes() {
    let dir = TempDir::new().unwrap();
    // a single descent step at a single width is far from a minimizer
    let rough = format!(
        "{INTERVAL}\n[solver]\nmax_iter = 1\neps_final_h = 1000.0\n\n[run]\nsolvers = \"relaxed\"\n"
    );
    let cfg = write_config(dir.path(), "rough.toml", &rough);
    assert_eq!(run(&[&cfg], "solve").status.code(), Some(2));
    let capped = format!(
        "{INTERVAL}\n[solver]\nmax_moves = 0\n\n[run]\nsolvers = \"setmove\"\nsetmove_init = \"full\"\n\n[certify]\nenabled = false\n"
    );
    let cfg = write_config(dir.path(), "capped.toml", &capped);
    assert_eq!(run(&[&cfg], "solve").status.code(), Some(3));
}

#[test]
fn repeated_runs_write_identical_fields() {
    let dir = TempDir::new().unwrap();
    let body = format!("{INTERVAL}\n[solver]\nseed = 11\n");
    let a = write_config(dir.path(), "a.toml", &body);
    let b = write_config(dir.path(), "b.toml", &body);
    assert_eq!(run(&[&a], "solve").status.code(), Some(0));
    assert_eq!(run(&[&b], "solve").status.code(), Some(0));
    for f in ["field.csv", "field_relaxed.csv", "field_setmove.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn oracle_agrees_on_a_short_chain() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "chain.toml",
        &INTERVAL.replace("n = 101", "n = 12"),
    );
    let o = run(&[&cfg], "oracle");
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(dir.path().join("chain/oracle.json"));
    assert!(r["agrees"].as_bool().unwrap());
    assert_eq!(r["solvers"].as_array().unwrap().len(), 2);
}

#[test]
fn diagnose_recovers_the_half_plane() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[mesh]
kind = "rectangle"
nx = 129
ny = 129

[problem]
q = { kind = "constant", value = 1.0 }
g = { kind = "affine_plus", xi = [0.6, 0.8], offset = -0.5, gradient = [1.0, 0.0] }

[diagnose]
center = 8320
"#;
    let cfg = write_config(dir.path(), "half.toml", body);
    let c = build_rectangle(129, 129, 1.0, 1.0).unwrap();
    let u = VectorField::from_fn(&c, 2, |v| {
        let x = (c.coords()[v][0] - 0.5).max(0.0);
        vec![0.6 * x, 0.8 * x]
    })
    .unwrap();
    let field = dir.path().join("half_field.csv");
    std::fs::write(&field, field_to_csv(&u, 1e-12)).unwrap();
    let o = run(&[&cfg, &field], "diagnose");
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = dir.path().join("half");
    let el = std::fs::read_to_string(out.join("el.csv")).unwrap();
    let q: Vec<f64> = el
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(
        (q[0] - 0.6).abs() < 0.06 && (q[1] - 0.8).abs() < 0.08,
        "{q:?}"
    );
    let report = json(out.join("diagnostics.json"));
    assert!(report["el"]["defect"].as_f64().unwrap() < 0.1);
    for f in ["weiss.csv", "growth.csv", "density.csv"] {
        assert!(out.join(f).exists());
    }
    manifest_is_complete(&out);
}

#[test]
fn blowup_at_unit_scale_round_trips() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[mesh]
kind = "cone"
angle = 4.71238898038469
nr = 32
ntheta = 48
rmax = 2.0

[problem]
q = { kind = "constant", value = 1.0 }
g = { kind = "cone_sine", xi = [1.0], frequency = 1.3333333333333333 }

[blowup]
r = 1.0
nr = 16
ntheta = 48
"#;
    let cfg = write_config(dir.path(), "cone.toml", body);
    let o = run(&[&cfg], "blowup");
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = dir.path().join("cone");
    let b = json(out.join("blowup.json"));
    // the rim trace is averaged over one coarse cell (h = 1/16)
    assert!(b["rescale_defect"].as_f64().unwrap() < 0.1, "{b}");
    manifest_is_complete(&out);
}

#[test]
fn mesh_export_reads_back() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "mesh.toml", INTERVAL);
    assert_eq!(run(&[&cfg], "mesh").status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("mesh/mesh.json")).unwrap();
    let c = MetricComplex::from_json(&text).unwrap();
    assert_eq!(c.num_vertices(), 101);
    // the exported mesh drives a run of its own
    let body = INTERVAL.replace(
        "kind = \"interval\"\nn = 101\nend = 2.0",
        "kind = \"file\"\npath = \"mesh/mesh.json\"",
    );
    let cfg = write_config(dir.path(), "from_file.toml", &body);
    let o = run(&[&cfg], "solve");
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
