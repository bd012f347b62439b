//! End-to-end runs of the `ab-disk` binary.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use abdisk::mesh::{Domain, Mesh};

const COARSE: &str = "3:2,4:4,5:6";

fn ab_disk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ab-disk"))
        .args(args)
        .env_remove("AB_DISK_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header and rows of a CSV document.
fn csv(text: &str) -> (String, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn f(cell: &str) -> f64 {
    cell.parse().unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn bessel_zero_examples() {
    let (header, rows) = csv(&stdout(&ab_disk(&[
        "bessel-zeros",
        "--twice-order",
        "1",
        "--count",
        "3",
    ])));
    assert_eq!(header, "k,z,lambda");
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        let k = (i + 1) as f64;
        assert_eq!(row[0], (i + 1).to_string());
        assert!((f(&row[1]) - k * PI).abs() < 1e-12);
        assert!((f(&row[2]) - k * k * PI * PI).abs() < 1e-10);
    }
    let (_, rows) = csv(&stdout(&ab_disk(&[
        "bessel-zeros",
        "--twice-order",
        "3",
        "--count",
        "1",
    ])));
    assert!((f(&rows[0][1]) - 4.4934094579).abs() < 1e-10);
    assert!((f(&rows[0][2]) - 20.1907286).abs() < 1e-7);
    let (_, rows) = csv(&stdout(&ab_disk(&[
        "bessel-zeros",
        "--twice-order",
        "0",
        "--count",
        "1",
    ])));
    assert!((f(&rows[0][1]) - 2.4048255577).abs() < 1e-10);
    assert!((f(&rows[0][2]) - 5.7831860).abs() < 1e-7);
}

#[test]
fn bessel_csv_and_json_agree() {
    let args = ["bessel-zeros", "--twice-order", "5", "--count", "6"];
    let (_, rows) = csv(&stdout(&ab_disk(&args)));
    let doc = json(&stdout(&ab_disk(
        &[&args[..], &["--format", "json"]].concat(),
    )));
    let items = doc["rows"].as_array().unwrap();
    assert_eq!(items.len(), rows.len());
    for (row, item) in rows.iter().zip(items) {
        assert_eq!(f(&row[1]), item["z"].as_f64().unwrap());
        assert_eq!(f(&row[2]), item["lambda"].as_f64().unwrap());
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let cases: &[&[&str]] = &[
        &["no-such-command"],
        &["bessel-zeros", "--twice-order", "99"],
        &["bessel-zeros", "--count", "0"],
        &["spectrum", "--merged", "--k", "2"],
        &["spectrum", "--t", "0.2", "--k", "2"],
        &["spectrum", "--t", "1.5", "--variant", "dn"],
        &["spectrum", "--t", "1", "--merged"],
        &["spectrum", "--t", "0", "--merged", "--k", "9"],
        &["spectrum", "--t", "0", "--merged", "--levels", "4:4"],
        &["spectrum", "--t", "0", "--merged", "--seed", "abc"],
        &["sweep", "--t-grid", "0.5,0.2"],
        &["sweep", "--t-grid", "0,0.99"],
        &["sweep", "--k", "1"],
        &["verify", "--suite", "everything"],
        &["--config", "/nonexistent/run.conf", "bessel-zeros"],
    ];
    for args in cases {
        assert_eq!(ab_disk(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn computation_failure_exits_with_one() {
    // a pole this close to the rim collides with the coarse boundary vertices
    let out = ab_disk(&[
        "mesh-dump",
        "--t",
        "0.99",
        "--base-level",
        "2",
        "--grade-rounds",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn thread_cap_is_validated() {
    let run = |value: &str| {
        Command::new(env!("CARGO_BIN_EXE_ab-disk"))
            .args(["bessel-zeros", "--count", "2"])
            .env("AB_DISK_THREADS", value)
            .output()
            .unwrap()
    };
    assert_eq!(run("1").status.code(), Some(0));
    assert_eq!(run("0").status.code(), Some(2));
    assert_eq!(run("many").status.code(), Some(2));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "# coarse run\ntwice_order = 3\ncount = 4\nformat = json\n",
    )
    .unwrap();
    let c = conf.to_str().unwrap();

    let doc = json(&stdout(&ab_disk(&["--config", c, "bessel-zeros"])));
    assert_eq!(doc["twice_order"], 3);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 4);

    let text = stdout(&ab_disk(&[
        "--config",
        c,
        "bessel-zeros",
        "--count",
        "2",
        "--format",
        "csv",
    ]));
    let (header, rows) = csv(&text);
    assert_eq!(header, "k,z,lambda");
    assert_eq!(rows.len(), 2);
    assert!((f(&rows[0][1]) - 4.493409457909064).abs() < 1e-12);

    std::fs::write(&conf, "count = 2\ncolour = blue\n").unwrap();
    assert_eq!(
        ab_disk(&["--config", c, "bessel-zeros"]).status.code(),
        Some(2)
    );
    std::fs::write(&conf, "count = two\n").unwrap();
    assert_eq!(
        ab_disk(&["--config", c, "bessel-zeros"]).status.code(),
        Some(2)
    );
}

#[test]
fn spectrum_header_is_stable() {
    let text = stdout(&ab_disk(&[
        "spectrum", "--t", "0", "--merged", "--k", "2", "--levels", COARSE,
    ]));
    let (header, rows) = csv(&text);
    assert_eq!(
        header,
        "j,lambda_extrapolated,provenance,residual,double,level_3_2,level_4_4,level_5_6"
    );
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.len() == 8));
}

#[test]
fn centred_pole_gives_a_flagged_double_pair() {
    let text = stdout(&ab_disk(&[
        "spectrum", "--t", "0", "--merged", "--k", "2", "--levels", COARSE,
    ]));
    let (_, rows) = csv(&text);
    let provenance: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert!(provenance.contains(&"DN") && provenance.contains(&"ND"));
    for r in &rows {
        assert_eq!(r[4], "true");
        assert!((f(&r[1]) - PI * PI).abs() < 0.01 * PI * PI);
    }
}

#[test]
fn endpoint_dn_matches_first_integer_zero() {
    let text = stdout(&ab_disk(&[
        "spectrum",
        "--t",
        "1",
        "--variant",
        "dn",
        "--k",
        "1",
        "--levels",
        COARSE,
    ]));
    let (_, rows) = csv(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "DN");
    // z_{1,1}² = 14.68197...
    assert!((f(&rows[0][1]) - 14.682).abs() < 0.01);
}

#[test]
fn off_centre_pole_orders_nd_before_dn() {
    let text = stdout(&ab_disk(&[
        "spectrum", "--t", "0.5", "--merged", "--k", "2", "--levels", COARSE,
    ]));
    let (_, rows) = csv(&text);
    assert_eq!(rows[0][2], "ND");
    assert_eq!(rows[1][2], "DN");
    assert_eq!(rows[0][4], "false");
    assert!(f(&rows[0][1]) < f(&rows[1][1]));
}

#[test]
fn spectrum_csv_and_json_agree() {
    let base = [
        "spectrum",
        "--t",
        "0.3",
        "--variant",
        "nd",
        "--k",
        "3",
        "--levels",
        COARSE,
    ];
    let (_, rows) = csv(&stdout(&ab_disk(&base)));
    let doc = json(&stdout(&ab_disk(
        &[&base[..], &["--format", "json"]].concat(),
    )));
    assert_eq!(doc["mode"], "ND");
    let items = doc["rows"].as_array().unwrap();
    assert_eq!(items.len(), 3);
    for (row, item) in rows.iter().zip(items) {
        assert_eq!(f(&row[1]), item["lambda_extrapolated"].as_f64().unwrap());
        assert_eq!(f(&row[3]), item["residual"].as_f64().unwrap());
        let levels = item["per_level"].as_array().unwrap();
        for (cell, v) in row[5..].iter().zip(levels) {
            assert_eq!(f(cell), v.as_f64().unwrap());
        }
    }
}

const SWEEP_HEADER: &str = "t,lam1_nd,lam1_dn,lam2_nd,lam2_dn,lam1,lam2,gap,res1_nd,res1_dn,res2_nd,res2_dn,lam1_tag,lam2_tag";
const SWEEP_COLUMNS: [&str; 12] = [
    "t", "lam1_nd", "lam1_dn", "lam2_nd", "lam2_dn", "lam1", "lam2", "gap", "res1_nd", "res1_dn",
    "res2_nd", "res2_dn",
];

#[test]
fn sweep_csv_and_json_agree() {
    let base = ["sweep", "--t-grid", "0:0.6:0.3", "--levels", COARSE];
    let out = ab_disk(&base);
    let text = stdout(&out);
    let (header, rows) = csv(&text);
    assert_eq!(header, SWEEP_HEADER);
    assert_eq!(rows.len(), 3);

    let verdict = json(String::from_utf8(out.stderr).unwrap().trim());
    assert_eq!(verdict["simple_for_positive_t"], true);
    assert_eq!(verdict["monotone_nd"], true);
    assert_eq!(verdict["monotone_dn"], true);
    let slope = verdict["slope_nd_at_0"].as_f64().unwrap();
    assert!((slope + PI * PI).abs() < 0.05 * PI * PI, "{slope}");
    assert_eq!(verdict["slope_dn_at_0"].as_f64().unwrap(), -slope);

    let doc = json(&stdout(&ab_disk(
        &[&base[..], &["--format", "json"]].concat(),
    )));
    assert_eq!(doc["verdict"], verdict);
    let points = doc["points"].as_array().unwrap();
    for (row, p) in rows.iter().zip(points) {
        for (cell, key) in row.iter().zip(SWEEP_COLUMNS) {
            assert_eq!(f(cell), p[key].as_f64().unwrap(), "{key}");
        }
        assert_eq!(row[12], p["lam1_tag"].as_str().unwrap());
        assert_eq!(row[13], p["lam2_tag"].as_str().unwrap());
    }
}

fn run_to(path: &Path, args: &[&str]) -> Vec<u8> {
    let out = ab_disk(&[args, &["--output", path.to_str().unwrap()]].concat());
    stdout(&out);
    std::fs::read(path).unwrap()
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = [
        "spectrum", "--t", "0.4", "--merged", "--k", "3", "--levels", COARSE, "--seed", "0x1234",
    ];
    let a = run_to(&dir.path().join("a.csv"), &spectrum);
    let b = run_to(&dir.path().join("b.csv"), &spectrum);
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let sweep = [
        "sweep", "--t-grid", "0,0.5", "--levels", COARSE, "--format", "json",
    ];
    let a = run_to(&dir.path().join("a.json"), &sweep);
    let b = run_to(&dir.path().join("b.json"), &sweep);
    assert_eq!(a, b);
}

#[test]
fn verify_specfun_suite_passes() {
    let out = ab_disk(&["verify", "--suite", "specfun"]);
    let text = stdout(&out);
    let headline: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("criterion"))
        .collect();
    assert_eq!(headline.len(), 2);
    assert!(headline.iter().all(|l| l.contains("[PASS]")));
    assert!(text.contains("2 of 2 criteria passed"));
}

#[test]
fn coarse_verify_reports_widened_tolerances() {
    let out = ab_disk(&["verify", "--suite", "spectra", "--coarse"]);
    let text = stdout(&out);
    let headline: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("criterion"))
        .collect();
    assert_eq!(headline.len(), 6);
    assert!(headline.iter().any(|l| l.contains("widened tolerances")));
    assert!(headline.iter().all(|l| l.contains("[PASS]")));
}

#[test]
fn mesh_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.txt");
    let bytes = run_to(
        &path,
        &[
            "mesh-dump",
            "--t",
            "-0.3",
            "--base-level",
            "3",
            "--grade-rounds",
            "2",
        ],
    );
    let mut mesh = Mesh::read_dump(&bytes[..], Domain::HalfDisk).unwrap();
    // the split point is not stored in the dump
    mesh.split_point = Some(-0.3);
    mesh.validate().unwrap();
    assert!(mesh.vertices.iter().any(|p| p == &[-0.3, 0.0]));
}

#[test]
fn matrix_dump_is_lower_triangular() {
    let args = [
        "matrix-dump",
        "--t",
        "0.2",
        "--base-level",
        "2",
        "--grade-rounds",
        "1",
        "--variant",
        "nd",
    ];
    for which in ["stiffness", "mass"] {
        let text = stdout(&ab_disk(&[&args[..], &["--which", which]].concat()));
        let mut diagonal = 0;
        for line in text.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(parts.len(), 3);
            let (i, j): (usize, usize) = (parts[0].parse().unwrap(), parts[1].parse().unwrap());
            assert!(j <= i);
            if i == j {
                diagonal += 1;
                assert!(f(parts[2]) > 0.0);
            }
        }
        assert!(diagonal > 0);
    }
}
