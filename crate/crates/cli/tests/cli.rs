use std::path::Path;
use std::process::{Command, Output};

fn graphsig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphsig"))
        .args(args)
        .env_remove("GRAPHSIG_WORKDIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let o = graphsig(&["synth", "--out", p(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("config.json")
}

fn column(csv: &str, row: usize, col: usize) -> f64 {
    csv.lines().nth(row + 1).unwrap().split(',').nth(col).unwrap().parse().unwrap()
}

#[test]
fn experiment_is_reproducible_and_meets_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let run = |work: &str| {
        let o = graphsig(&["experiment", "--config", p(&cfg), "--densities", "0.1", "--workdir", work]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = run(p(&a));
    run(p(&b));
    let ra = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("results.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("features.bin")).unwrap(), std::fs::read(b.join("features.bin")).unwrap());
    for line in out.lines().filter(|l| l.starts_with("synthetic")) {
        let f: f64 = line.rsplit("F=").next().unwrap().parse().unwrap();
        assert!(f >= 0.95, "{line}");
    }
}

#[test]
fn workdir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let work = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_graphsig"))
        .args(["features", "--config", p(&cfg)])
        .env("GRAPHSIG_WORKDIR", &work)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(work.join("features.bin").exists());
    assert!(work.join("skipped_masks.txt").exists());
}

#[test]
fn features_then_graph_without_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    for s in ["synthetic0", "synthetic1"] {
        std::fs::remove_dir_all(dir.path().join(s).join("groundtruth")).unwrap();
    }
    let o = graphsig(&["features", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(dir.path().join("work/features.bin")).unwrap();
    graphsig(&["features", "--config", p(&cfg)]);
    assert_eq!(first, std::fs::read(dir.path().join("work/features.bin")).unwrap());

    let o = graphsig(&["graph", "--config", p(&cfg), "--k", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let graph = std::fs::read_to_string(dir.path().join("work/graph.txt")).unwrap();
    assert!(graph.starts_with("# nodes=174"));
    assert!(dir.path().join("work/graph_report.json").exists());
}

#[test]
fn solve_two_node_example_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let labels = dir.path().join("labels.csv");
    let out = dir.path().join("z.csv");
    std::fs::write(&g, "# nodes=2\n0 1 1\n").unwrap();
    std::fs::write(&labels, "node_id,class\n0,0\n").unwrap();
    for method in ["closed", "iterative", "reduced", "auto"] {
        let o = graphsig(&["solve", "--graph", p(&g), "--labels", p(&labels), "--out", p(&out), "--method", method]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let z = std::fs::read_to_string(&out).unwrap();
        assert!((column(&z, 0, 1) - 1.0).abs() < 1e-9, "{method}: {z}");
        assert!((column(&z, 1, 1) - 5.0 / 6.0).abs() < 1e-9, "{method}: {z}");
        if method == "auto" {
            assert!(String::from_utf8_lossy(&o.stdout).contains("Closed"));
        }
    }
}

#[test]
fn solve_all_labeled_passes_through() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let labels = dir.path().join("labels.csv");
    let out = dir.path().join("z.csv");
    std::fs::write(&g, "# nodes=3\n0 1 1\n1 2 0.5\n").unwrap();
    std::fs::write(&labels, "node_id,class,sampled\n0,1,1\n1,0,1\n2,1,1\n").unwrap();
    assert_eq!(code(&graphsig(&["solve", "--graph", p(&g), "--labels", p(&labels), "--out", p(&out)])), 0);
    let z = std::fs::read_to_string(&out).unwrap();
    let classes: Vec<&str> = z.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(classes, ["1", "0", "1"]);
}

#[test]
fn verify_exit_codes() {
    let ok = graphsig(&["verify", "--seed", "3"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
    let broken = graphsig(&["verify", "--seed", "3", "--inject-asymmetric-psi"]);
    assert_eq!(code(&broken), 4);
    assert!(String::from_utf8_lossy(&broken.stdout).contains("FAIL eigenvalue sandwich"));
}

#[test]
fn usage_and_data_errors() {
    assert_eq!(code(&graphsig(&["nonsense"])), 1);
    assert_eq!(code(&graphsig(&["solve", "--labels", "x"])), 1);
    assert_eq!(code(&graphsig(&["--help"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    assert_eq!(code(&graphsig(&["spectral", "--graph", p(&missing), "--out", "x"])), 2);
    assert_eq!(code(&graphsig(&["sample", "--nodes", "10", "--density", "1.5", "--out", "x"])), 1);

    let cfg = synth(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&cfg, without_densities(&text)).unwrap();
    assert_eq!(code(&graphsig(&["experiment", "--config", p(&cfg)])), 1);
}

/// Empties the `densities` array of a pretty-printed config.
fn without_densities(text: &str) -> String {
    let start = text.find("\"densities\": [").unwrap() + "\"densities\": [".len();
    let end = start + text[start..].find(']').unwrap();
    format!("{}{}", &text[..start], &text[end..])
}

#[test]
fn spectral_sample_and_recover() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    std::fs::write(&g, "# nodes=3\n0 1 1\n1 2 1\n").unwrap();
    let spec = dir.path().join("spec.csv");
    assert_eq!(code(&graphsig(&["spectral", "--graph", p(&g), "--out", p(&spec), "--vectors"])), 0);
    let text = std::fs::read_to_string(&spec).unwrap();
    assert!(text.starts_with("index,lambda,u0,u1,u2"));
    for (k, lam) in [0.0, 1.0, 3.0].iter().enumerate() {
        assert!((column(&text, k, 1) - lam).abs() < 1e-12);
    }

    let s = dir.path().join("s.csv");
    assert_eq!(code(&graphsig(&["sample", "--nodes", "10", "--density", "0.25", "--seed", "7", "--out", p(&s)])), 0);
    let text = std::fs::read_to_string(&s).unwrap();
    assert!(text.starts_with("# seed=7, density=0.25, n_nodes=10\nindex\n"));
    assert_eq!(text.lines().count(), 5);

    // constant signal has bandwidth one, so any single sample recovers it
    let y = dir.path().join("y.csv");
    let out = dir.path().join("f.csv");
    std::fs::write(&y, "node_id,value\n2,4.0\n").unwrap();
    let o = graphsig(&["recover", "--graph", p(&g), "--signal", p(&y), "--rho", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = std::fs::read_to_string(&out).unwrap();
    for i in 0..3 {
        assert!((column(&f, i, 1) - 4.0).abs() < 1e-12, "{f}");
    }
    let o = graphsig(&["recover", "--graph", p(&g), "--signal", p(&y), "--rho", "2", "--out", p(&out)]);
    assert_eq!(code(&o), 3);
}
