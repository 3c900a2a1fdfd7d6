use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tubetopo::{save_mask, BinaryMask};

fn tubetopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tubetopo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ring(dir: &Path) -> String {
    let m = BinaryMask::from_ascii("#####\n#...#\n#...#\n#####").unwrap();
    let path = dir.join("ring.pgm");
    save_mask(&m, &path).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn topology_of_ring() {
    let dir = tempfile::tempdir().unwrap();
    let o = tubetopo(&["topology", &ring(dir.path())]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "beta0=1 beta1=1 euler=0");
}

#[test]
fn metrics_of_identical_masks() {
    let dir = tempfile::tempdir().unwrap();
    let r = ring(dir.path());
    let o = tubetopo(&["metrics", "--pred", &r, "--gt", &r]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,dice,cldice,beta0_num,beta0_mat"));
    assert_eq!(lines.next(), Some("ring,100.00,100.00,0.00,0.00"));
    assert_eq!(lines.next(), Some("mean(per-image),100.00,100.00,0.00,0.00"));
    assert_eq!(lines.next(), Some("pooled,100.00,100.00,0.00,0.00"));
}

#[test]
fn metrics_over_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (p, g) = (dir.path().join("pred"), dir.path().join("gt"));
    fs::create_dir_all(&p).unwrap();
    fs::create_dir_all(&g).unwrap();
    let full = BinaryMask::from_ascii("###\n###").unwrap();
    let half = BinaryMask::from_ascii("#.#\n#.#").unwrap();
    save_mask(&full, g.join("a.pgm")).unwrap();
    save_mask(&half, p.join("a.pgm")).unwrap();
    save_mask(&full, g.join("b.pgm")).unwrap();
    save_mask(&full, p.join("b.pgm")).unwrap();
    let out = dir.path().join("m.csv");
    let o = tubetopo(&[
        "metrics",
        "--pred",
        p.to_str().unwrap(),
        "--gt",
        g.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out).unwrap();
    assert!(csv.contains("\na,80.00,"), "{csv}");
    assert!(csv.contains("\nb,100.00,100.00,0.00,0.00\n"), "{csv}");
    assert!(csv.contains("\nmean(per-image),90.00,"), "{csv}");
}

#[test]
fn usage_errors_exit_with_one() {
    let o = tubetopo(&["topology", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(tubetopo(&["nonsense"]).status.code(), Some(1));
    assert_eq!(tubetopo(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_with_two() {
    let o = tubetopo(&["topology", "/no/such/mask.pgm"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    assert!(
        err.starts_with("error: ") && err.trim_end().lines().count() == 1,
        "{err}"
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, "{\"unknown\": 1}").unwrap();
    let r = ring(dir.path());
    assert_eq!(
        tubetopo(&["--config", cfg.to_str().unwrap(), "topology", &r])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = tubetopo(&[
            "synth",
            "--out",
            d.path().to_str().unwrap(),
            "--count",
            "2",
            "--seed",
            "3",
            "--width",
            "64",
            "--height",
            "64",
            "--radius",
            "1.5",
            "--perturb",
            "disconnect",
            "--perturb",
            "hole",
        ]);
        assert!(o.status.success(), "{o:?}");
    }
    let names = [
        "synth.jsonl",
        "0000_img.pgm",
        "0000_gt.pgm",
        "0000_bad0.pgm",
        "0001_bad1.pgm",
    ];
    for n in names {
        assert_eq!(
            fs::read(a.path().join(n)).unwrap(),
            fs::read(b.path().join(n)).unwrap(),
            "{n}"
        );
    }
    let manifest = fs::read_to_string(a.path().join("synth.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    assert!(!manifest.contains(a.path().to_str().unwrap()));
}

#[test]
fn taskgen_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let o = tubetopo(&[
        "taskgen",
        "--out",
        out.to_str().unwrap(),
        "--train-per-kind",
        "2",
        "--seed",
        "1",
        "--width",
        "64",
        "--height",
        "64",
        "--radius",
        "1.5",
        "--depth",
        "3",
    ]);
    assert!(o.status.success(), "{o:?}");
    let manifest = out.join("manifest.jsonl");
    let o = tubetopo(&["taskgen", "--verify", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("\"total\": 10"));
    let text = fs::read_to_string(&manifest).unwrap();
    let tampered = text.replacen("\"answer\":\"yes\"", "\"answer\":\"no\"", 1).replacen(
        "\"answer\":\"good\"",
        "\"answer\":\"poor\"",
        1,
    );
    assert_ne!(tampered, text);
    fs::write(&manifest, tampered).unwrap();
    assert_eq!(
        tubetopo(&["taskgen", "--verify", manifest.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn train_then_refine() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model.json");
    let o = tubetopo(&[
        "train",
        "--synth",
        "2",
        "--steps",
        "3",
        "--hidden",
        "4",
        "--no-adaptive",
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("model.loss.csv").exists());
    let ckpt_text = fs::read_to_string(&ckpt).unwrap();
    assert!(ckpt_text.contains("\"lambda\":0.0"));
    assert!(!ckpt_text.contains(dir.path().to_str().unwrap()));
    let csv = dir.path().join("refined.csv");
    let masks = dir.path().join("masks");
    let o = tubetopo(&[
        "refine",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--synth",
        "2",
        "--steps",
        "2",
        "--out",
        csv.to_str().unwrap(),
        "--masks",
        masks.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let summary = stdout(&o);
    assert!(summary.starts_with("sample,dice,cldice,beta0_num,beta0_mat\ninput,"));
    assert!(summary.contains("\nrefined,"));
    assert!(masks.join("refined_0001.pgm").exists());
    assert!(fs::read_to_string(csv).unwrap().contains("\npooled,"));
    let missing = tubetopo(&["refine", "--checkpoint", "/no/ckpt.json", "--synth", "1"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(
        tubetopo(&["train", "--out", ckpt.to_str().unwrap()]).status.code(),
        Some(1)
    );
}
