mod common;

use common::*;
use fluidlevel::simulate::{region_of, Region};
use fluidlevel::SceneConfig;

#[test]
fn simulate_writes_one_frame_per_step_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    ok(&run(&[
        "simulate",
        "--start",
        "0.2",
        "--end",
        "3.0",
        "--steps",
        "57",
        "--out",
        p(&out),
    ]));

    let frames = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "pgm")
        })
        .count();
    assert_eq!(frames, 57);
    let manifest = std::fs::read_to_string(out.join("manifest.csv")).unwrap();
    let mut lines = manifest.lines();
    assert_eq!(
        lines.next(),
        Some("volume_ml,frame_path,expected_perimeter_px")
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 57);
    assert!(rows[0].starts_with("0.2,frame_0000.pgm,"));
    assert!(rows[56].starts_with("3,frame_0056.pgm,") || rows[56].starts_with("3.0,"));
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        ok(&run(&[
            "--seed",
            seed,
            "simulate",
            "--noise",
            "4",
            "--occlusion",
            "0.05",
            "--start",
            "0.5",
            "--end",
            "2.0",
            "--steps",
            "4",
            "--out",
            p(&dir),
        ]));
        let mut files: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| std::fs::read(f).unwrap())
            .collect::<Vec<_>>()
    };
    let a = sweep("a", "7");
    let b = sweep("b", "7");
    let c = sweep("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn seed_flag_overrides_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"scene": {"seed": 3, "noise_sigma": 5.0}}"#).unwrap();
    let frame = |extra: &[&str], name: &str| {
        let dir = tmp.path().join(name);
        let mut args = vec!["--config", p(&cfg)];
        args.extend_from_slice(extra);
        args.extend([
            "simulate",
            "--start",
            "1",
            "--end",
            "1.5",
            "--steps",
            "2",
            "--out",
            p(&dir),
        ]);
        ok(&run(&args));
        std::fs::read(dir.join("frame_0000.pgm")).unwrap()
    };
    let from_file = frame(&[], "file");
    assert_eq!(frame(&["--seed", "3"], "same"), from_file);
    assert_ne!(frame(&["--seed", "4"], "other"), from_file);
}

#[test]
fn analyze_skips_frames_without_a_spot() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = tmp.path().join("sweep");
    ok(&run(&[
        "simulate",
        "--start",
        "0.1",
        "--end",
        "2.0",
        "--steps",
        "20",
        "--out",
        p(&sweep),
    ]));
    let csv = ok(&run(&[
        "analyze",
        "--source",
        &format!("dir:{}", p(&sweep)),
    ]));
    let rows = csv_rows(&csv);
    assert_eq!(
        rows[0],
        ["timestamp", "cx", "cy", "a", "b", "rotation", "perimeter"]
    );

    let profile = SceneConfig::default().meniscus;
    let wet = (0..20)
        .map(|i| 0.1 + 0.1 * i as f64)
        .filter(|&v| region_of(v, &profile) != Region::A)
        .count();
    assert_eq!(rows.len() - 1, wet);
    for r in &rows[1..] {
        assert_eq!(r.len(), 7);
        let perimeter: f64 = r[6].parse().unwrap();
        assert!(perimeter > 0.0);
    }
}

#[test]
fn analyze_reads_an_mjpeg_stream() {
    let scene = prewetted();
    let volumes = [0.8, 1.2, 1.6];
    let (url, server) = serve_mjpeg(volumes.iter().map(|&v| jpeg(&scene, v)).collect());
    let csv = ok(&run(&["analyze", "--source", &url]));
    server.join().unwrap();
    let rows = csv_rows(&csv);
    assert_eq!(
        rows[0],
        ["timestamp", "cx", "cy", "a", "b", "rotation", "perimeter"]
    );
    assert_eq!(rows.len(), 4);
    let perimeters: Vec<f64> = rows[1..].iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(perimeters.windows(2).all(|w| w[0] < w[1]), "{perimeters:?}");
}

#[test]
fn analyze_out_flag_beats_config_output() {
    let tmp = tempfile::tempdir().unwrap();
    write_frames(&tmp.path().join("frames"), &prewetted(), &[1.0, 1.5]);
    let cfg = tmp.path().join("run.json");
    let from_cfg = tmp.path().join("cfg.csv");
    let from_flag = tmp.path().join("flag.csv");
    std::fs::write(&cfg, format!(r#"{{"output": "{}"}}"#, p(&from_cfg))).unwrap();
    let src = format!("dir:{}", p(&tmp.path().join("frames")));

    ok(&run(&["--config", p(&cfg), "analyze", "--source", &src]));
    assert!(from_cfg.exists());
    std::fs::remove_file(&from_cfg).unwrap();
    ok(&run(&[
        "--config",
        p(&cfg),
        "analyze",
        "--source",
        &src,
        "--out",
        p(&from_flag),
    ]));
    assert!(from_flag.exists());
    assert!(!from_cfg.exists());
}
