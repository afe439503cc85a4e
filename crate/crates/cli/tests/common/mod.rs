#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread::{self, JoinHandle};

use fluidlevel::ingest::write_pgm;
use fluidlevel::simulate::render_frame;
use fluidlevel::SceneConfig;
use image::{ImageBuffer, ImageFormat, Luma};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fluidlevel"));
    cmd.env_remove("RUST_LOG");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fluidlevel")
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn fluidlevel")
}

#[track_caller]
pub fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited by signal")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Renders one PGM per volume, named so directory order is input order.
pub fn write_frames(dir: &Path, scene: &SceneConfig, volumes: &[f64]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, &v) in volumes.iter().enumerate() {
        let frame = render_frame(scene, v).unwrap();
        std::fs::write(dir.join(format!("f{i:04}.pgm")), write_pgm(&frame)).unwrap();
    }
}

/// Frames rendered from per-frame scenes, for scripted disturbances.
pub fn write_scripted(dir: &Path, frames: &[(SceneConfig, f64)]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, (scene, v)) in frames.iter().enumerate() {
        let frame = render_frame(scene, *v).unwrap();
        std::fs::write(dir.join(format!("f{i:04}.pgm")), write_pgm(&frame)).unwrap();
    }
}

/// Sloshing after a dose: the moving surface acts as a transient lens, so
/// the spot alternately shrinks and swells while it smears into an ellipse.
pub fn slosh(frames: usize) -> Vec<(SceneConfig, f64)> {
    (0..frames)
        .map(|k| {
            let scene = SceneConfig {
                astigmatism_ratio: if k % 2 == 0 { 0.6 } else { 0.8 },
                astigmatism_angle: 0.7 * k as f64,
                ..prewetted()
            };
            (scene, if k % 2 == 0 { 0.55 } else { 2.55 })
        })
        .collect()
}

pub fn plateau(v: f64, frames: usize) -> Vec<(SceneConfig, f64)> {
    vec![(prewetted(), v); frames]
}

pub fn prewetted() -> SceneConfig {
    SceneConfig {
        prewetted: true,
        ..SceneConfig::default()
    }
}

pub fn jpeg(scene: &SceneConfig, v: f64) -> Vec<u8> {
    let frame = render_frame(scene, v).unwrap();
    let img: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(frame.width(), frame.height(), frame.pixels().to_vec()).unwrap();
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Jpeg).unwrap();
    out.into_inner()
}

/// Serves one multipart/x-mixed-replace response on loopback.
pub fn serve_mjpeg(parts: Vec<Vec<u8>>) -> (String, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let (mut sock, _) = listener.accept().unwrap();
        let mut req = Vec::new();
        let mut byte = [0u8; 1];
        while !req.ends_with(b"\r\n\r\n") && sock.read(&mut byte).unwrap_or(0) == 1 {
            req.push(byte[0]);
        }
        let mut body = b"HTTP/1.1 200 OK\r\nContent-Type: multipart/x-mixed-replace; boundary=frame\r\nConnection: close\r\n\r\n".to_vec();
        for part in &parts {
            body.extend_from_slice(
                format!(
                    "--frame\r\nContent-Type: image/jpeg\r\nContent-Length: {}\r\n\r\n",
                    part.len()
                )
                .as_bytes(),
            );
            body.extend_from_slice(part);
            body.extend_from_slice(b"\r\n");
        }
        let _ = sock.write_all(&body);
    });
    (format!("http://{addr}/video"), handle)
}

/// Simulated prewetted sweep calibrated into a p2v model; returns the model path.
pub fn calibrated_model(dir: &Path, start: f64, end: f64, steps: usize) -> PathBuf {
    let sweep = dir.join("sweep");
    let model = dir.join("model.json");
    let s = start.to_string();
    let e = end.to_string();
    let n = steps.to_string();
    ok(&run(&[
        "simulate",
        "--prewetted",
        "--start",
        &s,
        "--end",
        &e,
        "--steps",
        &n,
        "--out",
        p(&sweep),
    ]));
    ok(&run(&[
        "calibrate",
        "--input",
        p(&sweep.join("manifest.csv")),
        "--all-points",
        "--out",
        p(&model),
    ]));
    model
}

pub fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}
