#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use chaosforge::io::write_series;
use chaosforge::series::{MultivariateSeries, Role};
use chaosforge::systems::{integrate_vdp, OdeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Outcome {
    pub code: i32,
    pub stderr: String,
}

/// Run the binary with a fixed worker count.
pub fn run(args: &[&str], workers: usize) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_chaosforge"))
        .args(args)
        .env("CHAOSFORGE_WORKERS", workers.to_string())
        .output()
        .expect("binary runs");
    Outcome { code: out.status.code().unwrap_or(-1), stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

pub fn ok(args: &[&str], workers: usize) {
    let o = run(args, workers);
    assert_eq!(o.code, 0, "{args:?}: {}", o.stderr);
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn write(path: &Path, series: &MultivariateSeries) {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    let mut buf = Vec::new();
    write_series(&mut buf, series, 0.0).unwrap();
    fs::write(path, buf).unwrap();
}

pub fn obs(channels: Vec<Vec<f64>>) -> MultivariateSeries {
    MultivariateSeries::from_observations(channels).unwrap()
}

/// Two sources of short series: white noise, random walks, sines.
pub fn toy_corpus(root: &Path) -> Vec<PathBuf> {
    let mut g = ChaCha8Rng::seed_from_u64(3);
    let mut files = Vec::new();
    for (source, kinds) in [("clinic", [0usize, 0, 0, 0, 1, 2]), ("lab", [1, 1, 2, 2, 2, 0])] {
        for (i, &kind) in kinds.iter().enumerate() {
            let noise: Vec<f64> = (0..400).map(|_| g.random::<f64>() - 0.5).collect();
            let x: Vec<f64> = match kind {
                0 => noise,
                1 => noise
                    .iter()
                    .scan(0.0, |acc, v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect(),
                _ => (0..400).map(|t| (t as f64 * 0.2).sin() + 0.05 * noise[t]).collect(),
            };
            let path = root.join(source).join(format!("s{i}.csv"));
            write(&path, &obs(vec![x]));
            files.push(path);
        }
    }
    files
}

/// Observation follows the commanded action of each patch: a sine cycle
/// for +1, a ramp for -1.
pub fn controlled(actions: &[f64], p: usize) -> MultivariateSeries {
    let mut y = Vec::new();
    let mut u = Vec::new();
    for &a in actions {
        for k in 0..p {
            let t = k as f64 / p as f64;
            y.push(if a > 0.0 { (2.0 * std::f64::consts::PI * t).sin() } else { t });
            u.push(a);
        }
    }
    MultivariateSeries::new(vec!["y".into(), "u".into()], vec![Role::Observation, Role::Action], vec![y, u], 1.0)
        .unwrap()
}

pub fn random_actions(n: usize, seed: u64) -> Vec<f64> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| if g.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Van der Pol run split into context and truth halves.
pub fn vdp_split(a: f64, half: usize) -> (MultivariateSeries, MultivariateSeries) {
    let mut spec = OdeSpec::van_der_pol(a);
    spec.steps = 2 * half;
    let full = integrate_vdp(&spec).unwrap();
    (full.slice(0, half).unwrap(), full.slice(half, 2 * half).unwrap())
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file under `dir`, relative path and bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
