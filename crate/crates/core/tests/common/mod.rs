#![allow(dead_code)]

use nalgebra::DMatrix;
use quasitherm::{ProbabilityVector, RateMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rates `(a..f)` uniform on [0, 1).
pub fn random_abcdef(rng: &mut impl Rng) -> [f64; 6] {
    std::array::from_fn(|_| rng.gen::<f64>())
}

pub fn random_rates3(rng: &mut impl Rng) -> RateMatrix {
    RateMatrix::from_abcdef(random_abcdef(rng)).unwrap()
}

/// `n`-state rates with off-diagonal entries uniform on [0, 1).
pub fn random_rates(rng: &mut impl Rng, n: usize) -> RateMatrix {
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.gen::<f64>() });
    RateMatrix::from_matrix(m).unwrap()
}

pub fn random_symmetric_rates(rng: &mut impl Rng, n: usize) -> RateMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.gen::<f64>();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    RateMatrix::from_matrix(m).unwrap()
}

/// Symmetric rates plus random directed cycles through all states: in-rate
/// equals out-rate for every state, without being symmetric.
pub fn random_doubly_stochastic_rates(rng: &mut impl Rng, n: usize) -> RateMatrix {
    let mut m = random_symmetric_rates(rng, n).matrix().clone();
    for _ in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let flow = rng.gen::<f64>();
        for k in 0..n {
            let (src, dest) = (order[k], order[(k + 1) % n]);
            m[(dest, src)] += flow;
        }
    }
    RateMatrix::from_matrix(m).unwrap()
}

/// Uniform on the simplex.
pub fn random_simplex(rng: &mut impl Rng, n: usize) -> ProbabilityVector {
    let x: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = x.iter().sum();
    let mut p: Vec<f64> = x.iter().map(|v| v / s).collect();
    let drift: f64 = 1.0 - p.iter().sum::<f64>();
    p[0] += drift;
    ProbabilityVector::new(p).unwrap()
}

pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// `(expected output file, CLI arguments)`; `{}` in an argument is replaced
/// by the golden directory.
pub const GOLDEN_CASES: &[(&str, &[&str])] = &[
    ("validate.json", &["validate", "--rates", "{}/rates_123456.json"]),
    ("analyze_cyclic.json", &["analyze", "--rates", "{}/rates_cyclic.json"]),
    ("decompose_closed.json", &["decompose", "--rates", "{}/rates_123456.json"]),
    ("decompose_numeric3.json", &["decompose", "--rates", "{}/rates_123456.json", "--method", "numeric"]),
    ("decompose_two_state.json", &["decompose", "--rates", "{}/rates_two_state.json"]),
    ("decompose_four_state.json", &["decompose", "--rates", "{}/rates_four_state.json"]),
    (
        "simulate_cyclic.csv",
        &["simulate", "--rates", "{}/rates_cyclic.json", "--p0", "1,0,0", "--t-end", "2", "--steps", "20", "--monitor"],
    ),
    (
        "simulate_two_state_rk4.csv",
        &["simulate", "--rates", "{}/rates_two_state.json", "--p0", "1,0", "--t-end", "1", "--steps", "10", "--method", "rk4"],
    ),
    ("classify_cyclic.json", &["classify", "--rates", "{}/rates_cyclic.json"]),
    ("classify_123456.json", &["classify", "--rates", "{}/rates_123456.json"]),
    ("sweep.csv", &["sweep", "--rates", "{}/rates_cyclic.json", "--vary", "e:0:2:11", "--vary", "c:0:2:11"]),
    ("sweep.csv", &["sweep", "--config", "{}/sweep_config.json"]),
    (
        "yd_curve.csv",
        &["yd", "curve", "--a1", "1", "--f1", "1", "--d", "1", "--e", "1", "--k-min", "0", "--k-max", "4", "--steps", "9"],
    ),
    ("yd_optimal.json", &["yd", "optimal", "--a1", "1", "--f1", "1", "--d", "1", "--e", "1"]),
    ("yd_check.json", &["yd", "check", "--a1", "1", "--f1", "5.82842712474619", "--d", "1", "--e", "1"]),
];

pub fn golden_args(args: &[&str]) -> Vec<String> {
    let dir = golden_dir();
    std::iter::once("quasitherm".to_string())
        .chain(args.iter().map(|a| a.replace("{}", dir.to_str().unwrap())))
        .collect()
}

/// Run the CLI in-process; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[String]) -> (i32, Vec<u8>, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = quasitherm::cli::run(args.iter().cloned(), &mut out, &mut err);
    (code, out, String::from_utf8(err).unwrap())
}
