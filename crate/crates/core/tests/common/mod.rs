//! Shared helpers for the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::PathBuf;

use bodba::generators::{generate, GeneratorKind, GeneratorSpec, PERMUTATION};
use bodba::{LowDimPoint, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const FIXTURE_SHAPE: Shape = Shape::new(8, 8, 3);
pub const FIXTURE_GABOR_SEED: u64 = 7;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn unhex(s: &str) -> f64 {
    f64::from_bits(u64::from_str_radix(s, 16).expect("hex f64"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeneratorCase {
    pub point: Vec<String>,
    pub values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeneratorFixture {
    pub generator: String,
    pub shape: [usize; 3],
    pub seed: u64,
    pub cases: Vec<GeneratorCase>,
}

pub fn fixture_spec(kind: GeneratorKind) -> GeneratorSpec {
    GeneratorSpec::new(kind, FIXTURE_SHAPE).unwrap().with_seed(FIXTURE_GABOR_SEED)
}

fn fixture_points(kind: GeneratorKind) -> Vec<LowDimPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1 + kind.input_dim() as u64 + kind.name().len() as u64);
    (0..3)
        .map(|_| LowDimPoint::new((0..kind.input_dim()).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect()
}

pub fn build_fixture(kind: GeneratorKind) -> GeneratorFixture {
    let spec = fixture_spec(kind);
    let cases = fixture_points(kind)
        .into_iter()
        .map(|p| {
            let out = generate(&spec, &p).unwrap();
            GeneratorCase {
                point: p.coords().iter().copied().map(hex).collect(),
                values: out.values().iter().copied().map(hex).collect(),
            }
        })
        .collect();
    GeneratorFixture {
        generator: kind.name().into(),
        shape: [FIXTURE_SHAPE.height, FIXTURE_SHAPE.width, FIXTURE_SHAPE.channels],
        seed: FIXTURE_GABOR_SEED,
        cases,
    }
}

pub fn fixture_path(kind: GeneratorKind) -> PathBuf {
    fixture_dir().join("generators").join(format!("{}.json", kind.name()))
}

/// Writes the fixture when `UPDATE_FIXTURES=1`, otherwise reads it.
pub fn load_fixture(kind: GeneratorKind) -> GeneratorFixture {
    let path = fixture_path(kind);
    if std::env::var("UPDATE_FIXTURES").as_deref() == Ok("1") {
        let fx = build_fixture(kind);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&fx).unwrap()).unwrap();
        return fx;
    }
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// Number of elements that differ bit-for-bit from the fixture, per case.
pub fn fixture_mismatches(kind: GeneratorKind) -> Vec<usize> {
    let fx = load_fixture(kind);
    let spec = fixture_spec(kind);
    fx.cases
        .iter()
        .map(|case| {
            let p = LowDimPoint::new(case.point.iter().map(|s| unhex(s)).collect()).unwrap();
            let out = generate(&spec, &p).unwrap();
            assert_eq!(out.values().len(), case.values.len());
            out.values()
                .iter()
                .zip(&case.values)
                .filter(|(v, s)| v.to_bits() != unhex(s).to_bits())
                .count()
        })
        .collect()
}

/// Straight-line lattice Perlin noise, written from the textbook recipe:
/// hash the four cell corners, take the dot product of each corner's
/// diagonal gradient with the offset to that corner, and blend with the
/// quintic fade curve.
pub fn reference_perlin(lx: f64, ly: f64, phi: f64, h: usize, w: usize) -> Vec<f64> {
    let p = |i: i64| i64::from(PERMUTATION[(i & 255) as usize]);
    let gradients = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];
    let smooth = |t: f64| 6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3);
    let mut out = Vec::with_capacity(h * w);
    for row in 0..h {
        for col in 0..w {
            let (x, y) = (col as f64 / lx, row as f64 / ly);
            let (cx, cy) = (x.floor() as i64, y.floor() as i64);
            let (fx, fy) = (x - cx as f64, y - cy as f64);
            let mut n = 0.0;
            for (dx, dy) in [(0i64, 0i64), (1, 0), (0, 1), (1, 1)] {
                let hash = p(p(cx + dx) + cy + dy);
                let (gx, gy) = gradients[(hash & 3) as usize];
                let (ox, oy) = (fx - dx as f64, fy - dy as f64);
                let wx = if dx == 0 { 1.0 - smooth(fx) } else { smooth(fx) };
                let wy = if dy == 0 { 1.0 - smooth(fy) } else { smooth(fy) };
                n += wx * wy * (gx * ox + gy * oy);
            }
            out.push((2.0 * std::f64::consts::PI * phi * n).sin());
        }
    }
    out
}

/// Two-pixel dataset on the halfspace `x[0] > 0.5`: ten points, four of
/// which sit within 0.06 below the boundary.
pub fn uar_fixture() -> (bodba::oracles::HalfspaceOracle, Vec<(bodba::Sample, usize)>) {
    let shape = Shape::new(1, 2, 1);
    let oracle = bodba::oracles::HalfspaceOracle::axis(shape, 0, 0.5).unwrap();
    let data = [0.05, 0.2, 0.3, 0.41, 0.45, 0.47, 0.48, 0.49, 0.7, 0.9]
        .iter()
        .map(|&v| {
            let x = bodba::Sample::new(vec![v, 0.3], shape).unwrap();
            (x, usize::from(v > 0.5))
        })
        .collect();
    (oracle, data)
}

/// Serves `handler(method, path, body) -> (status, body)` on a loopback
/// port until the process exits; returns the base URL.
pub fn spawn_server<F>(handler: F) -> String
where
    F: Fn(&str, &str, &str) -> (u16, String) + Send + 'static,
{
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            let _ = std::io::Read::read_to_string(req.as_reader(), &mut body);
            let (status, text) = handler(req.method().as_str(), req.url(), &body);
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
            let resp = tiny_http::Response::from_string(text).with_status_code(status).with_header(header);
            let _ = req.respond(resp);
        }
    });
    format!("http://127.0.0.1:{port}")
}

/// Wire-protocol server in front of an in-process oracle.
pub fn serve_oracle<O: bodba::oracles::Oracle + 'static>(oracle: O) -> String {
    spawn_server(move |method, path, body| match (method, path) {
        ("GET", "/health") => {
            let s = oracle.input_shape();
            let health = bodba::oracles::HealthResponse {
                status: "ok".into(),
                shape: [s.height, s.width, s.channels],
                classes: oracle.num_classes(),
            };
            (200, serde_json::to_string(&health).unwrap())
        }
        ("POST", "/classify") => {
            let req: bodba::oracles::ClassifyRequest = match serde_json::from_str(body) {
                Ok(r) => r,
                Err(e) => return (400, format!("{{\"error\":\"{e}\"}}")),
            };
            let [h, w, c] = req.shape;
            let sample = match bodba::Sample::new(req.sample, Shape::new(h, w, c)) {
                Ok(s) => s,
                Err(_) => return (400, "{\"error\":\"bad sample\"}".into()),
            };
            match oracle.classify(&sample) {
                Ok(label) => (200, format!("{{\"label\":{label}}}")),
                Err(_) => (400, "{\"error\":\"shape mismatch\"}".into()),
            }
        }
        _ => (404, "{}".into()),
    })
}
