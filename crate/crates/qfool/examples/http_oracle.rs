//! Attacking a model behind an HTTP endpoint.
//!
//! Spins up a toy label server on a local port — the kind of JSON API a
//! deployed classifier exposes — and runs the full attack against it. The
//! attacker side sees nothing but `POST {shape, values} → {"label": n}`.
//!
//! ```text
//! cargo run --example http_oracle
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use qfool::attack;
use qfool::oracle::{HttpOracle, HttpOracleConfig};
use qfool::{AttackConfig, Domain, Point, Shape};

/// Serves `{"label": 1}` when the mean input exceeds 0.6, else `{"label": 0}`,
/// one request per connection, forever.
fn serve(listener: TcpListener) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        // Each request is tiny; handling them serially keeps the toy simple.
        if let Err(e) = handle(stream) {
            eprintln!("server: dropped a request: {e}");
        }
    }
}

fn handle(stream: TcpStream) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream);
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break; // end of headers
        }
        if let Some(rest) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = rest.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let values: Vec<f64> = request["values"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
        .unwrap_or_default();
    let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
    let label = i64::from(mean > 0.6);

    let payload = format!("{{\"label\": {label}}}");
    let response = format!(
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let mut stream = reader.into_inner();
    stream.write_all(response.as_bytes())?;
    stream.flush()
}

fn main() {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind a local port");
    let addr = listener.local_addr().expect("port assigned");
    thread::spawn(move || serve(listener));

    let shape = Shape::new(4, 4, 1);
    let domain = Domain::unit(shape);
    let oracle = HttpOracle::new(
        format!("http://{addr}/label"),
        domain,
        HttpOracleConfig {
            timeout: Duration::from_secs(2),
            ..HttpOracleConfig::default()
        },
    );
    println!("toy label server listening on {addr}");

    // The server flips labels when the mean crosses 0.6; start well above it.
    let x0 = Point::new(shape, vec![0.8; shape.len()]);

    let mut config = AttackConfig::default();
    config.total_budget = 600;
    config.rng_seed = 2;
    let resolved = config.resolve(&domain).expect("valid config");

    let trace = attack::attack(&oracle, &x0, &resolved).expect("attack runs");

    // True distance from mean 0.8 to mean 0.6 is 0.2·√d.
    let optimal = 0.2 * (shape.len() as f64).sqrt();
    println!();
    println!("success        {}", trace.success);
    println!("queries        {} (each one an HTTP round trip)", trace.total_queries);
    println!("final ‖v‖₂     {:.4}", trace.final_l2);
    println!("optimal ‖v‖₂   {optimal:.4}");
}
