//! Keeps one core busy for a number of seconds, then exits with an optional
//! status. A predictable workload for `mlte measure`.
//!
//! Usage: mlte-spin [SECONDS] [EXIT_CODE]

use std::hint::black_box;
use std::process::ExitCode;
use std::time::{Duration, Instant};

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let seconds: f64 = match args.next().map(|s| s.parse()) {
        None => 1.0,
        Some(Ok(s)) if s >= 0.0 && f64::is_finite(s) => s,
        Some(_) => {
            eprintln!("usage: mlte-spin [SECONDS] [EXIT_CODE]");
            return ExitCode::from(2);
        }
    };
    let status: u8 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let end = Instant::now() + Duration::from_secs_f64(seconds);
    let mut x: u64 = 0;
    while Instant::now() < end {
        for _ in 0..10_000 {
            x = black_box(x.wrapping_mul(6364136223846793005).wrapping_add(1));
        }
    }
    black_box(x);
    ExitCode::from(status)
}
