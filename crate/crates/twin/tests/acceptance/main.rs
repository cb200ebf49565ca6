//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! `cargo test --test acceptance -- 2 5` runs only criteria 2 and 5.

#[path = "../common/mod.rs"]
mod common;

mod autodiff;
mod graph;
mod omics;
mod physio;
mod pipeline;
mod rollout;
mod service;
mod sweep;
mod wgan;

use std::time::Instant;

/// `Ok(detail)` on pass, `Err(detail)` on failure.
pub type Outcome = Result<String, String>;

/// Fails the enclosing check with a formatted message unless `cond` holds.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Turns any displayable error into a check failure.
pub fn fail<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{what}: {e}")
}

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 9] = [
    Criterion { id: 1, name: "autodiff finite differences", run: autodiff::run },
    Criterion { id: 2, name: "graph-network block", run: graph::run },
    Criterion { id: 3, name: "training configuration", run: pipeline::run },
    Criterion { id: 4, name: "rollout and uncertainty", run: rollout::run },
    Criterion { id: 5, name: "WGAN-GP", run: wgan::run },
    Criterion { id: 6, name: "conditional sweep", run: sweep::run },
    Criterion { id: 7, name: "omics pipeline", run: omics::run },
    Criterion { id: 8, name: "surrogate physiology", run: physio::run },
    Criterion { id: 9, name: "service", run: service::run },
];

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} {} ({secs:.1}s): {detail}", c.id, c.name);
    }
    if failed > 0 {
        eprintln!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
