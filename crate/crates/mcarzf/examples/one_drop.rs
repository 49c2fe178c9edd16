//! Time one drop of the default 7-cell scenario and print per-scheme rates.
//!
//! `cargo run --release --example one_drop -- [antennas] [rho_db] [trials]`

use std::time::Instant;

use mcarzf::scenario::db_to_linear;
use mcarzf::sim::{asymptotic_maxmin, drop_seeds, evaluate_drop, DropContext, SchemeId};
use mcarzf::SystemConfig;

fn main() -> mcarzf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = SystemConfig::default();
    if let Some(n) = args.first() {
        cfg.antennas = n.parse().expect("antennas");
    }
    if let Some(r) = args.get(1) {
        cfg.rho_dl = db_to_linear(r.parse().expect("rho_db"));
        cfg.rho_tr = cfg.rho_dl;
    }
    if let Some(t) = args.get(2) {
        cfg.mc_trials = t.parse().expect("trials");
    }
    let (geo, mc) = drop_seeds(cfg.seed, 0);
    let t0 = Instant::now();
    let ctx = DropContext::generate(&cfg, geo)?;
    println!("context {:.2?}", t0.elapsed());
    let t0 = Instant::now();
    let d = asymptotic_maxmin(&ctx)?;
    println!(
        "asymptotic max-min {:.2?}, {} iterations, min sinr {:.3}",
        t0.elapsed(),
        d.solution.iterations,
        d.solution.ul_sinr.iter().copied().fold(f64::INFINITY, f64::min)
    );
    let t0 = Instant::now();
    for (s, r) in evaluate_drop(&ctx, &SchemeId::ALL, mc) {
        match r {
            Ok(x) => println!("{s:>16}: {:.3}", x.min_rate),
            Err(e) => println!("{s:>16}: failed ({e})"),
        }
    }
    println!("all schemes {:.2?}", t0.elapsed());
    Ok(())
}
