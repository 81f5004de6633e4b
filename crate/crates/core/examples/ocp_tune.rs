//! Solver diagnostics: run one traced solve or a convergence-rate batch.
//!
//! ```text
//! cargo run --release -p gcnet-core --example ocp_tune -- trace -1,-0.5,0,0,0,0
//! cargo run --release -p gcnet-core --example ocp_tune -- batch 100
//! ```

use gcnet_core::dynamics::{PlanarState, QuadParams};
use gcnet_core::ocp::{solve, transcribe, verify, OcpConfig, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn sample(rng: &mut ChaCha8Rng) -> PlanarState {
    PlanarState::new(
        rng.gen_range(-10.0..10.0),
        rng.gen_range(-10.0..10.0),
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-std::f64::consts::FRAC_PI_3..std::f64::consts::FRAC_PI_3),
        rng.gen_range(-0.01..0.01),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("batch");
    let p = QuadParams::default();

    match mode {
        "trace" => {
            let parts: Vec<f64> = args[2].split(',').map(|v| v.parse().unwrap()).collect();
            let x0 = PlanarState::new(parts[0], parts[1], parts[2], parts[3], parts[4], parts[5]);
            let nodes: usize = args.get(3).map(|v| v.parse().unwrap()).unwrap_or(81);
            let mut cfg = OcpConfig { x0, num_nodes: nodes, ..Default::default() };
            if let Ok(v) = std::env::var("FIXTF") { let tf: f64 = v.parse().unwrap(); cfg.tf_bounds = (tf, tf); }
            let prob = transcribe(&cfg, &p).unwrap();
            let mut opts = SolveOptions { verbose: true, ..Default::default() };
            if let Ok(v) = std::env::var("INNER") { opts.max_inner = v.parse().unwrap(); }
            if let Ok(v) = std::env::var("MUPOL") { opts.mu_polish = v.parse().unwrap(); }
            if let Ok(v) = std::env::var("MU0") { opts.mu0 = v.parse().unwrap(); }
            let t0 = Instant::now();
            match solve(&prob, None, &opts) {
                Ok(sol) => {
                    let rep = verify(&sol, &p, cfg.epsilon);
                    println!(
                        "converged tf {:.4} J {:.5} defect {:.2e} in {:?}; verify pos {:.2e} vel {:.2e} cost_rel {:.2e}",
                        sol.tf, sol.cost, sol.defect_norm, t0.elapsed(),
                        rep.terminal_pos_err, rep.terminal_vel_err, rep.cost_rel_err
                    );
                }
                Err(e) => println!("FAILED after {:?}: {e}", t0.elapsed()),
            }
        }
        "batch" => {
            let n: usize = args.get(2).map(|v| v.parse().unwrap()).unwrap_or(100);
            let nodes: usize = args.get(3).map(|v| v.parse().unwrap()).unwrap_or(81);
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut ok = 0;
            let mut times = Vec::new();
            let mut worst: Option<(PlanarState, String)> = None;
            for i in 0..n {
                let x0 = sample(&mut rng);
                let cfg = OcpConfig { x0, num_nodes: nodes, ..Default::default() };
                let prob = transcribe(&cfg, &p).unwrap();
                let t0 = Instant::now();
                let res = solve(&prob, None, &SolveOptions::default());
                let dt = t0.elapsed().as_secs_f64();
                times.push(dt);
                match res {
                    Ok(sol) => {
                        ok += 1;
                        let rep = verify(&sol, &p, cfg.epsilon);
                        println!(
                            "{i:3} ok  tf {:7.3} J {:8.4} defect {:.1e} t {:6.2}s pos {:.1e} vel {:.1e}",
                            sol.tf, sol.cost, sol.defect_norm, dt, rep.terminal_pos_err, rep.terminal_vel_err
                        );
                    }
                    Err(e) => {
                        println!("{i:3} FAIL t {dt:6.2}s x0 {x0:?}");
                        worst = Some((x0, format!("{e:.60}")));
                        let _ = &worst;
                        let _ = e;
                    }
                }
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let total: f64 = times.iter().sum();
            println!(
                "\nconverged {ok}/{n} ({:.1}%)  median {:.2}s  p90 {:.2}s  max {:.2}s  total {:.1}s",
                100.0 * ok as f64 / n as f64,
                times[times.len() / 2],
                times[times.len() * 9 / 10],
                times[times.len() - 1],
                total
            );
        }
        other => eprintln!("unknown mode {other}"),
    }
}
