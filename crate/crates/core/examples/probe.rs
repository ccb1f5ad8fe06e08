use necklace::generator::{all_splits, generate_instance};
use necklace::{evaluate, solve, SolverConfig};
use std::time::Instant;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let (d, n, k, count) = (args[0], args[1], args[2], args[3]);
    let cfg = SolverConfig::default();
    let mut fails = 0;
    let mut worst = 0.0f64;
    let t0 = Instant::now();
    let splits = all_splits(n * (k - 1), d);
    for seed in 0..count as u64 {
        let inst = generate_instance(seed, n, d, k, 8);
        let m = &splits[seed as usize % splits.len()];
        let t = Instant::now();
        match solve(&inst.measures, k, m, &cfg) {
            Ok(div) => {
                let r = evaluate(&div, &inst.measures).unwrap().norm();
                worst = worst.max(r);
            }
            Err(e) => {
                fails += 1;
                println!("seed {seed} m {m:?}: {e}");
            }
        }
        let el = t.elapsed().as_secs_f64();
        if el > 1.0 { println!("seed {seed} m {m:?} slow {el:.2}s"); }
    }
    println!("d={d} n={n} k={k}: fails {fails}/{count}, worst residual {worst:e}, {:.2}s", t0.elapsed().as_secs_f64());
}
