use std::time::Instant;

fn main() {
    for &n in &[15usize, 60, 150] {
        let fleet = ((11 * n + 199) / 200 + 2).max(2);
        let seed = 10_000u64 + n as u64;
        let inst = elrp::instance::generate_instance(seed, n, 12, 100.0, fleet).unwrap();
        for temp in [-10.0, 10.0, 30.0] {
            let charging = elrp::soc::default_calibration(temp, 80.0);
            let cfg = elrp::bench::SolverConfig::default();
            for (name, algo) in [("sigalns", elrp::bench::Algorithm::Sigalns), ("tsmcws ", elrp::bench::Algorithm::Tsmcws)] {
                let t0 = Instant::now();
                match elrp::bench::solve_once(&inst, algo, &charging, 1, &cfg) {
                    Ok(s) => {
                        let clean = elrp::feasibility::check_solution(&inst, &charging, &s).is_clean();
                        println!("n={n:3} T={temp:5}: {name} {:6.2}s obj={:8.1} stations={} clean={}", t0.elapsed().as_secs_f64(), s.objective.total, s.opened.len(), clean);
                    }
                    Err(e) => println!("n={n:3} T={temp:5}: {name} INFEASIBLE: {e}"),
                }
            }
        }
    }
}
