// scratch probe: criterion-7 instance tuning (deleted before finishing)
use qsubgrad::algorithm::{default_checkpoints, run, Mode};
use qsubgrad::config::{ExperimentConfig, ScheduleSpec};
use qsubgrad::experiment::build_instance;

fn main() {
    for (points, radius) in [(15usize, 0.6f64), (25, 0.7), (25, 0.8)] {
        let mut config = ExperimentConfig::default();
        config.n = 20;
        config.d = 5;
        config.radius = radius;
        config.points_per_node = Some(points);
        config.seeds = vec![0];
        config.ref_iterations = 300_000;
        config.ref_step_scale = 0.05;

        for bits in [4u32, 10] {
            let inst = build_instance(&config, bits).unwrap();
            let mut problem = inst.problem;
            let reference = problem
                .solve_reference(config.ref_iterations, config.ref_step_scale)
                .unwrap();
            let sigma2 = inst.mixing.second_singular_value().unwrap();
            let mu = problem.min_strong_convexity();
            let schedule = ScheduleSpec::StronglyConvex { a: None, b: None }
                .resolve(mu, sigma2)
                .unwrap();
            println!(
                "== m={points} radius={radius} bits={bits} f*={:.3} sigma2={sigma2:.4} mu={mu:.4} a={:.2} b={:.2}",
                reference.f_star,
                1.0 / mu,
                1.0 / (1.0 - sigma2)
            );
            let rounds = 100_000u64;
            let out = run(
                &problem,
                &inst.mixing,
                &schedule,
                Mode::Quantized,
                rounds,
                7,
                &default_checkpoints(rounds),
            )
            .unwrap();
            for row in &out.rows {
                if row.round >= 1024 {
                    println!(
                        "   k={:>7} rel_max={:>9.5} consensus={:>9.5}",
                        row.round,
                        row.gap_max.unwrap() / reference.f_star,
                        row.consensus_frobenius,
                    );
                }
            }
        }
    }
}
