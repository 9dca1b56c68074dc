// scratch probe: gap trajectory on small instances (deleted before finishing)
use qsubgrad::algorithm::{run, default_checkpoints, Mode, StepSchedule};
use qsubgrad::config::ExperimentConfig;
use qsubgrad::experiment::build_instance;

fn main() {
    let mut config = ExperimentConfig::default();
    config.n = 8;
    config.d = 2;
    config.radius = 0.7;
    config.points_per_node = Some(4);
    config.seeds = vec![3];
    config.ref_iterations = 200_000;
    config.ref_step_scale = 0.05;

    let inst = build_instance(&config, 16).unwrap();
    let mut problem = inst.problem;
    let reference = problem.solve_reference(config.ref_iterations, config.ref_step_scale).unwrap();
    let sigma2 = inst.mixing.second_singular_value().unwrap();
    println!("f_star={} sigma2={}", reference.f_star, sigma2);

    let rounds = 200_000u64;
    let out = run(&problem, &inst.mixing, &StepSchedule::convex_rate(), Mode::Quantized, rounds, 2, &default_checkpoints(rounds)).unwrap();
    for row in &out.rows {
        println!("k={:>8} gap_max={:>12.5} rel={:>10.5} consensus={:>10.5}",
            row.round,
            row.gap_max.unwrap(),
            row.gap_max.unwrap() / reference.f_star,
            row.consensus_frobenius);
    }
}
