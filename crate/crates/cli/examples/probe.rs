use lplab_cli::parse_config;
use lplab_genmod::load_model;
use lplab_policy::{train_em, EmConfig};
use lplab_substrate::Rng;

fn main() {
    let seed: u64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let text = std::fs::read_to_string("/tmp/bench/wide.cfg").unwrap();
    let cfg = parse_config(&text).unwrap();
    let (model, _) = load_model(std::path::Path::new("/tmp/bench/run/models/vae-3-2.5.lplb")).unwrap();
    let mut arm = cfg.arm.clone();
    arm.workspace.radius_min = 1.1;
    arm.workspace.radius_max = 1.5;
    arm.workspace.angle_span = 0.4;
    arm.workspace.orientation_span = 0.6;
    let em = EmConfig { e_iters: 40, ..EmConfig::default() };
    let rng = Rng::new(seed);
    let (_p, _v, curve) = train_em(&model, &arm, &em, &rng).unwrap();
    for row in curve.rows.iter().step_by(25) {
        println!("seed {seed} iter {} mean {:.3} succ {:.3}", row.iteration, row.mean_reward, row.success_rate);
    }
    let last = curve.rows.last().unwrap();
    let best_succ = curve.rows.iter().map(|r| r.success_rate).fold(0.0, f64::max);
    println!("seed {seed} final mean {:.3} succ {:.3} | best_succ {:.3}", last.mean_reward, last.success_rate, best_succ);
}
