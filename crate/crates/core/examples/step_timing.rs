//! Times Floquet steps on the baseline chain: `cargo run --release --example step_timing -- 17 200`.

use std::time::Instant;

use nested_ki::engine::{compile, floquet_step, haar_random_state};
use nested_ki::model::{build_preset, Fields, QubitLayout, TopologyPreset};
use nested_ki::rng;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(17);
    let steps: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let layout = QubitLayout::new(1, (n - 1) * 3 / 8, n - 1 - (n - 1) * 3 / 8).expect("layout");
    let config = build_preset(TopologyPreset::BaselineChain, layout, 1.0, 0.01, 0.5, Fields::dephasing()).unwrap();
    let t0 = Instant::now();
    let model = compile(&config).unwrap();
    let compile_time = t0.elapsed();
    let mut psi = haar_random_state(n, &mut rng::stream(1, &[]));
    let t1 = Instant::now();
    for _ in 0..steps {
        floquet_step(&mut psi, &model).unwrap();
    }
    let per_step = t1.elapsed().as_secs_f64() / steps as f64;
    println!("n = {n}: compile {compile_time:?}, {:.3} ms/step, norm drift {:.2e}", per_step * 1e3, (psi.norm() - 1.0).abs());
}
