//! Times one loss + gradient evaluation (one training epoch) at production
//! sizes for both execution backends.

use pinn_lab::network::{self, MlpConfig};
use pinn_lab::physics::{Backend, BurgersProblem, LossEvaluator};
use pinn_lab::sampler::{sample, SamplingMethod};
use std::time::Instant;

fn main() {
    let cfg = MlpConfig::default();
    let params = network::init(&cfg, 0).unwrap();
    let data = sample(SamplingMethod::Uniform, 0, 50, 50, 10000);

    for backend in [Backend::Dense, Backend::Tape] {
        let ev = LossEvaluator::new(&cfg, &BurgersProblem::default())
            .unwrap()
            .with_backend(backend);
        let _ = ev.loss_gradient(&params, &data).unwrap();
        let n = if backend == Backend::Dense { 10 } else { 3 };
        let t0 = Instant::now();
        for _ in 0..n {
            let _ = ev.loss_gradient(&params, &data).unwrap();
        }
        let per = t0.elapsed().as_secs_f64() / n as f64;
        println!(
            "{backend:?}: {:.1} ms/epoch -> {:.0} s for 5000 epochs",
            per * 1e3,
            per * 5000.0
        );
    }
}
