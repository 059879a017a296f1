//! Training and inference throughput of the reference network at batch 128.

use std::time::Instant;

use clood_core::ndnet::{AdamState, Network, NetworkSpec, Tensor, DEFAULT_LR};

fn main() {
    let mut net = Network::<f32>::init(NetworkSpec::reference(), 1).unwrap();
    let mut opt = AdamState::new(net.params(), DEFAULT_LR);
    let b = 128;
    let x = Tensor::from_vec(&[b, 32, 32, 1], (0..b * 1024).map(|i| (i % 17) as f32 / 17.0).collect()).unwrap();
    let labels: Vec<usize> = (0..b).map(|i| i % 10).collect();
    let t = Instant::now();
    let steps = 20;
    for _ in 0..steps {
        let (_, g) = net.loss_and_grad(&x, &labels).unwrap();
        opt.step(net.params_mut(), &g).unwrap();
    }
    let dt = t.elapsed().as_secs_f64();
    println!("{:.3} ms/image train", dt * 1e3 / (steps * b) as f64);
    let t = Instant::now();
    for _ in 0..steps {
        net.forward(&x, &[]).unwrap();
    }
    println!("{:.3} ms/image fwd", t.elapsed().as_secs_f64() * 1e3 / (steps * b) as f64);
}
