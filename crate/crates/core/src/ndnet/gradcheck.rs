//! Central finite-difference verification of analytic gradients (64-bit).

use rand::Rng;

use crate::error::Result;
use crate::rng;

use super::layers::{self, ConvGeom};
use super::loss::softmax_xent;
use super::network::Network;
use super::tensor::Tensor;

/// Worst disagreement found by a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst: String,
    pub checked: usize,
}

impl GradCheck {
    fn new() -> Self {
        GradCheck {
            max_rel_err: 0.0,
            worst: String::new(),
            checked: 0,
        }
    }

    fn record(&mut self, what: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        let rel = rel_err(analytic, numeric);
        self.checked += 1;
        if rel > self.max_rel_err {
            self.max_rel_err = rel;
            self.worst = format!("{} (analytic {analytic:e}, numeric {numeric:e})", what());
        }
    }

    fn merge(mut self, other: GradCheck) -> GradCheck {
        self.checked += other.checked;
        if other.max_rel_err > self.max_rel_err {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst;
        }
        self
    }
}

/// `|a - n| / max(|a|, |n|, 1e-7)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn central<G: FnMut(&[f64]) -> f64>(x: &mut [f64], i: usize, h: f64, mut f: G) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let plus = f(x);
    x[i] = orig - h;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * h)
}

fn random_vec(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut r = rng::stream(seed);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-network check: mean cross-entropy w.r.t. every parameter
/// (or a strided subset when `stride > 1`).
pub fn check_network(
    net: &Network<f64>,
    x: &Tensor<f64>,
    labels: &[usize],
    h: f64,
    stride: usize,
) -> Result<GradCheck> {
    let (_, grads) = net.loss_and_grad(x, labels)?;
    let names: Vec<String> = net.named_params().map(|(n, _)| n).collect();
    let mut probe = net.clone();
    let mut report = GradCheck::new();
    for (ti, name) in names.iter().enumerate() {
        let n = probe.params()[ti].len();
        for i in (0..n).step_by(stride.max(1)) {
            let orig = probe.params()[ti].data()[i];
            let eval = |v: f64, p: &mut Network<f64>| -> Result<f64> {
                p.params_mut()[ti].data_mut()[i] = v;
                let (logits, _) = p.forward(x, &[])?;
                Ok(softmax_xent(&logits, labels)?.0)
            };
            let plus = eval(orig + h, &mut probe)?;
            let minus = eval(orig - h, &mut probe)?;
            probe.params_mut()[ti].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            report.record(|| format!("{name}[{i}]"), grads[ti].data()[i], numeric);
        }
    }
    Ok(report)
}

/// Convolution in isolation: loss `<r, conv(x)>` w.r.t. input, weight and bias.
pub fn check_conv_layer(seed: u64, h: f64) -> GradCheck {
    let g = ConvGeom {
        h: 6,
        w: 5,
        cin: 3,
        cout: 4,
        k: 3,
        pad: 1,
    };
    let batch = 2;
    let n_in = batch * g.h * g.w * g.cin;
    let n_out = batch * g.out_h() * g.out_w() * g.cout;
    let mut x = random_vec(rng::derive(seed, "x"), n_in, -1.0, 1.0);
    let mut w = random_vec(rng::derive(seed, "w"), g.patch_len() * g.cout, -0.5, 0.5);
    let mut b = random_vec(rng::derive(seed, "b"), g.cout, -0.5, 0.5);
    let r = random_vec(rng::derive(seed, "r"), n_out, -1.0, 1.0);
    let loss = |x: &[f64], w: &[f64], b: &[f64]| {
        let mut out = vec![0.0; n_out];
        layers::conv_forward(&g, x, w, b, &mut out);
        dot(&out, &r)
    };
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; b.len()];
    let mut gx = vec![0.0; x.len()];
    layers::conv_backward(&g, &x, &w, &r, &mut gw, &mut gb, Some(&mut gx));

    let mut rep = GradCheck::new();
    for i in 0..x.len() {
        let (wc, bc) = (w.clone(), b.clone());
        let num = central(&mut x, i, h, |x| loss(x, &wc, &bc));
        rep.record(|| format!("conv input[{i}]"), gx[i], num);
    }
    for i in 0..w.len() {
        let (xc, bc) = (x.clone(), b.clone());
        let num = central(&mut w, i, h, |w| loss(&xc, w, &bc));
        rep.record(|| format!("conv weight[{i}]"), gw[i], num);
    }
    for i in 0..b.len() {
        let (xc, wc) = (x.clone(), w.clone());
        let num = central(&mut b, i, h, |b| loss(&xc, &wc, b));
        rep.record(|| format!("conv bias[{i}]"), gb[i], num);
    }
    rep
}

pub fn check_dense_layer(seed: u64, h: f64) -> GradCheck {
    let (batch, inp, outd) = (3, 7, 5);
    let mut x = random_vec(rng::derive(seed, "x"), batch * inp, -1.0, 1.0);
    let mut w = random_vec(rng::derive(seed, "w"), inp * outd, -0.5, 0.5);
    let mut b = random_vec(rng::derive(seed, "b"), outd, -0.5, 0.5);
    let r = random_vec(rng::derive(seed, "r"), batch * outd, -1.0, 1.0);
    let loss = |x: &[f64], w: &[f64], b: &[f64]| {
        let mut out = vec![0.0; batch * outd];
        layers::dense_forward(inp, outd, x, w, b, &mut out);
        dot(&out, &r)
    };
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; b.len()];
    let mut gx = vec![0.0; x.len()];
    layers::dense_backward(inp, outd, &x, &w, &r, &mut gw, &mut gb, Some(&mut gx));
    let mut rep = GradCheck::new();
    for i in 0..x.len() {
        let (wc, bc) = (w.clone(), b.clone());
        let num = central(&mut x, i, h, |x| loss(x, &wc, &bc));
        rep.record(|| format!("dense input[{i}]"), gx[i], num);
    }
    for i in 0..w.len() {
        let (xc, bc) = (x.clone(), b.clone());
        let num = central(&mut w, i, h, |w| loss(&xc, w, &bc));
        rep.record(|| format!("dense weight[{i}]"), gw[i], num);
    }
    for i in 0..b.len() {
        let (xc, wc) = (x.clone(), w.clone());
        let num = central(&mut b, i, h, |b| loss(&xc, &wc, b));
        rep.record(|| format!("dense bias[{i}]"), gb[i], num);
    }
    rep
}

/// ReLU in isolation; inputs are kept at least 1e-3 away from the kink.
pub fn check_relu_layer(seed: u64, h: f64) -> GradCheck {
    let n = 40;
    let mut x: Vec<f64> = random_vec(rng::derive(seed, "x"), n, -1.0, 1.0)
        .into_iter()
        .map(|v| if v.abs() < 1e-3 { v + 2e-3 * v.signum().max(0.5) } else { v })
        .collect();
    let r = random_vec(rng::derive(seed, "r"), n, -1.0, 1.0);
    let loss = |x: &[f64]| {
        let mut o = x.to_vec();
        layers::relu_forward(&mut o);
        dot(&o, &r)
    };
    let mut out = x.clone();
    layers::relu_forward(&mut out);
    let mut g = r.clone();
    layers::relu_backward(&out, &mut g);
    let mut rep = GradCheck::new();
    for i in 0..n {
        let num = central(&mut x, i, h, loss);
        rep.record(|| format!("relu input[{i}]"), g[i], num);
    }
    rep
}

/// Max pooling in isolation on inputs with distinct window entries.
pub fn check_maxpool_layer(seed: u64, h: f64) -> GradCheck {
    let (batch, hh, ww, c) = (2, 4, 6, 3);
    let n = batch * hh * ww * c;
    // a shuffled ramp keeps every window's entries at least 0.01 apart
    let mut r0 = rng::stream(rng::derive(seed, "perm"));
    let mut x: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
    for i in (1..n).rev() {
        let j = r0.random_range(0..=i);
        x.swap(i, j);
    }
    let on = n / 4;
    let r = random_vec(rng::derive(seed, "r"), on, -1.0, 1.0);
    let loss = |x: &[f64]| {
        let mut o = vec![0.0; on];
        let mut a = vec![0u32; on];
        layers::maxpool_forward(hh, ww, c, x, &mut o, &mut a);
        dot(&o, &r)
    };
    let mut o = vec![0.0; on];
    let mut a = vec![0u32; on];
    layers::maxpool_forward(hh, ww, c, &x, &mut o, &mut a);
    let mut gx = vec![0.0; n];
    layers::maxpool_backward(&r, &a, &mut gx);
    let mut rep = GradCheck::new();
    for i in 0..n {
        let num = central(&mut x, i, h, loss);
        rep.record(|| format!("maxpool input[{i}]"), gx[i], num);
    }
    rep
}

/// Softmax cross-entropy w.r.t. logits on a random batch.
pub fn check_softmax_xent(seed: u64, h: f64) -> Result<GradCheck> {
    let (b, c) = (6, 10);
    let mut z = random_vec(rng::derive(seed, "z"), b * c, -3.0, 3.0);
    let mut lr = rng::stream(rng::derive(seed, "y"));
    let labels: Vec<usize> = (0..b).map(|_| lr.random_range(0..c)).collect();
    let (_, grad) = softmax_xent(&Tensor::from_vec(&[b, c], z.clone())?, &labels)?;
    let mut rep = GradCheck::new();
    for i in 0..b * c {
        let num = central(&mut z, i, h, |z| {
            softmax_xent(&Tensor::from_vec(&[b, c], z.to_vec()).expect("shape"), &labels)
                .expect("labels in range")
                .0
        });
        rep.record(|| format!("logit[{i}]"), grad.data()[i], num);
    }
    Ok(rep)
}

/// Every layer type in isolation, merged into one report.
pub fn check_all_layers(seed: u64, h: f64) -> Result<GradCheck> {
    Ok(check_conv_layer(seed, h)
        .merge(check_dense_layer(seed, h))
        .merge(check_relu_layer(seed, h))
        .merge(check_maxpool_layer(seed, h))
        .merge(check_softmax_xent(seed, h)?))
}
