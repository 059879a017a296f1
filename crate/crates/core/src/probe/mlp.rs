//! Small perceptron probes trained full-batch with heavy-ball momentum.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ndnet::layers::{dense_backward, dense_forward, relu_backward, relu_forward};
use crate::ndnet::{argmax_rows, softmax_xent, Tensor};
use crate::rng;

/// Two-layer perceptron (`dim -> hidden -> classes`, ReLU) or, with
/// `hidden == None`, a single linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dim: usize,
    pub hidden: Option<usize>,
    pub classes: usize,
    /// Weight, bias pairs in layer order; weights are `(in, out)` row-major.
    pub params: Vec<Vec<f64>>,
}

fn uniform_layer(r: &mut impl Rng, inp: usize, out: usize) -> [Vec<f64>; 2] {
    let bound = 1.0 / (inp as f64).sqrt();
    let mut draw = |n: usize| (0..n).map(|_| r.random_range(-bound..=bound)).collect::<Vec<f64>>();
    [draw(inp * out), draw(out)]
}

impl Mlp {
    pub fn new(dim: usize, hidden: Option<usize>, classes: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed);
        let params = match hidden {
            Some(h) => {
                let [w1, b1] = uniform_layer(&mut r, dim, h);
                let [w2, b2] = uniform_layer(&mut r, h, classes);
                vec![w1, b1, w2, b2]
            }
            None => uniform_layer(&mut r, dim, classes).to_vec(),
        };
        Mlp {
            dim,
            hidden,
            classes,
            params,
        }
    }

    fn widths(&self) -> Vec<(usize, usize)> {
        match self.hidden {
            Some(h) => vec![(self.dim, h), (h, self.classes)],
            None => vec![(self.dim, self.classes)],
        }
    }

    /// Logits and the hidden activation (if any) for `x` of `rows` rows.
    fn forward_parts(&self, x: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let rows = x.len() / self.dim;
        let widths = self.widths();
        let mut cur = x.to_vec();
        let mut hidden = None;
        for (l, &(inp, out)) in widths.iter().enumerate() {
            let mut next = vec![0.0; rows * out];
            dense_forward(inp, out, &cur, &self.params[2 * l], &self.params[2 * l + 1], &mut next);
            if l + 1 < widths.len() {
                relu_forward(&mut next);
                hidden = Some(next.clone());
            }
            cur = next;
        }
        (cur, hidden)
    }

    pub fn logits(&self, x: &[f64]) -> Tensor<f64> {
        let rows = x.len() / self.dim;
        Tensor::from_vec(&[rows, self.classes], self.forward_parts(x).0).expect("logit shape")
    }

    pub fn predict(&self, x: &[f64]) -> Vec<usize> {
        argmax_rows(&self.logits(x))
    }

    /// Mean cross-entropy and its gradient for every parameter.
    pub fn loss_and_grad(&self, x: &[f64], labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
        let rows = labels.len();
        let (logits, hidden) = self.forward_parts(x);
        let logits = Tensor::from_vec(&[rows, self.classes], logits)?;
        let (loss, dlogits) = softmax_xent(&logits, labels)?;
        let mut grads: Vec<Vec<f64>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        match (self.hidden, hidden) {
            (Some(h), Some(hid)) => {
                let [gw1, gb1, gw2, gb2] = &mut grads[..] else { unreachable!("two layers") };
                let mut dh = vec![0.0; rows * h];
                dense_backward(h, self.classes, &hid, &self.params[2], dlogits.data(), gw2, gb2, Some(&mut dh));
                relu_backward(&hid, &mut dh);
                dense_backward(self.dim, h, x, &self.params[0], &dh, gw1, gb1, None);
            }
            _ => {
                let (gw, gb) = grads.split_at_mut(1);
                dense_backward(self.dim, self.classes, x, &self.params[0], dlogits.data(), &mut gw[0], &mut gb[0], None);
            }
        }
        Ok((loss, grads))
    }

    /// Heavy-ball SGD, `v <- momentum * v + g; p <- p - lr * v`, over
    /// shuffled minibatches. Returns the mean minibatch loss of the last epoch.
    pub fn fit(&mut self, x: &[f64], labels: &[usize], sgd: &Sgd) -> Result<f64> {
        let rows = labels.len();
        if rows == 0 {
            return Err(Error::domain("cannot fit a probe on zero rows"));
        }
        let batch = sgd.batch_size.clamp(1, rows);
        let mut order: Vec<usize> = (0..rows).collect();
        let mut shuffle = rng::stream(rng::derive(sgd.seed, "probe_batches"));
        let mut velocity: Vec<Vec<f64>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        let mut xb = Vec::with_capacity(batch * self.dim);
        let mut yb = Vec::with_capacity(batch);
        let mut loss = f64::NAN;
        for _ in 0..sgd.epochs {
            if batch < rows {
                order.shuffle(&mut shuffle);
            }
            let mut total = 0.0;
            for chunk in order.chunks(batch) {
                let (l, grads) = if batch == rows {
                    self.loss_and_grad(x, labels)?
                } else {
                    xb.clear();
                    yb.clear();
                    for &r in chunk {
                        xb.extend_from_slice(&x[r * self.dim..(r + 1) * self.dim]);
                        yb.push(labels[r]);
                    }
                    self.loss_and_grad(&xb, &yb)?
                };
                total += l * chunk.len() as f64;
                for ((p, v), g) in self.params.iter_mut().zip(&mut velocity).zip(&grads) {
                    for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                        *vi = sgd.momentum * *vi + gi;
                        *pi -= sgd.lr * *vi;
                    }
                }
            }
            loss = total / rows as f64;
        }
        Ok(loss)
    }
}

/// Optimizer settings for [`Mlp::fit`]. A `batch_size` of at least the row
/// count gives full-batch gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Sgd {
    pub fn full_batch(lr: f64, momentum: f64, epochs: usize) -> Self {
        Sgd { lr, momentum, epochs, batch_size: usize::MAX, seed: 0 }
    }
}

/// Fraction of `predicted` equal to `labels`; `NaN` on empty input.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    predicted.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut r = rng::stream(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let c = i % 2;
            let centre = if c == 0 { -2.0 } else { 2.0 };
            x.push(centre + r.random_range(-1.0..1.0));
            x.push(centre + r.random_range(-1.0..1.0));
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, y) = toy(1);
        let (x, y) = (&x[..20], &y[..10]);
        for hidden in [Some(5), None] {
            let m = Mlp::new(2, hidden, 3, 7);
            let (_, grads) = m.loss_and_grad(x, y).unwrap();
            for (pi, p) in m.params.iter().enumerate() {
                for j in 0..p.len() {
                    let mut plus = m.clone();
                    plus.params[pi][j] += 1e-6;
                    let mut minus = m.clone();
                    minus.params[pi][j] -= 1e-6;
                    let num = (plus.loss_and_grad(x, y).unwrap().0 - minus.loss_and_grad(x, y).unwrap().0) / 2e-6;
                    assert!((num - grads[pi][j]).abs() < 1e-6, "param {pi}[{j}]: {num} vs {}", grads[pi][j]);
                }
            }
        }
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = toy(2);
        let (xt, yt) = toy(3);
        for hidden in [Some(16), None] {
            let mut m = Mlp::new(2, hidden, 2, 0);
            m.fit(&x, &y, &Sgd::full_batch(0.1, 0.9, 100)).unwrap();
            assert!(accuracy(&m.predict(&xt), &yt) >= 0.99);
        }
    }

    #[test]
    fn training_reduces_loss() {
        let (x, y) = toy(4);
        let mut m = Mlp::new(2, Some(8), 2, 1);
        let before = m.loss_and_grad(&x, &y).unwrap().0;
        let after = m.fit(&x, &y, &Sgd::full_batch(0.05, 0.9, 50)).unwrap();
        assert!(after < before);
    }

    #[test]
    fn minibatch_fit_is_seeded() {
        let (x, y) = toy(5);
        let sgd = Sgd { lr: 0.05, momentum: 0.9, epochs: 5, batch_size: 32, seed: 3 };
        let fit = |s: &Sgd| {
            let mut m = Mlp::new(2, Some(8), 2, 1);
            m.fit(&x, &y, s).unwrap();
            m
        };
        assert_eq!(fit(&sgd), fit(&sgd));
        assert_ne!(fit(&sgd), fit(&Sgd { seed: 4, ..sgd }));
        let mut m = fit(&sgd);
        assert!(accuracy(&m.predict(&x), &y) >= 0.99);
        assert!(m.fit(&x, &[], &sgd).is_err());
    }

    #[test]
    fn oversized_batch_is_full_batch() {
        let (x, y) = toy(6);
        let mut a = Mlp::new(2, Some(4), 2, 2);
        let mut b = a.clone();
        a.fit(&x, &y, &Sgd::full_batch(0.05, 0.9, 10)).unwrap();
        b.fit(&x, &y, &Sgd { batch_size: y.len(), seed: 9, ..Sgd::full_batch(0.05, 0.9, 10) }).unwrap();
        assert_eq!(a, b);
    }
}
