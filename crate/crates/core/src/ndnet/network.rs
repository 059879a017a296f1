use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::layers::{self, ConvGeom};
use super::loss::softmax_xent;
use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv { cin: usize, cout: usize, k: usize, pad: usize },
    Relu,
    MaxPool2,
    Flatten,
    Dense { inp: usize, out: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub kind: LayerKind,
    /// Parameter prefix for weight layers (`conv1`, `dense2`, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Activation tap exposed after this layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tap: Option<String>,
}

/// Layer table of a feed-forward network over `(side, side, channels)` NHWC input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_side: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerEntry>,
}

pub const REPR_TAP: &str = "repr";
pub const NUM_CLASSES: usize = 10;

impl NetworkSpec {
    /// The reference 6-weight-layer CNN on 32x32x1 glyphs.
    pub fn reference() -> Self {
        Self::with_input_side(32)
    }

    /// Reference layer table on a smaller square input (used for gradient checks).
    /// `side` must be a multiple of 8.
    pub fn with_input_side(side: usize) -> Self {
        assert!(side >= 8 && side % 8 == 0, "input side must be a multiple of 8");
        let flat = (side / 8) * (side / 8) * 64;
        let conv = |cin, cout| LayerKind::Conv { cin, cout, k: 3, pad: 1 };
        let e = |kind, name: Option<&str>, tap: Option<&str>| LayerEntry {
            kind,
            name: name.map(str::to_string),
            tap: tap.map(str::to_string),
        };
        NetworkSpec {
            input_side: side,
            input_channels: 1,
            layers: vec![
                e(conv(1, 16), Some("conv1"), None),
                e(LayerKind::Relu, None, Some("block1")),
                e(conv(16, 32), Some("conv2"), None),
                e(LayerKind::Relu, None, None),
                e(LayerKind::MaxPool2, None, Some("block2")),
                e(conv(32, 48), Some("conv3"), None),
                e(LayerKind::Relu, None, None),
                e(LayerKind::MaxPool2, None, Some("block3")),
                e(conv(48, 64), Some("conv4"), None),
                e(LayerKind::Relu, None, None),
                e(LayerKind::MaxPool2, None, Some("block4")),
                e(LayerKind::Flatten, None, None),
                e(LayerKind::Dense { inp: flat, out: 128 }, Some("dense1"), None),
                e(LayerKind::Relu, None, Some(REPR_TAP)),
                e(LayerKind::Dense { inp: 128, out: NUM_CLASSES }, Some("dense2"), Some("logits")),
            ],
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.input_side, self.input_side, self.input_channels]
    }

    /// Per-example activation shape after every layer; validates the table.
    pub fn activation_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.input_shape().to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for entry in &self.layers {
            cur = match (entry.kind, cur.as_slice()) {
                (LayerKind::Conv { cin, cout, k, pad }, &[h, w, c]) if c == cin => {
                    vec![h + 2 * pad + 1 - k, w + 2 * pad + 1 - k, cout]
                }
                (LayerKind::MaxPool2, &[h, w, c]) => vec![h / 2, w / 2, c],
                (LayerKind::Relu, _) => cur.clone(),
                (LayerKind::Flatten, s) => vec![s.iter().product()],
                (LayerKind::Dense { inp, out }, &[n]) if n == inp => vec![out],
                (kind, s) => {
                    return Err(Error::domain(format!(
                        "layer {kind:?} cannot follow activation shape {s:?}"
                    )))
                }
            };
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// `(name, shape, fan_in)` for every parameter tensor in storage order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let mut out = Vec::new();
        for (i, entry) in self.layers.iter().enumerate() {
            let name = entry.name.clone().unwrap_or_else(|| format!("layer{i}"));
            match entry.kind {
                LayerKind::Conv { cin, cout, k, .. } => {
                    out.push((format!("{name}.weight"), vec![k, k, cin, cout], k * k * cin));
                    out.push((format!("{name}.bias"), vec![cout], k * k * cin));
                }
                LayerKind::Dense { inp, out: o } => {
                    out.push((format!("{name}.weight"), vec![inp, o], inp));
                    out.push((format!("{name}.bias"), vec![o], inp));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_layout()
            .iter()
            .map(|(_, s, _)| s.iter().product::<usize>())
            .sum()
    }

    pub fn tap_names(&self) -> Vec<&str> {
        self.layers.iter().filter_map(|e| e.tap.as_deref()).collect()
    }

    /// Content hash of the layer table, recorded in checkpoints.
    pub fn hash(&self) -> String {
        crate::hash::sha256_hex(&serde_json::to_vec(self).expect("spec serializes"))
    }
}

/// Activations retained by a training forward pass.
pub struct Trace<F> {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`. Entries
    /// that no backward rule reads (inputs of ReLU/flatten) are released.
    acts: Vec<Option<Tensor<F>>>,
    argmax: Vec<Option<Vec<u32>>>,
    batch: usize,
}

impl<F: Scalar> Trace<F> {
    pub fn logits(&self) -> &Tensor<F> {
        self.acts
            .last()
            .and_then(Option::as_ref)
            .expect("trace keeps the logits")
    }

    fn act(&self, i: usize) -> &Tensor<F> {
        self.acts[i].as_ref().expect("activation retained for backward")
    }
}

/// Parameters of a network described by a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    spec: NetworkSpec,
    shapes: Vec<Vec<usize>>,
    params: Vec<Tensor<F>>,
}

impl<F: Scalar> Network<F> {
    /// All-zero weights and biases.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let shapes = spec.activation_shapes()?;
        let params = spec
            .param_layout()
            .iter()
            .map(|(_, s, _)| Tensor::zeros(s))
            .collect();
        Ok(Network { spec, shapes, params })
    }

    /// Fan-in uniform initialization `U(-sqrt(2/fan_in), sqrt(2/fan_in))`, zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let layout = net.spec.param_layout();
        for (i, ((name, _, fan_in), p)) in layout.iter().zip(net.params.iter_mut()).enumerate() {
            if name.ends_with(".bias") {
                continue;
            }
            let bound = (2.0 / *fan_in as f64).sqrt();
            let mut r = rng::stream(rng::derive_indexed(seed, "init", i as u64));
            for v in p.data_mut() {
                *v = F::lit(r.random_range(-bound..bound));
            }
        }
        Ok(net)
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<Tensor<F>>) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape {
                context: "parameter list",
                expected: vec![net.params.len()],
                got: vec![params.len()],
            });
        }
        for (slot, p) in net.params.iter_mut().zip(params) {
            if slot.shape() != p.shape() {
                return Err(Error::Shape {
                    context: "parameter tensor",
                    expected: slot.shape().to_vec(),
                    got: p.shape().to_vec(),
                });
            }
            *slot = p;
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Same weights in another element type.
    pub fn cast<G: Scalar>(&self) -> Network<G> {
        Network {
            spec: self.spec.clone(),
            shapes: self.shapes.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    /// Per-example shape of a tap's activation.
    pub fn tap_shape(&self, tap: &str) -> Result<&[usize]> {
        self.spec
            .layers
            .iter()
            .position(|e| e.tap.as_deref() == Some(tap))
            .map(|i| self.shapes[i].as_slice())
            .ok_or_else(|| self.unknown_tap(tap))
    }

    fn unknown_tap(&self, tap: &str) -> Error {
        Error::domain(format!(
            "unknown tap '{tap}'; available taps: {}",
            self.spec.tap_names().join(", ")
        ))
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<usize> {
        let want = self.spec.input_shape();
        let s = x.shape();
        if s.len() != 4 || s[1..] != want || s[0] == 0 {
            return Err(Error::Shape {
                context: "network input",
                expected: [&[s.first().copied().unwrap_or(0).max(1)], &want[..]].concat(),
                got: s.to_vec(),
            });
        }
        Ok(s[0])
    }

    /// Apply layer `i` to `input`, returning its output (and pool indices).
    fn layer_forward(&self, i: usize, input: &Tensor<F>, pidx: &mut usize) -> (Tensor<F>, Option<Vec<u32>>) {
        let batch = input.rows();
        let in_shape = if i == 0 {
            self.spec.input_shape().to_vec()
        } else {
            self.shapes[i - 1].clone()
        };
        let out_shape: Vec<usize> = [&[batch], self.shapes[i].as_slice()].concat();
        match self.spec.layers[i].kind {
            LayerKind::Conv { cin, cout, k, pad } => {
                let g = ConvGeom { h: in_shape[0], w: in_shape[1], cin, cout, k, pad };
                let mut out = Tensor::zeros(&out_shape);
                let (w, b) = (&self.params[*pidx], &self.params[*pidx + 1]);
                *pidx += 2;
                layers::conv_forward(&g, input.data(), w.data(), b.data(), out.data_mut());
                (out, None)
            }
            LayerKind::Dense { inp, out: o } => {
                let mut out = Tensor::zeros(&out_shape);
                let (w, b) = (&self.params[*pidx], &self.params[*pidx + 1]);
                *pidx += 2;
                layers::dense_forward(inp, o, input.data(), w.data(), b.data(), out.data_mut());
                (out, None)
            }
            LayerKind::Relu => {
                let mut out = input.clone();
                layers::relu_forward(out.data_mut());
                (out, None)
            }
            LayerKind::MaxPool2 => {
                let mut out = Tensor::zeros(&out_shape);
                let mut arg = vec![0u32; out.len()];
                layers::maxpool_forward(
                    in_shape[0],
                    in_shape[1],
                    in_shape[2],
                    input.data(),
                    out.data_mut(),
                    &mut arg,
                );
                (out, Some(arg))
            }
            LayerKind::Flatten => (
                input.clone().reshape(&out_shape).expect("flatten preserves size"),
                None,
            ),
        }
    }

    /// Inference pass. Returns logits and the requested tap activations.
    pub fn forward(
        &self,
        x: &Tensor<F>,
        taps: &[&str],
    ) -> Result<(Tensor<F>, BTreeMap<String, Tensor<F>>)> {
        self.check_input(x)?;
        for t in taps {
            self.tap_shape(t)?;
        }
        let mut collected = BTreeMap::new();
        let mut cur = x.clone();
        let mut pidx = 0;
        for i in 0..self.spec.layers.len() {
            cur = self.layer_forward(i, &cur, &mut pidx).0;
            if let Some(t) = self.spec.layers[i].tap.as_deref() {
                if taps.contains(&t) {
                    collected.insert(t.to_string(), cur.clone());
                }
            }
        }
        Ok((cur, collected))
    }

    /// Forward pass that keeps the activations [`Network::backward`] needs.
    pub fn forward_trace(&self, x: &Tensor<F>) -> Result<Trace<F>> {
        let batch = self.check_input(x)?;
        let mut acts = vec![Some(x.clone())];
        let mut argmax = Vec::with_capacity(self.spec.layers.len());
        let mut pidx = 0;
        for i in 0..self.spec.layers.len() {
            let (out, arg) = match self.spec.layers[i].kind {
                LayerKind::Relu => {
                    let mut t = acts[i].take().expect("layer input present");
                    layers::relu_forward(t.data_mut());
                    (t, None)
                }
                LayerKind::Flatten => {
                    let t = acts[i].take().expect("layer input present");
                    let shape = [&[batch], self.shapes[i].as_slice()].concat();
                    (t.reshape(&shape)?, None)
                }
                _ => self.layer_forward(i, acts[i].as_ref().expect("layer input present"), &mut pidx),
            };
            acts.push(Some(out));
            argmax.push(arg);
        }
        Ok(Trace { acts, argmax, batch })
    }

    /// Parameter gradients given `d loss / d logits`.
    pub fn backward(&self, trace: &Trace<F>, grad_logits: &Tensor<F>) -> Result<Vec<Tensor<F>>> {
        if grad_logits.shape() != trace.logits().shape() {
            return Err(Error::Shape {
                context: "logit gradient",
                expected: trace.logits().shape().to_vec(),
                got: grad_logits.shape().to_vec(),
            });
        }
        let mut grads: Vec<Tensor<F>> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut pidx = self.params.len();
        let mut grad = grad_logits.clone();
        for i in (0..self.spec.layers.len()).rev() {
            let in_shape: Vec<usize> = if i == 0 {
                [&[trace.batch], &self.spec.input_shape()[..]].concat()
            } else {
                [&[trace.batch], self.shapes[i - 1].as_slice()].concat()
            };
            let need_input_grad = i > 0;
            match self.spec.layers[i].kind {
                LayerKind::Conv { cin, cout, k, pad } => {
                    pidx -= 2;
                    let input = trace.act(i);
                    let g = ConvGeom { h: in_shape[1], w: in_shape[2], cin, cout, k, pad };
                    let mut gin = need_input_grad.then(|| Tensor::zeros(&in_shape));
                    let (gw, gb) = grads[pidx..].split_at_mut(1);
                    layers::conv_backward(
                        &g,
                        input.data(),
                        self.params[pidx].data(),
                        grad.data(),
                        gw[0].data_mut(),
                        gb[0].data_mut(),
                        gin.as_mut().map(|t| t.data_mut()),
                    );
                    match gin {
                        Some(t) => grad = t,
                        None => break,
                    }
                }
                LayerKind::Dense { inp, out } => {
                    pidx -= 2;
                    let input = trace.act(i);
                    let mut gin = need_input_grad.then(|| Tensor::zeros(&in_shape));
                    let (gw, gb) = grads[pidx..].split_at_mut(1);
                    layers::dense_backward(
                        inp,
                        out,
                        input.data(),
                        self.params[pidx].data(),
                        grad.data(),
                        gw[0].data_mut(),
                        gb[0].data_mut(),
                        gin.as_mut().map(|t| t.data_mut()),
                    );
                    match gin {
                        Some(t) => grad = t,
                        None => break,
                    }
                }
                LayerKind::Relu => layers::relu_backward(trace.act(i + 1).data(), grad.data_mut()),
                LayerKind::MaxPool2 => {
                    let mut gin = Tensor::zeros(&in_shape);
                    let arg = trace.argmax[i].as_ref().expect("pool layer stores argmax");
                    layers::maxpool_backward(grad.data(), arg, gin.data_mut());
                    grad = gin;
                }
                LayerKind::Flatten => grad = grad.reshape(&in_shape)?,
            }
        }
        Ok(grads)
    }

    /// Mean softmax cross-entropy over the batch and its parameter gradients.
    pub fn loss_and_grad(&self, x: &Tensor<F>, labels: &[usize]) -> Result<(F, Vec<Tensor<F>>)> {
        let trace = self.forward_trace(x)?;
        let (loss, dlogits) = softmax_xent(trace.logits(), labels)?;
        let grads = self.backward(&trace, &dlogits)?;
        Ok((loss, grads))
    }

    /// Named view of the parameters, in storage order.
    pub fn named_params(&self) -> impl Iterator<Item = (String, &Tensor<F>)> {
        self.spec
            .param_layout()
            .into_iter()
            .map(|(n, _, _)| n)
            .zip(self.params.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameter_count() {
        // (k²·Cin + 1)·Cout per conv, (in + 1)·out per dense.
        let expected = (9 + 1) * 16 + (9 * 16 + 1) * 32 + (9 * 32 + 1) * 48 + (9 * 48 + 1) * 64
            + (1024 + 1) * 128
            + (128 + 1) * 10;
        assert_eq!(expected, 178_874);
        assert_eq!(NetworkSpec::reference().param_count(), 178_874);
        let net = Network::<f32>::zeros(NetworkSpec::reference()).unwrap();
        assert_eq!(net.param_count(), 178_874);
    }

    #[test]
    fn six_weight_layers() {
        let n = NetworkSpec::reference()
            .layers
            .iter()
            .filter(|e| matches!(e.kind, LayerKind::Conv { .. } | LayerKind::Dense { .. }))
            .count();
        assert_eq!(n, 6);
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let net = Network::<f64>::zeros(NetworkSpec::reference()).unwrap();
        let x = Tensor::zeros(&[2, 32, 32, 1]);
        let (logits, _) = net.forward(&x, &[]).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_and_tap_shapes() {
        let net = Network::<f32>::init(NetworkSpec::reference(), 1).unwrap();
        let x = Tensor::from_vec(&[3, 32, 32, 1], (0..3 * 1024).map(|i| (i % 7) as f32 / 7.0).collect())
            .unwrap();
        let (logits, taps) = net.forward(&x, &[REPR_TAP, "block4"]).unwrap();
        assert_eq!(logits.shape(), &[3, 10]);
        assert_eq!(taps[REPR_TAP].shape(), &[3, 128]);
        assert_eq!(taps["block4"].shape(), &[3, 4, 4, 64]);
        assert!(logits.is_finite());
    }

    #[test]
    fn bad_input_shape_is_rejected() {
        let net = Network::<f32>::zeros(NetworkSpec::reference()).unwrap();
        let x = Tensor::zeros(&[1, 28, 28, 1]);
        assert!(matches!(net.forward(&x, &[]), Err(Error::Shape { .. })));
        let x = Tensor::zeros(&[1, 32, 32, 1]);
        assert!(matches!(net.forward(&x, &["nope"]), Err(Error::Domain(_))));
    }

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let a = Network::<f32>::init(NetworkSpec::reference(), 9).unwrap();
        let b = Network::<f32>::init(NetworkSpec::reference(), 9).unwrap();
        let c = Network::<f32>::init(NetworkSpec::reference(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (name, p) in a.named_params() {
            if name.ends_with(".bias") {
                assert!(p.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn init_weight_std_matches_fan_in() {
        let net = Network::<f64>::init(NetworkSpec::reference(), 3).unwrap();
        for ((name, _, fan_in), p) in net.spec().param_layout().iter().zip(net.params()) {
            if name.ends_with(".bias") || p.len() < 10_000 {
                continue;
            }
            let n = p.len() as f64;
            let mean = p.data().iter().sum::<f64>() / n;
            let var = p.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let target = (2.0 / *fan_in as f64).sqrt() / 3f64.sqrt();
            let rel = (var.sqrt() - target).abs() / target;
            assert!(rel < 0.2, "{name}: std {} vs {target}", var.sqrt());
        }
    }

    #[test]
    fn zero_net_last_bias_gradient_is_mean_softmax_residual() {
        let net = Network::<f64>::zeros(NetworkSpec::reference()).unwrap();
        let x = Tensor::from_vec(&[4, 32, 32, 1], (0..4096).map(|i| (i % 13) as f64 / 13.0).collect())
            .unwrap();
        let labels = [0usize, 3, 3, 9];
        let (_, grads) = net.loss_and_grad(&x, &labels).unwrap();
        let gb = grads.last().unwrap();
        for c in 0..10 {
            let hits = labels.iter().filter(|&&l| l == c).count() as f64;
            let want = 0.1 - hits / 4.0;
            assert!((gb.data()[c] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_example_leaves_mean_gradient_unchanged() {
        let net = Network::<f64>::init(NetworkSpec::with_input_side(8), 4).unwrap();
        let x = Tensor::from_vec(&[1, 8, 8, 1], (0..64).map(|i| ((i * 7) % 5) as f64 / 5.0).collect())
            .unwrap();
        let x2 = Tensor::concat_rows(&x, &x).unwrap();
        let (l1, g1) = net.loss_and_grad(&x, &[4]).unwrap();
        let (l2, g2) = net.loss_and_grad(&x2, &[4, 4]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            for (u, v) in a.data().iter().zip(b.data()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_is_deterministic() {
        let net = Network::<f64>::init(NetworkSpec::with_input_side(8), 5).unwrap();
        let x = Tensor::from_vec(&[2, 8, 8, 1], (0..128).map(|i| (i % 9) as f64 / 9.0).collect())
            .unwrap();
        let a = net.loss_and_grad(&x, &[1, 2]).unwrap();
        let b = net.loss_and_grad(&x, &[1, 2]).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
