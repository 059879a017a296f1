use crate::error::{Error, Result};

use super::scalar::Scalar;
use super::tensor::Tensor;

/// Row-wise softmax with max subtraction.
pub fn softmax<F: Scalar>(logits: &Tensor<F>) -> Tensor<F> {
    let mut out = logits.clone();
    let c = logits.row_len();
    for row in out.data_mut().chunks_exact_mut(c) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut z = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Per-example cross-entropy `logsumexp(z) - z[label]`.
pub fn xent_per_example<F: Scalar>(logits: &Tensor<F>, labels: &[usize]) -> Result<Vec<F>> {
    check_labels(logits, labels)?;
    let c = logits.row_len();
    Ok(logits
        .data()
        .chunks_exact(c)
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
            lse - row[y]
        })
        .collect())
}

fn check_labels<F: Scalar>(logits: &Tensor<F>, labels: &[usize]) -> Result<()> {
    if logits.shape().len() != 2 || logits.rows() != labels.len() {
        return Err(Error::Shape {
            context: "softmax cross-entropy",
            expected: vec![labels.len(), logits.row_len()],
            got: logits.shape().to_vec(),
        });
    }
    let c = logits.row_len();
    if let Some(bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::domain(format!("label {bad} outside [0, {c})")));
    }
    Ok(())
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_xent<F: Scalar>(logits: &Tensor<F>, labels: &[usize]) -> Result<(F, Tensor<F>)> {
    let per = xent_per_example(logits, labels)?;
    let n = F::from_usize(labels.len()).expect("batch size");
    let loss = per.iter().copied().sum::<F>() / n;
    let mut grad = softmax(logits);
    let c = logits.row_len();
    for (row, &y) in grad.data_mut().chunks_exact_mut(c).zip(labels) {
        row[y] -= F::one();
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss, grad))
}

/// Index of the row maximum; ties resolve to the lowest index.
pub fn argmax_rows<F: Scalar>(logits: &Tensor<F>) -> Vec<usize> {
    let c = logits.row_len();
    logits
        .data()
        .chunks_exact(c)
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
