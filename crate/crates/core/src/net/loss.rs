use crate::error::{Error, Result};
use crate::image::LabelMap;

use super::layers::Logits;

/// Per-pixel softmax probabilities.
pub fn softmax(logits: &Logits) -> Logits {
    let mut out = logits.clone();
    for px in out.data.chunks_exact_mut(logits.classes) {
        let m = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in px.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in px.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Mean pixel cross-entropy against hard targets and its gradient
/// `(softmax - onehot) / pixels`.
pub fn softmax_ce(logits: &Logits, target: &LabelMap) -> Result<(f64, Logits)> {
    if (logits.height, logits.width) != target.dims() {
        return Err(Error::invalid("logits and target differ in size"));
    }
    let c = logits.classes;
    if let Some(&bad) = target.data().iter().find(|&&t| t as usize >= c) {
        return Err(Error::invalid(format!(
            "target class {bad} out of range for {c} classes"
        )));
    }
    let n = target.data().len() as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for ((px, p), &t) in logits
        .data
        .chunks_exact(c)
        .zip(grad.data.chunks_exact_mut(c))
        .zip(target.data())
    {
        let m = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + px.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - px[t as usize];
        p[t as usize] -= 1.0;
        for v in p.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean pixel cross-entropy against a soft target distribution and its
/// gradient `(softmax - target) / pixels`.
pub fn softmax_ce_soft(logits: &Logits, target: &Logits) -> Result<(f64, Logits)> {
    if (logits.height, logits.width, logits.classes) != (target.height, target.width, target.classes) {
        return Err(Error::invalid("logits and soft target differ in shape"));
    }
    let c = logits.classes;
    let n = (logits.height * logits.width) as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for ((px, p), q) in logits
        .data
        .chunks_exact(c)
        .zip(grad.data.chunks_exact_mut(c))
        .zip(target.data.chunks_exact(c))
    {
        let m = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + px.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for ((&z, pv), &qv) in px.iter().zip(p.iter_mut()).zip(q) {
            loss += qv * (lse - z);
            *pv = (*pv - qv) / n;
        }
    }
    Ok((loss / n, grad))
}
