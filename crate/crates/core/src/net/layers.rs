use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};

use super::{conv, Gradients, NetParams};

/// Per-pixel class scores, `(H, W, C)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub data: Vec<f64>,
}

impl Logits {
    pub fn zeros(height: usize, width: usize, classes: usize) -> Self {
        Self {
            height,
            width,
            classes,
            data: vec![0.0; height * width * classes],
        }
    }

    pub fn pixel(&self, r: usize, c: usize) -> &[f64] {
        let i = (r * self.width + c) * self.classes;
        &self.data[i..i + self.classes]
    }

    /// Per-pixel argmax, lowest index on ties.
    pub fn argmax(&self) -> LabelMap {
        let labels = self
            .data
            .chunks_exact(self.classes)
            .map(|px| {
                let mut best = 0;
                for (i, &v) in px.iter().enumerate().skip(1) {
                    if v > px[best] {
                        best = i;
                    }
                }
                best as u8
            })
            .collect();
        LabelMap::new(self.height, self.width, labels, self.classes as u8)
            .expect("argmax indices are below the class count")
    }
}

/// Activations kept by [`forward`] for the matching [`backward`] call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    param_count: usize,
    height: usize,
    width: usize,
    /// Input of each layer; entry 0 is the image itself.
    inputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Which hidden units are active (post-ReLU value above zero), layer by
    /// layer. Two parameter vectors with equal patterns lie on the same
    /// linear piece of the network.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.inputs[1..].iter().flatten().map(|&a| a > 0.0).collect()
    }
}

fn run(params: &NetParams, img: &Image, keep: bool) -> Result<(Logits, Option<ForwardCache>)> {
    params.arch.validate()?;
    params.validate()?;
    let (h, w) = img.dims();
    let ranges = params.arch.layer_ranges();
    let mut inputs = Vec::with_capacity(params.arch.layers.len());
    let mut act = img.data().to_vec();
    for (spec, range) in params.arch.layers.iter().zip(ranges) {
        let mut out = conv::forward(spec, &params.values[range], &act, h, w);
        if spec.relu {
            for v in &mut out {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        if keep {
            inputs.push(std::mem::replace(&mut act, out));
        } else {
            act = out;
        }
    }
    if let Some(i) = act.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("logit {i} is not finite")));
    }
    let logits = Logits {
        height: h,
        width: w,
        classes: params.arch.classes(),
        data: act,
    };
    let cache = keep.then(|| ForwardCache {
        param_count: params.len(),
        height: h,
        width: w,
        inputs,
    });
    Ok((logits, cache))
}

/// Logits for one image plus the activations needed for backpropagation.
pub fn forward(params: &NetParams, img: &Image) -> Result<(Logits, ForwardCache)> {
    let (l, c) = run(params, img, true)?;
    Ok((l, c.expect("cache requested")))
}

pub fn forward_logits(params: &NetParams, img: &Image) -> Result<Logits> {
    Ok(run(params, img, false)?.0)
}

/// Hard prediction: per-pixel argmax of the logits, lowest class on ties.
pub fn predict_hard(params: &NetParams, img: &Image) -> Result<LabelMap> {
    Ok(forward_logits(params, img)?.argmax())
}

/// Exact parameter gradient given the loss gradient with respect to logits.
pub fn backward(params: &NetParams, cache: &ForwardCache, dlogits: &Logits) -> Result<Gradients> {
    backward_frozen(params, cache, dlogits, &[])
}

/// As [`backward`], but layers listed in `frozen` receive exactly zero gradient.
pub fn backward_frozen(
    params: &NetParams,
    cache: &ForwardCache,
    dlogits: &Logits,
    frozen: &[usize],
) -> Result<Gradients> {
    let layers = &params.arch.layers;
    if cache.param_count != params.len() || cache.inputs.len() != layers.len() {
        return Err(Error::invalid("forward cache does not belong to these parameters"));
    }
    let (h, w) = (cache.height, cache.width);
    if (dlogits.height, dlogits.width, dlogits.classes) != (h, w, params.arch.classes()) {
        return Err(Error::invalid("logit gradient shape does not match the cache"));
    }
    let ranges = params.arch.layer_ranges();
    let mut grads = Gradients::zeros(params.len());
    let mut dout = dlogits.data.clone();
    // Layers below the lowest trainable one need no input gradient.
    let lowest_trainable = (0..layers.len()).find(|l| !frozen.contains(l));
    for l in (0..layers.len()).rev() {
        let spec = &layers[l];
        let input = &cache.inputs[l];
        let need_input_grad = l > 0 && lowest_trainable.is_some_and(|t| t < l);
        let mut din = need_input_grad.then(|| vec![0.0; h * w * spec.in_ch]);
        let g = (!frozen.contains(&l)).then(|| &mut grads.values[ranges[l].clone()]);
        conv::backward(
            spec,
            &params.values[ranges[l].clone()],
            input,
            &dout,
            h,
            w,
            g,
            din.as_deref_mut(),
        );
        let Some(mut din) = din else {
            break;
        };
        // The input of layer l is the ReLU output of layer l - 1.
        if layers[l - 1].relu {
            for (d, &a) in din.iter_mut().zip(input) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        dout = din;
    }
    Ok(grads)
}
