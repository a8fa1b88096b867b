//! Channel-last, same-padded, stride-1 convolution kernels.
//!
//! Activations are `(H, W, C)` row-major. Weights are laid out
//! `[ky][kx][in][out]` followed by `out` biases, so the innermost loops run
//! over output channels.

use super::arch::LayerSpec;

pub(crate) fn forward(spec: &LayerSpec, params: &[f64], input: &[f64], h: usize, w: usize) -> Vec<f64> {
    match spec.out_ch {
        2 => forward_n::<2>(spec, params, input, h, w),
        3 => forward_n::<3>(spec, params, input, h, w),
        4 => forward_n::<4>(spec, params, input, h, w),
        8 => forward_n::<8>(spec, params, input, h, w),
        16 => forward_n::<16>(spec, params, input, h, w),
        _ => forward_any(spec, params, input, h, w),
    }
}

/// Input rows `y` for which `y + ky - pad` stays inside `0..h`.
fn valid(ky: usize, pad: usize, h: usize) -> std::ops::Range<usize> {
    let lo = pad.saturating_sub(ky);
    let hi = (h + pad).saturating_sub(ky).min(h);
    lo..hi.max(lo)
}

fn forward_n<const N: usize>(spec: &LayerSpec, params: &[f64], input: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (k, ci) = (spec.kernel, spec.in_ch);
    let pad = k / 2;
    let (weights, bias) = params.split_at(spec.weight_count());
    let bias: [f64; N] = bias.try_into().expect("bias length matches output channels");
    let mut out = vec![0.0; h * w * N];
    for y in 0..h {
        for x in 0..w {
            let mut acc = bias;
            for ky in 0..k {
                let Some(yy) = (y + ky).checked_sub(pad).filter(|&v| v < h) else {
                    continue;
                };
                for kx in 0..k {
                    let Some(xx) = (x + kx).checked_sub(pad).filter(|&v| v < w) else {
                        continue;
                    };
                    let inp = &input[(yy * w + xx) * ci..][..ci];
                    let wk = &weights[(ky * k + kx) * ci * N..][..ci * N];
                    for (&v, wrow) in inp.iter().zip(wk.chunks_exact(N)) {
                        if v == 0.0 {
                            continue;
                        }
                        let wrow: &[f64; N] = wrow.try_into().expect("row of N weights");
                        for j in 0..N {
                            acc[j] += v * wrow[j];
                        }
                    }
                }
            }
            out[(y * w + x) * N..][..N].copy_from_slice(&acc);
        }
    }
    out
}

fn forward_any(spec: &LayerSpec, params: &[f64], input: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (k, ci, co) = (spec.kernel, spec.in_ch, spec.out_ch);
    let pad = k / 2;
    let (weights, bias) = params.split_at(spec.weight_count());
    let mut out = vec![0.0; h * w * co];
    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y * w + x) * co..(y * w + x + 1) * co];
            o.copy_from_slice(bias);
            for ky in 0..k {
                let Some(yy) = (y + ky).checked_sub(pad).filter(|&v| v < h) else {
                    continue;
                };
                for kx in 0..k {
                    let Some(xx) = (x + kx).checked_sub(pad).filter(|&v| v < w) else {
                        continue;
                    };
                    let inp = &input[(yy * w + xx) * ci..(yy * w + xx + 1) * ci];
                    let wk = &weights[(ky * k + kx) * ci * co..(ky * k + kx + 1) * ci * co];
                    for (&v, wrow) in inp.iter().zip(wk.chunks_exact(co)) {
                        if v == 0.0 {
                            continue;
                        }
                        for (acc, &wt) in o.iter_mut().zip(wrow) {
                            *acc += v * wt;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates parameter gradients into `grad` and, when `grad_input` is
/// given, the gradient with respect to the layer input.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    spec: &LayerSpec,
    params: &[f64],
    input: &[f64],
    dout: &[f64],
    h: usize,
    w: usize,
    grad: Option<&mut [f64]>,
    grad_input: Option<&mut [f64]>,
) {
    if let Some(g) = grad {
        match spec.out_ch {
            2 => param_grad_n::<2>(spec, input, dout, h, w, g),
            3 => param_grad_n::<3>(spec, input, dout, h, w, g),
            4 => param_grad_n::<4>(spec, input, dout, h, w, g),
            8 => param_grad_n::<8>(spec, input, dout, h, w, g),
            16 => param_grad_n::<16>(spec, input, dout, h, w, g),
            _ => backward_any(spec, params, input, dout, h, w, Some(g), None),
        }
    }
    if let Some(gi) = grad_input {
        match (spec.in_ch, spec.out_ch) {
            (8, 16) => input_grad_n::<8, 16>(spec, params, dout, h, w, gi),
            (16, 4) => input_grad_n::<16, 4>(spec, params, dout, h, w, gi),
            (16, 3) => input_grad_n::<16, 3>(spec, params, dout, h, w, gi),
            (16, 2) => input_grad_n::<16, 2>(spec, params, dout, h, w, gi),
            _ => backward_any(spec, params, input, dout, h, w, None, Some(gi)),
        }
    }
}

/// Weight and bias gradients, one register-resident accumulator per
/// (tap, input channel) swept over all pixels.
fn param_grad_n<const N: usize>(spec: &LayerSpec, input: &[f64], dout: &[f64], h: usize, w: usize, grad: &mut [f64]) {
    let (k, ci) = (spec.kernel, spec.in_ch);
    let pad = k / 2;
    let (dw, db) = grad.split_at_mut(spec.weight_count());
    let mut bias = [0.0; N];
    for d in dout.chunks_exact(N) {
        for j in 0..N {
            bias[j] += d[j];
        }
    }
    for (b, v) in db.iter_mut().zip(bias) {
        *b += v;
    }
    for ky in 0..k {
        let rows = valid(ky, pad, h);
        for kx in 0..k {
            let cols = valid(kx, pad, w);
            for c in 0..ci {
                let mut acc = [0.0; N];
                for y in rows.clone() {
                    let yy = y + ky - pad;
                    for x in cols.clone() {
                        let v = input[(yy * w + x + kx - pad) * ci + c];
                        if v == 0.0 {
                            continue;
                        }
                        let d: &[f64; N] = dout[(y * w + x) * N..][..N].try_into().expect("N channels");
                        for j in 0..N {
                            acc[j] += v * d[j];
                        }
                    }
                }
                let dst = &mut dw[((ky * k + kx) * ci + c) * N..][..N];
                for (g, a) in dst.iter_mut().zip(acc) {
                    *g += a;
                }
            }
        }
    }
}

/// Input gradient gathered per input pixel over all taps.
fn input_grad_n<const CI: usize, const N: usize>(
    spec: &LayerSpec,
    params: &[f64],
    dout: &[f64],
    h: usize,
    w: usize,
    grad_input: &mut [f64],
) {
    let k = spec.kernel;
    let pad = k / 2;
    // Transposed taps: wt[tap][j][c].
    let mut wt = vec![0.0; k * k * N * CI];
    for tap in 0..k * k {
        for c in 0..CI {
            for j in 0..N {
                wt[(tap * N + j) * CI + c] = params[(tap * CI + c) * N + j];
            }
        }
    }
    for yy in 0..h {
        for xx in 0..w {
            let mut acc = [0.0; CI];
            for ky in 0..k {
                // Output row y with y + ky - pad == yy.
                let Some(y) = (yy + pad).checked_sub(ky).filter(|&v| v < h) else {
                    continue;
                };
                for kx in 0..k {
                    let Some(x) = (xx + pad).checked_sub(kx).filter(|&v| v < w) else {
                        continue;
                    };
                    let d = &dout[(y * w + x) * N..][..N];
                    let taps = &wt[(ky * k + kx) * N * CI..][..N * CI];
                    for (&g, row) in d.iter().zip(taps.chunks_exact(CI)) {
                        if g == 0.0 {
                            continue;
                        }
                        let row: &[f64; CI] = row.try_into().expect("row of CI weights");
                        for c in 0..CI {
                            acc[c] += g * row[c];
                        }
                    }
                }
            }
            for (gi, a) in grad_input[(yy * w + xx) * CI..][..CI].iter_mut().zip(acc) {
                *gi += a;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_any(
    spec: &LayerSpec,
    params: &[f64],
    input: &[f64],
    dout: &[f64],
    h: usize,
    w: usize,
    grad: Option<&mut [f64]>,
    mut grad_input: Option<&mut [f64]>,
) {
    let (k, ci, co) = (spec.kernel, spec.in_ch, spec.out_ch);
    let pad = k / 2;
    let wc = spec.weight_count();
    let weights = &params[..wc];
    let mut grad = grad.map(|g| g.split_at_mut(wc));
    for y in 0..h {
        for x in 0..w {
            let d = &dout[(y * w + x) * co..(y * w + x + 1) * co];
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            if let Some((_, db)) = grad.as_mut() {
                for (b, &g) in db.iter_mut().zip(d) {
                    *b += g;
                }
            }
            for ky in 0..k {
                let Some(yy) = (y + ky).checked_sub(pad).filter(|&v| v < h) else {
                    continue;
                };
                for kx in 0..k {
                    let Some(xx) = (x + kx).checked_sub(pad).filter(|&v| v < w) else {
                        continue;
                    };
                    let base = (ky * k + kx) * ci * co;
                    let in_off = (yy * w + xx) * ci;
                    if let Some((dw, _)) = grad.as_mut() {
                        let inp = &input[in_off..in_off + ci];
                        let dwk = &mut dw[base..base + ci * co];
                        for (&v, dwrow) in inp.iter().zip(dwk.chunks_exact_mut(co)) {
                            if v == 0.0 {
                                continue;
                            }
                            for (acc, &g) in dwrow.iter_mut().zip(d) {
                                *acc += v * g;
                            }
                        }
                    }
                    if let Some(gi) = grad_input.as_deref_mut() {
                        let wk = &weights[base..base + ci * co];
                        for (acc, wrow) in gi[in_off..in_off + ci].iter_mut().zip(wk.chunks_exact(co)) {
                            let mut s = 0.0;
                            for (&wt, &g) in wrow.iter().zip(d) {
                                s += wt * g;
                            }
                            *acc += s;
                        }
                    }
                }
            }
        }
    }
}
