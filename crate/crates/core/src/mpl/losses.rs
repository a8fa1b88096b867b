use crate::augment::{sm2c, Mixed, Sm2cConfig};
use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::net::{
    backward, forward, forward_logits, predict_hard, sgd_step, softmax, softmax_ce, softmax_ce_soft, Gradients,
    NetParams,
};
use crate::rng::RngState;

use super::config::FeedbackMode;

/// Mean over images of the per-image mean pixel cross-entropy, with its
/// exact parameter gradient.
pub fn batch_ce(params: &NetParams, images: &[Image], targets: &[LabelMap]) -> Result<(f64, Gradients)> {
    if images.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if images.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            images.len(),
            targets.len()
        )));
    }
    let n = images.len() as f64;
    let mut total = 0.0;
    let mut grads = Gradients::zeros(params.len());
    for (img, y) in images.iter().zip(targets) {
        let (logits, cache) = forward(params, img)?;
        let (loss, dlogits) = softmax_ce(&logits, y)?;
        total += loss;
        grads.add_scaled(&backward(params, &cache, &dlogits)?, 1.0 / n);
    }
    Ok((total / n, grads))
}

/// Mean loss only, without the backward pass.
pub fn batch_ce_value(params: &NetParams, images: &[Image], targets: &[LabelMap]) -> Result<f64> {
    if images.is_empty() || images.len() != targets.len() {
        return Err(Error::invalid("batch is empty or images and labels differ in count"));
    }
    let mut total = 0.0;
    for (img, y) in images.iter().zip(targets) {
        total += softmax_ce(&forward_logits(params, img)?, y)?.0;
    }
    Ok(total / images.len() as f64)
}

pub(crate) struct StudentUpdate {
    pub params: NetParams,
    pub loss: f64,
    pub grad: Gradients,
}

pub(crate) fn student_update(
    theta_s: &NetParams,
    x_u: &[Image],
    pl_u: &[LabelMap],
    eta_s: f64,
) -> Result<StudentUpdate> {
    let (loss, grad) = batch_ce(theta_s, x_u, pl_u)?;
    let params = sgd_step(theta_s, &grad, eta_s)?;
    Ok(StudentUpdate { params, loss, grad })
}

/// One SGD step of the student on teacher pseudo-labels. Returns the new
/// parameters and the loss before the step.
pub fn student_step(theta_s: &NetParams, x_u: &[Image], pl_u: &[LabelMap], eta_s: f64) -> Result<(NetParams, f64)> {
    let u = student_update(theta_s, x_u, pl_u, eta_s)?;
    Ok((u.params, u.loss))
}

/// Supervised cross-entropy of the teacher on ground-truth labels.
pub fn teacher_supervised_loss(theta_t: &NetParams, x_l: &[Image], y_l: &[LabelMap]) -> Result<(f64, Gradients)> {
    if y_l.len() < x_l.len() {
        return Err(Error::invalid(format!(
            "{} labeled images but only {} labels",
            x_l.len(),
            y_l.len()
        )));
    }
    batch_ce(theta_t, x_l, y_l)
}

/// Pseudo-labels the images with the teacher and runs the mixing pipeline
/// on the resulting pairs. The labels are the fixed targets of the
/// consistency loss.
pub fn consistency_targets(theta_t: &NetParams, x_u4: &[Image], cfg: &Sm2cConfig, rng: &mut RngState) -> Result<Mixed> {
    if x_u4.len() != cfg.k {
        return Err(Error::invalid(format!(
            "consistency branch needs exactly {} images, got {}",
            cfg.k,
            x_u4.len()
        )));
    }
    let pairs = x_u4
        .iter()
        .map(|x| Ok((x.clone(), predict_hard(theta_t, x)?)))
        .collect::<Result<Vec<_>>>()?;
    sm2c(&pairs, cfg, rng)
}

/// Weighted cross-entropy of the teacher's prediction on mixed images
/// against the mixed pseudo-labels. Labels are treated as constants.
pub fn consistency_loss_on(theta_t: &NetParams, mixed: &Mixed, omega: f64) -> Result<(f64, Gradients)> {
    if omega == 0.0 {
        return Ok((0.0, Gradients::zeros(theta_t.len())));
    }
    let (images, labels): (Vec<Image>, Vec<LabelMap>) =
        mixed.pairs().into_iter().map(|(i, l)| (i.clone(), l.clone())).unzip();
    let (loss, mut grad) = batch_ce(theta_t, &images, &labels)?;
    grad.scale(omega);
    Ok((omega * loss, grad))
}

/// Consistency loss of the teacher on exactly `K` unlabeled images:
/// hard pseudo-labels, one mixing draw, then weighted cross-entropy with no
/// gradient through the pseudo-labels.
pub fn uda_consistency_loss(
    theta_t: &NetParams,
    x_u4: &[Image],
    cfg: &Sm2cConfig,
    omega: f64,
    rng: &mut RngState,
) -> Result<(f64, Gradients)> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::invalid(format!("omega must be >= 0, got {omega}")));
    }
    let mixed = consistency_targets(theta_t, x_u4, cfg, rng)?;
    consistency_loss_on(theta_t, &mixed, omega)
}

/// Output of [`feedback_grad`].
#[derive(Debug, Clone)]
pub struct Feedback {
    /// Scalar feedback coefficient.
    pub h: f64,
    /// Teacher cross-entropy on its own pseudo-labels, `CE(pl_u, f_T(x_u))`.
    pub teacher_ce: f64,
    pub grad: Gradients,
}

impl Feedback {
    /// The scalar logged as the feedback loss: `h * CE(pl_u, f_T(x_u))`.
    pub fn loss(&self) -> f64 {
        self.h * self.teacher_ce
    }
}

/// Labeled batch for the feedback signal.
#[derive(Debug, Clone, Copy)]
pub struct LabeledBatch<'a> {
    pub images: &'a [Image],
    pub labels: &'a [LabelMap],
}

/// Unlabeled batch with the pseudo-labels the student was trained on.
#[derive(Debug, Clone, Copy)]
pub struct PseudoBatch<'a> {
    pub images: &'a [Image],
    pub labels: &'a [LabelMap],
}

fn check_shapes(theta_t: &NetParams, before: &NetParams, after: &NetParams) -> Result<()> {
    if before.arch != after.arch || before.len() != after.len() {
        return Err(Error::invalid(
            "student parameters before and after the step differ in shape",
        ));
    }
    if theta_t.arch.classes() != before.arch.classes() {
        return Err(Error::invalid("teacher and student disagree on the number of classes"));
    }
    theta_t.validate()?;
    before.validate()?;
    after.validate()
}

/// Teacher gradient of the student's post-update labeled loss.
///
/// `Approx` uses `h = eta_s * <grad L_l(theta_s_after), grad L_u(theta_s_before)>`
/// and returns `h * grad_T CE(pl_u, f_T(x_u))`.
///
/// `ExactFd` differentiates `L_l(theta_s - eta_s * grad CE(softmax f_T(x_u), f_S(x_u)))`
/// with central differences in every teacher coordinate. Hard pseudo-labels
/// are piecewise constant in the teacher, so this oracle differentiates
/// through the teacher's soft output instead; `theta_s_after` only
/// contributes to `h`.
#[allow(clippy::too_many_arguments)]
pub fn feedback_grad(
    theta_t: &NetParams,
    theta_s_before: &NetParams,
    theta_s_after: &NetParams,
    labeled: LabeledBatch<'_>,
    unlabeled: PseudoBatch<'_>,
    eta_s: f64,
    mode: FeedbackMode,
) -> Result<Feedback> {
    check_shapes(theta_t, theta_s_before, theta_s_after)?;
    let (_, g_u) = batch_ce(theta_s_before, unlabeled.images, unlabeled.labels)?;
    feedback_with(
        theta_t,
        theta_s_before,
        theta_s_after,
        labeled,
        unlabeled,
        &g_u,
        eta_s,
        mode,
    )
}

/// As [`feedback_grad`] with the student's unlabeled gradient supplied.
#[allow(clippy::too_many_arguments)]
pub(crate) fn feedback_with(
    theta_t: &NetParams,
    theta_s_before: &NetParams,
    theta_s_after: &NetParams,
    labeled: LabeledBatch<'_>,
    unlabeled: PseudoBatch<'_>,
    g_u: &Gradients,
    eta_s: f64,
    mode: FeedbackMode,
) -> Result<Feedback> {
    let (_, g_l) = batch_ce(theta_s_after, labeled.images, labeled.labels)?;
    let h = eta_s * g_l.dot(g_u);
    match mode {
        FeedbackMode::Off => Ok(Feedback {
            h: 0.0,
            teacher_ce: 0.0,
            grad: Gradients::zeros(theta_t.len()),
        }),
        FeedbackMode::Approx => {
            let (teacher_ce, mut grad) = batch_ce(theta_t, unlabeled.images, unlabeled.labels)?;
            grad.scale(h);
            Ok(Feedback { h, teacher_ce, grad })
        }
        FeedbackMode::ExactFd => {
            let teacher_ce = batch_ce_value(theta_t, unlabeled.images, unlabeled.labels)?;
            let grad = exact_feedback_fd(theta_t, theta_s_before, labeled, unlabeled.images, eta_s)?;
            Ok(Feedback { h, teacher_ce, grad })
        }
    }
}

/// Student labeled loss after one soft-target step driven by `theta_t`.
pub fn post_update_labeled_loss(
    theta_t: &NetParams,
    theta_s: &NetParams,
    labeled: LabeledBatch<'_>,
    x_u: &[Image],
    eta_s: f64,
) -> Result<f64> {
    if x_u.is_empty() {
        return Err(Error::invalid("empty unlabeled batch"));
    }
    let n = x_u.len() as f64;
    let mut g = Gradients::zeros(theta_s.len());
    for x in x_u {
        let target = softmax(&forward_logits(theta_t, x)?);
        let (logits, cache) = forward(theta_s, x)?;
        let (_, dlogits) = softmax_ce_soft(&logits, &target)?;
        g.add_scaled(&backward(theta_s, &cache, &dlogits)?, 1.0 / n);
    }
    let after = sgd_step(theta_s, &g, eta_s)?;
    batch_ce_value(&after, labeled.images, labeled.labels)
}

const FD_STEP: f64 = 1e-5;

fn exact_feedback_fd(
    theta_t: &NetParams,
    theta_s: &NetParams,
    labeled: LabeledBatch<'_>,
    x_u: &[Image],
    eta_s: f64,
) -> Result<Gradients> {
    let mut grad = Gradients::zeros(theta_t.len());
    let mut probe = theta_t.clone();
    for i in 0..theta_t.len() {
        let v = theta_t.values[i];
        probe.values[i] = v + FD_STEP;
        let up = post_update_labeled_loss(&probe, theta_s, labeled, x_u, eta_s)?;
        probe.values[i] = v - FD_STEP;
        let down = post_update_labeled_loss(&probe, theta_s, labeled, x_u, eta_s)?;
        probe.values[i] = v;
        grad.values[i] = (up - down) / (2.0 * FD_STEP);
    }
    Ok(grad)
}
