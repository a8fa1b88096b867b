use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::to_json;
use crate::augment::Sm2cConfig;
use crate::data::{gen_phantom, PhantomSpec};
use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::io_util::write_atomic;
use crate::mpl::{
    batch_ce, batch_ce_value, consistency_loss_on, consistency_targets, feedback_grad, student_step, FeedbackMode,
    LabeledBatch, PseudoBatch,
};
use crate::net::{forward, predict_hard, Architecture, Gradients, NetParams, Role};
use crate::rng::RngState;

pub const GRADCHECK_REPORT: &str = "gradcheck.json";

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random (network, image, target) triples for the network gradient check.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Random instances for the feedback comparison.
    #[arg(long, default_value_t = 20)]
    pub feedback_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const REL_FLOOR: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

fn relu_patterns(params: &NetParams, images: &[Image]) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for img in images {
        out.extend(forward(params, img)?.1.relu_pattern());
    }
    Ok(out)
}

/// Central differences of `loss` in every coordinate. The step shrinks when
/// a probe would cross a ReLU kink; coordinates sitting on a kink fall back
/// to the one-sided difference on the smooth side, or are skipped.
fn fd_gradient(
    params: &NetParams,
    images: &[Image],
    loss: &dyn Fn(&NetParams) -> Result<f64>,
) -> Result<(Gradients, usize)> {
    let base = relu_patterns(params, images)?;
    let f0 = loss(params)?;
    let mut probe = params.clone();
    let mut grad = Gradients::zeros(params.len());
    let mut skipped = 0;
    for i in 0..params.len() {
        let v = params.values[i];
        let mut found = None;
        let mut one_sided = None;
        for h in [1e-5, 1e-6, 1e-7] {
            probe.values[i] = v + h;
            let up_same = relu_patterns(&probe, images)? == base;
            let up = loss(&probe)?;
            probe.values[i] = v - h;
            let down_same = relu_patterns(&probe, images)? == base;
            let down = loss(&probe)?;
            probe.values[i] = v;
            if up_same && down_same {
                found = Some((up - down) / (2.0 * h));
                break;
            }
            if up_same {
                one_sided = Some((up - f0) / h);
            } else if down_same {
                one_sided = Some((f0 - down) / h);
            }
        }
        match found.or(one_sided) {
            Some(g) => grad.values[i] = g,
            None => {
                grad.values[i] = f64::NAN;
                skipped += 1;
            }
        }
    }
    Ok((grad, skipped))
}

fn max_rel_err(analytic: &Gradients, numeric: &Gradients) -> f64 {
    analytic
        .values
        .iter()
        .zip(&numeric.values)
        .filter(|(_, n)| n.is_finite())
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

fn random_image(h: usize, w: usize, rng: &mut RngState) -> Image {
    Image::from_fn(h, w, |_, _| rng.next_f64())
}

fn random_labels(h: usize, w: usize, classes: u8, rng: &mut RngState) -> LabelMap {
    let data = (0..h * w).map(|_| rng.below(classes as usize) as u8).collect();
    LabelMap::new(h, w, data, classes).expect("labels below class count")
}

fn random_params(arch: Architecture, rng: &mut RngState) -> NetParams {
    let mut p = NetParams::init(arch, Role::Teacher, rng);
    for v in &mut p.values {
        *v += 0.05 * (rng.next_f64() - 0.5);
    }
    p
}

fn check_network(trials: usize, root: &RngState) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for t in 0..trials {
        let mut rng = root.split(t as u64);
        let classes = 2 + rng.below(3) as u8;
        let (h, w) = (5 + rng.below(4), 5 + rng.below(4));
        let params = random_params(Architecture::default_for(classes as usize), &mut rng);
        let img = vec![random_image(h, w, &mut rng)];
        let target = vec![random_labels(h, w, classes, &mut rng)];
        let (_, analytic) = batch_ce(&params, &img, &target)?;
        let (numeric, s) = fd_gradient(&params, &img, &|p| batch_ce_value(p, &img, &target))?;
        worst = worst.max(max_rel_err(&analytic, &numeric));
        skipped += s;
    }
    Ok(CheckResult {
        name: "network_gradient".into(),
        passed: worst < GRAD_TOL,
        detail: format!("{trials} triples, max relative error {worst:.3e}, {skipped} kink coordinates skipped"),
        value: worst,
        threshold: GRAD_TOL,
    })
}

fn check_consistency(trials: usize, root: &RngState) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut rng = root.split(t as u64);
        let params = random_params(Architecture::default_for(4), &mut rng);
        let x: Vec<Image> = (0..4).map(|_| random_image(6, 6, &mut rng)).collect();
        let cfg = Sm2cConfig::default();
        let mut mix_rng = rng.split(99);
        let mixed = consistency_targets(&params, &x, &cfg, &mut mix_rng)?;
        let omega = 0.5 + rng.next_f64();
        let (_, analytic) = consistency_loss_on(&params, &mixed, omega)?;
        let images: Vec<Image> = mixed.pairs().into_iter().map(|(i, _)| i.clone()).collect();
        let (numeric, _) = fd_gradient(&params, &images, &|p| Ok(consistency_loss_on(p, &mixed, omega)?.0))?;
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }
    Ok(CheckResult {
        name: "consistency_gradient".into(),
        passed: worst < GRAD_TOL,
        detail: format!("{trials} instances with frozen mixed targets, max relative error {worst:.3e}"),
        value: worst,
        threshold: GRAD_TOL,
    })
}

fn tiny_phantoms(n: usize, rng: &mut RngState) -> Result<(Vec<Image>, Vec<LabelMap>)> {
    let spec = PhantomSpec {
        image_size: 10,
        noise_sigma: 0.02,
        class_dropout: vec![0.0; 4],
        ..PhantomSpec::default()
    };
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let (i, l) = gen_phantom(&spec, rng)?;
        images.push(i);
        labels.push(l);
    }
    Ok((images, labels))
}

/// Cosine between the first-order feedback and its finite-difference
/// counterpart on `trials` tiny instances.
pub fn feedback_cosines(trials: usize, root: &RngState) -> Result<Vec<f64>> {
    (0..trials)
        .map(|t| {
            let mut rng = root.split(t as u64);
            let arch = Architecture::default_for(4);
            let teacher = NetParams::init(arch.clone(), Role::Teacher, &mut rng);
            let student = NetParams::init(arch, Role::Student, &mut rng);
            let (x_l, y_l) = tiny_phantoms(2, &mut rng)?;
            let (x_u, _) = tiny_phantoms(2, &mut rng)?;
            let pl = x_u
                .iter()
                .map(|x| predict_hard(&teacher, x))
                .collect::<Result<Vec<_>>>()?;
            let eta = 0.5;
            let (after, _) = student_step(&student, &x_u, &pl, eta)?;
            let labeled = LabeledBatch {
                images: &x_l,
                labels: &y_l,
            };
            let unlabeled = PseudoBatch {
                images: &x_u,
                labels: &pl,
            };
            let approx = feedback_grad(
                &teacher,
                &student,
                &after,
                labeled,
                unlabeled,
                eta,
                FeedbackMode::Approx,
            )?;
            let exact = feedback_grad(
                &teacher,
                &student,
                &after,
                labeled,
                unlabeled,
                eta,
                FeedbackMode::ExactFd,
            )?;
            Ok(approx.grad.cosine(&exact.grad))
        })
        .collect()
}

fn check_feedback(trials: usize, root: &RngState) -> Result<CheckResult> {
    let cos = feedback_cosines(trials, root)?;
    let positive = cos.iter().filter(|&&c| c > 0.0).count();
    let needed = (trials * 4).div_ceil(5);
    Ok(CheckResult {
        name: "feedback_oracle".into(),
        passed: positive >= needed,
        detail: format!(
            "cosine > 0 in {positive}/{trials} instances (need {needed}); cosines {:?}",
            cos.iter().map(|c| (c * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
        value: positive as f64,
        threshold: needed as f64,
    })
}

/// Runs all gradient and feedback checks.
pub fn run_checks(seed: u64, trials: usize, feedback_trials: usize) -> Result<CheckReport> {
    let root = RngState::new(seed);
    let checks = vec![
        check_network(trials, &root.split(1))?,
        check_consistency(3, &root.split(2))?,
        check_feedback(feedback_trials, &root.split(3))?,
    ];
    Ok(CheckReport { seed, checks })
}

pub(super) fn run(args: &GradcheckArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let report = run_checks(seed.unwrap_or(0), args.trials, args.feedback_trials)?;
    write_atomic(&out.join(GRADCHECK_REPORT), to_json(&report).as_bytes())?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Error::CheckFailed("one or more gradient checks failed".into()))
    }
}
