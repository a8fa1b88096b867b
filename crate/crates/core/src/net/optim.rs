use crate::error::{Error, Result};

use super::{Gradients, NetParams};

/// Plain gradient descent: `params - lr * grads`.
pub fn sgd_step(params: &NetParams, grads: &Gradients, lr: f64) -> Result<NetParams> {
    if grads.len() != params.len() {
        return Err(Error::invalid(format!(
            "gradient has {} entries, parameters have {}",
            grads.len(),
            params.len()
        )));
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!(
            "learning rate {lr} must be finite and non-negative"
        )));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("gradient contains non-finite values".into()));
    }
    let mut out = params.clone();
    for (p, g) in out.values.iter_mut().zip(&grads.values) {
        *p -= lr * g;
    }
    Ok(out)
}

/// Poly schedule `lr0 * (1 - iter / total)^power`.
pub fn poly_lr(iter: usize, total: usize, lr0: f64, power: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("poly schedule needs a positive iteration count"));
    }
    if iter > total {
        return Err(Error::invalid(format!("iteration {iter} exceeds total {total}")));
    }
    Ok(lr0 * (1.0 - iter as f64 / total as f64).powf(power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Architecture, Role};

    fn two_params(v: [f64; 2]) -> NetParams {
        // The vector length is all sgd_step inspects.
        let mut p = NetParams::zeros(Architecture::default_for(2), Role::Student);
        p.values = v.to_vec();
        p
    }

    #[test]
    fn sgd_examples() {
        let p = two_params([1.0, 2.0]);
        let g = Gradients {
            values: vec![0.5, -1.0],
        };
        let q = sgd_step(&p, &g, 0.1).unwrap();
        assert!((q.values[0] - 0.95).abs() < 1e-15 && (q.values[1] - 2.1).abs() < 1e-15);
        assert_eq!(sgd_step(&p, &g, 0.0).unwrap(), p);

        let twice = sgd_step(&sgd_step(&p, &g, 0.1).unwrap(), &g, 0.1).unwrap();
        let mut g2 = g.clone();
        g2.scale(2.0);
        let once = sgd_step(&p, &g2, 0.1).unwrap();
        for (a, b) in twice.values.iter().zip(&once.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_rejects_bad_input() {
        let p = two_params([1.0, 2.0]);
        assert!(sgd_step(&p, &Gradients::zeros(3), 0.1).is_err());
        let nan = Gradients {
            values: vec![f64::NAN, 0.0],
        };
        assert!(matches!(sgd_step(&p, &nan, 0.1), Err(Error::Numeric(_))));
    }

    #[test]
    fn poly_examples() {
        assert_eq!(poly_lr(0, 100, 0.01, 0.9).unwrap(), 0.01);
        assert_eq!(poly_lr(100, 100, 0.01, 0.9).unwrap(), 0.0);
        let half = poly_lr(50, 100, 0.01, 0.9).unwrap();
        assert!((half - 0.01 * 0.5f64.powf(0.9)).abs() < 1e-15);
        assert!((half - 0.005359).abs() < 1e-6);
        assert!(poly_lr(0, 0, 0.01, 0.9).is_err());
        let lrs: Vec<f64> = (0..=100).map(|i| poly_lr(i, 100, 0.01, 0.9).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }
}
