//! Central-difference verification of analytic gradients (64-bit only).

use crate::error::{Result, TensorError};
use crate::param::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over coordinates of |analytic - numeric| / max(1, |analytic|)
    pub max_rel_error: f64,
    /// (input or parameter index, coordinate) of the worst coordinate
    pub worst: (usize, usize),
    pub coordinates: usize,
}

fn eval_scalar(t: Result<Tensor<f64>>) -> Result<f64> {
    let t = t?;
    if t.numel() != 1 {
        return Err(TensorError::Contract(format!(
            "grad_check function must return a scalar, got shape {:?}",
            t.shape()
        )));
    }
    Ok(t.data()[0])
}

fn finite(v: f64, index: usize, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TensorError::Numeric {
            index,
            detail: format!("{what} is {v}"),
        })
    }
}

/// Checks `f` at `point`, perturbing every coordinate by `±step`.
pub fn grad_check<F>(f: F, point: &Tensor<f64>, step: f64) -> Result<f64>
where
    F: Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
{
    let report = grad_check_inputs(|xs| f(&xs[0]), std::slice::from_ref(point), step)?;
    Ok(report.max_rel_error)
}

/// Multi-input variant: `f` receives one tensor per entry of `points`.
pub fn grad_check_inputs<F>(f: F, points: &[Tensor<f64>], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    let leaves: Vec<Tensor<f64>> = points.iter().map(|p| p.with_requires_grad(true)).collect();
    let loss = f(&leaves)?;
    finite(eval_scalar(Ok(loss.clone()))?, 0, "loss")?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.numel()]))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    let mut flat = 0;
    for (pi, p) in points.iter().enumerate() {
        for j in 0..p.numel() {
            let probe = |delta: f64| -> Result<f64> {
                let mut inputs: Vec<Tensor<f64>> = points.iter().map(|q| q.detach()).collect();
                let mut d = p.data().to_vec();
                d[j] += delta;
                inputs[pi] = Tensor::new(d, p.shape())?;
                eval_scalar(f(&inputs))
            };
            let plus = finite(probe(step)?, flat, "f(x + h)")?;
            let minus = finite(probe(-step)?, flat, "f(x - h)")?;
            let numeric = (plus - minus) / (2.0 * step);
            let a = finite(analytic[pi][j], flat, "analytic gradient")?;
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, j);
            }
            flat += 1;
        }
    }
    report.coordinates = flat;
    Ok(report)
}

/// Checks `f` with respect to every parameter in `store`.
pub fn grad_check_params<F>(store: &mut ParamStore<f64>, f: F, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore<f64>) -> Result<Tensor<f64>>,
{
    store.set_requires_grad(true);
    store.zero_grad();
    let loss = f(store)?;
    finite(eval_scalar(Ok(loss.clone()))?, 0, "loss")?;
    loss.backward()?;
    let ids: Vec<_> = store.ids().collect();
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| {
            store
                .get(id)
                .grad()
                .unwrap_or_else(|| vec![0.0; store.get(id).numel()])
        })
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    let mut flat = 0;
    for (pi, &id) in ids.iter().enumerate() {
        let original = store.get(id).clone();
        for j in 0..original.numel() {
            let mut eval_at = |delta: f64| -> Result<f64> {
                let mut d = original.data().to_vec();
                d[j] += delta;
                store.replace(id, Tensor::new(d, original.shape())?)?;
                let v = eval_scalar(f(store));
                store.replace(id, original.clone())?;
                v
            };
            let plus = finite(eval_at(step)?, flat, "f(x + h)")?;
            let minus = finite(eval_at(-step)?, flat, "f(x - h)")?;
            let numeric = (plus - minus) / (2.0 * step);
            let a = finite(analytic[pi][j], flat, "analytic gradient")?;
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, j);
            }
            flat += 1;
        }
    }
    report.coordinates = flat;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let x = Tensor::<f64>::from_f64(&[0.3, -1.2, 4.0], &[3]).unwrap();
        let w = Tensor::<f64>::from_f64(&[2.0, -1.0, 0.5], &[3]).unwrap();
        let err = grad_check(|x| Ok(x.mul(&w)?.sum()), &x, 1e-3).unwrap();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn sigmoid_at_zero() {
        let x = Tensor::<f64>::from_f64(&[0.0], &[1]).unwrap();
        let err = grad_check(|x| Ok(x.sigmoid().sum()), &x, 1e-5).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn non_finite_values_report_coordinate() {
        let x = Tensor::<f64>::from_f64(&[1.0, 0.0], &[2]).unwrap();
        let err = grad_check(|x| Ok(x.ln().sum()), &x, 1e-3).unwrap_err();
        assert!(matches!(err, TensorError::Numeric { .. }), "{err}");
    }
}
