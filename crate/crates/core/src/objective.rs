//! Class-weighted multi-label binary cross-entropy per head and the summed
//! four-head objective.

use gradtape::{Real, Tensor};

use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::model::DecoderOutput;
use crate::taxonomy::{NUM_INSTRUMENTS, NUM_TARGETS, NUM_TRIPLETS, NUM_VERBS};

pub const WEIGHT_MIN: f64 = 0.1;
pub const WEIGHT_MAX: f64 = 100.0;

/// Positive-term weights, all finite and `> 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    w: Vec<f64>,
}

impl ClassWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Data(format!(
                "class weight {i} is {v}, must be positive and finite"
            )));
        }
        Ok(ClassWeights { w })
    }

    pub fn uniform(classes: usize) -> Self {
        ClassWeights {
            w: vec![1.0; classes],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// `W_c = total / (C * max(count_c, 1))`, clamped to `[0.1, 100]`.
pub fn class_weights(positive_counts: &[i64], total: i64) -> Result<ClassWeights> {
    if total < 1 {
        return Err(Error::Data(format!(
            "total sample count {total} must be at least 1"
        )));
    }
    let c = positive_counts.len() as f64;
    let w = positive_counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if n < 0 || n > total {
                return Err(Error::Data(format!(
                    "positive count {n} for class {i} outside 0..={total}"
                )));
            }
            Ok((total as f64 / (c * n.max(1) as f64)).clamp(WEIGHT_MIN, WEIGHT_MAX))
        })
        .collect::<Result<Vec<_>>>()?;
    ClassWeights::new(w)
}

/// `max(z, 0) + ln(1 + e^-|z|)`, finite for every finite `z`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sum_c (1/N) sum_n [W_c y softplus(-z) + (1 - y) softplus(z)]` over
/// `[N, C]` logits `z` and binary labels `y`.
pub fn weighted_bce<T: Real>(
    logits: &Tensor<T>,
    labels: &Tensor<T>,
    weights: &ClassWeights,
) -> Result<Tensor<T>> {
    let s = logits.shape();
    if s.len() != 2 || labels.shape() != s || weights.len() != s[1] {
        return Err(gradtape::TensorError::dim(
            "weighted_bce",
            format!(
                "logits {s:?}, labels {:?} and {} weights disagree",
                labels.shape(),
                weights.len()
            ),
        )
        .into());
    }
    let (n, c) = (s[0], s[1]);
    let y: Vec<f64> = labels.to_f64_vec();
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data(format!("label value {bad} is not binary")));
    }
    let z: Vec<f64> = logits.to_f64_vec();
    let w = weights.as_slice().to_vec();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for i in 0..n * c {
        let wc = w[i % c];
        loss += wc * y[i] * softplus(-z[i]) + (1.0 - y[i]) * softplus(z[i]);
    }
    loss *= inv_n;
    Ok(Tensor::from_op(
        "weighted_bce",
        vec![T::cast(loss)],
        vec![1],
        vec![logits.clone()],
        Box::new(move |g: &[T]| {
            let up = g[0].as_f64() * inv_n;
            let grad = (0..z.len())
                .map(|i| {
                    let wc = w[i % c];
                    T::cast(up * (-wc * y[i] * sigmoid(-z[i]) + (1.0 - y[i]) * sigmoid(z[i])))
                })
                .collect();
            vec![Some(grad)]
        }),
    )?)
}

/// Unweighted sum of the four head losses.
pub fn total_loss<T: Real>(
    l_i: &Tensor<T>,
    l_v: &Tensor<T>,
    l_t: &Tensor<T>,
    l_ivt: &Tensor<T>,
) -> Result<Tensor<T>> {
    for (name, l) in [
        ("instrument", l_i),
        ("verb", l_v),
        ("target", l_t),
        ("triplet", l_ivt),
    ] {
        let v = l.item()?.as_f64();
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{name} loss is {v}")));
        }
    }
    Ok(l_i.add(l_v)?.add(l_t)?.add(l_ivt)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub instrument: ClassWeights,
    pub verb: ClassWeights,
    pub target: ClassWeights,
    pub triplet: ClassWeights,
}

impl HeadWeights {
    pub fn uniform() -> Self {
        HeadWeights {
            instrument: ClassWeights::uniform(NUM_INSTRUMENTS),
            verb: ClassWeights::uniform(NUM_VERBS),
            target: ClassWeights::uniform(NUM_TARGETS),
            triplet: ClassWeights::uniform(NUM_TRIPLETS),
        }
    }

    /// Inverse-frequency weights from the positive counts of `labels`.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a LabelVector>) -> Result<Self> {
        let mut counts = [
            vec![0i64; NUM_INSTRUMENTS],
            vec![0; NUM_VERBS],
            vec![0; NUM_TARGETS],
            vec![0; NUM_TRIPLETS],
        ];
        let mut total = 0i64;
        for l in labels {
            total += 1;
            for (acc, v) in counts
                .iter_mut()
                .zip([&l.instrument, &l.verb, &l.target, &l.triplet])
            {
                for (a, &b) in acc.iter_mut().zip(v) {
                    *a += i64::from(b);
                }
            }
        }
        let [i, v, t, ivt] = counts;
        Ok(HeadWeights {
            instrument: class_weights(&i, total)?,
            verb: class_weights(&v, total)?,
            target: class_weights(&t, total)?,
            triplet: class_weights(&ivt, total)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LossBreakdown<T: Real> {
    pub total: Tensor<T>,
    pub instrument: f64,
    pub verb: f64,
    pub target: f64,
    pub triplet: f64,
}

/// `[N, C]` tensor of one head's flags.
pub fn label_tensor<T: Real>(
    labels: &[LabelVector],
    head: impl Fn(&LabelVector) -> &[u8],
) -> Result<Tensor<T>> {
    let c = labels.first().map(|l| head(l).len()).unwrap_or(0);
    let data = labels
        .iter()
        .flat_map(|l| head(l).iter().map(|&b| T::cast(f64::from(b))))
        .collect();
    Ok(Tensor::new(data, &[labels.len(), c])?)
}

/// Four-head loss on the labels of each clip's last frame.
pub fn model_loss<T: Real>(
    out: &DecoderOutput<T>,
    labels: &[LabelVector],
    weights: &HeadWeights,
) -> Result<LossBreakdown<T>> {
    let l_i = weighted_bce(
        &out.y_i,
        &label_tensor(labels, |l| &l.instrument)?,
        &weights.instrument,
    )?;
    let l_v = weighted_bce(&out.y_v, &label_tensor(labels, |l| &l.verb)?, &weights.verb)?;
    let l_t = weighted_bce(
        &out.y_t,
        &label_tensor(labels, |l| &l.target)?,
        &weights.target,
    )?;
    let l_ivt = weighted_bce(
        &out.y_ivt,
        &label_tensor(labels, |l| &l.triplet)?,
        &weights.triplet,
    )?;
    let total = total_loss(&l_i, &l_v, &l_t, &l_ivt)?;
    let v = |t: &Tensor<T>| t.data()[0].as_f64();
    Ok(LossBreakdown {
        instrument: v(&l_i),
        verb: v(&l_v),
        target: v(&l_t),
        triplet: v(&l_ivt),
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradtape::grad_check::grad_check;

    fn scalar_bce(z: f64, y: f64, w: f64) -> f64 {
        let logits = Tensor::<f64>::from_f64(&[z], &[1, 1]).unwrap();
        let labels = Tensor::<f64>::from_f64(&[y], &[1, 1]).unwrap();
        weighted_bce(&logits, &labels, &ClassWeights::new(vec![w]).unwrap())
            .unwrap()
            .item()
            .unwrap()
    }

    #[test]
    fn hand_values() {
        assert!((scalar_bce(0.0, 1.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((scalar_bce(0.0, 1.0, 2.0) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(scalar_bce(80.0, 1.0, 1.0) < 1e-30);
        assert!(scalar_bce(-80.0, 0.0, 1.0) < 1e-30);
        assert!((scalar_bce(-80.0, 1.0, 1.0) - 80.0).abs() < 1e-9);
    }

    #[test]
    fn weights_scale_only_the_positive_term() {
        assert_eq!(scalar_bce(0.3, 0.0, 1.0), scalar_bce(0.3, 0.0, 7.0));
    }

    #[test]
    fn non_binary_labels_rejected() {
        let logits = Tensor::<f64>::from_f64(&[0.0], &[1, 1]).unwrap();
        let labels = Tensor::<f64>::from_f64(&[0.5], &[1, 1]).unwrap();
        assert!(matches!(
            weighted_bce(&logits, &labels, &ClassWeights::uniform(1)),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn gradient_matches_central_difference() {
        let labels = Tensor::<f64>::from_f64(&[1., 0., 0., 1., 1., 0.], &[2, 3]).unwrap();
        let w = ClassWeights::new(vec![2.0, 0.5, 3.0]).unwrap();
        let z = Tensor::<f64>::from_f64(&[0.3, -1.2, 2.5, -0.7, 4.0, 0.0], &[2, 3]).unwrap();
        let err = grad_check(
            |x| {
                weighted_bce(x, &labels, &w).map_err(|e| match e {
                    Error::Tensor(t) => t,
                    other => panic!("{other}"),
                })
            },
            &z,
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn class_weight_formula() {
        let w = class_weights(&[25, 25, 25, 25], 100).unwrap();
        assert_eq!(w.as_slice(), &[1.0; 4]);
        let w = class_weights(&[5, 0], 20).unwrap();
        assert_eq!(w.as_slice(), &[2.0, 10.0]);
        let w = class_weights(&[0], 1000).unwrap();
        assert_eq!(w.as_slice(), &[100.0]);
        assert!(matches!(class_weights(&[-1], 10), Err(Error::Data(_))));
    }

    #[test]
    fn total_loss_names_the_head() {
        let ok = Tensor::<f64>::scalar(1.0);
        let bad = Tensor::<f64>::scalar(f64::NAN);
        match total_loss(&ok, &ok, &bad, &ok) {
            Err(Error::Numeric(m)) => assert!(m.contains("target")),
            other => panic!("{other:?}"),
        }
        let s = total_loss(
            &ok,
            &Tensor::scalar(2.0),
            &Tensor::scalar(3.0),
            &Tensor::scalar(4.0),
        )
        .unwrap();
        assert_eq!(s.item().unwrap(), 10.0);
    }
}
