use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

fn same_shape<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::dim(
            op,
            format!("shapes {:?} and {:?} differ", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

impl<T: Real> Tensor<T> {
    /// Pointwise map with derivative expressed through input and output.
    fn map_unary(
        &self,
        name: &'static str,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Tensor<T> {
        let out: Vec<T> = self.data().iter().map(|&x| f(x)).collect();
        let x = self.clone();
        let y = out.clone();
        Tensor::from_op(
            name,
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let gx = g
                    .iter()
                    .zip(x.data())
                    .zip(&y)
                    .map(|((&g, &x), &y)| g * df(x, y))
                    .collect();
                vec![Some(gx)]
            }),
        )
        .expect("unary op preserves shape")
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("add", self, other)?;
        let out = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a + b)
            .collect();
        Tensor::from_op(
            "add",
            out,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|g| vec![Some(g.to_vec()), Some(g.to_vec())]),
        )
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("sub", self, other)?;
        let out = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a - b)
            .collect();
        Tensor::from_op(
            "sub",
            out,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|g| vec![Some(g.to_vec()), Some(g.iter().map(|&v| -v).collect())]),
        )
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("mul", self, other)?;
        let out = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a * b)
            .collect();
        let (a, b) = (self.clone(), other.clone());
        Tensor::from_op(
            "mul",
            out,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let ga = a
                    .requires_grad()
                    .then(|| g.iter().zip(b.data()).map(|(&g, &b)| g * b).collect());
                let gb = b
                    .requires_grad()
                    .then(|| g.iter().zip(a.data()).map(|(&g, &a)| g * a).collect());
                vec![ga, gb]
            }),
        )
    }

    pub fn scale(&self, s: f64) -> Tensor<T> {
        let s = T::cast(s);
        self.map_unary("scale", |x| x * s, move |_, _| s)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor<T> {
        let c = T::cast(c);
        self.map_unary("add_scalar", |x| x + c, |_, _| T::one())
    }

    pub fn neg(&self) -> Tensor<T> {
        self.map_unary("neg", |x| -x, |_, _| -T::one())
    }

    pub fn relu(&self) -> Tensor<T> {
        self.map_unary(
            "relu",
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.map_unary("sigmoid", sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn exp(&self) -> Tensor<T> {
        self.map_unary("exp", |x| x.exp(), |_, y| y)
    }

    pub fn ln(&self) -> Tensor<T> {
        self.map_unary("ln", |x| x.ln(), |x, _| T::one() / x)
    }

    pub fn square(&self) -> Tensor<T> {
        self.map_unary("square", |x| x * x, |x, _| x + x)
    }
}

/// Overflow-free logistic function.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
