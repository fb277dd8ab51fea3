//! Dense building blocks shared by the encoder and the head: a scalar trait,
//! linear layers, and two-layer swish MLPs with explicit backward passes.

use std::fmt::Debug;

use ndarray::{Array1, Array2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// Floating-point element type of model tensors.
pub trait Real:
    Float
    + NumAssign + LinalgScalar + ScalarOperand + Debug + Send + Sync + Serialize + DeserializeOwned + 'static
{
    fn of(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("finite f64 converts")
    }

    fn to_f64(self) -> f64 {
        <f64 as num_traits::NumCast>::from(self).expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub fn swish<F: Real>(x: F) -> F {
    x * sigmoid(x)
}

/// d swish / dx = s + x s (1 - s).
pub fn swish_grad<F: Real>(x: F) -> F {
    let s = sigmoid(x);
    s + x * s * (F::one() - s)
}

/// `y = x W + b` with `W` stored input-major (`in x out`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Linear<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Real> Linear<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(rng: &mut impl Rng, inputs: usize, outputs: usize) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("valid range");
        Linear {
            weight: Array2::from_shape_simple_fn((inputs, outputs), || F::of(dist.sample(rng))),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn cast<G: Real>(&self) -> Linear<G> {
        Linear {
            weight: self.weight.mapv(|v| G::of(v.to_f64())),
            bias: self.bias.mapv(|v| G::of(v.to_f64())),
        }
    }

    pub(crate) fn slices(&self) -> Vec<&[F]> {
        vec![
            self.weight.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [F]> {
        vec![
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    pub(crate) fn names(prefix: &str) -> Vec<String> {
        vec![format!("{prefix}.weight"), format!("{prefix}.bias")]
    }
}

/// `linear -> swish -> linear`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Mlp<F> {
    pub first: Linear<F>,
    pub second: Linear<F>,
}

impl<F: Real> Mlp<F> {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Mlp {
            first: Linear::zeros(inputs, hidden),
            second: Linear::zeros(hidden, outputs),
        }
    }

    pub fn init(rng: &mut impl Rng, inputs: usize, hidden: usize, outputs: usize) -> Self {
        Mlp {
            first: Linear::init(rng, inputs, hidden),
            second: Linear::init(rng, hidden, outputs),
        }
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        self.forward_from_pre(&self.first.forward(x))
    }

    /// Output given the first layer's pre-activation.
    pub fn forward_from_pre(&self, pre: &Array2<F>) -> Array2<F> {
        self.second.forward(&pre.mapv(swish))
    }

    /// Accumulates gradients of everything except the first layer's weight
    /// into `grad` and returns the gradient w.r.t. the first pre-activation.
    pub fn backward_from_pre(&self, pre: &Array2<F>, dout: &Array2<F>, grad: &mut Mlp<F>) -> Array2<F> {
        let hidden = pre.mapv(swish);
        grad.second.weight += &hidden.t().dot(dout);
        grad.second.bias += &dout.sum_axis(Axis(0));
        let mut dpre = dout.dot(&self.second.weight.t());
        dpre.zip_mut_with(pre, |d, &p| *d *= swish_grad(p));
        grad.first.bias += &dpre.sum_axis(Axis(0));
        dpre
    }

    /// Full backward pass; returns the gradient w.r.t. the input.
    pub fn backward(&self, x: &Array2<F>, pre: &Array2<F>, dout: &Array2<F>, grad: &mut Mlp<F>) -> Array2<F> {
        let dpre = self.backward_from_pre(pre, dout, grad);
        grad.first.weight += &x.t().dot(&dpre);
        dpre.dot(&self.first.weight.t())
    }

    pub fn cast<G: Real>(&self) -> Mlp<G> {
        Mlp {
            first: self.first.cast(),
            second: self.second.cast(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp::zeros(self.first.inputs(), self.first.outputs(), self.second.outputs())
    }

    pub(crate) fn slices(&self) -> Vec<&[F]> {
        let mut v = self.first.slices();
        v.extend(self.second.slices());
        v
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [F]> {
        let mut v = self.first.slices_mut();
        v.extend(self.second.slices_mut());
        v
    }

    pub(crate) fn names(prefix: &str) -> Vec<String> {
        let mut v = Linear::<F>::names(&format!("{prefix}.0"));
        v.extend(Linear::<F>::names(&format!("{prefix}.1")));
        v
    }
}
