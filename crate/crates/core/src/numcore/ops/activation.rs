use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::numcore::{Array, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
    /// Exact Gaussian-CDF form, `x * Φ(x)`.
    Gelu,
    Relu,
    Sigmoid,
    Tanh,
    Softplus,
}

#[inline]
fn sigmoid<F: Real>(x: F) -> F {
    // Split on sign so exp never overflows.
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

#[inline]
fn gaussian_cdf<F: Real>(x: F) -> F {
    F::lit(0.5) * (F::one() + (x * F::lit(FRAC_1_SQRT_2)).erf())
}

impl Activation {
    #[inline]
    pub fn apply<F: Real>(self, x: F) -> F {
        match self {
            Activation::Silu => x * sigmoid(x),
            Activation::Gelu => x * gaussian_cdf(x),
            Activation::Relu => x.max(F::zero()),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Softplus => {
                // log(1 + e^x) = max(x, 0) + log(1 + e^{-|x|})
                x.max(F::zero()) + (-x.abs()).exp().ln_1p()
            }
        }
    }

    /// Derivative at input `x` with forward output `y`.
    #[inline]
    pub fn derivative<F: Real>(self, x: F, y: F) -> F {
        match self {
            Activation::Silu => {
                let s = sigmoid(x);
                s * (F::one() + x * (F::one() - s))
            }
            Activation::Gelu => {
                let pdf = (-(x * x) * F::lit(0.5)).exp() / F::lit((2.0 * PI).sqrt());
                gaussian_cdf(x) + x * pdf
            }
            Activation::Relu => {
                if x > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Sigmoid => y * (F::one() - y),
            Activation::Tanh => F::one() - y * y,
            Activation::Softplus => sigmoid(x),
        }
    }
}

pub fn activation<F: Real>(x: &Array<F>, kind: Activation) -> Array<F> {
    x.map(|v| kind.apply(v))
}

pub fn activation_backward<F: Real>(
    kind: Activation,
    x: &Array<F>,
    y: &Array<F>,
    g: &Array<F>,
) -> Array<F> {
    let data = x
        .data()
        .iter()
        .zip(y.data())
        .zip(g.data())
        .map(|((&xv, &yv), &gv)| gv * kind.derivative(xv, yv))
        .collect();
    Array::new(x.shape().to_vec(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points_at_zero() {
        assert_eq!(Activation::Silu.apply(0.0f64), 0.0);
        assert_eq!(Activation::Gelu.apply(0.0f64), 0.0);
        assert_eq!(Activation::Relu.apply(-3.0f64), 0.0);
    }

    #[test]
    fn silu_at_one() {
        // 1 / (1 + e^-1), evaluated independently
        let expected = 0.731_058_578_630_004_9_f64;
        assert!((Activation::Silu.apply(1.0f64) - expected).abs() < 1e-15);
    }

    #[test]
    fn gelu_uses_exact_cdf() {
        // Φ(1) = 0.841344746068543
        assert!((Activation::Gelu.apply(1.0f64) - 0.841_344_746_068_543).abs() < 1e-13);
    }

    #[test]
    fn stable_for_large_inputs() {
        for kind in [
            Activation::Silu,
            Activation::Sigmoid,
            Activation::Softplus,
            Activation::Gelu,
        ] {
            for x in [-1e4f64, 1e4] {
                assert!(kind.apply(x).is_finite());
                assert!(kind.derivative(x, kind.apply(x)).is_finite());
            }
        }
    }
}
