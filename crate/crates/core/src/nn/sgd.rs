use crate::error::{Error, Result};
use crate::nn::network::{Gradients, Network};
use crate::tensor::Scalar;

/// Stochastic gradient descent with classical momentum:
/// `v = momentum * v - lr * g; w = w + v`, one zero-initialised velocity
/// buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub lr: T,
    pub momentum: T,
    velocity: Option<Gradients<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: T, momentum: T) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: None,
        }
    }

    pub fn step(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != net.params().len() {
            return Err(Error::shape("gradient layer count does not match the network"));
        }
        for (params, g) in net.params().iter().zip(&grads.layers) {
            match (params, g) {
                (Some(p), Some(g))
                    if p.weights.len() == g.weights.len() && p.biases.len() == g.biases.len() => {}
                (None, None) => {}
                _ => return Err(Error::shape("gradient shapes do not match the network")),
            }
        }
        let velocity = self.velocity.get_or_insert_with(|| Gradients::zeros_like(net));
        let (lr, momentum) = (self.lr, self.momentum);
        for ((params, g), v) in net
            .params_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(velocity.layers.iter_mut())
        {
            let (Some(p), Some(g), Some(v)) = (params.as_mut(), g.as_ref(), v.as_mut()) else {
                continue;
            };
            update(p.weights.data_mut(), &g.weights, &mut v.weights, lr, momentum);
            update(&mut p.biases, &g.biases, &mut v.biases, lr, momentum);
        }
        Ok(())
    }
}

fn update<T: Scalar>(w: &mut [T], g: &[T], v: &mut [T], lr: T, momentum: T) {
    for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = momentum * *v - lr * g;
        *w = *w + *v;
    }
}
