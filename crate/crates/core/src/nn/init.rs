use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::nn::network::Network;
use crate::tensor::Scalar;

/// Xavier (Glorot) uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Draws every weight uniformly within the layer's Xavier bound and zeroes
/// the biases. Layers are filled in order, so a seeded generator gives
/// bit-identical parameters.
pub fn xavier_init<T: Scalar, R: Rng + ?Sized>(net: &mut Network<T>, rng: &mut R) {
    let layers = net.layers().to_vec();
    for (layer, params) in layers.iter().zip(net.params_mut()) {
        let Some(p) = params.as_mut() else { continue };
        let (fan_in, fan_out) = layer.fans();
        let bound = xavier_bound(fan_in, fan_out);
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in p.weights.data_mut() {
            *w = T::from_f64_lossy(dist.sample(rng));
        }
        p.biases.fill(T::zero());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_params() {
        let mut a = Network::<f32>::canonical();
        let mut b = Network::<f32>::canonical();
        xavier_init(&mut a, &mut ChaCha8Rng::seed_from_u64(11));
        xavier_init(&mut b, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        let mut c = Network::<f32>::canonical();
        xavier_init(&mut c, &mut ChaCha8Rng::seed_from_u64(12));
        assert_ne!(a, c);
    }

    #[test]
    fn weights_within_bounds_and_centered() {
        let mut net = Network::<f32>::canonical();
        xavier_init(&mut net, &mut ChaCha8Rng::seed_from_u64(3));
        let fc2 = net.params()[8].as_ref().unwrap();
        let bound = xavier_bound(50, 10);
        assert!((bound - 0.316_227_766).abs() < 1e-8);
        assert!(fc2.weights.data().iter().all(|&w| (w as f64).abs() <= bound + 1e-7));

        let fc1 = net.params()[6].as_ref().unwrap();
        assert_eq!(fc1.weights.len(), 49_000);
        let b1 = xavier_bound(980, 50);
        let mean = fc1.weights.data().iter().map(|&w| w as f64).sum::<f64>() / 49_000.0;
        let sigma_of_mean = b1 / 3f64.sqrt() / 49_000f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma_of_mean, "mean {mean}");
        assert!(net.params().iter().flatten().all(|p| p.biases.iter().all(|&b| b == 0.0)));
    }
}
