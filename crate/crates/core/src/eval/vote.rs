use serde::Serialize;

use crate::binarize::model::BinarizedModel;
use crate::dataset::ROTATION_ANGLES;
use crate::error::{Error, Result};
use crate::nn::network::Network;
use crate::tensor::Tensor;
use crate::train::{argmax, TrainedModel};

/// Anything that maps a network input to class probabilities.
pub trait Classifier: Sync {
    fn probabilities(&self, input: &Tensor<f32>) -> Result<Vec<f32>>;
}

impl Classifier for Network<f32> {
    fn probabilities(&self, input: &Tensor<f32>) -> Result<Vec<f32>> {
        self.forward(input)
    }
}

impl Classifier for BinarizedModel {
    fn probabilities(&self, input: &Tensor<f32>) -> Result<Vec<f32>> {
        self.forward(input)
    }
}

impl Classifier for TrainedModel {
    fn probabilities(&self, input: &Tensor<f32>) -> Result<Vec<f32>> {
        self.forward(input)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vote {
    pub class: usize,
    /// Per-view argmax, in view order.
    pub votes: Vec<usize>,
    /// Probabilities averaged over the views.
    pub mean_probabilities: Vec<f32>,
}

/// Majority vote over per-view probability vectors. Ties go to the class
/// with the largest summed probability, then to the lowest index.
pub fn vote_from_probabilities(per_view: &[Vec<f32>]) -> Result<Vote> {
    let classes = per_view.first().map_or(0, Vec::len);
    if classes == 0 || per_view.iter().any(|p| p.len() != classes) {
        return Err(Error::shape("views must give equally sized, non-empty probability vectors"));
    }
    let votes: Vec<usize> = per_view.iter().map(|p| argmax(p)).collect();
    let mut tally = vec![0usize; classes];
    let mut sums = vec![0f64; classes];
    for (p, &v) in per_view.iter().zip(&votes) {
        tally[v] += 1;
        for (s, &x) in sums.iter_mut().zip(p) {
            *s += x as f64;
        }
    }
    let mut class = 0;
    for c in 1..classes {
        if tally[c] > tally[class] || (tally[c] == tally[class] && sums[c] > sums[class]) {
            class = c;
        }
    }
    let n = per_view.len() as f64;
    Ok(Vote {
        class,
        votes,
        mean_probabilities: sums.iter().map(|&s| (s / n) as f32).collect(),
    })
}

/// Classifies the nine rotated views of one frame by majority vote.
pub fn vote_classify<C: Classifier + ?Sized>(model: &C, views: &[Tensor<f32>]) -> Result<Vote> {
    if views.len() != ROTATION_ANGLES.len() {
        return Err(Error::invalid(format!(
            "voting needs {} views, got {}",
            ROTATION_ANGLES.len(),
            views.len()
        )));
    }
    let per_view = views.iter().map(|v| model.probabilities(v)).collect::<Result<Vec<_>>>()?;
    vote_from_probabilities(&per_view)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(c: usize) -> Vec<f32> {
        let mut p = vec![0.0; 10];
        p[c] = 1.0;
        p
    }

    #[test]
    fn clear_majority_and_unanimity() {
        let probs: Vec<Vec<f32>> = [3, 3, 3, 5, 5, 2, 3, 7, 3].iter().map(|&c| one_hot(c)).collect();
        let v = vote_from_probabilities(&probs).unwrap();
        assert_eq!(v.class, 3);
        assert_eq!(v.votes, [3, 3, 3, 5, 5, 2, 3, 7, 3]);
        let all: Vec<Vec<f32>> = (0..9).map(|_| one_hot(6)).collect();
        assert_eq!(vote_from_probabilities(&all).unwrap().class, 6);
    }

    #[test]
    fn three_way_tie_uses_probability_mass() {
        // Classes 1, 4 and 8 each win three views. Summed probabilities:
        // class 1: 3*0.5 + 3*0.2 + 3*0.1 = 2.4
        // class 4: 3*0.3 + 3*0.6 + 3*0.3 = 3.6
        // class 8: 3*0.2 + 3*0.2 + 3*0.6 = 3.0
        let row = |a: f32, b: f32, c: f32| {
            let mut p = vec![0.0; 10];
            p[1] = a;
            p[4] = b;
            p[8] = c;
            p
        };
        let mut probs = Vec::new();
        for _ in 0..3 {
            probs.push(row(0.5, 0.3, 0.2));
            probs.push(row(0.2, 0.6, 0.2));
            probs.push(row(0.1, 0.3, 0.6));
        }
        let v = vote_from_probabilities(&probs).unwrap();
        assert_eq!(v.class, 4);
        assert!((v.mean_probabilities[4] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn exact_tie_goes_to_lowest_index() {
        let probs = vec![one_hot(7), one_hot(2)];
        assert_eq!(vote_from_probabilities(&probs).unwrap().class, 2);
    }

    #[test]
    fn wrong_view_count() {
        let net = Network::<f32>::canonical();
        let views = vec![Tensor::zeros(&[50, 50, 1]); 8];
        assert!(vote_classify(&net, &views).is_err());
    }
}
