use rand::Rng;

use super::alias::AliasTable;
use super::SgnsError;
use crate::walks::WalkCorpus;

/// Negative-sampling distribution: corpus counts raised to a power and
/// normalized.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    probs: Vec<f64>,
    sampler: AliasTable,
}

impl NoiseDistribution {
    /// `probs[v] = count[v]^power / sum_u count[u]^power`.
    pub fn from_counts(counts: &[u64], power: f64) -> Result<Self, SgnsError> {
        if counts.iter().all(|&c| c == 0) {
            return Err(SgnsError::EmptyCorpus);
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { (c as f64).powf(power) })
            .collect();
        let total: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(NoiseDistribution {
            probs,
            sampler: AliasTable::new(&weights),
        })
    }

    pub fn from_corpus(corpus: &WalkCorpus, power: f64) -> Result<Self, SgnsError> {
        Self::from_counts(&corpus.counts(), power)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sampler(&self) -> &AliasTable {
        &self.sampler
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_quarter_power() {
        let d = NoiseDistribution::from_counts(&[3, 1], 0.75).unwrap();
        // 3^0.75 = 2.279507...; 2.279507 / 3.279507
        assert_abs_diff_eq!(d.probs()[0], 0.695076, epsilon = 1e-6);
        assert_abs_diff_eq!(d.probs()[1], 0.304924, epsilon = 1e-6);
    }

    #[test]
    fn unit_power_is_proportional() {
        let d = NoiseDistribution::from_counts(&[3, 1], 1.0).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn uniform_counts_give_uniform_probs() {
        for power in [0.0, 0.5, 0.75, 2.0] {
            let d = NoiseDistribution::from_counts(&[7; 6], power).unwrap();
            for p in d.probs() {
                assert_abs_diff_eq!(*p, 1.0 / 6.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let counts: Vec<u64> = (0..500).map(|i| (i * 7919 % 131) as u64).collect();
        let d = NoiseDistribution::from_counts(&counts, 0.75).unwrap();
        assert_abs_diff_eq!(d.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert_eq!(d.probs()[0], 0.0);
    }

    #[test]
    fn all_zero_counts_rejected() {
        assert!(NoiseDistribution::from_counts(&[0, 0], 0.75).is_err());
    }
}
