//! Discrete memoryless channel simulation.

use rand::Rng;
use thiserror::Error;

/// Errors from channel simulation.
#[derive(Debug, Error)]
pub enum SimError {
    /// An input symbol fell outside the channel's input alphabet.
    #[error("channel input symbol {symbol} outside alphabet of size {alphabet}")]
    AlphabetMismatch { symbol: usize, alphabet: usize },
}

/// Pass a block of symbols through a DMC given by its transition rows
/// `p_y_given_x[x][y]`.
pub fn simulate_dmc<R: Rng>(
    x: &[usize],
    p_y_given_x: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<usize>, SimError> {
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let row = p_y_given_x
            .get(xi)
            .ok_or(SimError::AlphabetMismatch { symbol: xi, alphabet: p_y_given_x.len() })?;
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        let mut out = row.len() - 1;
        for (yi, &p) in row.iter().enumerate() {
            acc += p;
            if draw < acc {
                out = yi;
                break;
            }
        }
        y.push(out);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn bsc(p: f64) -> Vec<Vec<f64>> {
        vec![vec![1.0 - p, p], vec![p, 1.0 - p]]
    }

    #[test]
    fn noiseless_channel_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let x = vec![0, 1, 1, 0, 1];
        assert_eq!(simulate_dmc(&x, &bsc(0.0), &mut rng).unwrap(), x);
    }

    #[test]
    fn always_flip_channel_inverts() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let x = vec![0, 1, 1, 0];
        assert_eq!(simulate_dmc(&x, &bsc(1.0), &mut rng).unwrap(), vec![1, 0, 0, 1]);
    }

    #[test]
    fn flip_frequency_matches_crossover() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 100_000usize;
        let x = vec![0usize; n];
        let y = simulate_dmc(&x, &bsc(0.1), &mut rng).unwrap();
        let flips = y.iter().filter(|&&b| b == 1).count() as f64 / n as f64;
        // 3 sigma of a Bernoulli(0.1) mean over 1e5 draws
        assert!((flips - 0.1).abs() < 3.0 * (0.1f64 * 0.9 / n as f64).sqrt());
    }

    #[test]
    fn out_of_alphabet_symbol_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let err = simulate_dmc(&[2], &bsc(0.1), &mut rng).unwrap_err();
        assert!(matches!(err, SimError::AlphabetMismatch { symbol: 2, alphabet: 2 }));
    }
}
