use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArlEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub runs: usize,
    /// Runs that reached the cap without a signal; counted at the cap.
    pub censored: usize,
}

/// Monte Carlo average run length. `run_length` simulates one chart from a
/// fresh state and returns the 1-based time of the first signal, or `None`
/// if it did not signal within `cap` steps. Run `r` draws from stream `r`
/// of a ChaCha8 generator seeded with `seed`, so results do not depend on
/// thread scheduling.
pub fn monte_carlo_arl<F>(runs: usize, cap: usize, seed: u64, run_length: F) -> ArlEstimate
where
    F: Fn(&mut ChaCha8Rng) -> Option<usize> + Sync,
{
    let lengths: Vec<(f64, bool)> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            match run_length(&mut rng) {
                Some(t) => (t.min(cap) as f64, false),
                None => (cap as f64, true),
            }
        })
        .collect();
    let n = lengths.len().max(1) as f64;
    let mean = lengths.iter().map(|l| l.0).sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l.0 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    ArlEstimate {
        mean,
        std_error: (var / n).sqrt(),
        runs,
        censored: lengths.iter().filter(|l| l.1).count(),
    }
}
