//! Bit-stream sources: PRBS7 and run-length-limited random streams standing
//! in for 8b/10b-coded data, plus run-length statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Length of the PRBS7 maximal sequence.
pub const PRBS7_PERIOD: usize = 127;

/// State of the x^7 + x^6 + 1 Fibonacci LFSR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prbs7State(u8);

impl Prbs7State {
    pub fn new(register: u8) -> Result<Self> {
        let register = register & 0x7f;
        if register == 0 {
            return Err(Error::InvalidState(
                "PRBS7 register must not be all-zero".into(),
            ));
        }
        Ok(Prbs7State(register))
    }

    pub fn register(self) -> u8 {
        self.0
    }

    /// Emits the next bit and the advanced state.
    pub fn next_bit(self) -> (bool, Prbs7State) {
        let feedback = ((self.0 >> 6) ^ (self.0 >> 5)) & 1;
        let next = ((self.0 << 1) | feedback) & 0x7f;
        (feedback == 1, Prbs7State(next))
    }
}

impl Default for Prbs7State {
    fn default() -> Self {
        Prbs7State(0x7f)
    }
}

/// Iterator over an endless PRBS7 stream.
#[derive(Debug, Clone)]
pub struct Prbs7 {
    state: Prbs7State,
}

impl Prbs7 {
    pub fn new(state: Prbs7State) -> Self {
        Prbs7 { state }
    }
}

impl Iterator for Prbs7 {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        let (bit, next) = self.state.next_bit();
        self.state = next;
        Some(bit)
    }
}

/// Random binary stream whose runs extend with probability `p_extend` and are
/// cut at `max_cid` bits.
#[derive(Debug, Clone)]
pub struct RllStream {
    max_cid: u32,
    p_extend: f64,
    rng: ChaCha8Rng,
    level: bool,
    remaining: u32,
}

impl RllStream {
    pub fn new(max_cid: u32, p_extend: f64, seed: u64) -> Result<Self> {
        if max_cid == 0 {
            return Err(invalid("max_cid", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&p_extend) {
            return Err(invalid(
                "p_extend",
                format!("must lie in [0, 1), got {p_extend}"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let level = rng.random::<bool>();
        let mut stream = RllStream {
            max_cid,
            p_extend,
            rng,
            // Flipped on the first run.
            level: !level,
            remaining: 0,
        };
        stream.start_run();
        Ok(stream)
    }

    fn start_run(&mut self) {
        let mut len = 1;
        while len < self.max_cid && self.rng.random::<f64>() < self.p_extend {
            len += 1;
        }
        self.level = !self.level;
        self.remaining = len;
    }
}

impl Iterator for RllStream {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        if self.remaining == 0 {
            self.start_run();
        }
        self.remaining -= 1;
        Some(self.level)
    }
}

/// Collects `n_bits` from a run-length-limited stream.
pub fn rll_stream(max_cid: u32, p_extend: f64, seed: u64, n_bits: usize) -> Result<Vec<bool>> {
    Ok(RllStream::new(max_cid, p_extend, seed)?
        .take(n_bits)
        .collect())
}

/// Probability of each run length `L = 1..=L_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDist {
    probs: Vec<f64>,
}

impl RunDist {
    /// Builds a distribution from weights for `L = 1, 2, ...`, normalizing
    /// them to unit sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("run_dist", "needs at least one run length"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("run_dist", "weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("run_dist", "weights must not all be zero"));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        while probs.last() == Some(&0.0) {
            probs.pop();
        }
        Ok(RunDist { probs })
    }

    /// All runs have length `len`.
    pub fn fixed(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(invalid("run_length", "must be >= 1"));
        }
        let mut w = vec![0.0; len];
        w[len - 1] = 1.0;
        Self::from_weights(&w)
    }

    /// Run lengths produced by [`RllStream`]: `p_L = (1-p) p^(L-1)` below the
    /// cap and `p^(L_max-1)` at it.
    pub fn truncated_geometric(p_extend: f64, max_cid: u32) -> Result<Self> {
        if max_cid == 0 {
            return Err(invalid("max_cid", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&p_extend) {
            return Err(invalid(
                "p_extend",
                format!("must lie in [0, 1), got {p_extend}"),
            ));
        }
        let m = max_cid as usize;
        let w: Vec<f64> = (1..=m)
            .map(|l| {
                if l < m {
                    (1.0 - p_extend) * p_extend.powi(l as i32 - 1)
                } else {
                    p_extend.powi(l as i32 - 1)
                }
            })
            .collect();
        Self::from_weights(&w)
    }

    /// Cyclic run statistics of one full PRBS7 period.
    pub fn prbs7() -> Self {
        let bits: Vec<bool> = Prbs7::new(Prbs7State::default())
            .take(PRBS7_PERIOD)
            .collect();
        cyclic_run_length_histogram(&bits).expect("PRBS7 period has runs")
    }

    /// `(L, p_L)` pairs with non-zero probability.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (i as u32 + 1, *p))
    }

    pub fn prob(&self, len: u32) -> f64 {
        if len == 0 {
            return 0.0;
        }
        self.probs.get(len as usize - 1).copied().unwrap_or(0.0)
    }

    pub fn max_len(&self) -> u32 {
        self.probs.len() as u32
    }

    /// Expected run length.
    pub fn mean_len(&self) -> f64 {
        self.iter().map(|(l, p)| l as f64 * p).sum()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn runs(bits: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut len = 0;
    for (i, &b) in bits.iter().enumerate() {
        if i > 0 && b != bits[i - 1] {
            out.push(len);
            len = 0;
        }
        len += 1;
    }
    if len > 0 {
        out.push(len);
    }
    out
}

fn histogram(run_lengths: &[usize]) -> Result<RunDist> {
    let max = run_lengths.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0.0; max];
    for &l in run_lengths {
        counts[l - 1] += 1.0;
    }
    RunDist::from_weights(&counts)
}

/// Normalized histogram of the maximal runs in `bits`, discarding the partial
/// runs touching either end.
pub fn run_length_histogram(bits: &[bool]) -> Result<RunDist> {
    if bits.len() < 2 {
        return Err(Error::TooShort(format!(
            "need >= 2 bits, got {}",
            bits.len()
        )));
    }
    let all = runs(bits);
    if all.len() < 3 {
        return Err(Error::TooShort("no complete interior run".into()));
    }
    histogram(&all[1..all.len() - 1])
}

/// Run-length histogram of `bits` treated as one period of a cyclic stream.
pub fn cyclic_run_length_histogram(bits: &[bool]) -> Result<RunDist> {
    if bits.len() < 2 {
        return Err(Error::TooShort(format!(
            "need >= 2 bits, got {}",
            bits.len()
        )));
    }
    let Some(start) = (1..bits.len()).find(|&i| bits[i] != bits[i - 1]) else {
        return Err(Error::TooShort("constant sequence has no runs".into()));
    };
    let rotated: Vec<bool> = bits[start..]
        .iter()
        .chain(&bits[..start])
        .copied()
        .collect();
    histogram(&runs(&rotated))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_prbs_state_rejected() {
        assert!(Prbs7State::new(0).is_err());
        assert!(Prbs7State::new(0x80).is_err());
        assert!(Prbs7State::new(1).is_ok());
    }

    #[test]
    fn rll_max_cid_one_alternates() {
        let bits = rll_stream(1, 0.9, 3, 64).unwrap();
        assert!(bits.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn rll_zero_extend_alternates() {
        let bits = rll_stream(5, 0.0, 3, 64).unwrap();
        assert!(bits.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn rll_rejects_bad_parameters() {
        assert!(RllStream::new(0, 0.5, 1).is_err());
        assert!(RllStream::new(5, 1.0, 1).is_err());
        assert!(RllStream::new(5, -0.1, 1).is_err());
    }

    #[test]
    fn histogram_discards_boundary_runs() {
        let bits = [false, false, true, false, true, true, true];
        let h = run_length_histogram(&bits).unwrap();
        assert_eq!(h.probs(), &[1.0]);
        assert!(run_length_histogram(&[true]).is_err());
        assert!(run_length_histogram(&[true, true, false, false]).is_err());
    }

    #[test]
    fn truncated_geometric_reference() {
        let d = RunDist::truncated_geometric(0.5, 5).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.25, 0.125, 0.0625, 0.0625]);
        let s: f64 = d.probs().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_run_dist() {
        let d = RunDist::fixed(5).unwrap();
        assert_eq!(d.iter().collect::<Vec<_>>(), vec![(5, 1.0)]);
        assert_eq!(d.mean_len(), 5.0);
    }
}
