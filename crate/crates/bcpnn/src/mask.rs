//! Binary HC-to-HC connectivity.
//!
//! `ConnectivityMask` records which input hypercolumns feed which hidden
//! hypercolumns. When an input HC is connected ("active") to a hidden HC, all
//! MC-to-MC weights between them participate in inference; a silent pair
//! carries zero weight. The per-hidden-HC count of active incoming
//! connections is fixed at initialization and preserved by every flip.

use crate::error::{Error, Result};
use rand::Rng;

/// Sparse input-to-hidden connectivity at hypercolumn granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityMask {
    n_input_hcs: usize,
    n_hidden_hcs: usize,
    /// Entry (i, j) at `m[j * n_input_hcs + i]`; hidden-HC-major so each
    /// hidden HC's incoming column is contiguous.
    m: Vec<u8>,
    in_degree: Vec<u32>,
    /// Sorted active input HC indices per hidden HC; kept in lockstep with `m`.
    active_inputs: Vec<Vec<u32>>,
}

impl ConnectivityMask {
    /// Draws every entry i.i.d. Bernoulli(p_ih). A hidden HC must end up with
    /// at least one active incoming connection, so an all-zero column is
    /// redrawn. Columns are drawn in hidden-HC order, entries in input-HC
    /// order; redraws consume further values from `rng`, keeping the whole
    /// procedure deterministic for a given generator state.
    pub fn bernoulli(
        n_input_hcs: usize,
        n_hidden_hcs: usize,
        p_ih: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(p_ih > 0.0 && p_ih <= 1.0) {
            return Err(Error::invalid("p_ih", format!("got {p_ih}, need (0,1]")));
        }
        if n_input_hcs == 0 || n_hidden_hcs == 0 {
            return Err(Error::invalid("mask dims", "need at least one HC per side"));
        }
        let mut m = vec![0u8; n_input_hcs * n_hidden_hcs];
        for j in 0..n_hidden_hcs {
            let col = &mut m[j * n_input_hcs..(j + 1) * n_input_hcs];
            loop {
                let mut any = false;
                for e in col.iter_mut() {
                    let active = rng.random::<f64>() < p_ih;
                    *e = active as u8;
                    any |= active;
                }
                if any {
                    break;
                }
            }
        }
        Ok(Self::from_entries(n_input_hcs, n_hidden_hcs, m))
    }

    /// Fully connected mask.
    pub fn full(n_input_hcs: usize, n_hidden_hcs: usize) -> Self {
        Self::from_entries(
            n_input_hcs,
            n_hidden_hcs,
            vec![1u8; n_input_hcs * n_hidden_hcs],
        )
    }

    /// Builds from explicit 0/1 entries laid out hidden-HC-major.
    pub fn from_entries(n_input_hcs: usize, n_hidden_hcs: usize, m: Vec<u8>) -> Self {
        assert_eq!(m.len(), n_input_hcs * n_hidden_hcs);
        debug_assert!(m.iter().all(|&e| e <= 1));
        let mut in_degree = vec![0u32; n_hidden_hcs];
        let mut active_inputs = vec![Vec::new(); n_hidden_hcs];
        for j in 0..n_hidden_hcs {
            for i in 0..n_input_hcs {
                if m[j * n_input_hcs + i] == 1 {
                    in_degree[j] += 1;
                    active_inputs[j].push(i as u32);
                }
            }
        }
        ConnectivityMask {
            n_input_hcs,
            n_hidden_hcs,
            m,
            in_degree,
            active_inputs,
        }
    }

    pub fn n_input_hcs(&self) -> usize {
        self.n_input_hcs
    }

    pub fn n_hidden_hcs(&self) -> usize {
        self.n_hidden_hcs
    }

    pub fn is_active(&self, input_hc: usize, hidden_hc: usize) -> bool {
        self.m[hidden_hc * self.n_input_hcs + input_hc] == 1
    }

    /// Active incoming connections of hidden HC `j`.
    pub fn in_degree(&self, hidden_hc: usize) -> u32 {
        self.in_degree[hidden_hc]
    }

    pub fn in_degrees(&self) -> &[u32] {
        &self.in_degree
    }

    /// Active outgoing connections of input HC `i`.
    pub fn out_degree(&self, input_hc: usize) -> u32 {
        (0..self.n_hidden_hcs)
            .map(|j| self.m[j * self.n_input_hcs + input_hc] as u32)
            .sum()
    }

    /// All outgoing degrees in one pass.
    pub fn out_degrees(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.n_input_hcs];
        for j in 0..self.n_hidden_hcs {
            let col = &self.m[j * self.n_input_hcs..(j + 1) * self.n_input_hcs];
            for (i, &e) in col.iter().enumerate() {
                out[i] += e as u32;
            }
        }
        out
    }

    /// Sorted active input HC indices of hidden HC `j`.
    pub fn active_inputs(&self, hidden_hc: usize) -> &[u32] {
        &self.active_inputs[hidden_hc]
    }

    /// Silent input HC indices of hidden HC `j`, ascending.
    pub fn silent_inputs(&self, hidden_hc: usize) -> Vec<u32> {
        let col = &self.m[hidden_hc * self.n_input_hcs..(hidden_hc + 1) * self.n_input_hcs];
        col.iter()
            .enumerate()
            .filter(|(_, &e)| e == 0)
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Executes one flip on hidden HC `j`: silences `silence_i` and activates
    /// `activate_i` atomically, so the in-degree never changes.
    pub(crate) fn swap(&mut self, hidden_hc: usize, silence_i: usize, activate_i: usize) {
        let base = hidden_hc * self.n_input_hcs;
        debug_assert_eq!(self.m[base + silence_i], 1, "silencing a silent entry");
        debug_assert_eq!(self.m[base + activate_i], 0, "activating an active entry");
        self.m[base + silence_i] = 0;
        self.m[base + activate_i] = 1;
        let list = &mut self.active_inputs[hidden_hc];
        let pos = list.binary_search(&(silence_i as u32)).unwrap();
        list.remove(pos);
        let ins = list.binary_search(&(activate_i as u32)).unwrap_err();
        list.insert(ins, activate_i as u32);
    }

    /// Packs the mask as a bitmap in row-major, input-HC-major order: bit
    /// index `i * n_hidden_hcs + j`, least-significant bit first within each
    /// byte. This is the checkpoint wire format.
    pub fn to_packed_bitmap(&self) -> Vec<u8> {
        let nbits = self.n_input_hcs * self.n_hidden_hcs;
        let mut out = vec![0u8; nbits.div_ceil(8)];
        for i in 0..self.n_input_hcs {
            for j in 0..self.n_hidden_hcs {
                if self.is_active(i, j) {
                    let bit = i * self.n_hidden_hcs + j;
                    out[bit / 8] |= 1 << (bit % 8);
                }
            }
        }
        out
    }

    /// Inverse of [`to_packed_bitmap`](Self::to_packed_bitmap).
    pub fn from_packed_bitmap(
        n_input_hcs: usize,
        n_hidden_hcs: usize,
        bytes: &[u8],
    ) -> Result<Self> {
        let nbits = n_input_hcs * n_hidden_hcs;
        if bytes.len() != nbits.div_ceil(8) {
            return Err(Error::format(format!(
                "mask bitmap length {} does not match {} bits",
                bytes.len(),
                nbits
            )));
        }
        let mut m = vec![0u8; nbits];
        for i in 0..n_input_hcs {
            for j in 0..n_hidden_hcs {
                let bit = i * n_hidden_hcs + j;
                if bytes[bit / 8] >> (bit % 8) & 1 == 1 {
                    m[j * n_input_hcs + i] = 1;
                }
            }
        }
        Ok(Self::from_entries(n_input_hcs, n_hidden_hcs, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bernoulli_one_connects_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = ConnectivityMask::bernoulli(5, 3, 1.0, &mut rng).unwrap();
        for j in 0..3 {
            assert_eq!(m.in_degree(j), 5);
        }
        for i in 0..5 {
            assert_eq!(m.out_degree(i), 3);
        }
    }

    #[test]
    fn bernoulli_mean_in_degree_matches_binomial() {
        // Binomial mean N * p_ih; Monte Carlo over 100 seeds stays within 10%.
        let n = 784;
        let p = 0.08;
        let expected = n as f64 * p;
        let mut total = 0u64;
        let mut count = 0u64;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = ConnectivityMask::bernoulli(n, 30, p, &mut rng).unwrap();
            total += m.in_degrees().iter().map(|&d| d as u64).sum::<u64>();
            count += 30;
        }
        let mean = total as f64 / count as f64;
        assert!(
            (mean - expected).abs() < 0.1 * expected,
            "mean in-degree {mean} vs binomial mean {expected}"
        );
    }

    #[test]
    fn zero_in_degree_columns_are_redrawn() {
        // Tiny p on a tiny mask: without the redraw rule most columns would
        // come out empty.
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = ConnectivityMask::bernoulli(4, 6, 0.05, &mut rng).unwrap();
            for j in 0..6 {
                assert!(m.in_degree(j) >= 1);
            }
        }
    }

    #[test]
    fn swap_preserves_in_degree_and_lists() {
        let mut m = ConnectivityMask::from_entries(4, 2, vec![1, 1, 0, 0, 0, 1, 1, 0]);
        assert_eq!(m.active_inputs(0), &[0, 1]);
        m.swap(0, 1, 3);
        assert_eq!(m.in_degree(0), 2);
        assert_eq!(m.active_inputs(0), &[0, 3]);
        assert!(!m.is_active(1, 0));
        assert!(m.is_active(3, 0));
    }

    #[test]
    fn bitmap_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ConnectivityMask::bernoulli(13, 7, 0.3, &mut rng).unwrap();
        let packed = m.to_packed_bitmap();
        let back = ConnectivityMask::from_packed_bitmap(13, 7, &packed).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn determinism_per_seed() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ConnectivityMask::bernoulli(20, 10, 0.2, &mut rng).unwrap()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }
}
