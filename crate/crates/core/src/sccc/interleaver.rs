use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A fixed permutation: `interleave(x)[i] = x[perm[i]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<u32>,
    inverse: Vec<u32>,
    seed: u64,
}

impl Interleaver {
    /// Uniformly random permutation of `0..len`.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut perm: Vec<u32> = (0..len as u32).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::build(perm, seed)
    }

    pub fn from_permutation(perm: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            let slot = seen
                .get_mut(p as usize)
                .ok_or_else(|| Error::Domain(format!("permutation entry {p} out of range")))?;
            if *slot {
                return Err(Error::Domain(format!("permutation repeats {p}")));
            }
            *slot = true;
        }
        Ok(Self::build(perm, 0))
    }

    fn build(perm: Vec<u32>, seed: u64) -> Self {
        let mut inverse = vec![0u32; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p as usize] = i as u32;
        }
        Self {
            perm,
            inverse,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[u32] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len());
        self.perm.iter().map(|&p| x[p as usize]).collect()
    }

    pub fn deinterleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len());
        self.inverse.iter().map(|&i| x[i as usize]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let pi = Interleaver::random(100, 9);
        let x: Vec<u32> = (0..100).collect();
        let y = pi.interleave(&x);
        assert_ne!(x, y);
        assert_eq!(pi.deinterleave(&y), x);
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(Interleaver::from_permutation(vec![0, 0, 1]).is_err());
        assert!(Interleaver::from_permutation(vec![0, 3]).is_err());
        assert!(Interleaver::from_permutation(vec![2, 0, 1]).is_ok());
    }
}
