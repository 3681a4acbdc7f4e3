use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Maps the mother codeword onto the transmitted codeword.
///
/// Transmitted position `j` carries mother bit `source[j]`. When the target is
/// shorter, randomly chosen mother bits are deleted and the rest keep their
/// order. When it is longer, the whole mother codeword is sent followed by the
/// extra copies, each mother bit being repeated either `floor` or `ceil` of the
/// average number of extra times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateAdapter {
    mother_len: usize,
    source: Vec<u32>,
}

impl RateAdapter {
    pub fn new(mother_len: usize, target_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = if target_len <= mother_len {
            let mut keep: Vec<u32> = index::sample(&mut rng, mother_len, target_len)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            keep.sort_unstable();
            keep
        } else {
            let mut source: Vec<u32> = (0..mother_len as u32).collect();
            let extra = target_len - mother_len;
            let mut copies: Vec<u32> = Vec::with_capacity(extra);
            for _ in 0..extra / mother_len {
                copies.extend(0..mother_len as u32);
            }
            copies.extend(
                index::sample(&mut rng, mother_len, extra % mother_len)
                    .into_iter()
                    .map(|i| i as u32),
            );
            copies.shuffle(&mut rng);
            source.extend(copies);
            source
        };
        Self { mother_len, source }
    }

    pub fn mother_len(&self) -> usize {
        self.mother_len
    }

    pub fn target_len(&self) -> usize {
        self.source.len()
    }

    pub fn source(&self) -> &[u32] {
        &self.source
    }

    pub fn deleted(&self) -> usize {
        self.mother_len.saturating_sub(self.source.len())
    }

    pub fn repeated(&self) -> usize {
        self.source.len().saturating_sub(self.mother_len)
    }

    pub fn adapt<T: Copy>(&self, mother: &[T]) -> Vec<T> {
        assert_eq!(mother.len(), self.mother_len);
        self.source.iter().map(|&i| mother[i as usize]).collect()
    }

    /// LLR adjoint: deleted bits get 0, copies are summed.
    pub fn deadapt_llr(&self, transmitted: &[f64]) -> Vec<f64> {
        assert_eq!(transmitted.len(), self.source.len());
        let mut mother = vec![0.0; self.mother_len];
        for (&i, &v) in self.source.iter().zip(transmitted) {
            mother[i as usize] += v;
        }
        mother
    }
}
