//! Rate-1/2, memory-3 convolutional codes and their log-MAP decoder.
//!
//! Bits are `0`/`1`; LLRs are `ln P(0) / P(1)`, so bit 0 maps to polarity +1.

use serde::{Deserialize, Serialize};

use crate::clip_llr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeKind {
    NonRecursive,
    RecursiveSystematic,
}

/// Generator description. Polynomials are bit masks with bit `i` the
/// coefficient of `X^i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvCodeSpec {
    pub kind: CodeKind,
    pub memory: usize,
    pub generators: [u32; 2],
    /// Feedback polynomial; unused for non-recursive codes.
    pub feedback: u32,
}

impl ConvCodeSpec {
    /// `[1 + X, 1 + X + X^3]`.
    pub fn outer() -> Self {
        Self {
            kind: CodeKind::NonRecursive,
            memory: 3,
            generators: [0b0011, 0b1011],
            feedback: 0,
        }
    }

    /// `[1, (1 + X + X^3) / (1 + X)]`. The systematic output is realised as
    /// `(1 + X) / (1 + X)`.
    pub fn inner() -> Self {
        Self {
            kind: CodeKind::RecursiveSystematic,
            memory: 3,
            generators: [0b0011, 0b1011],
            feedback: 0b0011,
        }
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    /// One encoder step: `(next_state, [out0, out1])`.
    pub fn step(&self, state: usize, input: u8) -> (usize, [u8; 2]) {
        let s = state as u32;
        let w = match self.kind {
            CodeKind::NonRecursive => input as u32 & 1,
            CodeKind::RecursiveSystematic => (input as u32 ^ parity(s & (self.feedback >> 1))) & 1,
        };
        let reg = w | (s << 1);
        let out = [
            parity(self.generators[0] & reg) as u8,
            parity(self.generators[1] & reg) as u8,
        ];
        (reg as usize & (self.num_states() - 1), out)
    }

    /// Input that drives the register toward the zero state.
    pub fn flush_input(&self, state: usize) -> u8 {
        match self.kind {
            CodeKind::NonRecursive => 0,
            CodeKind::RecursiveSystematic => parity(state as u32 & (self.feedback >> 1)) as u8,
        }
    }

    /// Encode from the zero state. With `terminate`, `memory` flush inputs are
    /// appended so the encoder ends in the zero state.
    pub fn encode(&self, bits: &[u8], terminate: bool) -> Vec<u8> {
        let tail = if terminate { self.memory } else { 0 };
        let mut out = Vec::with_capacity(2 * (bits.len() + tail));
        let mut state = 0;
        for &b in bits {
            let (next, o) = self.step(state, b);
            out.extend_from_slice(&o);
            state = next;
        }
        for _ in 0..tail {
            let (next, o) = self.step(state, self.flush_input(state));
            out.extend_from_slice(&o);
            state = next;
        }
        out
    }

    /// Full input sequence including flush bits, as seen by the decoder trellis.
    pub fn terminated_inputs(&self, bits: &[u8]) -> Vec<u8> {
        let mut inputs = bits.to_vec();
        let mut state = 0;
        for &b in bits {
            state = self.step(state, b).0;
        }
        for _ in 0..self.memory {
            let u = self.flush_input(state);
            inputs.push(u);
            state = self.step(state, u).0;
        }
        inputs
    }
}

fn parity(x: u32) -> u32 {
    x.count_ones() & 1
}

/// Two output streams of the outer code for a unit impulse of length `len`.
pub fn outer_impulse(len: usize) -> [Vec<u8>; 2] {
    let mut input = vec![0u8; len];
    if len > 0 {
        input[0] = 1;
    }
    let coded = ConvCodeSpec::outer().encode(&input, false);
    [
        coded.iter().step_by(2).copied().collect(),
        coded.iter().skip(1).step_by(2).copied().collect(),
    ]
}

/// Result of one MAP decoding.
#[derive(Clone, Debug)]
pub struct MapOutput {
    /// Posterior LLR of every input (one per trellis step).
    pub input_posterior: Vec<f64>,
    /// Posterior LLR of every coded bit (two per trellis step).
    pub output_posterior: Vec<f64>,
    /// `input_posterior - apriori`.
    pub input_extrinsic: Vec<f64>,
    /// `output_posterior - channel`.
    pub output_extrinsic: Vec<f64>,
}

#[inline]
fn max_star(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Clone, Copy)]
struct Branch {
    from: usize,
    to: usize,
    input: u8,
    out: [u8; 2],
}

fn sign(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Log-MAP (exact max*) decoding.
///
/// `channel` holds two LLRs per step, `apriori` one per step. A terminated
/// trellis ends in state 0; otherwise the final state is uniform.
pub fn map_decode(
    code: &ConvCodeSpec,
    channel: &[f64],
    apriori: &[f64],
    terminated: bool,
) -> MapOutput {
    let steps = apriori.len();
    assert_eq!(
        channel.len(),
        2 * steps,
        "channel LLRs must hold two values per step"
    );
    let ns = code.num_states();
    let branches: Vec<Branch> = (0..ns)
        .flat_map(|from| {
            (0..2u8).map(move |input| {
                let (to, out) = code.step(from, input);
                Branch {
                    from,
                    to,
                    input,
                    out,
                }
            })
        })
        .collect();

    let gamma = |k: usize, b: &Branch| {
        0.5 * (sign(b.input) * apriori[k]
            + sign(b.out[0]) * channel[2 * k]
            + sign(b.out[1]) * channel[2 * k + 1])
    };

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; (steps + 1) * ns];
    alpha[0] = 0.0;
    for k in 0..steps {
        let (cur, next) = alpha.split_at_mut((k + 1) * ns);
        let cur = &cur[k * ns..];
        let next = &mut next[..ns];
        for b in &branches {
            if cur[b.from] > neg {
                next[b.to] = max_star(next[b.to], cur[b.from] + gamma(k, b));
            }
        }
        let top = next.iter().cloned().fold(neg, f64::max);
        for v in next.iter_mut() {
            *v -= top;
        }
    }

    let mut beta = vec![neg; (steps + 1) * ns];
    if terminated {
        beta[steps * ns] = 0.0;
    } else {
        beta[steps * ns..].fill(0.0);
    }
    for k in (0..steps).rev() {
        let (cur, next) = beta.split_at_mut((k + 1) * ns);
        let cur = &mut cur[k * ns..];
        let next = &next[..ns];
        for b in &branches {
            if next[b.to] > neg {
                cur[b.from] = max_star(cur[b.from], next[b.to] + gamma(k, b));
            }
        }
        let top = cur.iter().cloned().fold(neg, f64::max);
        for v in cur.iter_mut() {
            *v -= top;
        }
    }

    let mut input_posterior = vec![0.0; steps];
    let mut output_posterior = vec![0.0; 2 * steps];
    for k in 0..steps {
        let mut acc_in = [neg; 2];
        let mut acc_out = [[neg; 2]; 2];
        for b in &branches {
            let m = alpha[k * ns + b.from] + gamma(k, b) + beta[(k + 1) * ns + b.to];
            if m == neg {
                continue;
            }
            acc_in[b.input as usize] = max_star(acc_in[b.input as usize], m);
            for j in 0..2 {
                acc_out[j][b.out[j] as usize] = max_star(acc_out[j][b.out[j] as usize], m);
            }
        }
        input_posterior[k] = clip_llr(acc_in[0] - acc_in[1]);
        for j in 0..2 {
            output_posterior[2 * k + j] = clip_llr(acc_out[j][0] - acc_out[j][1]);
        }
    }

    let input_extrinsic = input_posterior
        .iter()
        .zip(apriori)
        .map(|(p, a)| clip_llr(p - a))
        .collect();
    let output_extrinsic = output_posterior
        .iter()
        .zip(channel)
        .map(|(p, c)| clip_llr(p - c))
        .collect();
    MapOutput {
        input_posterior,
        output_posterior,
        input_extrinsic,
        output_extrinsic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_response() {
        let [a, b] = outer_impulse(6);
        assert_eq!(a, vec![1, 1, 0, 0, 0, 0]);
        assert_eq!(b, vec![1, 1, 0, 1, 0, 0]);
    }

    #[test]
    fn linearity() {
        let code = ConvCodeSpec::outer();
        let x = [1, 0, 1, 1, 0, 0, 1];
        let y = [0, 1, 1, 0, 1, 0, 1];
        let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        for code in [code, ConvCodeSpec::inner()] {
            let ex = code.encode(&x, true);
            let ey = code.encode(&y, true);
            let exy = code.encode(&xy, true);
            let sum: Vec<u8> = ex.iter().zip(&ey).map(|(a, b)| a ^ b).collect();
            assert_eq!(sum, exy);
        }
    }

    #[test]
    fn inner_is_systematic() {
        let bits = [1, 1, 0, 1, 0, 0, 0, 1, 1];
        let coded = ConvCodeSpec::inner().encode(&bits, false);
        let sys: Vec<u8> = coded.iter().step_by(2).copied().collect();
        assert_eq!(sys, bits);
    }

    #[test]
    fn termination_returns_to_zero() {
        for code in [ConvCodeSpec::outer(), ConvCodeSpec::inner()] {
            let inputs = code.terminated_inputs(&[1, 0, 1, 1, 1]);
            let mut state = 0;
            for u in inputs {
                state = code.step(state, u).0;
            }
            assert_eq!(state, 0);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let code = ConvCodeSpec::inner();
        let out = map_decode(&code, &[0.0; 20], &[0.0; 10], false);
        assert!(out.input_extrinsic.iter().all(|&v| v.abs() < 1e-12));
        assert!(out.output_extrinsic.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn strong_llrs_recover_data() {
        let code = ConvCodeSpec::outer();
        let bits = [1, 0, 0, 1, 1, 0, 1];
        let coded = code.encode(&bits, true);
        let channel: Vec<f64> = coded.iter().map(|&c| 8.0 * sign(c)).collect();
        let out = map_decode(&code, &channel, &vec![0.0; bits.len() + 3], true);
        for (k, &b) in bits.iter().enumerate() {
            assert_eq!(out.input_posterior[k] < 0.0, b == 1);
        }
    }
}
