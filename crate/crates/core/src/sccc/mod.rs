//! Serially concatenated convolutional code.
//!
//! Outer non-recursive code, interleaver `π1`, inner recursive systematic
//! code, interleaver `π2`, then random puncturing or repetition to the target
//! length. Decoding alternates log-MAP decoders on the inner and outer
//! trellises, exchanging extrinsic LLRs.

mod conv;
mod interleaver;
mod rate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use conv::{map_decode, outer_impulse, CodeKind, ConvCodeSpec, MapOutput};
pub use interleaver::Interleaver;
pub use rate::RateAdapter;

use crate::clip_llr;
use crate::error::{Error, Result};

/// User bits per block.
pub const USER_BITS: usize = 32768;
/// Columns of every written image.
pub const IMAGE_COLS: usize = 512;

/// Detector/decoder schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One detection, then the decoder alone.
    NonIterative,
    /// Detector and decoder exchange information.
    #[default]
    Iterative,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "iterative" => Ok(Mode::Iterative),
            "non-iterative" | "noniterative" => Ok(Mode::NonIterative),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::NonIterative => "non-iterative",
            Mode::Iterative => "iterative",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderSchedule {
    pub mode: Mode,
    /// Inner/outer MAP exchanges per detector iteration.
    pub inner_iters: usize,
    /// Maximum detector/decoder iterations.
    pub outer_iters: usize,
}

impl DecoderSchedule {
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::NonIterative => Self {
                mode,
                inner_iters: 30,
                outer_iters: 1,
            },
            Mode::Iterative => Self {
                mode,
                inner_iters: 8,
                outer_iters: 30,
            },
        }
    }
}

/// Image rows for a target rate: the codeword fills whole rows of
/// [`IMAGE_COLS`] and the row count is even so that row pairs tile the image.
pub fn rows_for_rate(rate: f64) -> usize {
    let pairs = (USER_BITS as f64 / (2.0 * IMAGE_COLS as f64 * rate)).round() as usize;
    2 * pairs.max(1)
}

/// Polarity of a code bit: 0 → +1, 1 → −1.
pub fn bit_to_polarity(bit: u8) -> i8 {
    if bit == 0 {
        1
    } else {
        -1
    }
}

/// Encoder and decoder for one code configuration.
#[derive(Clone, Debug)]
pub struct SccCodec {
    outer: ConvCodeSpec,
    inner: ConvCodeSpec,
    pi1: Interleaver,
    pi2: Interleaver,
    adapter: RateAdapter,
    user_len: usize,
}

impl SccCodec {
    /// Full-size codec: [`USER_BITS`] user bits written on `rows_for_rate(rate)` rows.
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::Domain(format!("code rate {rate} outside (0, 1)")));
        }
        Self::with_lengths(USER_BITS, rows_for_rate(rate) * IMAGE_COLS, seed)
    }

    /// Codec with arbitrary user and transmitted lengths.
    pub fn with_lengths(user_len: usize, coded_len: usize, seed: u64) -> Result<Self> {
        if user_len == 0 || coded_len == 0 {
            return Err(Error::Domain("code lengths must be positive".into()));
        }
        let outer = ConvCodeSpec::outer();
        let inner = ConvCodeSpec::inner();
        let outer_len = 2 * (user_len + outer.memory);
        let inner_len = 2 * outer_len;
        Ok(Self {
            outer,
            inner,
            pi1: Interleaver::random(outer_len, seed ^ 0x7031),
            pi2: Interleaver::random(inner_len, seed ^ 0x7032),
            adapter: RateAdapter::new(inner_len, coded_len, seed ^ 0x7261),
            user_len,
        })
    }

    pub fn user_len(&self) -> usize {
        self.user_len
    }

    /// Outer codeword length, tail included.
    pub fn outer_len(&self) -> usize {
        self.pi1.len()
    }

    /// Inner codeword length before rate adaptation.
    pub fn mother_len(&self) -> usize {
        self.pi2.len()
    }

    pub fn coded_len(&self) -> usize {
        self.adapter.target_len()
    }

    /// User bits per transmitted bit.
    pub fn effective_rate(&self) -> f64 {
        self.user_len as f64 / self.coded_len() as f64
    }

    pub fn adapter(&self) -> &RateAdapter {
        &self.adapter
    }

    pub fn interleavers(&self) -> (&Interleaver, &Interleaver) {
        (&self.pi1, &self.pi2)
    }

    /// Encoder output before rate adaptation (after `π2`).
    pub fn encode_mother(&self, user: &[u8]) -> Result<Vec<u8>> {
        if user.len() != self.user_len {
            return Err(Error::LengthMismatch {
                expected: self.user_len,
                actual: user.len(),
            });
        }
        let outer = self.outer.encode(user, true);
        let inner = self.inner.encode(&self.pi1.interleave(&outer), false);
        Ok(self.pi2.interleave(&inner))
    }

    pub fn encode(&self, user: &[u8]) -> Result<Vec<u8>> {
        Ok(self.adapter.adapt(&self.encode_mother(user)?))
    }

    /// Fresh decoder state for one block.
    pub fn decoder(&self) -> SccDecoder<'_> {
        SccDecoder {
            codec: self,
            inner_apriori: vec![0.0; self.outer_len()],
        }
    }
}

/// Output of [`SccDecoder::decode`].
#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    /// Inner/outer exchanges actually run.
    pub iterations: usize,
    /// Errors against the known data, when supplied.
    pub errors: Option<usize>,
    /// Extrinsic LLR of every transmitted bit, for the detector.
    pub feedback: Vec<f64>,
}

/// Decoder for one block. The inner decoder's a-priori input persists across
/// calls so detector iterations continue where the previous one stopped.
#[derive(Clone, Debug)]
pub struct SccDecoder<'a> {
    codec: &'a SccCodec,
    inner_apriori: Vec<f64>,
}

impl SccDecoder<'_> {
    /// Run up to `iterations` inner/outer exchanges on transmitted-bit channel
    /// LLRs. With `known` data, stops as soon as the decisions match it.
    pub fn decode(
        &mut self,
        channel: &[f64],
        iterations: usize,
        known: Option<&[u8]>,
    ) -> Result<DecodeOutcome> {
        let c = self.codec;
        if channel.len() != c.coded_len() {
            return Err(Error::LengthMismatch {
                expected: c.coded_len(),
                actual: channel.len(),
            });
        }
        if let Some(k) = known {
            if k.len() != c.user_len {
                return Err(Error::LengthMismatch {
                    expected: c.user_len,
                    actual: k.len(),
                });
            }
        }
        let inner_channel = c.pi2.deinterleave(&c.adapter.deadapt_llr(channel));
        let outer_apriori = vec![0.0; c.user_len + c.outer.memory];

        let mut bits = vec![0u8; c.user_len];
        let mut errors = None;
        let mut inner_post = vec![0.0; c.mother_len()];
        let mut used = 0;
        for _ in 0..iterations.max(1) {
            used += 1;
            let inner = map_decode(&c.inner, &inner_channel, &self.inner_apriori, false);
            inner_post = inner.output_posterior;
            let outer_in = c.pi1.deinterleave(&inner.input_extrinsic);
            let outer = map_decode(&c.outer, &outer_in, &outer_apriori, true);
            self.inner_apriori = c.pi1.interleave(&outer.output_extrinsic);
            for (b, &l) in bits.iter_mut().zip(&outer.input_posterior) {
                *b = (l < 0.0) as u8;
            }
            if let Some(k) = known {
                let e = bits.iter().zip(k).filter(|(a, b)| a != b).count();
                errors = Some(e);
                if e == 0 {
                    break;
                }
            }
        }

        let mother_post = c.pi2.interleave(&inner_post);
        let feedback = c
            .adapter
            .source()
            .iter()
            .zip(channel)
            .map(|(&i, &ch)| clip_llr(mother_post[i as usize] - ch))
            .collect();
        Ok(DecodeOutcome {
            bits,
            iterations: used,
            errors,
            feedback,
        })
    }

    /// Inner-decoder a-priori LLRs carried between calls.
    pub fn inner_apriori(&self) -> &[f64] {
        &self.inner_apriori
    }
}

/// Decode one block from scratch with the schedule's inner iteration count.
pub fn sccc_decode(
    codec: &SccCodec,
    channel: &[f64],
    schedule: &DecoderSchedule,
    known: Option<&[u8]>,
) -> Result<DecodeOutcome> {
    codec.decoder().decode(channel, schedule.inner_iters, known)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        let c = SccCodec::new(0.25, 1).unwrap();
        assert_eq!(c.coded_len(), 131072);
        assert_eq!(c.outer_len(), 65542);
        assert_eq!(c.mother_len(), 131084);
        let c = SccCodec::new(1.0 / 3.0, 1).unwrap();
        assert_eq!(c.coded_len(), 98304);
        assert_eq!(rows_for_rate(1.0 / 3.0), 192);
        assert!(SccCodec::new(0.0, 1).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let c = SccCodec::with_lengths(64, 300, 5).unwrap();
        assert!(c.encode(&[0; 64]).unwrap().iter().all(|&b| b == 0));
        assert!(c.encode(&[0; 10]).is_err());
    }

    #[test]
    fn small_block_round_trip() {
        let c = SccCodec::with_lengths(200, 700, 8).unwrap();
        let user: Vec<u8> = (0..200).map(|i| ((i * 37 + 11) % 7 < 3) as u8).collect();
        let coded = c.encode(&user).unwrap();
        let channel: Vec<f64> = coded
            .iter()
            .map(|&b| 3.0 * bit_to_polarity(b) as f64)
            .collect();
        let out = sccc_decode(
            &c,
            &channel,
            &DecoderSchedule::for_mode(Mode::NonIterative),
            Some(&user),
        )
        .unwrap();
        assert_eq!(out.errors, Some(0));
        assert_eq!(out.iterations, 1);
        assert_eq!(out.bits, user);
        assert_eq!(out.feedback.len(), 700);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("iterative".parse::<Mode>().unwrap(), Mode::Iterative);
        assert_eq!("non-iterative".parse::<Mode>().unwrap(), Mode::NonIterative);
        assert!("x".parse::<Mode>().is_err());
        let s = DecoderSchedule::for_mode(Mode::NonIterative);
        assert_eq!((s.inner_iters, s.outer_iters), (30, 1));
    }
}
