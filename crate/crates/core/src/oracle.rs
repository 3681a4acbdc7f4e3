//! Brute-force references for toy sizes.

use crate::error::{Error, Result};
use crate::grain::{GrainDistribution, GrainImage, GrainKind, SubgrainLabel, WrittenImage};
use crate::sccc::ConvCodeSpec;

/// Largest number of configurations either oracle will enumerate.
pub const ENUMERATION_BUDGET: usize = 1 << 24;
pub const MAX_ROWS: usize = 4;
pub const MAX_COLS: usize = 8;
pub const MAX_USER_BITS: usize = 16;

/// A small written image together with its grain statistics.
#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub dist: GrainDistribution,
    pub written: WrittenImage,
    /// Optional a-priori LLRs (`ln P(+1)/P(-1)`) per cell in raster order.
    pub apriori: Option<Vec<f64>>,
}

/// Every tiling of a `rows × cols` image with its prior probability.
///
/// Grains are placed at the first free cell in column-major order. A grain
/// type is drawn with probability proportional to `P_t` among the types whose
/// footprint is unoccupied, cells beyond the image counting as unoccupied;
/// tilings with a grain crossing the image edge are dropped, so the weights
/// are conditioned on the grains fitting the image and need not sum to 1.
pub fn enumerate_tilings(
    rows: usize,
    cols: usize,
    dist: &GrainDistribution,
) -> Result<Vec<(GrainImage, f64)>> {
    check_dims(rows, cols)?;
    let mut cells = vec![None; rows * cols];
    let mut out = Vec::new();
    place(0, rows, cols, dist, &mut cells, 1.0, &mut out)?;
    Ok(out)
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 || rows > MAX_ROWS || cols > MAX_COLS {
        return Err(Error::Dimensions {
            rows,
            cols,
            reason: "oracle instances are limited to 4 rows and 8 columns",
        });
    }
    Ok(())
}

fn place(
    start: usize,
    rows: usize,
    cols: usize,
    dist: &GrainDistribution,
    cells: &mut Vec<Option<SubgrainLabel>>,
    weight: f64,
    out: &mut Vec<(GrainImage, f64)>,
) -> Result<()> {
    // Column-major scan for the next free cell.
    let next = (start..rows * cols).find(|&k| cells[(k % rows) * cols + k / rows].is_none());
    let Some(k) = next else {
        if out.len() >= ENUMERATION_BUDGET {
            return Err(Error::Budget(format!(
                "more than {ENUMERATION_BUDGET} tilings"
            )));
        }
        let labels = cells.iter().map(|c| c.expect("complete tiling")).collect();
        out.push((GrainImage::from_cells(rows, cols, labels)?, weight));
        return Ok(());
    };
    let (r, c) = (k % rows, k / rows);
    let free = |dr: usize, dc: usize| {
        let (rr, cc) = (r + dr, c + dc);
        rr >= rows || cc >= cols || cells[rr * cols + cc].is_none()
    };
    let fits = GrainKind::ALL
        .map(|kind| (0..kind.height()).all(|dr| (0..kind.width()).all(|dc| free(dr, dc))));
    let norm: f64 = GrainKind::ALL
        .iter()
        .filter(|k| fits[k.index()])
        .map(|&k| dist.prob(k))
        .sum();
    for kind in GrainKind::ALL {
        let p = dist.prob(kind);
        if p == 0.0 || !fits[kind.index()] || r + kind.height() > rows || c + kind.width() > cols {
            continue;
        }
        for dr in 0..kind.height() {
            for dc in 0..kind.width() {
                cells[(r + dr) * cols + c + dc] = Some(kind.label_at(dr, dc));
            }
        }
        place(k + 1, rows, cols, dist, cells, weight * p / norm, out)?;
        for dr in 0..kind.height() {
            for dc in 0..kind.width() {
                cells[(r + dr) * cols + c + dc] = None;
            }
        }
    }
    Ok(())
}

fn prob_plus(llr: f64) -> f64 {
    1.0 / (1.0 + (-llr).exp())
}

/// Exact `P(u = +1 | y)` for every cell.
///
/// Each tiling contributes its prior weight times the likelihood of the
/// observed image: a grain is consistent only if all its cells read the same
/// value, which must then be the bit written on its last cell. Bits written on
/// overwritten cells never reach the output and keep their prior.
pub fn exact_bit_posteriors(instance: &TinyInstance) -> Result<Vec<f64>> {
    let w = &instance.written;
    let (rows, cols) = (w.rows(), w.cols());
    check_dims(rows, cols)?;
    let n = rows * cols;
    let prior: Vec<f64> = match &instance.apriori {
        Some(a) if a.len() != n => {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: a.len(),
            })
        }
        Some(a) => a.iter().map(|&l| prob_plus(l)).collect(),
        None => vec![0.5; n],
    };

    let tilings = enumerate_tilings(rows, cols, &instance.dist)?;
    let mut numer = vec![0.0; n];
    let mut total = 0.0;
    for (image, weight) in &tilings {
        let mut like = *weight;
        for r in 0..rows {
            for c in 0..cols {
                let (wr, wc) = image.writer_of(r, c);
                let y = w.value(r, c);
                if y != w.value(wr, wc) {
                    like = 0.0;
                } else if (wr, wc) == (r, c) {
                    let p = prior[r * cols + c];
                    like *= if y > 0 { p } else { 1.0 - p };
                }
            }
        }
        if like == 0.0 {
            continue;
        }
        total += like;
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let post = if image.writer_of(r, c) == (r, c) {
                    if w.value(r, c) > 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    prior[i]
                };
                numer[i] += like * post;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::InconsistentImage { row: 0, col: 0 });
    }
    Ok(numer.into_iter().map(|v| v / total).collect())
}

/// Exact bit posteriors of a convolutional code, as `P(bit = 1)`.
#[derive(Clone, Debug)]
pub struct CodewordPosteriors {
    /// One per trellis step, flush inputs included.
    pub input: Vec<f64>,
    /// Two per trellis step.
    pub output: Vec<f64>,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Enumerate all `2^user_len` inputs of `code`.
///
/// `channel` has two LLRs (`ln P(0)/P(1)`) per trellis step and `apriori` one
/// per step; with `terminated` the trellis includes `memory` flush steps.
pub fn exact_codeword_posteriors(
    code: &ConvCodeSpec,
    channel: &[f64],
    apriori: &[f64],
    user_len: usize,
    terminated: bool,
) -> Result<CodewordPosteriors> {
    if user_len > MAX_USER_BITS {
        return Err(Error::Budget(format!(
            "{user_len} user bits exceeds {MAX_USER_BITS}"
        )));
    }
    let steps = user_len + if terminated { code.memory } else { 0 };
    for (expected, actual) in [(2 * steps, channel.len()), (steps, apriori.len())] {
        if expected != actual {
            return Err(Error::LengthMismatch { expected, actual });
        }
    }
    let neg = f64::NEG_INFINITY;
    let mut input = vec![[neg; 2]; steps];
    let mut output = vec![[neg; 2]; 2 * steps];
    for word in 0..1usize << user_len {
        let bits: Vec<u8> = (0..user_len).map(|i| (word >> i & 1) as u8).collect();
        let inputs = if terminated {
            code.terminated_inputs(&bits)
        } else {
            bits.clone()
        };
        let coded = code.encode(&bits, terminated);
        let sgn = |b: u8| if b == 0 { 0.5 } else { -0.5 };
        let metric: f64 = coded
            .iter()
            .zip(channel)
            .map(|(&b, &l)| sgn(b) * l)
            .sum::<f64>()
            + inputs
                .iter()
                .zip(apriori)
                .map(|(&b, &l)| sgn(b) * l)
                .sum::<f64>();
        for (acc, &b) in input.iter_mut().zip(&inputs) {
            acc[b as usize] = log_sum_exp(acc[b as usize], metric);
        }
        for (acc, &b) in output.iter_mut().zip(&coded) {
            acc[b as usize] = log_sum_exp(acc[b as usize], metric);
        }
    }
    let p1 = |acc: &[f64; 2]| 1.0 / (1.0 + (acc[0] - acc[1]).exp());
    Ok(CodewordPosteriors {
        input: input.iter().map(p1).collect(),
        output: output.iter().map(p1).collect(),
    })
}
