//! Row-pair forward-backward detector.
//!
//! Each pass covers image rows `m, m+1` and walks the 39-state trellis from
//! the left boundary column to the right one. Inputs `U = (u0, u1)` at column
//! `n` are scored together with the state at column `n`; the a-priori LLRs
//! enter as independent per-bit probabilities. Passes advance two rows at a
//! time and hand the soft estimate of "bottom cell is `B`" and "bottom cell is
//! `F`" to the next pass as the feedback pixel probabilities.
//!
//! LLRs are natural-log ratios `ln P(+1) / P(-1)` in the polarity domain.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grain::{GrainDistribution, SubgrainLabel, WrittenImage};
use crate::trellis::{
    aa_index, channel_table, output_index, states, transition_table, ChannelModel, ChannelTable,
    FeedbackProbs, NUM_STATES,
};
use crate::{clip_llr, LLR_CAP};

/// Per-bit LLRs in raster order, clipped to `±cap`.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrFrame {
    values: Vec<f64>,
    cap: f64,
}

impl LlrFrame {
    /// Build a frame, clipping every value to `±LLR_CAP` and mapping NaN to 0.
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values: values.into_iter().map(clip_llr).collect(),
            cap: LLR_CAP,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            cap: LLR_CAP,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Hard decisions as polarities.
    pub fn signs(&self) -> Vec<i8> {
        self.values
            .iter()
            .map(|&v| if v >= 0.0 { 1 } else { -1 })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    from: u8,
    to: u8,
    weight: f64,
    slot: u8,
    extends_down: bool,
}

/// Everything one pass computes.
#[derive(Clone, Debug)]
pub struct DetectorPassState {
    /// Index of the row pair (rows `2·row_pair`, `2·row_pair + 1`).
    pub row_pair: usize,
    /// Normalized forward probabilities after each column.
    pub alpha: Vec<[f64; NUM_STATES]>,
    /// Normalized backward probabilities at each column.
    pub beta: Vec<[f64; NUM_STATES]>,
    /// Normalized `λ` per column, indexed `[state][input pair]`.
    pub lambda: Vec<[[f64; 4]; NUM_STATES]>,
    /// `ln P(y)` recovered at each column; constant along the row.
    pub log_evidence: Vec<f64>,
    pub feedback_in: Vec<FeedbackProbs>,
    pub feedback_out: Vec<FeedbackProbs>,
    /// Posterior LLRs, top row then bottom row.
    pub posterior: Vec<f64>,
    /// Posterior minus a-priori, clipped; top row then bottom row.
    pub extrinsic: Vec<f64>,
}

/// Two-row detector for one grain distribution.
#[derive(Clone, Debug)]
pub struct TdmrDetector {
    dist: GrainDistribution,
    model: ChannelModel,
    channel: &'static ChannelTable,
    edges: Vec<Edge>,
    terminal: [f64; NUM_STATES],
}

impl TdmrDetector {
    pub fn new(dist: GrainDistribution) -> Self {
        Self::with_model(dist, ChannelModel::default())
    }

    pub fn with_model(dist: GrainDistribution, model: ChannelModel) -> Self {
        let edges = transition_table()
            .transitions()
            .iter()
            .map(|t| Edge {
                from: t.from as u8,
                to: t.to as u8,
                weight: t.factor.grain_weight(&dist),
                slot: t.factor.feedback.slot() as u8,
                extends_down: t.factor.bottom_extends_down(),
            })
            .filter(|e| e.weight > 0.0)
            .collect();
        let mut terminal = [0.0; NUM_STATES];
        for (t, s) in terminal.iter_mut().zip(states()) {
            *t = if s.forces_right() { 0.0 } else { 1.0 };
        }
        Self {
            dist,
            model,
            channel: channel_table(model),
            edges,
            terminal,
        }
    }

    pub fn distribution(&self) -> &GrainDistribution {
        &self.dist
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    /// Run one pass over rows `2·row_pair` and `2·row_pair + 1`.
    ///
    /// `apriori` holds the LLRs of the two rows (top row first); `feedback_in`
    /// has one entry per column.
    pub fn detector_pass(
        &self,
        written: &WrittenImage,
        row_pair: usize,
        apriori: &[f64],
        feedback_in: &[FeedbackProbs],
    ) -> Result<DetectorPassState> {
        let cols = written.cols();
        let m = 2 * row_pair;
        if m + 1 >= written.rows() {
            return Err(Error::Dimensions {
                rows: written.rows(),
                cols,
                reason: "row pair lies outside the image",
            });
        }
        check_len(2 * cols, apriori.len())?;
        check_len(cols, feedback_in.len())?;
        let last_pass = m + 2 == written.rows();

        // Channel times a-priori, per column, state and input pair.
        let mut emit = vec![[[0.0f64; 4]; NUM_STATES]; cols];
        let y = |r: usize, c: isize| written.value_or_boundary(r as isize, c);
        for (n, e) in emit.iter_mut().enumerate() {
            let n = n as isize;
            let window = match self.model {
                ChannelModel::Exact => [y(m, n - 1), y(m + 1, n - 1), y(m, n), y(m + 1, n)],
                ChannelModel::Lookahead => [y(m, n), y(m + 1, n), y(m, n + 1), y(m + 1, n + 1)],
            };
            let yi = output_index(window);
            let prior = input_priors(apriori[n as usize], apriori[cols + n as usize]);
            for (s, row) in e.iter_mut().enumerate() {
                for (u, v) in row.iter_mut().enumerate() {
                    *v = self.channel.get(s, u, yi) * prior[u];
                }
            }
        }
        let emit_sum: Vec<[f64; NUM_STATES]> = emit
            .iter()
            .map(|e| {
                let mut out = [0.0; NUM_STATES];
                for (o, row) in out.iter_mut().zip(e) {
                    *o = row.iter().sum();
                }
                out
            })
            .collect();

        let edge_weight = |edge: &Edge, fb: &[f64; 4]| {
            if last_pass && edge.extends_down {
                0.0
            } else {
                edge.weight * fb[edge.slot as usize]
            }
        };
        let fb_slots: Vec<[f64; 4]> = feedback_in
            .iter()
            .map(|f| [1.0, f.p_b, f.p_f, f.p_neither()])
            .collect();

        // Forward.
        let mut start = [0.0; NUM_STATES];
        start[aa_index()] = 1.0;
        let mut predicted = vec![[0.0; NUM_STATES]; cols];
        let mut alpha = vec![[0.0; NUM_STATES]; cols];
        let mut log_alpha = vec![0.0; cols + 1]; // log_alpha[n + 1] is the scale of alpha[n]
        for n in 0..cols {
            let prev = if n == 0 { &start } else { &alpha[n - 1] };
            let mut pred = [0.0; NUM_STATES];
            for edge in &self.edges {
                pred[edge.to as usize] +=
                    prev[edge.from as usize] * edge_weight(edge, &fb_slots[n]);
            }
            let mut a = [0.0; NUM_STATES];
            let mut sum = 0.0;
            for s in 0..NUM_STATES {
                a[s] = pred[s] * emit_sum[n][s];
                sum += a[s];
            }
            if !(sum > 0.0) {
                return Err(Error::InconsistentImage { row: m, col: n });
            }
            for v in &mut a {
                *v /= sum;
            }
            predicted[n] = pred;
            alpha[n] = a;
            log_alpha[n + 1] = log_alpha[n] + sum.ln();
        }

        // Backward.
        let mut beta = vec![[0.0; NUM_STATES]; cols];
        let mut log_beta = vec![0.0; cols];
        let sum: f64 = self.terminal.iter().sum();
        for s in 0..NUM_STATES {
            beta[cols - 1][s] = self.terminal[s] / sum;
        }
        log_beta[cols - 1] = sum.ln();
        for n in (1..cols).rev() {
            let mut b = [0.0; NUM_STATES];
            for edge in &self.edges {
                let to = edge.to as usize;
                b[edge.from as usize] +=
                    edge_weight(edge, &fb_slots[n]) * emit_sum[n][to] * beta[n][to];
            }
            let sum: f64 = b.iter().sum();
            if !(sum > 0.0) {
                return Err(Error::InconsistentImage { row: m, col: n });
            }
            for v in &mut b {
                *v /= sum;
            }
            beta[n - 1] = b;
            log_beta[n - 1] = log_beta[n] + sum.ln();
        }

        // Lambda, posteriors and extrinsics.
        let mut lambda = vec![[[0.0; 4]; NUM_STATES]; cols];
        let mut log_evidence = vec![0.0; cols];
        let mut posterior = vec![0.0; 2 * cols];
        let mut extrinsic = vec![0.0; 2 * cols];
        for n in 0..cols {
            let mut total = 0.0;
            let mut plus = [0.0; 2];
            let mut minus = [0.0; 2];
            for s in 0..NUM_STATES {
                let w = predicted[n][s] * beta[n][s];
                for u in 0..4 {
                    let l = w * emit[n][s][u];
                    lambda[n][s][u] = l;
                    total += l;
                    for bit in 0..2 {
                        if u >> bit & 1 == 1 {
                            plus[bit] += l;
                        } else {
                            minus[bit] += l;
                        }
                    }
                }
            }
            if !(total > 0.0) {
                return Err(Error::InconsistentImage { row: m, col: n });
            }
            for row in lambda[n].iter_mut() {
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            log_evidence[n] = total.ln() + log_alpha[n] + log_beta[n];
            for bit in 0..2 {
                let idx = bit * cols + n;
                let post = plus[bit].ln() - minus[bit].ln();
                posterior[idx] = clip_llr(post);
                extrinsic[idx] = clip_llr(post - apriori[idx]);
            }
        }

        let feedback_out = compute_feedback(&lambda);
        Ok(DetectorPassState {
            row_pair,
            alpha,
            beta,
            lambda,
            log_evidence,
            feedback_in: feedback_in.to_vec(),
            feedback_out,
            posterior,
            extrinsic,
        })
    }

    /// Detect a whole image; returns extrinsic LLRs in raster order.
    pub fn detect_image(&self, written: &WrittenImage, apriori: &LlrFrame) -> Result<LlrFrame> {
        self.detect_image_traced(written, apriori, |_| {})
    }

    /// As [`detect_image`](Self::detect_image), handing every finished pass to `observe`.
    pub fn detect_image_traced(
        &self,
        written: &WrittenImage,
        apriori: &LlrFrame,
        mut observe: impl FnMut(&DetectorPassState),
    ) -> Result<LlrFrame> {
        let (rows, cols) = (written.rows(), written.cols());
        if rows % 2 != 0 || rows == 0 || cols == 0 {
            return Err(Error::Dimensions {
                rows,
                cols,
                reason: "detection needs a positive, even number of rows",
            });
        }
        check_len(rows * cols, apriori.len())?;
        let mut out = vec![0.0; rows * cols];
        let mut feedback = vec![FeedbackProbs::NONE; cols];
        for pair in 0..rows / 2 {
            let span = 2 * pair * cols..(2 * pair + 2) * cols;
            let pass =
                self.detector_pass(written, pair, &apriori.values()[span.clone()], &feedback)?;
            out[span].copy_from_slice(&pass.extrinsic);
            observe(&pass);
            feedback = pass.feedback_out;
        }
        Ok(LlrFrame::new(out))
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// `P(u0) P(u1)` for the four input pairs, indexed as in [`crate::trellis::input_index`].
fn input_priors(l0: f64, l1: f64) -> [f64; 4] {
    let p = |l: f64| {
        let plus = 1.0 / (1.0 + (-l).exp());
        let minus = 1.0 / (1.0 + l.exp());
        [minus, plus]
    };
    let (a, b) = (p(l0), p(l1));
    [a[0] * b[0], a[1] * b[0], a[0] * b[1], a[1] * b[1]]
}

fn llr_of(num: f64, den: f64) -> f64 {
    clip_llr(num.ln() - den.ln())
}

fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Feedback probabilities per column from the pass's `λ`.
///
/// `P(X = B)` is the posterior probability that the bottom cell is `B`, and
/// likewise for `F`, each taken through a clipped LLR and the logistic map.
pub fn compute_feedback(lambda: &[[[f64; 4]; NUM_STATES]]) -> Vec<FeedbackProbs> {
    lambda
        .iter()
        .map(|col| {
            let mut total = 0.0;
            let mut mass_b = 0.0;
            let mut mass_f = 0.0;
            for (s, state) in states().iter().enumerate() {
                let m: f64 = col[s].iter().sum();
                total += m;
                match state.bottom {
                    SubgrainLabel::B => mass_b += m,
                    SubgrainLabel::F => mass_f += m,
                    _ => {}
                }
            }
            let p_b = logistic(llr_of(mass_b, total - mass_b));
            let p_f = logistic(llr_of(mass_f, total - mass_f));
            let excess = p_b + p_f;
            if excess > 1.0 {
                FeedbackProbs {
                    p_b: p_b / excess,
                    p_f: p_f / excess,
                }
            } else {
                FeedbackProbs { p_b, p_f }
            }
        })
        .collect()
}

#[derive(Serialize)]
struct FeedbackRow {
    row_pair: usize,
    col: usize,
    p_b: f64,
    p_f: f64,
    p_neither: f64,
}

/// Write per-column feedback probabilities of several passes as CSV.
pub fn write_feedback_csv(path: &Path, passes: &[Vec<FeedbackProbs>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for (row_pair, fbs) in passes.iter().enumerate() {
        for (col, fb) in fbs.iter().enumerate() {
            writer.serialize(FeedbackRow {
                row_pair,
                col,
                p_b: fb.p_b,
                p_f: fb.p_f,
                p_neither: fb.p_neither(),
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grain::{write_bits, GrainImage};

    fn dist(p2: f64) -> GrainDistribution {
        GrainDistribution::from_p2(p2).unwrap()
    }

    #[test]
    fn uniform_lambda_feedback() {
        let lambda = vec![[[0.25 / NUM_STATES as f64; 4]; NUM_STATES]];
        let fb = compute_feedback(&lambda)[0];
        // Six states have a B bottom and six an F bottom.
        assert!((fb.p_b - 6.0 / 39.0).abs() < 1e-12);
        assert!((fb.p_f - 6.0 / 39.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_limits() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-LLR_CAP) < 1e-40);
    }

    #[test]
    fn all_single_image_signs() {
        let image = GrainImage::all_single(4, 6);
        let bits: Vec<i8> = (0..24)
            .map(|i| if (i * 7) % 3 == 0 { 1 } else { -1 })
            .collect();
        let written = write_bits(&image, &bits).unwrap();
        for model in [ChannelModel::Exact, ChannelModel::Lookahead] {
            let det = TdmrDetector::with_model(dist(0.0), model);
            let out = det.detect_image(&written, &LlrFrame::zeros(24)).unwrap();
            assert!(out.values().iter().all(|v| v.is_finite()));
            assert_eq!(out.len(), 24);
            if model == ChannelModel::Exact {
                for (v, &b) in out.values().iter().zip(&bits) {
                    assert_eq!(v.signum() as i8, b);
                }
            }
        }
    }

    #[test]
    fn odd_rows_rejected() {
        let written = WrittenImage::from_values(3, 2, vec![1; 6]).unwrap();
        let det = TdmrDetector::new(dist(0.2));
        assert!(det.detect_image(&written, &LlrFrame::zeros(6)).is_err());
    }

    #[test]
    fn log_evidence_is_constant() {
        let image: GrainImage = "ADEA\nABFH\nACGI\nAADE\n".parse().unwrap();
        let bits = [1, -1, 1, 1, -1, -1, 1, -1, 1, 1, -1, -1, 1, -1, 1, 1];
        let written = write_bits(&image, &bits).unwrap();
        let apriori = LlrFrame::new((0..16).map(|i| (i as f64 - 7.5) * 0.3).collect());
        let det = TdmrDetector::new(dist(0.25));
        det.detect_image_traced(&written, &apriori, |pass| {
            let first = pass.log_evidence[0];
            for &v in &pass.log_evidence {
                assert!((v - first).abs() < 1e-9);
            }
            for fb in &pass.feedback_out {
                assert!(fb.p_b + fb.p_f <= 1.0 + 1e-12);
            }
        })
        .unwrap();
    }
}
