//! The 39-state two-row trellis.
//!
//! A state is the pair of subgrain labels `(top, bottom)` occupying rows `m`
//! and `m+1` of one column. Transitions move one column to the right. The
//! feedback pixel `X` sits at `(m-1, n+1)`, in the last row of the previous
//! pass, directly above the top cell of the next-state column.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grain::{GrainDistribution, GrainKind, SubgrainLabel};

use SubgrainLabel::*;

pub const NUM_STATES: usize = 39;

const FRESH_EDGE: [SubgrainLabel; 6] = [A, B, D, E, F, H];
const FRESH_LEFT: [SubgrainLabel; 6] = [A, B, C, D, F, G];

/// Labels that may sit directly below `label`.
pub fn allowed_below(label: SubgrainLabel) -> &'static [SubgrainLabel] {
    match label {
        B => &[C],
        F => &[G],
        H => &[I],
        _ => &FRESH_EDGE,
    }
}

/// Labels that may sit directly to the right of `label`.
pub fn allowed_right(label: SubgrainLabel) -> &'static [SubgrainLabel] {
    match label {
        D => &[E],
        F => &[H],
        G => &[I],
        _ => &FRESH_LEFT,
    }
}

/// Labels of one trellis column: `top` at row `m`, `bottom` at row `m+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GrainState {
    pub top: SubgrainLabel,
    pub bottom: SubgrainLabel,
}

impl GrainState {
    pub fn new(top: SubgrainLabel, bottom: SubgrainLabel) -> Result<Self> {
        let state = Self { top, bottom };
        if state.is_valid() {
            Ok(state)
        } else {
            Err(Error::Domain(format!(
                "{top}{bottom} is not a valid grain state"
            )))
        }
    }

    pub fn is_valid(&self) -> bool {
        allowed_below(self.top).contains(&self.bottom)
    }

    /// Index into [`states`], or `None` for an invalid pair.
    pub fn index(&self) -> Option<usize> {
        state_lookup()[self.top.index()][self.bottom.index()].map(usize::from)
    }

    /// True when a grain in this column continues into the next column.
    pub fn forces_right(&self) -> bool {
        self.top.right().is_some() || self.bottom.right().is_some()
    }
}

impl fmt::Display for GrainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.top, self.bottom)
    }
}

impl FromStr for GrainState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        let parse = |c: Option<char>| {
            c.and_then(SubgrainLabel::from_char)
                .ok_or_else(|| Error::Parse(format!("bad grain state {s:?}")))
        };
        let top = parse(chars.next())?;
        let bottom = parse(chars.next())?;
        if chars.next().is_some() {
            return Err(Error::Parse(format!("bad grain state {s:?}")));
        }
        GrainState::new(top, bottom)
    }
}

/// All valid states in lexicographic `(top, bottom)` order.
pub fn enumerate_states() -> Vec<GrainState> {
    SubgrainLabel::ALL
        .iter()
        .flat_map(|&top| {
            allowed_below(top)
                .iter()
                .map(move |&bottom| GrainState { top, bottom })
        })
        .collect()
}

/// Shared copy of [`enumerate_states`].
pub fn states() -> &'static [GrainState] {
    static STATES: OnceLock<Vec<GrainState>> = OnceLock::new();
    STATES.get_or_init(enumerate_states)
}

fn state_lookup() -> &'static [[Option<u8>; 9]; 9] {
    static LOOKUP: OnceLock<[[Option<u8>; 9]; 9]> = OnceLock::new();
    LOOKUP.get_or_init(|| {
        let mut table = [[None; 9]; 9];
        for (i, s) in states().iter().enumerate() {
            table[s.top.index()][s.bottom.index()] = Some(i as u8);
        }
        table
    })
}

/// Index of the all-`A` state.
pub fn aa_index() -> usize {
    GrainState { top: A, bottom: A }
        .index()
        .expect("AA is valid")
}

/// Soft estimate of the feedback pixel `X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackProbs {
    pub p_b: f64,
    pub p_f: f64,
}

impl FeedbackProbs {
    /// `X` known to be neither `B` nor `F`, as on the top boundary.
    pub const NONE: FeedbackProbs = FeedbackProbs { p_b: 0.0, p_f: 0.0 };

    pub fn new(p_b: f64, p_f: f64) -> Result<Self> {
        let ok =
            (0.0..=1.0).contains(&p_b) && (0.0..=1.0).contains(&p_f) && p_b + p_f <= 1.0 + 1e-12;
        if ok {
            Ok(Self { p_b, p_f })
        } else {
            Err(Error::Domain(format!(
                "invalid feedback probabilities P(B) = {p_b}, P(F) = {p_f}"
            )))
        }
    }

    pub fn p_neither(&self) -> f64 {
        (1.0 - self.p_b - self.p_f).max(0.0)
    }
}

impl Default for FeedbackProbs {
    fn default() -> Self {
        Self::NONE
    }
}

/// Which feedback probability multiplies a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeedbackFactor {
    /// Top cell forced from the left; `X` is irrelevant.
    One,
    /// Top cell is the `C` below an `X = B`.
    B,
    /// Top cell is the `G` below an `X = F`.
    F,
    /// Top cell starts a fresh grain.
    Neither,
}

impl FeedbackFactor {
    pub fn value(self, fb: &FeedbackProbs) -> f64 {
        match self {
            FeedbackFactor::One => 1.0,
            FeedbackFactor::B => fb.p_b,
            FeedbackFactor::F => fb.p_f,
            FeedbackFactor::Neither => fb.p_neither(),
        }
    }

    /// Index into `[1, P(B), P(F), P(neither)]`.
    pub fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FeedbackFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackFactor::One => "1",
            FeedbackFactor::B => "P(B)",
            FeedbackFactor::F => "P(F)",
            FeedbackFactor::Neither => "P(B̄,F̄)",
        })
    }
}

/// Grain-probability factor of a freshly started grain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FreshGrain {
    /// Any grain type may start here: factor `P_t`.
    Any(GrainKind),
    /// The cell below is already taken, so only 1×1 and 1×2 grains fit:
    /// factor `P_t / (P1 + P3)`.
    Restricted(GrainKind),
}

impl FreshGrain {
    pub fn kind(self) -> GrainKind {
        match self {
            FreshGrain::Any(k) | FreshGrain::Restricted(k) => k,
        }
    }

    pub fn value(self, dist: &GrainDistribution) -> f64 {
        match self {
            FreshGrain::Any(k) => dist.prob(k),
            FreshGrain::Restricted(k) => dist.prob(k) / (dist.p1 + dist.p3),
        }
    }
}

fn prob_symbol(kind: GrainKind) -> String {
    format!("P{}", kind.index() + 1)
}

/// Symbolic transition probability: fresh-grain factors times one feedback factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransitionFactor {
    pub top: Option<FreshGrain>,
    pub bottom: Option<GrainKind>,
    pub feedback: FeedbackFactor,
}

impl TransitionFactor {
    /// Product of the grain-probability factors, without the feedback factor.
    pub fn grain_weight(&self, dist: &GrainDistribution) -> f64 {
        let top = self.top.map_or(1.0, |t| t.value(dist));
        let bottom = self.bottom.map_or(1.0, |k| dist.prob(k));
        top * bottom
    }

    pub fn evaluate(&self, dist: &GrainDistribution, fb: &FeedbackProbs) -> f64 {
        self.grain_weight(dist) * self.feedback.value(fb)
    }

    /// True when the bottom cell starts a grain that extends one row further
    /// down, which is impossible on the last row pair of an image.
    pub fn bottom_extends_down(&self) -> bool {
        matches!(self.bottom, Some(GrainKind::Vertical | GrainKind::Square))
    }

    /// Grain kinds in the product, sorted.
    pub fn grain_kinds(&self) -> Vec<GrainKind> {
        let mut kinds: Vec<GrainKind> = self
            .top
            .map(FreshGrain::kind)
            .into_iter()
            .chain(self.bottom)
            .collect();
        kinds.sort();
        kinds
    }
}

impl fmt::Display for TransitionFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.grain_kinds().into_iter().map(prob_symbol).collect();
        if let Some(FreshGrain::Restricted(_)) = self.top {
            parts.push("1/(P1+P3)".to_string());
        }
        if self.feedback != FeedbackFactor::One || parts.is_empty() {
            parts.push(self.feedback.to_string());
        }
        f.write_str(&parts.join("·"))
    }
}

const FRESH_KINDS: [GrainKind; 4] = GrainKind::ALL;

fn successors(prev: GrainState) -> Vec<(GrainState, TransitionFactor)> {
    let bottom_forced = prev.bottom.right();
    let tops: Vec<(SubgrainLabel, Option<FreshGrain>, FeedbackFactor)> = match prev.top.right() {
        Some(t) => vec![(t, None, FeedbackFactor::One)],
        None => {
            let mut v = vec![(C, None, FeedbackFactor::B), (G, None, FeedbackFactor::F)];
            for kind in FRESH_KINDS {
                let fresh = match bottom_forced {
                    None => FreshGrain::Any(kind),
                    Some(_) if kind.height() == 1 => FreshGrain::Restricted(kind),
                    Some(_) => continue,
                };
                v.push((kind.anchor(), Some(fresh), FeedbackFactor::Neither));
            }
            v
        }
    };

    let mut out = Vec::new();
    for (top, top_factor, feedback) in tops {
        let bottoms: Vec<(SubgrainLabel, Option<GrainKind>)> = match (top.below(), bottom_forced) {
            (Some(b), Some(forced)) if b != forced => continue,
            (Some(b), _) => vec![(b, None)],
            (None, Some(forced)) => vec![(forced, None)],
            (None, None) => FRESH_KINDS.iter().map(|&k| (k.anchor(), Some(k))).collect(),
        };
        for (bottom, bottom_factor) in bottoms {
            let next = GrainState { top, bottom };
            if next.is_valid() {
                out.push((
                    next,
                    TransitionFactor {
                        top: top_factor,
                        bottom: bottom_factor,
                        feedback,
                    },
                ));
            }
        }
    }
    out
}

/// One nonzero entry of the transition table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub factor: TransitionFactor,
}

/// The sparse 39×39 table of symbolic transition factors.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    entries: Vec<Option<TransitionFactor>>,
    transitions: Vec<Transition>,
}

impl TransitionTable {
    pub fn new() -> Self {
        let mut entries = vec![None; NUM_STATES * NUM_STATES];
        let mut transitions = Vec::new();
        for (from, &prev) in states().iter().enumerate() {
            for (next, factor) in successors(prev) {
                let to = next.index().expect("successor is valid");
                entries[from * NUM_STATES + to] = Some(factor);
                transitions.push(Transition { from, to, factor });
            }
        }
        Self {
            entries,
            transitions,
        }
    }

    pub fn factor(&self, from: usize, to: usize) -> Option<&TransitionFactor> {
        self.entries[from * NUM_STATES + to].as_ref()
    }

    pub fn probability(
        &self,
        from: usize,
        to: usize,
        dist: &GrainDistribution,
        fb: &FeedbackProbs,
    ) -> f64 {
        self.factor(from, to).map_or(0.0, |f| f.evaluate(dist, fb))
    }

    /// All nonzero transitions, ordered by source state.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn successors(&self, from: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.from == from)
    }

    pub fn row_sum(&self, from: usize, dist: &GrainDistribution, fb: &FeedbackProbs) -> f64 {
        self.successors(from)
            .map(|t| t.factor.evaluate(dist, fb))
            .sum()
    }

    /// Text dump: one line per source state listing its nonzero successors.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (from, prev) in states().iter().enumerate() {
            let row: Vec<String> = self
                .successors(from)
                .map(|t| format!("{}: {}", states()[t.to], t.factor))
                .collect();
            out.push_str(&format!("{prev} -> {}\n", row.join(", ")));
        }
        out
    }
}

impl Default for TransitionTable {
    fn default() -> Self {
        Self::new()
    }
}

/// `P(s | s')` for explicit states.
pub fn transition_probability(
    s_prev: GrainState,
    s_next: GrainState,
    dist: &GrainDistribution,
    fb: &FeedbackProbs,
) -> Result<f64> {
    let bad = |s: GrainState| Error::Domain(format!("{s} is not a valid grain state"));
    let from = s_prev.index().ok_or_else(|| bad(s_prev))?;
    let to = s_next.index().ok_or_else(|| bad(s_next))?;
    Ok(transition_table().probability(from, to, dist, fb))
}

/// Shared transition table.
pub fn transition_table() -> &'static TransitionTable {
    static TABLE: OnceLock<TransitionTable> = OnceLock::new();
    TABLE.get_or_init(TransitionTable::new)
}

/// Index of a ±1 input pair: bit 0 is `u0 = +1`, bit 1 is `u1 = +1`.
pub fn input_index(u: [i8; 2]) -> usize {
    (u[0] > 0) as usize | ((u[1] > 0) as usize) << 1
}

/// Index of a ±1 output window: bit `i` is `y_i = +1`.
pub fn output_index(y: [i8; 4]) -> usize {
    y.iter()
        .enumerate()
        .fold(0, |acc, (i, &v)| acc | ((v > 0) as usize) << i)
}

fn bit_to_sign(idx: usize, bit: usize) -> i8 {
    if idx >> bit & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Channel output model used by the detector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    /// Window over columns `n-1, n`: every grain is scored once, on the column
    /// holding its last-written cell. Exact on a single row pair.
    #[default]
    Exact,
    /// Window over columns `n, n+1` with cells outside the estimated pair
    /// marginalized independently (the 16×4×39 table).
    Lookahead,
}

impl FromStr for ChannelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(ChannelModel::Exact),
            "lookahead" => Ok(ChannelModel::Lookahead),
            other => Err(Error::Parse(format!("unknown channel model {other:?}"))),
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelModel::Exact => "exact",
            ChannelModel::Lookahead => "lookahead",
        })
    }
}

/// `P(y | U, state)` for all 16 windows, 4 input pairs and 39 states.
///
/// The state and `U` always belong to the same column `n`. For
/// [`ChannelModel::Lookahead`] the window is `(m,n), (m+1,n), (m,n+1),
/// (m+1,n+1)`; for [`ChannelModel::Exact`] it is `(m,n-1), (m+1,n-1), (m,n),
/// (m+1,n)`.
#[derive(Clone, Debug)]
pub struct ChannelTable {
    model: ChannelModel,
    values: Vec<f64>,
}

impl ChannelTable {
    pub fn new(model: ChannelModel) -> Self {
        let mut values = vec![0.0; NUM_STATES * 4 * 16];
        for (s, state) in states().iter().enumerate() {
            for u in 0..4 {
                let u_pair = [bit_to_sign(u, 0), bit_to_sign(u, 1)];
                for y in 0..16 {
                    let window = [0, 1, 2, 3].map(|i| bit_to_sign(y, i));
                    values[(s * 4 + u) * 16 + y] = match model {
                        ChannelModel::Lookahead => lookahead_entry(window, u_pair, *state),
                        ChannelModel::Exact => exact_entry(window, u_pair, *state),
                    };
                }
            }
        }
        Self { model, values }
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    #[inline]
    pub fn get(&self, state: usize, u: usize, y: usize) -> f64 {
        self.values[(state * 4 + u) * 16 + y]
    }

    /// The 16 values for one `(state, u)`.
    pub fn slice(&self, state: usize, u: usize) -> &[f64] {
        let start = (state * 4 + u) * 16;
        &self.values[start..start + 16]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Text dump listing the nonzero entries per state.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (s, state) in states().iter().enumerate() {
            for u in 0..4 {
                let entries: Vec<String> = (0..16)
                    .filter(|&y| self.get(s, u, y) != 0.0)
                    .map(|y| {
                        let pattern: String = (0..4)
                            .map(|i| if bit_to_sign(y, i) > 0 { '+' } else { '-' })
                            .collect();
                        format!("{pattern}={}", self.get(s, u, y))
                    })
                    .collect();
                let u_str: String = (0..2)
                    .map(|i| if bit_to_sign(u, i) > 0 { '+' } else { '-' })
                    .collect();
                out.push_str(&format!("{state} u={u_str}: {}\n", entries.join(" ")));
            }
        }
        out
    }
}

/// Shared channel table for a model.
pub fn channel_table(model: ChannelModel) -> &'static ChannelTable {
    static EXACT: OnceLock<ChannelTable> = OnceLock::new();
    static LOOKAHEAD: OnceLock<ChannelTable> = OnceLock::new();
    match model {
        ChannelModel::Exact => EXACT.get_or_init(|| ChannelTable::new(ChannelModel::Exact)),
        ChannelModel::Lookahead => {
            LOOKAHEAD.get_or_init(|| ChannelTable::new(ChannelModel::Lookahead))
        }
    }
}

/// Source of a cell's read-back value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Source {
    Input(usize),
    // Writer position relative to (m, n).
    External(usize, usize),
}

/// Entry of the 16×4×39 table: window over columns `n, n+1`, state at `n`.
pub fn output_probability(y: [i8; 4], u: [i8; 2], s_prev: GrainState) -> f64 {
    lookahead_entry(y, u, s_prev)
}

fn lookahead_entry(y: [i8; 4], u: [i8; 2], state: GrainState) -> f64 {
    let mut sources = [Source::Input(0); 4];
    for (row, label) in [state.top, state.bottom].into_iter().enumerate() {
        let (dr, dc) = label.writer_offset();
        sources[row] = if dc == 0 && row + dr < 2 {
            Source::Input(row + dr)
        } else {
            Source::External(row + dr, dc)
        };
        // Column n+1: the same grain if it continues, else an unknown grain.
        sources[2 + row] = match label.right() {
            Some(next) => {
                let (ndr, ndc) = next.writer_offset();
                Source::External(row + ndr, 1 + ndc)
            }
            None => Source::External(row, 1),
        };
    }
    let mut externals: Vec<(usize, usize)> = Vec::new();
    for s in sources {
        if let Source::External(r, c) = s {
            if !externals.contains(&(r, c)) {
                externals.push((r, c));
            }
        }
    }
    let n = externals.len();
    let mut total = 0.0;
    for assignment in 0..1usize << n {
        let value = |s: Source| match s {
            Source::Input(i) => u[i],
            Source::External(r, c) => {
                let k = externals.iter().position(|&e| e == (r, c)).unwrap();
                bit_to_sign(assignment, k)
            }
        };
        if (0..4).all(|i| value(sources[i]) == y[i]) {
            total += 1.0;
        }
    }
    total / (1usize << n) as f64
}

fn exact_entry(y: [i8; 4], u: [i8; 2], state: GrainState) -> f64 {
    // Window cell (row, col) with col 0 = n-1, col 1 = n.
    let y_at = |row: usize, col: usize| y[col * 2 + row];
    let mut factor = 1.0;
    for (row, label) in [state.top, state.bottom].into_iter().enumerate() {
        let (dr, dc) = label.writer_offset();
        if dc != 0 {
            continue;
        }
        let (or, oc) = label.offset();
        let kind = label.kind();
        let in_window: Vec<i8> = (0..kind.height())
            .flat_map(|gr| (0..kind.width()).map(move |gc| (gr, gc)))
            .filter_map(|(gr, gc)| {
                let r = row as isize - or as isize + gr as isize;
                let c = 1 - oc as isize + gc as isize;
                ((0..2).contains(&r) && (0..2).contains(&c)).then(|| y_at(r as usize, c as usize))
            })
            .collect();
        let writer_row = row + dr;
        if writer_row < 2 {
            if writer_row != row {
                // Covered by the cell that holds the writer.
                continue;
            }
            let w = u[writer_row];
            if in_window.iter().any(|&v| v != w) {
                return 0.0;
            }
        } else {
            if in_window.iter().any(|&v| v != in_window[0]) {
                return 0.0;
            }
            factor *= 0.5;
        }
    }
    factor
}
