//! Four-grain rectangular discrete grain model.
//!
//! The medium is a rectangular lattice of unit cells tiled by grains of four
//! shapes: 1×1, 2×1 (two rows, one column), 1×2 and 2×2. Every cell carries a
//! [`SubgrainLabel`] naming its role inside its grain:
//!
//! ```text
//!   A      B      D E      F H
//!          C               G I
//! ```
//!
//! Coded bits are written in raster order; a grain keeps the polarity of the
//! last bit written on it, which is always its lowest, right-most cell.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod generate;

pub use generate::{
    generate_grain_image, GrainGenerator, REGION_RETRY_BUDGET, SUBIMAGE_P2_THRESHOLD,
    SUBIMAGE_POOL_SIZE, SUBIMAGE_SIZE,
};

/// The four grain shapes of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GrainKind {
    /// 1×1, label A, probability P1.
    Single,
    /// 2×1 (vertical), labels B over C, probability P2.
    Vertical,
    /// 1×2 (horizontal), labels D then E, probability P3.
    Horizontal,
    /// 2×2, labels F H over G I, probability P4.
    Square,
}

impl GrainKind {
    pub const ALL: [GrainKind; 4] = [
        GrainKind::Single,
        GrainKind::Vertical,
        GrainKind::Horizontal,
        GrainKind::Square,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn height(self) -> usize {
        match self {
            GrainKind::Single | GrainKind::Horizontal => 1,
            GrainKind::Vertical | GrainKind::Square => 2,
        }
    }

    pub fn width(self) -> usize {
        match self {
            GrainKind::Single | GrainKind::Vertical => 1,
            GrainKind::Horizontal | GrainKind::Square => 2,
        }
    }

    pub fn area(self) -> usize {
        self.height() * self.width()
    }

    /// Label of the top-left cell.
    pub fn anchor(self) -> SubgrainLabel {
        self.label_at(0, 0)
    }

    /// Label of the cell at offset `(dr, dc)` from the top-left cell.
    ///
    /// Panics if the offset lies outside the grain.
    pub fn label_at(self, dr: usize, dc: usize) -> SubgrainLabel {
        use SubgrainLabel::*;
        match (self, dr, dc) {
            (GrainKind::Single, 0, 0) => A,
            (GrainKind::Vertical, 0, 0) => B,
            (GrainKind::Vertical, 1, 0) => C,
            (GrainKind::Horizontal, 0, 0) => D,
            (GrainKind::Horizontal, 0, 1) => E,
            (GrainKind::Square, 0, 0) => F,
            (GrainKind::Square, 1, 0) => G,
            (GrainKind::Square, 0, 1) => H,
            (GrainKind::Square, 1, 1) => I,
            _ => panic!("offset ({dr}, {dc}) outside a {self:?} grain"),
        }
    }
}

/// Role of a cell within its grain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubgrainLabel {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl SubgrainLabel {
    pub const ALL: [SubgrainLabel; 9] = [
        SubgrainLabel::A,
        SubgrainLabel::B,
        SubgrainLabel::C,
        SubgrainLabel::D,
        SubgrainLabel::E,
        SubgrainLabel::F,
        SubgrainLabel::G,
        SubgrainLabel::H,
        SubgrainLabel::I,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn kind(self) -> GrainKind {
        use SubgrainLabel::*;
        match self {
            A => GrainKind::Single,
            B | C => GrainKind::Vertical,
            D | E => GrainKind::Horizontal,
            F | G | H | I => GrainKind::Square,
        }
    }

    /// Offset `(dr, dc)` of this cell from its grain's top-left cell.
    pub fn offset(self) -> (usize, usize) {
        use SubgrainLabel::*;
        match self {
            A | B | D | F => (0, 0),
            C | G => (1, 0),
            E | H => (0, 1),
            I => (1, 1),
        }
    }

    /// Offset from this cell to the grain's last-written (lowest, right-most) cell.
    pub fn writer_offset(self) -> (usize, usize) {
        let (dr, dc) = self.offset();
        let kind = self.kind();
        (kind.height() - 1 - dr, kind.width() - 1 - dc)
    }

    /// Label of the same-grain cell directly below, if the grain continues down.
    pub fn below(self) -> Option<SubgrainLabel> {
        let (dr, dc) = self.offset();
        let kind = self.kind();
        (dr + 1 < kind.height()).then(|| kind.label_at(dr + 1, dc))
    }

    /// Label of the same-grain cell directly to the right, if the grain continues right.
    pub fn right(self) -> Option<SubgrainLabel> {
        let (dr, dc) = self.offset();
        let kind = self.kind();
        (dc + 1 < kind.width()).then(|| kind.label_at(dr, dc + 1))
    }

    /// Label of the same-grain cell directly to the left, if any.
    pub fn left(self) -> Option<SubgrainLabel> {
        let (dr, dc) = self.offset();
        (dc > 0).then(|| self.kind().label_at(dr, dc - 1))
    }

    /// True for labels on the top edge of their grain (nothing above is required).
    pub fn is_top_edge(self) -> bool {
        self.offset().0 == 0
    }

    /// True for labels on the left edge of their grain.
    pub fn is_left_edge(self) -> bool {
        self.offset().1 == 0
    }

    pub fn as_char(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn from_char(c: char) -> Option<SubgrainLabel> {
        let c = c.to_ascii_uppercase();
        if ('A'..='I').contains(&c) {
            Some(Self::ALL[(c as u8 - b'A') as usize])
        } else {
            None
        }
    }
}

impl fmt::Display for SubgrainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Grain-type probabilities `(P1, P2, P3, P4)`.
///
/// Constrained by `P2 = P3` and two coded bits per grain on average,
/// `P1 + 2 P2 + 2 P3 + 4 P4 = 2`, so a single parameter `P2` fixes the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrainDistribution {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl GrainDistribution {
    /// Solve the grain-probability constraints for a given `P2`.
    pub fn from_p2(p2: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p2) {
            return Err(Error::Domain(format!(
                "P2 = {p2} outside [0, 0.5]; P1 or P4 would be negative"
            )));
        }
        let p4 = (1.0 - 2.0 * p2) / 3.0;
        let p1 = 2.0 * p4;
        Ok(Self { p1, p2, p3: p2, p4 })
    }

    pub fn prob(&self, kind: GrainKind) -> f64 {
        match kind {
            GrainKind::Single => self.p1,
            GrainKind::Vertical => self.p2,
            GrainKind::Horizontal => self.p3,
            GrainKind::Square => self.p4,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }

    /// Average number of cells per grain; 2 for every valid distribution.
    pub fn bits_per_grain(&self) -> f64 {
        self.p1 + 2.0 * self.p2 + 2.0 * self.p3 + 4.0 * self.p4
    }
}

/// Free-function form of [`GrainDistribution::from_p2`].
pub fn solve_grain_distribution(p2: f64) -> Result<GrainDistribution> {
    GrainDistribution::from_p2(p2)
}

/// A complete tiling of a `rows × cols` lattice by grains.
///
/// The image is implicitly framed by a one-cell border of 1×1 grains; no grain
/// crosses the image boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrainImage {
    rows: usize,
    cols: usize,
    cells: Vec<SubgrainLabel>,
}

impl GrainImage {
    /// Build an image from row-major labels, checking grain completeness.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<SubgrainLabel>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: cells.len(),
            });
        }
        let image = Self { rows, cols, cells };
        image.validate()?;
        Ok(image)
    }

    /// An image made only of 1×1 grains.
    pub fn all_single(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![SubgrainLabel::A; rows * cols],
        }
    }

    pub(crate) fn from_cells_unchecked(
        rows: usize,
        cols: usize,
        cells: Vec<SubgrainLabel>,
    ) -> Self {
        debug_assert_eq!(cells.len(), rows * cols);
        Self { rows, cols, cells }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[SubgrainLabel] {
        &self.cells
    }

    pub fn label(&self, row: usize, col: usize) -> SubgrainLabel {
        self.cells[row * self.cols + col]
    }

    /// Label at a possibly out-of-range position; the frame is all `A`.
    pub fn label_or_boundary(&self, row: isize, col: isize) -> SubgrainLabel {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            SubgrainLabel::A
        } else {
            self.label(row as usize, col as usize)
        }
    }

    /// Position of the last-written cell of the grain covering `(row, col)`.
    pub fn writer_of(&self, row: usize, col: usize) -> (usize, usize) {
        let (dr, dc) = self.label(row, col).writer_offset();
        (row + dr, col + dc)
    }

    /// Check that every cell belongs to exactly one complete grain inside the image.
    pub fn validate(&self) -> Result<()> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let label = self.label(r, c);
                let (dr, dc) = label.offset();
                let kind = label.kind();
                let bad = |reason: String| Error::InvalidImage {
                    row: r,
                    col: c,
                    reason,
                };
                if r < dr || c < dc {
                    return Err(bad(format!("{label} grain crosses the top/left boundary")));
                }
                let (ar, ac) = (r - dr, c - dc);
                if ar + kind.height() > self.rows || ac + kind.width() > self.cols {
                    return Err(bad(format!(
                        "{label} grain crosses the bottom/right boundary"
                    )));
                }
                for gr in 0..kind.height() {
                    for gc in 0..kind.width() {
                        let expect = kind.label_at(gr, gc);
                        let found = self.label(ar + gr, ac + gc);
                        if found != expect {
                            return Err(bad(format!(
                                "{label} requires {expect} at ({}, {}), found {found}",
                                ar + gr,
                                ac + gc
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of grains of each kind, indexed by [`GrainKind::index`].
    pub fn grain_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for label in &self.cells {
            if label.offset() == (0, 0) {
                counts[label.kind().index()] += 1;
            }
        }
        counts
    }

    /// Empirical grain-type frequencies (fractions of the grain count).
    pub fn grain_frequencies(&self) -> [f64; 4] {
        let counts = self.grain_counts();
        let total: usize = counts.iter().sum();
        let mut freq = [0.0; 4];
        if total > 0 {
            for (f, &n) in freq.iter_mut().zip(&counts) {
                *f = n as f64 / total as f64;
            }
        }
        freq
    }

    /// Copy `block` into this image with its top-left corner at `(row, col)`.
    pub(crate) fn paste(&mut self, row: usize, col: usize, block: &GrainImage) {
        for r in 0..block.rows {
            let dst = (row + r) * self.cols + col;
            let src = r * block.cols;
            self.cells[dst..dst + block.cols].copy_from_slice(&block.cells[src..src + block.cols]);
        }
    }
}

impl fmt::Display for GrainImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.cols.max(1)) {
            let line: String = row.iter().map(|l| l.as_char()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for GrainImage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lines: Vec<&str> = s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        let mut cells = Vec::with_capacity(rows * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::Parse(format!("row {r} has a different length")));
            }
            for ch in line.chars() {
                cells.push(
                    SubgrainLabel::from_char(ch)
                        .ok_or_else(|| Error::Parse(format!("bad subgrain label {ch:?}")))?,
                );
            }
        }
        GrainImage::from_cells(rows, cols, cells)
    }
}

/// Cell polarities after writing coded bits onto a grain image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WrittenImage {
    rows: usize,
    cols: usize,
    values: Vec<i8>,
}

impl WrittenImage {
    /// Wrap raw ±1 readback values.
    pub fn from_values(rows: usize, cols: usize, values: Vec<i8>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::Domain(format!("polarity {v} is not ±1")));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn value(&self, row: usize, col: usize) -> i8 {
        self.values[row * self.cols + col]
    }

    /// Polarity at a possibly out-of-range position; the frame reads −1.
    #[inline]
    pub fn value_or_boundary(&self, row: isize, col: isize) -> i8 {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            -1
        } else {
            self.values[row as usize * self.cols + col as usize]
        }
    }
}

impl fmt::Display for WrittenImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.values.chunks(self.cols.max(1)) {
            let line: String = row.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for WrittenImage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lines: Vec<&str> = s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        let mut values = Vec::with_capacity(rows * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::Parse(format!("row {r} has a different length")));
            }
            for ch in line.chars() {
                values.push(match ch {
                    '+' => 1,
                    '-' => -1,
                    _ => return Err(Error::Parse(format!("bad polarity {ch:?}"))),
                });
            }
        }
        WrittenImage::from_values(rows, cols, values)
    }
}

/// Write ±1 bits (raster order) onto `image` under the overwrite rule.
///
/// Every cell reads back the bit written on its grain's last-written cell.
pub fn write_bits(image: &GrainImage, bits: &[i8]) -> Result<WrittenImage> {
    let n = image.rows * image.cols;
    if bits.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: bits.len(),
        });
    }
    if let Some(v) = bits.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::Domain(format!("coded bit {v} is not ±1")));
    }
    let mut values = Vec::with_capacity(n);
    for r in 0..image.rows {
        for c in 0..image.cols {
            let (wr, wc) = image.writer_of(r, c);
            values.push(bits[wr * image.cols + wc]);
        }
    }
    Ok(WrittenImage {
        rows: image.rows,
        cols: image.cols,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use SubgrainLabel::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn distribution_corner_values() {
        let d = solve_grain_distribution(0.0).unwrap();
        assert!(close(d.p1, 2.0 / 3.0) && close(d.p2, 0.0) && close(d.p4, 1.0 / 3.0));
        let d = solve_grain_distribution(0.5).unwrap();
        assert!(close(d.p1, 0.0) && close(d.p3, 0.5) && close(d.p4, 0.0));
        let d = solve_grain_distribution(0.25).unwrap();
        assert!(close(d.p1, 1.0 / 3.0) && close(d.p2, 0.25) && close(d.p4, 1.0 / 6.0));
    }

    #[test]
    fn distribution_rejects_out_of_range() {
        assert!(matches!(
            solve_grain_distribution(-0.01),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            solve_grain_distribution(0.51),
            Err(Error::Domain(_))
        ));
        assert!(solve_grain_distribution(f64::NAN).is_err());
    }

    #[test]
    fn label_geometry() {
        assert_eq!(B.below(), Some(C));
        assert_eq!(D.right(), Some(E));
        assert_eq!(F.below(), Some(G));
        assert_eq!(F.right(), Some(H));
        assert_eq!(H.below(), Some(I));
        assert_eq!(G.right(), Some(I));
        assert_eq!(I.left(), Some(G));
        assert_eq!(F.writer_offset(), (1, 1));
        assert_eq!(G.writer_offset(), (0, 1));
        assert_eq!(H.writer_offset(), (1, 0));
        assert_eq!(B.writer_offset(), (1, 0));
        assert_eq!(D.writer_offset(), (0, 1));
        for l in SubgrainLabel::ALL {
            assert_eq!(SubgrainLabel::from_char(l.as_char()), Some(l));
        }
    }

    #[test]
    fn write_all_single_is_identity() {
        let img = GrainImage::all_single(2, 3);
        let bits = vec![1, -1, -1, 1, 1, -1];
        assert_eq!(write_bits(&img, &bits).unwrap().values(), &bits[..]);
    }

    #[test]
    fn square_grain_takes_the_i_bit() {
        let img: GrainImage = "FH\nGI".parse().unwrap();
        let w = write_bits(&img, &[1, 1, 1, -1]).unwrap();
        assert_eq!(w.values(), &[-1, -1, -1, -1]);
    }

    #[test]
    fn horizontal_grain_takes_the_e_bit() {
        let img: GrainImage = "DE\nAA".parse().unwrap();
        let w = write_bits(&img, &[1, -1, 1, 1]).unwrap();
        assert_eq!(w.values(), &[-1, -1, 1, 1]);
    }

    #[test]
    fn write_rejects_wrong_length() {
        let img = GrainImage::all_single(2, 2);
        assert!(matches!(
            write_bits(&img, &[1, 1, 1]),
            Err(Error::LengthMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn validation_catches_incomplete_grains() {
        assert!("BA\nAA".parse::<GrainImage>().is_err());
        assert!("AD\nAA".parse::<GrainImage>().is_err());
        assert!("FH\nGA".parse::<GrainImage>().is_err());
        assert!("AC\nAA".parse::<GrainImage>().is_err());
        assert!("BDE\nCFH\nAGI".parse::<GrainImage>().is_ok());
    }

    #[test]
    fn text_round_trip() {
        let text = "BDEA\nCFHA\nAGIA\nDEAA\n";
        let img: GrainImage = text.parse().unwrap();
        assert_eq!(img.to_string(), text);
        assert_eq!(img.grain_counts(), [6, 1, 2, 1]);
        let w: WrittenImage = "+-\n-+\n".parse().unwrap();
        assert_eq!(w.to_string(), "+-\n-+\n");
        assert_eq!(w.value_or_boundary(-1, 0), -1);
        assert_eq!(w.value_or_boundary(1, 2), -1);
    }
}
