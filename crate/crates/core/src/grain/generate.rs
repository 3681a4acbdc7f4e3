//! Random grain images.
//!
//! A region is tiled largest grains first: 2×2 grains at random free
//! positions, then 2×1 and 1×2 grains, and finally 1×1 grains in every hole
//! that is left. When random sequential placement jams before the domino
//! target is met, augmenting paths over the domino matching open up room for
//! the missing dominoes. Above `P2 = 0.36` there are too few 1×1 grains to
//! absorb the holes of a large image, so the image is assembled from a pool of
//! independently tiled 16×16 sub-images instead; grains never cross sub-image
//! seams on that path.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GrainDistribution, GrainImage, GrainKind, SubgrainLabel};
use crate::error::{Error, Result};

/// Side length of the sub-images used for high `P2`.
pub const SUBIMAGE_SIZE: usize = 16;
/// Number of pre-generated sub-images.
pub const SUBIMAGE_POOL_SIZE: usize = 1024;
/// `P2` above which images are assembled from sub-images.
pub const SUBIMAGE_P2_THRESHOLD: f64 = 0.36;
/// Attempts per region before generation is abandoned.
pub const REGION_RETRY_BUDGET: usize = 100;

const FREE: u32 = u32::MAX;
const BLOCKED: u32 = u32::MAX - 1;

/// Grain image generator for one grain distribution.
///
/// Holds the sub-image pool when the distribution needs one, so that many
/// images can be drawn without regenerating it.
#[derive(Clone, Debug)]
pub struct GrainGenerator {
    dist: GrainDistribution,
    pool: Option<Vec<GrainImage>>,
}

impl GrainGenerator {
    pub fn new<R: Rng + ?Sized>(dist: GrainDistribution, rng: &mut R) -> Result<Self> {
        let pool = if dist.p2 > SUBIMAGE_P2_THRESHOLD {
            let pool = (0..SUBIMAGE_POOL_SIZE)
                .map(|_| tile_with_retries(SUBIMAGE_SIZE, SUBIMAGE_SIZE, &dist, rng))
                .collect::<Result<Vec<_>>>()?;
            Some(pool)
        } else {
            None
        };
        Ok(Self { dist, pool })
    }

    pub fn distribution(&self) -> &GrainDistribution {
        &self.dist
    }

    pub fn uses_subimages(&self) -> bool {
        self.pool.is_some()
    }

    /// Draw one `rows × cols` image. Both dimensions must be even and ≥ 2.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<GrainImage> {
        if rows < 2 || cols < 2 || rows % 2 != 0 || cols % 2 != 0 {
            return Err(Error::Dimensions {
                rows,
                cols,
                reason: "grain images need even dimensions of at least 2",
            });
        }
        let Some(pool) = &self.pool else {
            return tile_with_retries(rows, cols, &self.dist, rng);
        };

        let mut image = GrainImage::all_single(rows, cols);
        let full_rows = rows / SUBIMAGE_SIZE * SUBIMAGE_SIZE;
        let full_cols = cols / SUBIMAGE_SIZE * SUBIMAGE_SIZE;
        for r in (0..full_rows).step_by(SUBIMAGE_SIZE) {
            for c in (0..full_cols).step_by(SUBIMAGE_SIZE) {
                let block = pool.choose(rng).expect("pool is never empty");
                image.paste(r, c, block);
            }
            if full_cols < cols {
                let strip = tile_with_retries(SUBIMAGE_SIZE, cols - full_cols, &self.dist, rng)?;
                image.paste(r, full_cols, &strip);
            }
        }
        if full_rows < rows {
            let strip = tile_with_retries(rows - full_rows, cols, &self.dist, rng)?;
            image.paste(full_rows, 0, &strip);
        }
        Ok(image)
    }
}

/// Generate a single image from a seed.
pub fn generate_grain_image(
    dist: GrainDistribution,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<GrainImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrainGenerator::new(dist, &mut rng)?.generate(rows, cols, &mut rng)
}

fn tile_with_retries<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    dist: &GrainDistribution,
    rng: &mut R,
) -> Result<GrainImage> {
    let mut last = String::new();
    for _ in 0..REGION_RETRY_BUDGET {
        match RegionTiler::new(rows, cols).tile(dist, rng) {
            Ok(image) => return Ok(image),
            Err(reason) => last = reason,
        }
    }
    Err(Error::Generation {
        attempts: REGION_RETRY_BUDGET,
        reason: last,
    })
}

fn stochastic_round<R: Rng + ?Sized>(x: f64, rng: &mut R) -> usize {
    let base = x.floor();
    let extra = rng.gen::<f64>() < x - base;
    base as usize + extra as usize
}

/// Occupancy bookkeeping for tiling one rectangular region.
///
/// `state[i]` is `FREE`, `BLOCKED` (part of a 2×2 grain) or the index of the
/// other cell of the domino covering `i`.
struct RegionTiler {
    rows: usize,
    cols: usize,
    state: Vec<u32>,
    squares: Vec<usize>,
    // BFS scratch, stamped by epoch so it never needs clearing.
    seen: Vec<u32>,
    prev: Vec<u32>,
    via: Vec<u32>,
    epoch: u32,
}

impl RegionTiler {
    fn new(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        Self {
            rows,
            cols,
            state: vec![FREE; n],
            squares: Vec::new(),
            seen: vec![0; n],
            prev: vec![0; n],
            via: vec![0; n],
            epoch: 0,
        }
    }

    fn tile<R: Rng + ?Sized>(
        mut self,
        dist: &GrainDistribution,
        rng: &mut R,
    ) -> std::result::Result<GrainImage, String> {
        let n = self.rows * self.cols;
        let expected_grains = n as f64 / 2.0;
        let n_square = stochastic_round(dist.p4 * expected_grains, rng);
        let n_domino_each = stochastic_round(dist.p2 * expected_grains, rng);

        let placed = self.place_squares(n_square, rng);
        if placed < n_square {
            return Err(format!("placed {placed} of {n_square} 2x2 grains"));
        }

        let target = 2 * n_domino_each;
        let mut dominoes = self.place_dominoes(n_domino_each, rng);
        if dominoes < target {
            dominoes += self.augment(target - dominoes, rng);
        }
        let slack = (target as f64 * 0.002) as usize;
        if dominoes + slack < target {
            return Err(format!("placed {dominoes} of {target} dominoes"));
        }
        self.rebalance(rng);
        Ok(self.into_image())
    }

    fn place_squares<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) -> usize {
        if count == 0 || self.rows < 2 || self.cols < 2 {
            return 0;
        }
        let cols = self.cols;
        let mut candidates: Vec<u32> = (0..self.rows - 1)
            .flat_map(|r| (0..cols - 1).map(move |c| (r * cols + c) as u32))
            .collect();
        candidates.shuffle(rng);
        let mut placed = 0;
        for &cand in &candidates {
            if placed == count {
                break;
            }
            let i = cand as usize;
            let cells = [i, i + 1, i + self.cols, i + self.cols + 1];
            if cells.iter().all(|&j| self.state[j] == FREE) {
                for j in cells {
                    self.state[j] = BLOCKED;
                }
                self.squares.push(i);
                placed += 1;
            }
        }
        placed
    }

    /// Random sequential placement of dominoes with per-orientation caps.
    fn place_dominoes<R: Rng + ?Sized>(&mut self, each: usize, rng: &mut R) -> usize {
        if each == 0 {
            return 0;
        }
        let (rows, cols) = (self.rows, self.cols);
        // Bit 0 of a candidate is the orientation (1 = vertical).
        let mut candidates: Vec<u32> = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let i = (r * cols + c) as u32;
                if c + 1 < cols {
                    candidates.push(i << 1);
                }
                if r + 1 < rows {
                    candidates.push((i << 1) | 1);
                }
            }
        }
        candidates.shuffle(rng);
        let (mut vertical, mut horizontal) = (0, 0);
        for cand in candidates {
            if vertical == each && horizontal == each {
                break;
            }
            let i = (cand >> 1) as usize;
            let is_vertical = cand & 1 == 1;
            let j = if is_vertical { i + cols } else { i + 1 };
            let count = if is_vertical {
                &mut vertical
            } else {
                &mut horizontal
            };
            if *count < each && self.state[i] == FREE && self.state[j] == FREE {
                self.state[i] = j as u32;
                self.state[j] = i as u32;
                *count += 1;
            }
        }
        vertical + horizontal
    }

    fn neighbors(&self, i: usize) -> [Option<usize>; 4] {
        let (r, c) = (i / self.cols, i % self.cols);
        [
            (r > 0).then(|| i - self.cols),
            (c + 1 < self.cols).then(|| i + 1),
            (r + 1 < self.rows).then(|| i + self.cols),
            (c > 0).then(|| i - 1),
        ]
    }

    /// Grow the domino matching by up to `wanted` dominoes along augmenting paths.
    fn augment<R: Rng + ?Sized>(&mut self, wanted: usize, rng: &mut R) -> usize {
        let n = self.rows * self.cols;
        let visit_limit = n.min(20_000);
        let mut added = 0;
        while added < wanted {
            let mut free: Vec<usize> = (0..n).filter(|&i| self.state[i] == FREE).collect();
            free.shuffle(rng);
            let mut progress = false;
            for u in free {
                if added == wanted {
                    break;
                }
                if self.state[u] == FREE && self.augment_from(u, visit_limit, rng.gen_range(0..4)) {
                    added += 1;
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        added
    }

    fn augment_from(&mut self, root: usize, visit_limit: usize, rotate: usize) -> bool {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.seen.fill(0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        self.seen[root] = epoch;
        let mut queue = VecDeque::from([root]);
        let mut visited = 1;
        while let Some(w) = queue.pop_front() {
            let nbrs = self.neighbors(w);
            for k in 0..4 {
                let Some(v) = nbrs[(k + rotate) % 4] else {
                    continue;
                };
                match self.state[v] {
                    BLOCKED => {}
                    FREE => {
                        if v != root {
                            self.flip_path(root, w, v);
                            return true;
                        }
                    }
                    partner => {
                        let p = partner as usize;
                        if self.seen[p] != epoch {
                            self.seen[p] = epoch;
                            self.prev[p] = w as u32;
                            self.via[p] = v as u32;
                            queue.push_back(p);
                            visited += 1;
                            if visited > visit_limit {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        false
    }

    fn flip_path(&mut self, root: usize, mut w: usize, end: usize) {
        let mut mate = end;
        loop {
            let old_via = self.via[w] as usize;
            let parent = self.prev[w] as usize;
            self.state[w] = mate as u32;
            self.state[mate] = w as u32;
            if w == root {
                break;
            }
            mate = old_via;
            w = parent;
        }
    }

    fn orientation_counts(&self) -> (usize, usize) {
        let (mut vertical, mut horizontal) = (0, 0);
        for (i, &s) in self.state.iter().enumerate() {
            if s < BLOCKED && (s as usize) > i {
                if s as usize == i + 1 {
                    horizontal += 1;
                } else {
                    vertical += 1;
                }
            }
        }
        (vertical, horizontal)
    }

    /// Rotate pairs of parallel dominoes until vertical and horizontal counts
    /// differ by at most one.
    fn rebalance<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (mut vertical, mut horizontal) = self.orientation_counts();
        if vertical.abs_diff(horizontal) <= 1 || self.rows < 2 || self.cols < 2 {
            return;
        }
        let cols = self.cols;
        let mut windows: Vec<usize> = (0..self.rows - 1)
            .flat_map(|r| (0..cols - 1).map(move |c| r * cols + c))
            .collect();
        for _ in 0..4 {
            windows.shuffle(rng);
            let mut progress = false;
            for &i in &windows {
                if vertical.abs_diff(horizontal) <= 1 {
                    return;
                }
                let (a, b, c, d) = (i, i + 1, i + cols, i + cols + 1);
                let s = |j: usize| self.state[j] as usize;
                let two_vertical = s(a) == c && s(b) == d;
                let two_horizontal = s(a) == b && s(c) == d;
                if vertical > horizontal && two_vertical {
                    self.pair(a, b);
                    self.pair(c, d);
                    vertical -= 2;
                    horizontal += 2;
                    progress = true;
                } else if horizontal > vertical && two_horizontal {
                    self.pair(a, c);
                    self.pair(b, d);
                    vertical += 2;
                    horizontal -= 2;
                    progress = true;
                }
            }
            if !progress {
                return;
            }
        }
    }

    fn pair(&mut self, a: usize, b: usize) {
        self.state[a] = b as u32;
        self.state[b] = a as u32;
    }

    fn into_image(self) -> GrainImage {
        use SubgrainLabel::*;
        let cols = self.cols;
        let mut cells = vec![A; self.rows * cols];
        for &i in &self.squares {
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                cells[i + dr * cols + dc] = GrainKind::Square.label_at(dr, dc);
            }
        }
        for (i, &s) in self.state.iter().enumerate() {
            if s < BLOCKED && (s as usize) > i {
                let j = s as usize;
                if j == i + 1 {
                    cells[i] = D;
                    cells[j] = E;
                } else {
                    cells[i] = B;
                    cells[j] = C;
                }
            }
        }
        GrainImage::from_cells_unchecked(self.rows, cols, cells)
    }
}
