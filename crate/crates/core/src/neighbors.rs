//! Uniform-grid spatial index over a pattern's locations.
//!
//! Cells partition the window; a ball query scans the cells overlapping the
//! ball's bounding square and filters by exact squared distance. Results
//! therefore match the brute-force definition bit for bit, including points
//! exactly at distance `r` (balls are closed). The index is read-only after
//! construction and safe to share across threads.

use crate::geom::Point;
use crate::pattern::{MarkSet, MarkedPattern};

pub struct NeighborIndex<'p> {
    pattern: &'p MarkedPattern,
    nx: usize,
    ny: usize,
    inv_cw: f64,
    inv_ch: f64,
    // CSR layout: cell c holds items[starts[c]..starts[c + 1]], ascending.
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<'p> NeighborIndex<'p> {
    /// Build an index with cells of roughly `target_cell` side length. Use
    /// the largest query radius you intend to ask for; smaller cells only
    /// add scan overhead.
    pub fn build(pattern: &'p MarkedPattern, target_cell: f64) -> Self {
        let w = pattern.window();
        let n = pattern.len();
        // Keep the cell array comparable to the point count so construction
        // stays linear even for tiny query radii.
        let cap = ((2.0 * n as f64).sqrt().ceil() as usize).clamp(1, 512);
        let per_axis = |side: f64| -> usize {
            if target_cell > 0.0 && target_cell.is_finite() {
                ((side / target_cell).floor() as usize).clamp(1, cap)
            } else {
                1
            }
        };
        let nx = per_axis(w.width());
        let ny = per_axis(w.height());
        let inv_cw = nx as f64 / w.width();
        let inv_ch = ny as f64 / w.height();

        let cell_of = |p: Point| -> usize {
            let cx = (((p.x - w.xmin()) * inv_cw) as usize).min(nx - 1);
            let cy = (((p.y - w.ymin()) * inv_ch) as usize).min(ny - 1);
            cy * nx + cx
        };

        let mut counts = vec![0u32; nx * ny + 1];
        for p in pattern.points() {
            counts[cell_of(p.loc) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts;
        let mut cursor = starts.clone();
        let mut items = vec![0u32; n];
        // Filling in point order keeps every cell's item list ascending.
        for (i, p) in pattern.points().iter().enumerate() {
            let c = cell_of(p.loc);
            items[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }
        NeighborIndex {
            pattern,
            nx,
            ny,
            inv_cw,
            inv_ch,
            starts,
            items,
        }
    }

    /// Indices of points with mark in `marks` inside the closed ball
    /// `B(center, r)`, ascending.
    pub fn ball_query(&self, center: Point, r: f64, marks: MarkSet) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_in_ball(center, r, marks, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Like [`ball_query`](Self::ball_query) but hands back squared
    /// distances and leaves the ordering to the caller.
    pub fn ball_query_dist2(&self, center: Point, r: f64, marks: MarkSet) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        self.for_each_in_ball(center, r, marks, |i, d2| out.push((i, d2)));
        out
    }

    fn for_each_in_ball<F: FnMut(u32, f64)>(
        &self,
        center: Point,
        r: f64,
        marks: MarkSet,
        mut visit: F,
    ) {
        if r < 0.0 || !r.is_finite() {
            return;
        }
        let w = self.pattern.window();
        let r2 = r * r;
        let clamp_cell = |t: f64, n: usize| -> usize {
            if t < 0.0 {
                0
            } else {
                (t as usize).min(n - 1)
            }
        };
        let cx0 = clamp_cell((center.x - r - w.xmin()) * self.inv_cw, self.nx);
        let cx1 = clamp_cell((center.x + r - w.xmin()) * self.inv_cw, self.nx);
        let cy0 = clamp_cell((center.y - r - w.ymin()) * self.inv_ch, self.ny);
        let cy1 = clamp_cell((center.y + r - w.ymin()) * self.inv_ch, self.ny);
        let points = self.pattern.points();
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let c = cy * self.nx + cx;
                let lo = self.starts[c] as usize;
                let hi = self.starts[c + 1] as usize;
                for &i in &self.items[lo..hi] {
                    let p = points[i as usize];
                    if !marks.contains(p.mark) {
                        continue;
                    }
                    let d2 = center.dist2(p.loc);
                    if d2 <= r2 {
                        visit(i, d2);
                    }
                }
            }
        }
    }
}
