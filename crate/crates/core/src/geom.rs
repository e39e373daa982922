//! Planar geometry for rectangular observation windows.
//!
//! Everything works on closed axis-aligned rectangles in two dimensions.
//! Balls are closed (a point exactly at distance `r` is inside) and erosion
//! keeps the locations whose distance to the window boundary is at least
//! `r`. The torus metric identifies opposite window edges, which is what the
//! translation-based independence test and the torus kernel correction use.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Squared Euclidean distance. Estimators compare squared distances
    /// against squared radii throughout so that "inside the closed ball"
    /// means exactly the same thing everywhere.
    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// Closed axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidWindow(format!(
                "bounds must be finite, got [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        if xmin >= xmax || ymin >= ymax {
            return Err(Error::InvalidWindow(format!(
                "bounds must satisfy xmin < xmax and ymin < ymax, got [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Window {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    /// The unit square `[0, 1]^2`.
    pub fn unit() -> Self {
        Window {
            xmin: 0.0,
            xmax: 1.0,
            ymin: 0.0,
            ymax: 1.0,
        }
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    pub fn ymin(&self) -> f64 {
        self.ymin
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn min_side(&self) -> f64 {
        self.width().min(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Distance from `p` to the window boundary; `p` lies in the eroded
    /// window at range `r` exactly when `r <= boundary_dist(p)`.
    pub fn boundary_dist(&self, p: Point) -> f64 {
        let dx = (p.x - self.xmin).min(self.xmax - p.x);
        let dy = (p.y - self.ymin).min(self.ymax - p.y);
        dx.min(dy)
    }

    /// Shrink the window by `r` on every side. Returns `None` when nothing
    /// is left, which callers report as "this range is unusable" rather
    /// than an error. `erode(0)` is the window itself.
    pub fn erode(&self, r: f64) -> Option<Window> {
        debug_assert!(r >= 0.0, "erosion range must be non-negative");
        Window::new(self.xmin + r, self.xmax - r, self.ymin + r, self.ymax - r).ok()
    }

    /// Distance on the torus obtained by identifying opposite edges.
    pub fn torus_dist(&self, a: Point, b: Point) -> f64 {
        self.torus_dist2(a, b).sqrt()
    }

    pub fn torus_dist2(&self, a: Point, b: Point) -> f64 {
        let w = self.width();
        let h = self.height();
        let dx = (a.x - b.x).abs();
        let dx = dx.min(w - dx);
        let dy = (a.y - b.y).abs();
        let dy = dy.min(h - dy);
        dx * dx + dy * dy
    }

    /// Translate `p` by `v` and wrap back into the window. The result lives
    /// in `[xmin, xmax) x [ymin, ymax)`; the upper edges are identified with
    /// the lower ones.
    pub fn torus_shift(&self, p: Point, v: Point) -> Point {
        Point::new(
            wrap(p.x + v.x, self.xmin, self.width()),
            wrap(p.y + v.y, self.ymin, self.height()),
        )
    }

    /// Clamp a point onto the closed window.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.xmin, self.xmax),
            p.y.clamp(self.ymin, self.ymax),
        )
    }
}

fn wrap(x: f64, min: f64, len: f64) -> f64 {
    let r = (x - min).rem_euclid(len);
    // rem_euclid can return `len` itself when rounding bites; fold it back.
    if r >= len {
        min
    } else {
        min + r
    }
}
