//! Intensity models and Gaussian kernel intensity estimation.
//!
//! A model reports the intensity of the marked process with respect to area
//! times the mark reference measure: for a counting reference the value at
//! `(z, m)` is the familiar per-area rate of mark-`m` points near `z`. The
//! estimators only ever interact with the [`IntensityModel`] trait, so known
//! analytic intensities, kernel estimates, rescaled and torus-translated
//! models all plug into the same code paths.
//!
//! The mark-set lower bound `lambda_bar` drives the reweighting inside the
//! D and F estimators. Under-estimating it is harmless, over-estimating is
//! not, so every built-in field reports an exact infimum: analytic surfaces
//! attain theirs on window corners, and kernel estimates evaluate by
//! bilinear interpolation on their raster, whose minimum sits on a node.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Window};
use crate::pattern::{Mark, MarkSet, MarkSpace, MarkedPattern};

/// A non-negative scalar field on a window: one mark component of an
/// intensity, or the spatial part of a factorized model.
pub trait SpatialField: Send + Sync {
    fn eval(&self, p: Point) -> f64;

    /// An upper bound of `eval` over the window, used as the default
    /// thinning envelope by the simulators.
    fn sup_bound(&self, w: &Window) -> f64;

    /// The exact infimum of `eval` over the window, when the field can
    /// supply one. `None` falls back to a raster scan in `lower_bound`,
    /// which may over-estimate the infimum between grid nodes.
    fn exact_inf(&self, _w: &Window) -> Option<f64> {
        None
    }

    /// Whether evaluating this field at torus-wrapped locations is
    /// consistent with its construction. Required of the translated
    /// component in the torus-translation test.
    fn torus_safe(&self) -> bool {
        false
    }
}

/// Closed-form intensity surfaces for configs and simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Surface {
    /// Flat surface.
    Constant(f64),
    /// `c + ax * x + by * y`.
    Linear { c: f64, ax: f64, by: f64 },
}

impl Surface {
    fn corner_values(&self, w: &Window) -> [f64; 4] {
        [
            self.value_at(w.xmin(), w.ymin()),
            self.value_at(w.xmax(), w.ymin()),
            self.value_at(w.xmin(), w.ymax()),
            self.value_at(w.xmax(), w.ymax()),
        ]
    }

    fn value_at(&self, x: f64, y: f64) -> f64 {
        match *self {
            Surface::Constant(v) => v,
            Surface::Linear { c, ax, by } => c + ax * x + by * y,
        }
    }
}

impl SpatialField for Surface {
    fn eval(&self, p: Point) -> f64 {
        self.value_at(p.x, p.y)
    }

    fn sup_bound(&self, w: &Window) -> f64 {
        // Affine surfaces attain their extrema on corners.
        self.corner_values(w)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn exact_inf(&self, w: &Window) -> Option<f64> {
        Some(
            self.corner_values(w)
                .into_iter()
                .fold(f64::INFINITY, f64::min),
        )
    }

    fn torus_safe(&self) -> bool {
        true
    }
}

/// Edge correction of the kernel estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeCorrection {
    /// Wrap the window onto a torus and fold the kernel mass back in. Mass
    /// is conserved exactly and the estimate is torus-translation
    /// equivariant, which the translation test requires.
    Torus,
    /// Divide by the kernel mass that falls inside the window at the
    /// evaluation point. Removes boundary bias for bounded-window use.
    Local,
}

/// Gaussian kernel intensity estimate of one component, cached on a raster.
///
/// Evaluation interpolates the raster bilinearly, so the reported minimum
/// and maximum are the exact extrema of the evaluator, not just of the
/// sampled nodes. Node values are clamped below at `1e-10 * n / |W|` to keep
/// reciprocal weights finite in empty regions.
pub struct KernelIntensity {
    window: Window,
    sigma: f64,
    mode: EdgeCorrection,
    res: usize,
    /// Row-major `(res + 1) x (res + 1)` node values, y-major.
    nodes: Vec<f64>,
    floor: f64,
    node_min: f64,
    node_max: f64,
    data: Vec<Point>,
}

impl KernelIntensity {
    pub fn fit(
        locations: &[Point],
        window: Window,
        sigma: f64,
        mode: EdgeCorrection,
        res: usize,
    ) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidParameter {
                name: "kernel locations",
                message: "need at least one location".into(),
            });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "bandwidth",
                message: format!("must be positive and finite, got {sigma}"),
            });
        }
        if !(1..=4096).contains(&res) {
            return Err(Error::InvalidParameter {
                name: "raster resolution",
                message: format!("must be in 1..=4096, got {res}"),
            });
        }
        for (i, p) in locations.iter().enumerate() {
            if !window.contains(*p) {
                return Err(Error::InvalidParameter {
                    name: "kernel locations",
                    message: format!("location {i} lies outside the window"),
                });
            }
        }

        let n = locations.len();
        let nn = res + 1;
        let wx = window.width();
        let wy = window.height();
        let node_x: Vec<f64> = (0..nn)
            .map(|j| window.xmin() + j as f64 * wx / res as f64)
            .collect();
        let node_y: Vec<f64> = (0..nn)
            .map(|j| window.ymin() + j as f64 * wy / res as f64)
            .collect();

        // Separable accumulation: per point, a vector of x-axis kernel
        // values and one of y-axis values; node (a, b) collects the sum of
        // products. Torus mode folds periodic images into the axis vectors.
        let profile = |coords: &[f64], center: f64, len: f64| -> Vec<f64> {
            match mode {
                EdgeCorrection::Torus => {
                    let jmax = (8.0 * sigma / len).ceil() as i64 + 1;
                    coords
                        .iter()
                        .map(|&c| {
                            (-jmax..=jmax)
                                .map(|j| gauss1(c - center + j as f64 * len, sigma))
                                .sum()
                        })
                        .collect()
                }
                EdgeCorrection::Local => {
                    coords.iter().map(|&c| gauss1(c - center, sigma)).collect()
                }
            }
        };
        let xprof: Vec<Vec<f64>> = locations
            .par_iter()
            .map(|p| profile(&node_x, p.x, wx))
            .collect();
        let yprof: Vec<Vec<f64>> = locations
            .par_iter()
            .map(|p| profile(&node_y, p.y, wy))
            .collect();

        // Rows are independent; within a row the data loop runs in index
        // order, so the raster is identical whatever the thread count.
        let mut nodes = vec![0.0f64; nn * nn];
        nodes.par_chunks_mut(nn).enumerate().for_each(|(a, row)| {
            for i in 0..n {
                let cy = yprof[i][a];
                if cy == 0.0 {
                    continue;
                }
                let xp = &xprof[i];
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot += cy * xp[b];
                }
            }
        });

        if let EdgeCorrection::Local = mode {
            let cx: Vec<f64> = node_x
                .iter()
                .map(|&x| phi((window.xmax() - x) / sigma) - phi((window.xmin() - x) / sigma))
                .collect();
            let cy: Vec<f64> = node_y
                .iter()
                .map(|&y| phi((window.ymax() - y) / sigma) - phi((window.ymin() - y) / sigma))
                .collect();
            for a in 0..nn {
                for b in 0..nn {
                    nodes[a * nn + b] /= cy[a] * cx[b];
                }
            }
        }

        let floor = 1e-10 * n as f64 / window.area();
        let mut node_min = f64::INFINITY;
        let mut node_max = f64::NEG_INFINITY;
        for v in nodes.iter_mut() {
            *v = v.max(floor);
            node_min = node_min.min(*v);
            node_max = node_max.max(*v);
        }

        Ok(KernelIntensity {
            window,
            sigma,
            mode,
            res,
            nodes,
            floor,
            node_min,
            node_max,
            data: locations.to_vec(),
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mode(&self) -> EdgeCorrection {
        self.mode
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn node_min(&self) -> f64 {
        self.node_min
    }

    pub fn node_max(&self) -> f64 {
        self.node_max
    }

    pub fn data(&self) -> &[Point] {
        &self.data
    }

    /// The exact kernel mass a single data point contributes at its own
    /// location (what leave-one-out evaluation subtracts).
    fn self_term(&self, p: Point) -> f64 {
        match self.mode {
            EdgeCorrection::Torus => {
                let fold = |len: f64| -> f64 {
                    let jmax = (8.0 * self.sigma / len).ceil() as i64 + 1;
                    (-jmax..=jmax)
                        .map(|j| gauss1(j as f64 * len, self.sigma))
                        .sum()
                };
                fold(self.window.width()) * fold(self.window.height())
            }
            EdgeCorrection::Local => {
                let cx = phi((self.window.xmax() - p.x) / self.sigma)
                    - phi((self.window.xmin() - p.x) / self.sigma);
                let cy = phi((self.window.ymax() - p.y) / self.sigma)
                    - phi((self.window.ymin() - p.y) / self.sigma);
                gauss1(0.0, self.sigma) * gauss1(0.0, self.sigma) / (cx * cy)
            }
        }
    }
}

impl SpatialField for KernelIntensity {
    fn eval(&self, p: Point) -> f64 {
        let p = self.window.clamp(p);
        let nn = self.res + 1;
        let tx = (p.x - self.window.xmin()) / self.window.width() * self.res as f64;
        let ty = (p.y - self.window.ymin()) / self.window.height() * self.res as f64;
        let bx = (tx as usize).min(self.res - 1);
        let by = (ty as usize).min(self.res - 1);
        let fx = tx - bx as f64;
        let fy = ty - by as f64;
        let v00 = self.nodes[by * nn + bx];
        let v01 = self.nodes[by * nn + bx + 1];
        let v10 = self.nodes[(by + 1) * nn + bx];
        let v11 = self.nodes[(by + 1) * nn + bx + 1];
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
    }

    fn sup_bound(&self, _w: &Window) -> f64 {
        // Bilinear values never exceed the node maximum; the margin keeps
        // thinning acceptance strictly below one.
        self.node_max * 1.01
    }

    fn exact_inf(&self, _w: &Window) -> Option<f64> {
        Some(self.node_min)
    }

    fn torus_safe(&self) -> bool {
        matches!(self.mode, EdgeCorrection::Torus)
    }
}

/// Kernel estimate that subtracts each data point's own kernel mass when
/// evaluated exactly at that point. Off by default; meant for workflows
/// estimating the intensity from the same pattern that is being analysed.
pub struct LeaveOneOutKernel {
    kernel: KernelIntensity,
    self_terms: HashMap<(u64, u64), f64>,
    inf: f64,
}

impl LeaveOneOutKernel {
    pub fn new(kernel: KernelIntensity) -> Self {
        let mut self_terms: HashMap<(u64, u64), f64> = HashMap::new();
        for p in kernel.data().to_vec() {
            let term = kernel.self_term(p);
            *self_terms.entry(key_of(p)).or_insert(0.0) += term;
        }
        let mut inf = kernel.node_min();
        let probe = LeaveOneOutKernel {
            kernel,
            self_terms,
            inf,
        };
        for p in probe.kernel.data().to_vec() {
            inf = inf.min(probe.eval(p));
        }
        LeaveOneOutKernel { inf, ..probe }
    }

    pub fn kernel(&self) -> &KernelIntensity {
        &self.kernel
    }
}

fn key_of(p: Point) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

impl SpatialField for LeaveOneOutKernel {
    fn eval(&self, p: Point) -> f64 {
        let v = self.kernel.eval(p);
        match self.self_terms.get(&key_of(p)) {
            Some(term) => (v - term).max(self.kernel.floor()),
            None => v,
        }
    }

    fn sup_bound(&self, w: &Window) -> f64 {
        self.kernel.sup_bound(w)
    }

    fn exact_inf(&self, _w: &Window) -> Option<f64> {
        Some(self.inf)
    }

    fn torus_safe(&self) -> bool {
        // The dip locations would not follow a torus translation.
        false
    }
}

/// Marked intensity model: the value at `(z, m)` with respect to area times
/// the mark reference measure.
pub trait IntensityModel: Send + Sync {
    fn window(&self) -> &Window;

    fn n_marks(&self) -> usize;

    fn eval(&self, loc: Point, mark: Mark) -> f64;

    /// A lower bound of `eval` over the window and the given mark set. The
    /// default scans an inclusive `grid_n x grid_n` lattice (so window
    /// corners are always sampled); models with exact structure override.
    fn lower_bound(&self, marks: MarkSet, grid_n: usize) -> f64 {
        scan_lower_bound(self, marks, grid_n)
    }

    /// Whether the components for `marks` may be evaluated at torus-wrapped
    /// locations, a precondition of the translation test.
    fn torus_safe_for(&self, _marks: MarkSet) -> bool {
        false
    }
}

/// Raster scan fallback for [`IntensityModel::lower_bound`].
pub fn scan_lower_bound<M: IntensityModel + ?Sized>(
    model: &M,
    marks: MarkSet,
    grid_n: usize,
) -> f64 {
    let g = grid_n.max(2);
    let w = model.window();
    let mut min = f64::INFINITY;
    for iy in 0..g {
        let y = w.ymin() + iy as f64 * w.height() / (g - 1) as f64;
        for ix in 0..g {
            let x = w.xmin() + ix as f64 * w.width() / (g - 1) as f64;
            for m in 0..model.n_marks() {
                if marks.contains(Mark(m)) {
                    min = min.min(model.eval(Point::new(x, y), Mark(m)));
                }
            }
        }
    }
    min
}

/// One spatial field per mark. Fields are paired with a positive scale so
/// the same surface can serve as a per-area component intensity (scaled by
/// `1 / nu(m)`) or as a density with respect to the reference measure.
pub struct PerMarkIntensity {
    window: Window,
    fields: Vec<(Arc<dyn SpatialField>, f64)>,
}

impl PerMarkIntensity {
    /// Fields already give the intensity with respect to area times `nu`.
    pub fn from_densities(window: Window, fields: Vec<Arc<dyn SpatialField>>) -> Result<Self> {
        Self::build(window, fields.into_iter().map(|f| (f, 1.0)).collect())
    }

    /// Fields give per-area component intensities `lambda_m`; the model
    /// divides by `nu(m)`.
    pub fn from_components(
        window: Window,
        markspace: &MarkSpace,
        fields: Vec<Arc<dyn SpatialField>>,
    ) -> Result<Self> {
        if fields.len() != markspace.len() {
            return Err(Error::InvalidParameter {
                name: "intensity fields",
                message: format!("{} fields for {} labels", fields.len(), markspace.len()),
            });
        }
        let scaled = fields
            .into_iter()
            .zip(markspace.marks())
            .map(|(f, m)| (f, 1.0 / markspace.nu(m)))
            .collect();
        Self::build(window, scaled)
    }

    /// The factorized model `lambda(z, m) = ground(z)` shared by all marks,
    /// the model of random labelling.
    pub fn factorized(
        window: Window,
        n_marks: usize,
        ground: Arc<dyn SpatialField>,
    ) -> Result<Self> {
        Self::build(
            window,
            (0..n_marks).map(|_| (Arc::clone(&ground), 1.0)).collect(),
        )
    }

    /// Constant value per mark (densities with respect to area times `nu`).
    pub fn constant(window: Window, values: &[f64]) -> Result<Self> {
        Self::build(
            window,
            values
                .iter()
                .map(|&v| (Arc::new(Surface::Constant(v)) as Arc<dyn SpatialField>, 1.0))
                .collect(),
        )
    }

    fn build(window: Window, fields: Vec<(Arc<dyn SpatialField>, f64)>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidParameter {
                name: "intensity fields",
                message: "need at least one mark component".into(),
            });
        }
        for (i, (f, scale)) in fields.iter().enumerate() {
            if !(scale.is_finite() && *scale > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "intensity scale",
                    message: format!("scale for mark {i} must be positive, got {scale}"),
                });
            }
            if let Some(inf) = f.exact_inf(&window) {
                if !(inf.is_finite() && inf * scale > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "intensity fields",
                        message: format!(
                            "component for mark {i} reaches {inf} on the window; \
                             intensities must stay positive"
                        ),
                    });
                }
            }
        }
        Ok(PerMarkIntensity { window, fields })
    }
}

impl IntensityModel for PerMarkIntensity {
    fn window(&self) -> &Window {
        &self.window
    }

    fn n_marks(&self) -> usize {
        self.fields.len()
    }

    fn eval(&self, loc: Point, mark: Mark) -> f64 {
        let (f, scale) = &self.fields[mark.0];
        scale * f.eval(loc)
    }

    fn lower_bound(&self, marks: MarkSet, grid_n: usize) -> f64 {
        let mut min = f64::INFINITY;
        for (m, (f, scale)) in self.fields.iter().enumerate() {
            if !marks.contains(Mark(m)) {
                continue;
            }
            let inf = match f.exact_inf(&self.window) {
                Some(inf) => scale * inf,
                None => scan_lower_bound(
                    &Restriction {
                        model: self,
                        mark: Mark(m),
                    },
                    MarkSet::single(Mark(0)),
                    grid_n,
                ),
            };
            min = min.min(inf);
        }
        min
    }

    fn torus_safe_for(&self, marks: MarkSet) -> bool {
        self.fields
            .iter()
            .enumerate()
            .filter(|(m, _)| marks.contains(Mark(*m)))
            .all(|(_, (f, _))| f.torus_safe())
    }
}

/// Single-mark view used by the scan fallback above.
struct Restriction<'a> {
    model: &'a PerMarkIntensity,
    mark: Mark,
}

impl IntensityModel for Restriction<'_> {
    fn window(&self) -> &Window {
        self.model.window()
    }

    fn n_marks(&self) -> usize {
        1
    }

    fn eval(&self, loc: Point, _mark: Mark) -> f64 {
        self.model.eval(loc, self.mark)
    }
}

/// `c * base`, the scaled model produced by [`fit_scale`].
pub struct ScaledIntensity {
    base: Arc<dyn IntensityModel>,
    c: f64,
}

impl ScaledIntensity {
    pub fn new(base: Arc<dyn IntensityModel>, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "intensity scale",
                message: format!("must be positive and finite, got {c}"),
            });
        }
        Ok(ScaledIntensity { base, c })
    }

    pub fn scale(&self) -> f64 {
        self.c
    }
}

impl IntensityModel for ScaledIntensity {
    fn window(&self) -> &Window {
        self.base.window()
    }

    fn n_marks(&self) -> usize {
        self.base.n_marks()
    }

    fn eval(&self, loc: Point, mark: Mark) -> f64 {
        self.c * self.base.eval(loc, mark)
    }

    fn lower_bound(&self, marks: MarkSet, grid_n: usize) -> f64 {
        // Same arithmetic as eval, so the bound scales exactly with it.
        self.c * self.base.lower_bound(marks, grid_n)
    }

    fn torus_safe_for(&self, marks: MarkSet) -> bool {
        self.base.torus_safe_for(marks)
    }
}

/// Torus-translation of the components in `translated`; the replicate model
/// of the independence test. Evaluating at `z` reads the base model at
/// `z - shift` wrapped back into the window.
pub struct TranslatedIntensity {
    base: Arc<dyn IntensityModel>,
    shift: Point,
    translated: MarkSet,
}

impl TranslatedIntensity {
    pub fn new(base: Arc<dyn IntensityModel>, shift: Point, translated: MarkSet) -> Self {
        TranslatedIntensity {
            base,
            shift,
            translated,
        }
    }
}

impl IntensityModel for TranslatedIntensity {
    fn window(&self) -> &Window {
        self.base.window()
    }

    fn n_marks(&self) -> usize {
        self.base.n_marks()
    }

    fn eval(&self, loc: Point, mark: Mark) -> f64 {
        if self.translated.contains(mark) {
            let back = Point::new(-self.shift.x, -self.shift.y);
            self.base.eval(self.window().torus_shift(loc, back), mark)
        } else {
            self.base.eval(loc, mark)
        }
    }

    /// Torus translation permutes the window, so the infimum over the
    /// window is the base model's; delegating keeps the equality exact.
    fn lower_bound(&self, marks: MarkSet, grid_n: usize) -> f64 {
        self.base.lower_bound(marks, grid_n)
    }

    fn torus_safe_for(&self, marks: MarkSet) -> bool {
        self.base.torus_safe_for(marks)
    }
}

/// Midpoint quadrature of the model over window x marks against the
/// reference weights: the expected point count under the model.
pub fn raster_integral(model: &dyn IntensityModel, markspace: &MarkSpace, res: usize) -> f64 {
    let res = res.max(1);
    let w = model.window();
    let cell = w.area() / (res * res) as f64;
    let mut total = 0.0;
    for iy in 0..res {
        let y = w.ymin() + (iy as f64 + 0.5) * w.height() / res as f64;
        for ix in 0..res {
            let x = w.xmin() + (ix as f64 + 0.5) * w.width() / res as f64;
            for m in markspace.marks() {
                total += model.eval(Point::new(x, y), m) * markspace.nu(m) * cell;
            }
        }
    }
    total
}

/// Global scale `c` matching the expected count of `c * base` to the
/// observed count: `c = n / integral(base)`.
pub fn fit_scale(base: &dyn IntensityModel, pattern: &MarkedPattern, res: usize) -> Result<f64> {
    if pattern.is_empty() {
        return Err(Error::InvalidParameter {
            name: "pattern",
            message: "cannot fit a scale to an empty pattern".into(),
        });
    }
    let integral = raster_integral(base, pattern.markspace(), res);
    if !(integral.is_finite() && integral > 0.0) {
        return Err(Error::InvalidParameter {
            name: "base model",
            message: format!("expected count must be positive and finite, got {integral}"),
        });
    }
    Ok(pattern.len() as f64 / integral)
}

/// Rule-of-thumb bandwidth: a tenth of the square root of the window area.
pub fn kernel_bandwidth_rule(window: &Window) -> f64 {
    0.10 * window.area().sqrt()
}

fn gauss1(d: f64, sigma: f64) -> f64 {
    let t = d / sigma;
    (-0.5 * t * t).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal distribution function.
fn phi(t: f64) -> f64 {
    0.5 * (1.0 + libm::erf(t / std::f64::consts::SQRT_2))
}
