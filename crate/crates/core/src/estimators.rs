//! Cross-type summary statistics for marked point patterns, reweighted by
//! a known or estimated intensity so they apply beyond homogeneous
//! processes.
//!
//! For mark sets `C` and `D` the estimators report, on a grid of radii:
//!
//! * `F`: the empty-space statistic of the `D` points, probed from lattice
//!   locations;
//! * `D`: the same quantity seen from the `C` points themselves, each
//!   reference weighted by its reciprocal intensity (a Hamilton-type
//!   normalization);
//! * `J`: the ratio `(1 - D) / (1 - F)`, one for Poisson components
//!   independent of the `C` points, below one under attraction between the
//!   mark groups and above one under inhibition;
//! * `K`: the reweighted second-moment statistic, `pi r^2` whenever the
//!   `C` and `D` components are independent.
//!
//! Minus-sampling handles edges: at radius `r` only probes and references
//! inside the window eroded by `r` contribute. Every accumulation runs in
//! a fixed order (point index, then squared distance), so results are
//! byte-identical across thread counts.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point, Window};
use crate::intensity::IntensityModel;
use crate::neighbors::NeighborIndex;
use crate::pattern::{MarkSet, MarkSpace, MarkedPattern};

/// Radii the statistics are evaluated at: finite, non-negative, strictly
/// increasing.
#[derive(Debug, Clone)]
pub struct RGrid {
    rs: Vec<f64>,
}

impl RGrid {
    pub fn new(rs: Vec<f64>) -> Result<Self> {
        if rs.is_empty() {
            return Err(Error::InvalidRGrid("need at least one radius".into()));
        }
        for (i, r) in rs.iter().enumerate() {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::InvalidRGrid(format!(
                    "radius {i} must be finite and non-negative, got {r}"
                )));
            }
            if i > 0 && rs[i - 1] >= *r {
                return Err(Error::InvalidRGrid(format!(
                    "radii must be strictly increasing, got {} then {r}",
                    rs[i - 1]
                )));
            }
        }
        Ok(RGrid { rs })
    }

    /// `count` evenly spaced radii from zero to `r_max` inclusive.
    pub fn regular(r_max: f64, count: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidRGrid(format!(
                "r_max must be positive and finite, got {r_max}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidRGrid(format!(
                "a regular grid needs at least 2 radii, got {count}"
            )));
        }
        RGrid::new(
            (0..count)
                .map(|i| i as f64 * r_max / (count - 1) as f64)
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.rs
    }

    pub fn len(&self) -> usize {
        self.rs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rs.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.rs.last().expect("grid is never empty")
    }
}

/// Probe locations for the empty-space statistic.
#[derive(Debug, Clone)]
pub struct ProbeGrid {
    probes: Vec<Point>,
}

impl ProbeGrid {
    /// An `m x m` lattice of cell centres. Probes that collide with a data
    /// location exactly are nudged up by one ulp in `x` so the empty-space
    /// products never see the probe itself as a point of the pattern.
    pub fn lattice(window: &Window, per_side: usize, pattern: &MarkedPattern) -> ProbeGrid {
        let taken: HashSet<(u64, u64)> = pattern
            .points()
            .iter()
            .map(|p| (p.loc.x.to_bits(), p.loc.y.to_bits()))
            .collect();
        let m = per_side.max(1);
        let mut probes = Vec::with_capacity(m * m);
        for iy in 0..m {
            for ix in 0..m {
                let mut p = Point::new(
                    window.xmin() + (ix as f64 + 0.5) * window.width() / m as f64,
                    window.ymin() + (iy as f64 + 0.5) * window.height() / m as f64,
                );
                while taken.contains(&(p.x.to_bits(), p.y.to_bits())) {
                    p.x = p.x.next_up();
                }
                probes.push(p);
            }
        }
        ProbeGrid { probes }
    }

    /// Explicit probe locations; they must be finite and inside the window.
    pub fn custom(points: Vec<Point>, window: &Window) -> Result<ProbeGrid> {
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() || !window.contains(*p) {
                return Err(Error::InvalidParameter {
                    name: "probe locations",
                    message: format!("probe {i} is not a finite point inside the window"),
                });
            }
        }
        Ok(ProbeGrid { probes: points })
    }

    pub fn points(&self) -> &[Point] {
        &self.probes
    }
}

/// Settings shared by all four estimators.
#[derive(Debug, Clone)]
pub struct SummaryConfig {
    pub rgrid: RGrid,
    /// Lattice side for the default probe grid.
    pub probe_per_side: usize,
    /// Explicit probes override the lattice when set.
    pub probes: Option<ProbeGrid>,
    /// Scan resolution for intensity models without an exact infimum.
    pub bound_grid: usize,
    /// `J` is reported only while `1 - F` stays above this tolerance.
    pub denominator_tol: f64,
}

impl SummaryConfig {
    pub fn new(rgrid: RGrid) -> Self {
        SummaryConfig {
            rgrid,
            probe_per_side: 64,
            probes: None,
            bound_grid: 128,
            denominator_tol: 1e-3,
        }
    }
}

/// One radius of a [`SummaryEstimate`]. Statistics that are not defined at
/// this radius (no eligible probes or references after erosion, or a
/// saturated `J` denominator) are `None`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub r: f64,
    pub f: Option<f64>,
    pub d: Option<f64>,
    pub j: Option<f64>,
    pub k: Option<f64>,
    /// Numerator of `1 - D`: the weighted sum of reference products.
    pub d_raw: f64,
    /// Denominator of `1 - D`: the summed reference weights, when any
    /// reference is eligible.
    pub hamilton: Option<f64>,
    pub n_probe: usize,
    pub n_ref: usize,
}

/// The four statistics over the radius grid, plus the intensity lower
/// bound they were reweighted with.
#[derive(Debug, Clone)]
pub struct SummaryEstimate {
    pub rows: Vec<SummaryRow>,
    pub lambda_bar: f64,
    pub c_set: MarkSet,
    pub d_set: MarkSet,
}

impl SummaryEstimate {
    pub fn rs(&self) -> Vec<f64> {
        self.rows.iter().map(|row| row.r).collect()
    }

    pub fn f_column(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|row| row.f).collect()
    }

    pub fn d_column(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|row| row.d).collect()
    }

    pub fn j_column(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|row| row.j).collect()
    }

    pub fn k_column(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|row| row.k).collect()
    }
}

/// Computes all four statistics in one pass.
pub fn summarize(
    pattern: &MarkedPattern,
    model: &dyn IntensityModel,
    c_set: MarkSet,
    d_set: MarkSet,
    cfg: &SummaryConfig,
) -> Result<SummaryEstimate> {
    let ms = pattern.markspace();
    let c_set = restrict_set(c_set, ms, "reference mark set")?;
    let d_set = restrict_set(d_set, ms, "target mark set")?;
    if model.n_marks() != ms.len() {
        return Err(Error::InvalidParameter {
            name: "intensity model",
            message: format!(
                "model covers {} marks, pattern has {}",
                model.n_marks(),
                ms.len()
            ),
        });
    }
    if model.window() != pattern.window() {
        return Err(Error::InvalidWindow(
            "intensity model and pattern windows differ".into(),
        ));
    }
    if cfg.probe_per_side == 0 && cfg.probes.is_none() {
        return Err(Error::InvalidParameter {
            name: "probe_per_side",
            message: "must be at least 1".into(),
        });
    }
    if !(cfg.denominator_tol.is_finite() && cfg.denominator_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "denominator_tol",
            message: format!("must be positive, got {}", cfg.denominator_tol),
        });
    }

    let window = *pattern.window();
    let lambda_bar = model.lower_bound(d_set, cfg.bound_grid);
    if !(lambda_bar.is_finite() && lambda_bar > 0.0) {
        return Err(Error::InvalidParameter {
            name: "intensity lower bound",
            message: format!("must be positive and finite, got {lambda_bar}"),
        });
    }

    let pts = pattern.points();
    let n = pts.len();
    let mut lam = vec![0.0f64; n];
    let mut fac = vec![0.0f64; n];
    for (i, p) in pts.iter().enumerate() {
        let l = model.eval(p.loc, p.mark);
        if d_set.contains(p.mark) && !(l.is_finite() && l >= lambda_bar * (1.0 - 1e-9)) {
            return Err(Error::LowerBoundViolated {
                value: l,
                bound: lambda_bar,
                x: p.loc.x,
                y: p.loc.y,
            });
        }
        if c_set.contains(p.mark) && !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParameter {
                name: "intensity model",
                message: format!(
                    "non-positive intensity {l} at reference point ({}, {})",
                    p.loc.x, p.loc.y
                ),
            });
        }
        lam[i] = l;
        // Clamp shields the product from a stray ulp when a point sits
        // exactly on the infimum.
        fac[i] = (1.0 - lambda_bar / l).max(0.0);
    }

    let rs = cfg.rgrid.values();
    let nrows = rs.len();
    let r2: Vec<f64> = rs.iter().map(|r| r * r).collect();
    let r_max = cfg.rgrid.max();
    let index = NeighborIndex::build(pattern, r_max);

    let lattice;
    let probes: &[Point] = match &cfg.probes {
        Some(grid) => grid.points(),
        None => {
            lattice = ProbeGrid::lattice(&window, cfg.probe_per_side, pattern);
            lattice.points()
        }
    };

    // Empty-space part. Chunks are folded back in index order, so sums do
    // not depend on how rayon schedules them.
    const PROBE_CHUNK: usize = 256;
    let probe_parts: Vec<(Vec<f64>, Vec<u64>)> = probes
        .par_chunks(PROBE_CHUNK)
        .map(|chunk| {
            let mut sum = vec![0.0f64; nrows];
            let mut cnt = vec![0u64; nrows];
            let mut nbrs: Vec<(u32, f64)> = Vec::new();
            for l in chunk {
                let elig = rs.partition_point(|&r| r <= window.boundary_dist(*l));
                if elig == 0 {
                    continue;
                }
                nbrs.clear();
                nbrs.extend(index.ball_query_dist2(*l, r_max, d_set));
                nbrs.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                let mut prod = 1.0f64;
                let mut next = 0usize;
                for k in 0..elig {
                    while next < nbrs.len() && nbrs[next].1 <= r2[k] {
                        prod *= fac[nbrs[next].0 as usize];
                        next += 1;
                    }
                    sum[k] += prod;
                    cnt[k] += 1;
                }
            }
            (sum, cnt)
        })
        .collect();
    let mut f_sum = vec![0.0f64; nrows];
    let mut f_cnt = vec![0u64; nrows];
    for (sum, cnt) in probe_parts {
        for k in 0..nrows {
            f_sum[k] += sum[k];
            f_cnt[k] += cnt[k];
        }
    }

    // Reference part: weighted products for D, weighted pair sums for K.
    let refs: Vec<u32> = (0..n as u32)
        .filter(|&i| c_set.contains(pts[i as usize].mark))
        .collect();
    const REF_CHUNK: usize = 64;
    struct RefPart {
        d_sum: Vec<f64>,
        norm: Vec<f64>,
        k_sum: Vec<f64>,
        cnt: Vec<u64>,
    }
    let ref_parts: Vec<RefPart> = refs
        .par_chunks(REF_CHUNK)
        .map(|chunk| {
            let mut part = RefPart {
                d_sum: vec![0.0f64; nrows],
                norm: vec![0.0f64; nrows],
                k_sum: vec![0.0f64; nrows],
                cnt: vec![0u64; nrows],
            };
            for &a in chunk {
                let loc = pts[a as usize].loc;
                let elig = rs.partition_point(|&r| r <= window.boundary_dist(loc));
                if elig == 0 {
                    continue;
                }
                let mut nbrs = index.ball_query_dist2(loc, r_max, d_set);
                nbrs.retain(|&(i, _)| i != a);
                nbrs.sort_unstable_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
                let w = 1.0 / lam[a as usize];
                let mut prod = 1.0f64;
                let mut wsum = 0.0f64;
                let mut next = 0usize;
                for (k, &r2k) in r2.iter().enumerate().take(elig) {
                    while next < nbrs.len() && nbrs[next].1 <= r2k {
                        let i = nbrs[next].0 as usize;
                        prod *= fac[i];
                        wsum += 1.0 / lam[i];
                        next += 1;
                    }
                    part.d_sum[k] += w * prod;
                    part.norm[k] += w;
                    part.k_sum[k] += w * wsum;
                    part.cnt[k] += 1;
                }
            }
            part
        })
        .collect();
    let mut d_sum = vec![0.0f64; nrows];
    let mut norm = vec![0.0f64; nrows];
    let mut k_sum = vec![0.0f64; nrows];
    let mut ref_cnt = vec![0u64; nrows];
    for part in ref_parts {
        for k in 0..nrows {
            d_sum[k] += part.d_sum[k];
            norm[k] += part.norm[k];
            k_sum[k] += part.k_sum[k];
            ref_cnt[k] += part.cnt[k];
        }
    }

    let nu_c = ms.nu_total(c_set);
    let nu_d = ms.nu_total(d_set);
    let mut rows = Vec::with_capacity(nrows);
    for k in 0..nrows {
        let f = if f_cnt[k] > 0 {
            Some(1.0 - f_sum[k] / f_cnt[k] as f64)
        } else {
            None
        };
        let (d, hamilton) = if ref_cnt[k] > 0 {
            (Some(1.0 - d_sum[k] / norm[k]), Some(norm[k]))
        } else {
            (None, None)
        };
        let j = match (d, f) {
            (Some(dv), Some(fv)) => {
                let den = 1.0 - fv;
                if den > cfg.denominator_tol {
                    Some((1.0 - dv) / den)
                } else {
                    None
                }
            }
            _ => None,
        };
        let k_stat = window
            .erode(rs[k])
            .map(|er| k_sum[k] / (er.area() * nu_c * nu_d));
        rows.push(SummaryRow {
            r: rs[k],
            f,
            d,
            j,
            k: k_stat,
            d_raw: d_sum[k],
            hamilton,
            n_probe: f_cnt[k] as usize,
            n_ref: ref_cnt[k] as usize,
        });
    }

    Ok(SummaryEstimate {
        rows,
        lambda_bar,
        c_set,
        d_set,
    })
}

/// Empty-space statistic of the `D` points alone.
pub fn estimate_f(
    pattern: &MarkedPattern,
    model: &dyn IntensityModel,
    d_set: MarkSet,
    cfg: &SummaryConfig,
) -> Result<Vec<Option<f64>>> {
    Ok(summarize(pattern, model, d_set, d_set, cfg)?.f_column())
}

/// Nearest-pattern statistic seen from the `C` points.
pub fn estimate_d(
    pattern: &MarkedPattern,
    model: &dyn IntensityModel,
    c_set: MarkSet,
    d_set: MarkSet,
    cfg: &SummaryConfig,
) -> Result<Vec<Option<f64>>> {
    Ok(summarize(pattern, model, c_set, d_set, cfg)?.d_column())
}

/// Unnormalized numerator of `1 - D`: the intensity-weighted sum of
/// reference products (zero when no reference is eligible).
pub fn estimate_d_raw(
    pattern: &MarkedPattern,
    model: &dyn IntensityModel,
    c_set: MarkSet,
    d_set: MarkSet,
    cfg: &SummaryConfig,
) -> Result<Vec<f64>> {
    Ok(summarize(pattern, model, c_set, d_set, cfg)?
        .rows
        .into_iter()
        .map(|row| row.d_raw)
        .collect())
}

/// The weight sum normalizing [`estimate_d_raw`], `None` where no
/// reference is eligible.
pub fn hamilton_normalizer(
    pattern: &MarkedPattern,
    model: &dyn IntensityModel,
    c_set: MarkSet,
    cfg: &SummaryConfig,
) -> Result<Vec<Option<f64>>> {
    Ok(summarize(pattern, model, c_set, c_set, cfg)?
        .rows
        .into_iter()
        .map(|row| row.hamilton)
        .collect())
}

/// Ratio statistic `(1 - D) / (1 - F)`.
pub fn estimate_j(
    pattern: &MarkedPattern,
    model: &dyn IntensityModel,
    c_set: MarkSet,
    d_set: MarkSet,
    cfg: &SummaryConfig,
) -> Result<Vec<Option<f64>>> {
    Ok(summarize(pattern, model, c_set, d_set, cfg)?.j_column())
}

/// Reweighted second-moment statistic, `pi r^2` under cross independence.
pub fn estimate_k(
    pattern: &MarkedPattern,
    model: &dyn IntensityModel,
    c_set: MarkSet,
    d_set: MarkSet,
    cfg: &SummaryConfig,
) -> Result<Vec<Option<f64>>> {
    Ok(summarize(pattern, model, c_set, d_set, cfg)?.k_column())
}

fn restrict_set(set: MarkSet, ms: &MarkSpace, what: &'static str) -> Result<MarkSet> {
    let mut out = MarkSet::empty();
    for m in ms.marks() {
        if set.contains(m) {
            out = out.insert(m);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter {
            name: what,
            message: "selects no label of the pattern's mark space".into(),
        });
    }
    Ok(out)
}
