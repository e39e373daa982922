//! Point process simulators: inhomogeneous Poisson components, marked
//! compositions, and a two-mark Thomas cluster process.
//!
//! Every generator is driven by a [`ChaCha8Rng`] built from a `(seed,
//! stream)` pair, so a simulation is reproducible byte for byte from its
//! seed and replicate ensembles can give each replicate its own stream
//! without coordination.

use std::sync::Arc;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};

use crate::error::{Error, Result};
use crate::geom::{Point, Window};
use crate::intensity::SpatialField;
use crate::pattern::{Mark, MarkSpace, MarkedPattern, MarkedPoint};

/// The generator for one replicate: a fixed cipher keyed by `seed`, with
/// `stream` selecting a non-overlapping substream.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Window, mark space and seed shared by the marked generators.
#[derive(Clone)]
pub struct SimConfig {
    pub window: Window,
    pub markspace: MarkSpace,
    pub seed: u64,
}

/// How marks are attached to simulated points.
pub enum MarkingRule {
    /// One independent Poisson component per mark; each field is that
    /// component's per-area intensity.
    IndependentComponents(Vec<Arc<dyn SpatialField>>),
    /// A Poisson ground process marked independently of location with the
    /// given probabilities (normalized internally).
    IndependentMarking {
        ground: Arc<dyn SpatialField>,
        probs: Vec<f64>,
    },
}

/// Draws one marked pattern under the given rule.
pub fn sim_marked(cfg: &SimConfig, rule: &MarkingRule) -> Result<MarkedPattern> {
    let mut rng = replicate_rng(cfg.seed, 0);
    let mut points = Vec::new();
    match rule {
        MarkingRule::IndependentComponents(fields) => {
            if fields.len() != cfg.markspace.len() {
                return Err(Error::InvalidParameter {
                    name: "component fields",
                    message: format!("{} fields for {} labels", fields.len(), cfg.markspace.len()),
                });
            }
            for (m, field) in fields.iter().enumerate() {
                for loc in poisson_component(field.as_ref(), &cfg.window, &mut rng)? {
                    points.push(MarkedPoint { loc, mark: Mark(m) });
                }
            }
        }
        MarkingRule::IndependentMarking { ground, probs } => {
            if probs.len() != cfg.markspace.len() {
                return Err(Error::InvalidParameter {
                    name: "mark probabilities",
                    message: format!(
                        "{} probabilities for {} labels",
                        probs.len(),
                        cfg.markspace.len()
                    ),
                });
            }
            let total: f64 = probs.iter().sum();
            if !(total.is_finite() && total > 0.0) || probs.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::InvalidParameter {
                    name: "mark probabilities",
                    message: "must be non-negative with a positive sum".into(),
                });
            }
            for loc in poisson_component(ground.as_ref(), &cfg.window, &mut rng)? {
                let mut u = rng.random::<f64>() * total;
                let mut mark = Mark(probs.len() - 1);
                for (m, p) in probs.iter().enumerate() {
                    if u < *p {
                        mark = Mark(m);
                        break;
                    }
                    u -= p;
                }
                points.push(MarkedPoint { loc, mark });
            }
        }
    }
    MarkedPattern::new(cfg.window, cfg.markspace.clone(), points)
}

/// Draws one Poisson pattern with per-area intensity `field`, every point
/// carrying `mark`.
pub fn sim_poisson(
    field: &dyn SpatialField,
    window: Window,
    markspace: MarkSpace,
    mark: Mark,
    seed: u64,
) -> Result<MarkedPattern> {
    if mark.0 >= markspace.len() {
        return Err(Error::UnknownMark(format!("mark index {}", mark.0)));
    }
    let mut rng = replicate_rng(seed, 0);
    let points = poisson_component(field, &window, &mut rng)?
        .into_iter()
        .map(|loc| MarkedPoint { loc, mark })
        .collect();
    MarkedPattern::new(window, markspace, points)
}

/// Whether the two offspring components of [`sim_thomas_cross`] descend
/// from one shared parent process or from two independent ones. Shared
/// parents induce positive cross-mark association; independent parents
/// leave the components independent with the same marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParentCoupling {
    Shared,
    Independent,
}

/// Two-mark Thomas cluster process on the torus: parents are Poisson with
/// per-area intensity `kappa`, each parent receives a Poisson number of
/// offspring (mean `mu[m]` for mark `m`) displaced by an isotropic Gaussian
/// with standard deviation `tau` and wrapped back into the window. The
/// expected count of mark `m` is `kappa * mu[m] * area` under either
/// coupling.
pub fn sim_thomas_cross(
    window: Window,
    markspace: MarkSpace,
    kappa: f64,
    mu: [f64; 2],
    tau: f64,
    coupling: ParentCoupling,
    seed: u64,
) -> Result<MarkedPattern> {
    if markspace.len() != 2 {
        return Err(Error::InvalidMarkSpace(format!(
            "two-mark cluster process needs exactly 2 labels, got {}",
            markspace.len()
        )));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            message: format!("parent intensity must be positive, got {kappa}"),
        });
    }
    if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "mu",
            message: format!("offspring means must be non-negative, got {mu:?}"),
        });
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            message: format!("offspring spread must be positive, got {tau}"),
        });
    }

    let mut rng = replicate_rng(seed, 0);
    let jitter = Normal::new(0.0, tau).expect("validated spread");
    let mut points = Vec::new();
    let spawn = |parents: &[Point],
                 m: usize,
                 rng: &mut ChaCha8Rng,
                 points: &mut Vec<MarkedPoint>|
     -> Result<()> {
        for &parent in parents {
            let kids = sample_poisson_count(mu[m], rng)?;
            for _ in 0..kids {
                let offset = Point::new(jitter.sample(rng), jitter.sample(rng));
                points.push(MarkedPoint {
                    loc: window.torus_shift(parent, offset),
                    mark: Mark(m),
                });
            }
        }
        Ok(())
    };
    match coupling {
        ParentCoupling::Shared => {
            let parents = uniform_parents(kappa, &window, &mut rng)?;
            spawn(&parents, 0, &mut rng, &mut points)?;
            spawn(&parents, 1, &mut rng, &mut points)?;
        }
        ParentCoupling::Independent => {
            for m in 0..2 {
                let parents = uniform_parents(kappa, &window, &mut rng)?;
                spawn(&parents, m, &mut rng, &mut points)?;
            }
        }
    }
    MarkedPattern::new(window, markspace, points)
}

/// Thinning sampler for one Poisson component: candidates uniform at rate
/// `sup_bound`, kept with probability `eval / sup_bound`. Errors if the
/// field ever exceeds its own envelope.
fn poisson_component(
    field: &dyn SpatialField,
    window: &Window,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point>> {
    let sup = field.sup_bound(window);
    if !sup.is_finite() || sup < 0.0 {
        return Err(Error::InvalidParameter {
            name: "intensity envelope",
            message: format!("sup bound must be finite and non-negative, got {sup}"),
        });
    }
    if sup == 0.0 {
        return Ok(Vec::new());
    }
    let candidates = sample_poisson_count(sup * window.area(), rng)?;
    let mut pts = Vec::new();
    for _ in 0..candidates {
        let p = Point::new(
            window.xmin() + rng.random::<f64>() * window.width(),
            window.ymin() + rng.random::<f64>() * window.height(),
        );
        let lam = field.eval(p);
        if lam > sup * (1.0 + 1e-9) {
            return Err(Error::EnvelopeViolated {
                value: lam,
                bound: sup,
                x: p.x,
                y: p.y,
            });
        }
        if rng.random::<f64>() * sup < lam {
            pts.push(p);
        }
    }
    Ok(pts)
}

fn uniform_parents(kappa: f64, window: &Window, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
    let n = sample_poisson_count(kappa * window.area(), rng)?;
    Ok((0..n)
        .map(|_| {
            Point::new(
                window.xmin() + rng.random::<f64>() * window.width(),
                window.ymin() + rng.random::<f64>() * window.height(),
            )
        })
        .collect())
}

fn sample_poisson_count(mean: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::InvalidParameter {
        name: "poisson mean",
        message: format!("{e} (mean {mean})"),
    })?;
    Ok(dist.sample(rng) as u64)
}
