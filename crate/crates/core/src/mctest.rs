//! Monte Carlo envelope tests built on the summary statistics: a
//! permutation test for random labelling and a torus-translation test for
//! independence of two mark groups.
//!
//! Both tests compare an observed curve against pointwise rank envelopes
//! from `N` replicates generated under the null. With rank `k` and all
//! replicates defined, the probability that an exchangeable statistic
//! falls strictly outside the envelope at one fixed radius is exactly
//! `2k / (N + 1)` when ties have probability zero, so the defaults
//! (`N = 99`, `k = 5`) give a pointwise level of `0.10`. Replicates whose
//! statistic is undefined at a radius drop out of that radius; the
//! envelope is reported only while at least `2k` replicate values remain.
//!
//! Replicate `i` draws its randomness from stream `i` of the configured
//! seed, so results are reproducible and independent of thread count.

use rayon::prelude::*;

use rand::seq::SliceRandom;
use rand::Rng;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimators::{summarize, SummaryConfig, SummaryEstimate};
use crate::geom::Point;
use crate::intensity::{IntensityModel, PerMarkIntensity, SpatialField, TranslatedIntensity};
use crate::pattern::{Mark, MarkSet, MarkSpace, MarkedPattern, MarkedPoint};
use crate::simulate::replicate_rng;

/// Which summary statistic the envelope is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestStatistic {
    /// The ratio statistic `J`.
    J,
    /// The nearest-pattern statistic `D`.
    D,
}

/// Envelope test settings.
#[derive(Debug, Clone)]
pub struct EnvelopeConfig {
    pub statistic: TestStatistic,
    pub summary: SummaryConfig,
    /// Number of null replicates.
    pub n_replicates: usize,
    /// Envelope rank: the `rank`-th smallest and largest replicate values
    /// bound the envelope.
    pub rank: usize,
    pub seed: u64,
}

impl EnvelopeConfig {
    pub fn new(statistic: TestStatistic, summary: SummaryConfig) -> Self {
        EnvelopeConfig {
            statistic,
            summary,
            n_replicates: 99,
            rank: 5,
            seed: 0,
        }
    }
}

/// Pointwise rank envelope with the observed curve.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub statistic: TestStatistic,
    pub rs: Vec<f64>,
    pub observed: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    /// Mean of the defined replicate values at each radius.
    pub mean: Vec<Option<f64>>,
    /// How many replicates were defined at each radius.
    pub n_effective: Vec<usize>,
    pub n_replicates: usize,
    pub rank: usize,
    pub seed: u64,
    pub c_labels: Vec<String>,
    pub d_labels: Vec<String>,
}

impl Envelope {
    /// Whether the observed curve at radius index `i` falls strictly
    /// outside the envelope.
    pub fn rejects_at(&self, i: usize) -> bool {
        match (self.observed[i], self.lower[i], self.upper[i]) {
            (Some(obs), Some(lo), Some(hi)) => obs < lo || obs > hi,
            _ => false,
        }
    }

    /// Whether any radius rejects.
    pub fn rejects(&self) -> bool {
        (0..self.rs.len()).any(|i| self.rejects_at(i))
    }

    /// Pointwise level when all replicates are defined and ties have
    /// probability zero.
    pub fn nominal_level(&self) -> f64 {
        2.0 * self.rank as f64 / (self.n_replicates as f64 + 1.0)
    }
}

/// Permutation test for random labelling: marks are shuffled over the
/// fixed locations, the null of a ground process labelled independently of
/// geometry. `ground` is the ground intensity (known or estimated); the
/// statistic is computed under the factorized model that shares it across
/// marks, with the empirical mark distribution as reference weights.
pub fn test_random_labelling(
    pattern: &MarkedPattern,
    ground: Arc<dyn SpatialField>,
    c_set: MarkSet,
    d_set: MarkSet,
    cfg: &EnvelopeConfig,
) -> Result<Envelope> {
    validate_config(cfg)?;
    // Reference weights from the observed mark frequencies; kept only when
    // every label occurs (they scale K, never F, D or J).
    let pattern = match MarkSpace::empirical(pattern.markspace().labels(), &pattern.mark_counts()) {
        Ok(ms) => {
            MarkedPattern::from_parts(*pattern.window(), Arc::new(ms), pattern.points().to_vec())
        }
        Err(_) => pattern.clone(),
    };
    let model = PerMarkIntensity::factorized(*pattern.window(), pattern.markspace().len(), ground)?;

    let observed = summarize(&pattern, &model, c_set, d_set, &cfg.summary)?;
    let columns: Vec<Vec<Option<f64>>> = (1..=cfg.n_replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(cfg.seed, i);
            let mut marks: Vec<Mark> = pattern.points().iter().map(|p| p.mark).collect();
            marks.shuffle(&mut rng);
            let rep = pattern.with_marks(&marks)?;
            let s = summarize(&rep, &model, c_set, d_set, &cfg.summary)?;
            Ok(column(&s, cfg.statistic))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(&observed, columns, cfg, pattern.markspace()))
}

/// Torus-translation test for independence between the `c_set` and `d_set`
/// components: each replicate shifts the `d_set` points (and their
/// intensity) by a uniform torus translation, which preserves each
/// component's distribution while breaking any cross dependence. The mark
/// sets must be disjoint and the `d_set` intensity torus-compatible.
pub fn test_independence_ls(
    pattern: &MarkedPattern,
    model: Arc<dyn IntensityModel>,
    c_set: MarkSet,
    d_set: MarkSet,
    cfg: &EnvelopeConfig,
) -> Result<Envelope> {
    validate_config(cfg)?;
    if c_set.intersects(d_set) {
        return Err(Error::MarkSetsOverlap);
    }
    if !model.torus_safe_for(d_set) {
        return Err(Error::NotTorusCompatible);
    }

    let window = *pattern.window();
    let observed = summarize(pattern, model.as_ref(), c_set, d_set, &cfg.summary)?;
    let columns: Vec<Vec<Option<f64>>> = (1..=cfg.n_replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(cfg.seed, i);
            let shift = Point::new(
                rng.random::<f64>() * window.width(),
                rng.random::<f64>() * window.height(),
            );
            let points: Vec<MarkedPoint> = pattern
                .points()
                .iter()
                .map(|p| {
                    if d_set.contains(p.mark) {
                        MarkedPoint {
                            loc: window.torus_shift(p.loc, shift),
                            mark: p.mark,
                        }
                    } else {
                        *p
                    }
                })
                .collect();
            let rep = MarkedPattern::from_parts(window, pattern.markspace_arc(), points);
            let rep_model = TranslatedIntensity::new(Arc::clone(&model), shift, d_set);
            let s = summarize(&rep, &rep_model, c_set, d_set, &cfg.summary)?;
            Ok(column(&s, cfg.statistic))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(&observed, columns, cfg, pattern.markspace()))
}

fn validate_config(cfg: &EnvelopeConfig) -> Result<()> {
    if cfg.rank == 0 {
        return Err(Error::InvalidParameter {
            name: "rank",
            message: "must be at least 1".into(),
        });
    }
    if cfg.n_replicates < 2 * cfg.rank {
        return Err(Error::TooFewReplicates {
            rank: cfg.rank,
            needed: 2 * cfg.rank,
            got: cfg.n_replicates,
        });
    }
    Ok(())
}

fn column(s: &SummaryEstimate, stat: TestStatistic) -> Vec<Option<f64>> {
    match stat {
        TestStatistic::J => s.j_column(),
        TestStatistic::D => s.d_column(),
    }
}

fn assemble(
    observed: &SummaryEstimate,
    columns: Vec<Vec<Option<f64>>>,
    cfg: &EnvelopeConfig,
    ms: &MarkSpace,
) -> Envelope {
    let rs = observed.rs();
    let k = cfg.rank;
    let mut lower = Vec::with_capacity(rs.len());
    let mut upper = Vec::with_capacity(rs.len());
    let mut mean = Vec::with_capacity(rs.len());
    let mut n_effective = Vec::with_capacity(rs.len());
    for idx in 0..rs.len() {
        let mut vals: Vec<f64> = columns.iter().filter_map(|col| col[idx]).collect();
        vals.sort_unstable_by(f64::total_cmp);
        let n_eff = vals.len();
        n_effective.push(n_eff);
        mean.push((n_eff > 0).then(|| vals.iter().sum::<f64>() / n_eff as f64));
        if n_eff >= 2 * k {
            lower.push(Some(vals[k - 1]));
            upper.push(Some(vals[n_eff - k]));
        } else {
            lower.push(None);
            upper.push(None);
        }
    }
    let labels_of = |set: MarkSet| -> Vec<String> {
        ms.marks()
            .filter(|&m| set.contains(m))
            .map(|m| ms.label(m).to_string())
            .collect()
    };
    Envelope {
        statistic: cfg.statistic,
        rs,
        observed: column(observed, cfg.statistic),
        lower,
        upper,
        mean,
        n_effective,
        n_replicates: cfg.n_replicates,
        rank: cfg.rank,
        seed: cfg.seed,
        c_labels: labels_of(observed.c_set),
        d_labels: labels_of(observed.d_set),
    }
}
