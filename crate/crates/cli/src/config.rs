//! JSON run configuration shared by every subcommand.
//!
//! A configuration names the observation window and the mark labels once.
//! Each subcommand then reads the sections it needs: `pattern` for the data
//! source, `intensity` for the model, `summary` for estimator resolution,
//! `c_marks`/`d_marks` for the two mark groups and `test` for envelope
//! parameters. Unknown keys are rejected so typos fail loudly.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use markpp::io::{read_pattern, ReadOptions};
use markpp::{
    fit_scale, kernel_bandwidth_rule, sim_marked, sim_thomas_cross, DedupPolicy, EdgeCorrection,
    EnvelopeConfig, IntensityModel, KernelIntensity, LeaveOneOutKernel, MarkSet, MarkSpace,
    MarkedPattern, MarkingRule, ParentCoupling, PerMarkIntensity, Point, RGrid, ScaledIntensity,
    SimConfig, SpatialField, SummaryConfig, Surface, TestStatistic, Window,
};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub window: WindowSpec,
    pub marks: MarksSpec,
    #[serde(default)]
    pub pattern: Option<PatternSpec>,
    #[serde(default)]
    pub intensity: Option<IntensitySpec>,
    #[serde(default)]
    pub summary: SummarySpec,
    /// Labels forming the reference group; empty means all marks.
    #[serde(default)]
    pub c_marks: Vec<String>,
    /// Labels forming the target group; empty means all marks.
    #[serde(default)]
    pub d_marks: Vec<String>,
    #[serde(default)]
    pub test: TestSpec,
    /// Master seed; `--seed` replaces it.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarksSpec {
    pub labels: Vec<String>,
    /// Reference weight per label; omitted means counting measure.
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PatternSpec {
    /// Read `x,y,mark` rows from a file.
    Csv {
        path: PathBuf,
        #[serde(default)]
        dedup: DedupSpec,
    },
    /// Draw the pattern from a point process model.
    Simulate {
        model: SimModelSpec,
        /// Generation seed; defaults to the master seed.
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupSpec {
    #[default]
    Reject,
    KeepFirst,
}

impl From<DedupSpec> for DedupPolicy {
    fn from(d: DedupSpec) -> DedupPolicy {
        match d {
            DedupSpec::Reject => DedupPolicy::Reject,
            DedupSpec::KeepFirst => DedupPolicy::KeepFirst,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimModelSpec {
    /// One independent Poisson component per mark; each surface is that
    /// component's per-area intensity.
    Poisson { components: Vec<Surface> },
    /// A Poisson ground process labelled independently of location.
    LabelledPoisson { ground: Surface, probs: Vec<f64> },
    /// Two-mark Thomas cluster process.
    ThomasCross {
        kappa: f64,
        mu: [f64; 2],
        tau: f64,
        #[serde(default)]
        coupling: CouplingSpec,
    },
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingSpec {
    #[default]
    Shared,
    Independent,
}

impl From<CouplingSpec> for ParentCoupling {
    fn from(c: CouplingSpec) -> ParentCoupling {
        match c {
            CouplingSpec::Shared => ParentCoupling::Shared,
            CouplingSpec::Independent => ParentCoupling::Independent,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntensitySpec {
    Analytic(AnalyticSpec),
    Kernel(KernelSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSpec {
    /// One surface per mark label, each a per-area component intensity.
    #[serde(default)]
    pub components: Option<Vec<Surface>>,
    /// A single surface used as the density of every mark, the factorized
    /// form of a pattern labelled independently of location.
    #[serde(default)]
    pub ground: Option<Surface>,
    /// Rescale the model so its expected count matches the pattern size.
    #[serde(default)]
    pub fit_scale: bool,
    /// Raster resolution for the expected-count integral.
    #[serde(default = "default_integral_res")]
    pub integral_resolution: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// Gaussian bandwidth; omitted means a tenth of the square root of the
    /// window area.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_edge")]
    pub edge: EdgeCorrection,
    /// Raster resolution of the fitted surface.
    #[serde(default = "default_kernel_res")]
    pub resolution: usize,
    /// Subtract each point's own kernel mass when evaluating at that point.
    #[serde(default)]
    pub leave_one_out: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarySpec {
    /// Largest radius; omitted means an eighth of the shorter window side.
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "default_r_count")]
    pub r_count: usize,
    /// Explicit radii; overrides `r_max`/`r_count`.
    #[serde(default)]
    pub r_values: Option<Vec<f64>>,
    #[serde(default = "default_probe")]
    pub probe_per_side: usize,
    #[serde(default = "default_bound_grid")]
    pub bound_grid: usize,
    #[serde(default = "default_tol")]
    pub denominator_tol: f64,
}

impl Default for SummarySpec {
    fn default() -> Self {
        SummarySpec {
            r_max: None,
            r_count: default_r_count(),
            r_values: None,
            probe_per_side: default_probe(),
            bound_grid: default_bound_grid(),
            denominator_tol: default_tol(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    #[serde(default)]
    pub statistic: StatSpec,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    #[serde(default = "default_rank")]
    pub rank: usize,
}

impl Default for TestSpec {
    fn default() -> Self {
        TestSpec {
            statistic: StatSpec::default(),
            n_replicates: default_replicates(),
            rank: default_rank(),
        }
    }
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatSpec {
    #[default]
    J,
    D,
}

impl From<StatSpec> for TestStatistic {
    fn from(s: StatSpec) -> TestStatistic {
        match s {
            StatSpec::J => TestStatistic::J,
            StatSpec::D => TestStatistic::D,
        }
    }
}

fn default_integral_res() -> usize {
    256
}

fn default_edge() -> EdgeCorrection {
    EdgeCorrection::Torus
}

fn default_kernel_res() -> usize {
    256
}

fn default_r_count() -> usize {
    26
}

fn default_probe() -> usize {
    64
}

fn default_bound_grid() -> usize {
    128
}

fn default_tol() -> f64 {
    1e-3
}

fn default_replicates() -> usize {
    99
}

fn default_rank() -> usize {
    5
}

/// What a pattern source reported while loading, for user feedback.
pub struct PatternLoad {
    pub pattern: MarkedPattern,
    pub note: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read configuration {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid configuration {}", path.display()))?;
        Ok(cfg)
    }

    pub fn window(&self) -> Result<Window> {
        let w = &self.window;
        Ok(Window::new(w.xmin, w.xmax, w.ymin, w.ymax)?)
    }

    pub fn markspace(&self) -> Result<MarkSpace> {
        let ms = match &self.marks.nu {
            Some(nu) => MarkSpace::with_weights(&self.marks.labels, nu)?,
            None => MarkSpace::counting(&self.marks.labels)?,
        };
        Ok(ms)
    }

    /// The seed every stochastic step derives from, after the CLI override.
    pub fn effective_seed(&self, flag: Option<u64>) -> u64 {
        flag.unwrap_or(self.seed)
    }

    /// The two mark groups; an empty list means the full mark space.
    pub fn mark_sets(&self, ms: &MarkSpace) -> Result<(MarkSet, MarkSet)> {
        let resolve = |labels: &[String]| -> Result<MarkSet> {
            if labels.is_empty() {
                Ok(ms.all())
            } else {
                Ok(ms.set_of(labels)?)
            }
        };
        Ok((resolve(&self.c_marks)?, resolve(&self.d_marks)?))
    }

    /// Loads the pattern from the configured source, or from `override_csv`
    /// when given. `seed` is the effective master seed.
    pub fn pattern(
        &self,
        window: Window,
        ms: &MarkSpace,
        override_csv: Option<&Path>,
        seed: u64,
    ) -> Result<PatternLoad> {
        if let Some(path) = override_csv {
            return self.pattern_from_csv(path, DedupSpec::Reject, window, ms);
        }
        match &self.pattern {
            None => bail!("this command needs a `pattern` section or --pattern"),
            Some(PatternSpec::Csv { path, dedup }) => {
                self.pattern_from_csv(path, *dedup, window, ms)
            }
            Some(PatternSpec::Simulate {
                model,
                seed: sim_seed,
            }) => {
                let pattern = self.simulate(model, window, ms, sim_seed.unwrap_or(seed))?;
                Ok(PatternLoad {
                    pattern,
                    note: None,
                })
            }
        }
    }

    fn pattern_from_csv(
        &self,
        path: &Path,
        dedup: DedupSpec,
        window: Window,
        ms: &MarkSpace,
    ) -> Result<PatternLoad> {
        let opts = ReadOptions {
            dedup: dedup.into(),
            labels: Some(self.marks.labels.clone()),
        };
        let report = read_pattern(path, window, &opts)
            .with_context(|| format!("cannot read pattern {}", path.display()))?;
        // Rebuild on the configured mark space so reference weights apply.
        let pattern = MarkedPattern::new(window, ms.clone(), report.pattern.points().to_vec())?;
        let note = if report.n_outside > 0 || report.n_deduped > 0 {
            Some(format!(
                "dropped {} rows outside the window and {} duplicate locations",
                report.n_outside, report.n_deduped
            ))
        } else {
            None
        };
        Ok(PatternLoad { pattern, note })
    }

    pub fn simulate(
        &self,
        model: &SimModelSpec,
        window: Window,
        ms: &MarkSpace,
        seed: u64,
    ) -> Result<MarkedPattern> {
        let cfg = SimConfig {
            window,
            markspace: ms.clone(),
            seed,
        };
        let pattern = match model {
            SimModelSpec::Poisson { components } => {
                if components.len() != ms.len() {
                    bail!(
                        "pattern.simulate.poisson needs {} components, got {}",
                        ms.len(),
                        components.len()
                    );
                }
                let fields = components
                    .iter()
                    .map(|s| Arc::new(*s) as Arc<dyn SpatialField>)
                    .collect();
                sim_marked(&cfg, &MarkingRule::IndependentComponents(fields))?
            }
            SimModelSpec::LabelledPoisson { ground, probs } => sim_marked(
                &cfg,
                &MarkingRule::IndependentMarking {
                    ground: Arc::new(*ground),
                    probs: probs.clone(),
                },
            )?,
            SimModelSpec::ThomasCross {
                kappa,
                mu,
                tau,
                coupling,
            } => sim_thomas_cross(
                window,
                ms.clone(),
                *kappa,
                *mu,
                *tau,
                (*coupling).into(),
                seed,
            )?,
        };
        Ok(pattern)
    }

    /// The full per-mark intensity model for summaries and the independence
    /// test. Kernel models and scale fitting need the observed pattern.
    pub fn model(
        &self,
        window: Window,
        ms: &MarkSpace,
        pattern: Option<&MarkedPattern>,
    ) -> Result<Arc<dyn IntensityModel>> {
        match self.intensity_spec()? {
            IntensitySpec::Analytic(a) => {
                let base: Arc<dyn IntensityModel> = match (&a.components, &a.ground) {
                    (Some(c), None) => {
                        if c.len() != ms.len() {
                            bail!(
                                "intensity.analytic needs {} components, got {}",
                                ms.len(),
                                c.len()
                            );
                        }
                        let fields = c
                            .iter()
                            .map(|s| Arc::new(*s) as Arc<dyn SpatialField>)
                            .collect();
                        Arc::new(PerMarkIntensity::from_components(window, ms, fields)?)
                    }
                    (None, Some(g)) => Arc::new(PerMarkIntensity::factorized(
                        window,
                        ms.len(),
                        Arc::new(*g),
                    )?),
                    _ => bail!("intensity.analytic needs exactly one of `components` or `ground`"),
                };
                if a.fit_scale {
                    let pattern = pattern
                        .context("intensity.analytic.fit_scale needs an observed pattern")?;
                    let c = fit_scale(base.as_ref(), pattern, a.integral_resolution)?;
                    Ok(Arc::new(ScaledIntensity::new(base, c)?))
                } else {
                    Ok(base)
                }
            }
            IntensitySpec::Kernel(k) => {
                let pattern =
                    pattern.context("intensity.kernel needs an observed pattern to fit")?;
                let sigma = k.sigma.unwrap_or_else(|| kernel_bandwidth_rule(&window));
                let mut fields: Vec<Arc<dyn SpatialField>> = Vec::with_capacity(ms.len());
                for m in ms.marks() {
                    let locs: Vec<Point> = pattern
                        .points()
                        .iter()
                        .filter(|p| p.mark == m)
                        .map(|p| p.loc)
                        .collect();
                    if locs.is_empty() {
                        bail!(
                            "cannot fit a kernel intensity: no points with mark `{}`",
                            ms.label(m)
                        );
                    }
                    let fit = KernelIntensity::fit(&locs, window, sigma, k.edge, k.resolution)?;
                    fields.push(if k.leave_one_out {
                        Arc::new(LeaveOneOutKernel::new(fit))
                    } else {
                        Arc::new(fit)
                    });
                }
                Ok(Arc::new(PerMarkIntensity::from_components(
                    window, ms, fields,
                )?))
            }
        }
    }

    /// The ground intensity for the random labelling test: a single field
    /// on locations, ignoring marks.
    pub fn ground_field(
        &self,
        window: Window,
        pattern: Option<&MarkedPattern>,
    ) -> Result<Arc<dyn SpatialField>> {
        match self.intensity_spec()? {
            IntensitySpec::Analytic(a) => {
                let mut surface = match (&a.components, &a.ground) {
                    (None, Some(g)) => *g,
                    // Component intensities add up to the ground intensity;
                    // constants and affine surfaces are closed under sums.
                    (Some(c), None) if !c.is_empty() => {
                        c.iter().copied().reduce(add_surfaces).unwrap()
                    }
                    _ => bail!("intensity.analytic needs exactly one of `components` or `ground`"),
                };
                if a.fit_scale {
                    let pattern = pattern
                        .context("intensity.analytic.fit_scale needs an observed pattern")?;
                    let ground = pattern.ground();
                    let base = PerMarkIntensity::factorized(window, 1, Arc::new(surface))?;
                    let c = fit_scale(&base, &ground, a.integral_resolution)?;
                    surface = scale_surface(surface, c);
                }
                Ok(Arc::new(surface))
            }
            IntensitySpec::Kernel(k) => {
                let pattern =
                    pattern.context("intensity.kernel needs an observed pattern to fit")?;
                if pattern.is_empty() {
                    bail!("cannot fit a kernel intensity to an empty pattern");
                }
                let sigma = k.sigma.unwrap_or_else(|| kernel_bandwidth_rule(&window));
                let locs: Vec<Point> = pattern.points().iter().map(|p| p.loc).collect();
                let fit = KernelIntensity::fit(&locs, window, sigma, k.edge, k.resolution)?;
                Ok(if k.leave_one_out {
                    Arc::new(LeaveOneOutKernel::new(fit))
                } else {
                    Arc::new(fit)
                })
            }
        }
    }

    fn intensity_spec(&self) -> Result<&IntensitySpec> {
        self.intensity
            .as_ref()
            .context("this command needs an `intensity` section")
    }

    pub fn summary_config(&self, window: &Window) -> Result<SummaryConfig> {
        let s = &self.summary;
        let rgrid = match &s.r_values {
            Some(rs) => RGrid::new(rs.clone())?,
            None => {
                let r_max = s.r_max.unwrap_or(window.min_side() / 8.0);
                RGrid::regular(r_max, s.r_count)?
            }
        };
        let mut cfg = SummaryConfig::new(rgrid);
        cfg.probe_per_side = s.probe_per_side;
        cfg.bound_grid = s.bound_grid;
        cfg.denominator_tol = s.denominator_tol;
        Ok(cfg)
    }

    pub fn envelope_config(&self, window: &Window, seed: u64) -> Result<EnvelopeConfig> {
        let mut cfg = EnvelopeConfig::new(self.test.statistic.into(), self.summary_config(window)?);
        cfg.n_replicates = self.test.n_replicates;
        cfg.rank = self.test.rank;
        cfg.seed = seed;
        Ok(cfg)
    }
}

/// Pointwise sum of two affine surfaces, again an affine surface.
fn add_surfaces(a: Surface, b: Surface) -> Surface {
    let (c1, ax1, by1) = affine_parts(a);
    let (c2, ax2, by2) = affine_parts(b);
    let (ax, by) = (ax1 + ax2, by1 + by2);
    if ax == 0.0 && by == 0.0 {
        Surface::Constant(c1 + c2)
    } else {
        Surface::Linear { c: c1 + c2, ax, by }
    }
}

/// Pointwise multiple of an affine surface.
fn scale_surface(s: Surface, k: f64) -> Surface {
    let (c, ax, by) = affine_parts(s);
    if ax == 0.0 && by == 0.0 {
        Surface::Constant(k * c)
    } else {
        Surface::Linear {
            c: k * c,
            ax: k * ax,
            by: k * by,
        }
    }
}

fn affine_parts(s: Surface) -> (f64, f64, f64) {
    match s {
        Surface::Constant(c) => (c, 0.0, 0.0),
        Surface::Linear { c, ax, by } => (c, ax, by),
    }
}
