//! Command line front end: simulate marked point patterns, fit or evaluate
//! intensity models, estimate the cross summary statistics and run Monte
//! Carlo envelope tests. All inputs come from a JSON configuration (see
//! [`config::RunConfig`]); a few flags override the common knobs.

pub mod config;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use markpp::io::{
    write_envelope, write_envelope_meta, write_intensity_raster, write_pattern, write_summary,
};
use markpp::{summarize, test_independence_ls, test_random_labelling, Envelope, MarkSpace};

use config::{PatternSpec, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "markpp",
    version,
    about = "Cross summary statistics and Monte Carlo tests for marked point patterns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, short = 'c', value_name = "FILE")]
    pub config: PathBuf,
    /// Replace the master seed from the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Read the pattern from this CSV instead of the configured source.
    #[arg(long, value_name = "FILE")]
    pub pattern: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a pattern from the configured model and write it as x,y,mark CSV.
    Simulate(Common),
    /// Evaluate the configured intensity model on a raster and write it as CSV.
    Intensity {
        #[command(flatten)]
        common: Common,
        /// Raster cells per side.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Estimate the cross summary statistics, one CSV row per radius.
    Summary(Common),
    /// Rank envelope test against independent torus translations of the
    /// target marks.
    TestIndependence {
        #[command(flatten)]
        common: Common,
        /// JSON metadata path; defaults to the output with a -meta.json suffix.
        #[arg(long, value_name = "FILE")]
        meta: Option<PathBuf>,
    },
    /// Rank envelope test against random relabelling of the points.
    TestRandomlabel {
        #[command(flatten)]
        common: Common,
        /// JSON metadata path; defaults to the output with a -meta.json suffix.
        #[arg(long, value_name = "FILE")]
        meta: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => simulate(common),
        Command::Intensity { common, resolution } => intensity(common, resolution),
        Command::Summary(common) => summary(common),
        Command::TestIndependence { common, meta } => envelope_test(common, meta, false),
        Command::TestRandomlabel { common, meta } => envelope_test(common, meta, true),
    }
}

fn simulate(common: Common) -> Result<()> {
    let cfg = RunConfig::load(&common.config)?;
    if common.pattern.is_some() {
        bail!("`simulate` generates its pattern; --pattern is not accepted here");
    }
    let window = cfg.window()?;
    let ms = cfg.markspace()?;
    let seed = cfg.effective_seed(common.seed);
    let (model, sim_seed) = match &cfg.pattern {
        Some(PatternSpec::Simulate { model, seed: s }) => (model, s.unwrap_or(seed)),
        _ => bail!("`simulate` needs a pattern.simulate section in the configuration"),
    };
    let pattern = cfg.simulate(model, window, &ms, sim_seed)?;
    let out = out_path(common.out, "pattern.csv");
    write_pattern(&out, &pattern)?;
    println!(
        "wrote {} points ({}) to {}",
        pattern.len(),
        count_summary(&pattern.mark_counts(), &ms),
        out.display()
    );
    Ok(())
}

fn intensity(common: Common, resolution: usize) -> Result<()> {
    let cfg = RunConfig::load(&common.config)?;
    let window = cfg.window()?;
    let ms = cfg.markspace()?;
    let seed = cfg.effective_seed(common.seed);
    let pattern = load_pattern_if_configured(&cfg, window, &ms, &common, seed)?;
    let model = cfg.model(window, &ms, pattern.as_ref())?;
    let out = out_path(common.out, "intensity.csv");
    write_intensity_raster(&out, model.as_ref(), &ms, resolution)?;
    println!(
        "wrote a {resolution}x{resolution} raster for {} marks to {}",
        ms.len(),
        out.display()
    );
    Ok(())
}

fn summary(common: Common) -> Result<()> {
    let cfg = RunConfig::load(&common.config)?;
    let window = cfg.window()?;
    let ms = cfg.markspace()?;
    let seed = cfg.effective_seed(common.seed);
    let pattern = load_pattern(&cfg, window, &ms, &common, seed)?;
    let model = cfg.model(window, &ms, Some(&pattern))?;
    let (c_set, d_set) = cfg.mark_sets(&ms)?;
    let sc = cfg.summary_config(&window)?;
    let est = summarize(&pattern, model.as_ref(), c_set, d_set, &sc)?;
    let out = out_path(common.out, "summary.csv");
    write_summary(&out, &est)?;
    println!(
        "wrote {} radii for a {}-point pattern to {} (target intensity lower bound {})",
        est.rows.len(),
        pattern.len(),
        out.display(),
        est.lambda_bar
    );
    Ok(())
}

fn envelope_test(common: Common, meta: Option<PathBuf>, random_label: bool) -> Result<()> {
    let cfg = RunConfig::load(&common.config)?;
    let window = cfg.window()?;
    let ms = cfg.markspace()?;
    let seed = cfg.effective_seed(common.seed);
    let pattern = load_pattern(&cfg, window, &ms, &common, seed)?;
    let (c_set, d_set) = cfg.mark_sets(&ms)?;
    let env_cfg = cfg.envelope_config(&window, seed)?;
    let (name, env) = if random_label {
        let ground = cfg.ground_field(window, Some(&pattern))?;
        let env = test_random_labelling(&pattern, ground, c_set, d_set, &env_cfg)?;
        ("random labelling", env)
    } else {
        let model = cfg.model(window, &ms, Some(&pattern))?;
        let env = test_independence_ls(&pattern, model, c_set, d_set, &env_cfg)?;
        ("independence", env)
    };
    let out = out_path(common.out, "envelope.csv");
    let meta = meta.unwrap_or_else(|| meta_path(&out));
    write_envelope(&out, &env)?;
    write_envelope_meta(&meta, &env)?;
    println!(
        "{:?} {name} test, {} replicates at rank {} (level {:.3}): {}",
        env.statistic,
        env.n_replicates,
        env.rank,
        env.nominal_level(),
        verdict(&env)
    );
    println!(
        "wrote the envelope to {} and metadata to {}",
        out.display(),
        meta.display()
    );
    Ok(())
}

/// A pattern is mandatory for estimation commands.
fn load_pattern(
    cfg: &RunConfig,
    window: markpp::Window,
    ms: &MarkSpace,
    common: &Common,
    seed: u64,
) -> Result<markpp::MarkedPattern> {
    let load = cfg
        .pattern(window, ms, common.pattern.as_deref(), seed)
        .context("cannot load the pattern")?;
    if let Some(note) = load.note {
        println!("{note}");
    }
    Ok(load.pattern)
}

/// The intensity command needs a pattern only for kernel or scale fitting,
/// so a missing source is fine as long as the model is fully analytic.
fn load_pattern_if_configured(
    cfg: &RunConfig,
    window: markpp::Window,
    ms: &MarkSpace,
    common: &Common,
    seed: u64,
) -> Result<Option<markpp::MarkedPattern>> {
    if cfg.pattern.is_none() && common.pattern.is_none() {
        return Ok(None);
    }
    load_pattern(cfg, window, ms, common, seed).map(Some)
}

fn out_path(out: Option<PathBuf>, default: &str) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(default))
}

fn meta_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("envelope");
    out.with_file_name(format!("{stem}-meta.json"))
}

fn count_summary(counts: &[usize], ms: &MarkSpace) -> String {
    ms.marks()
        .map(|m| format!("{}={}", ms.label(m), counts[m.0]))
        .collect::<Vec<_>>()
        .join(", ")
}

fn verdict(env: &Envelope) -> String {
    if env.rejects() {
        let rs: Vec<String> = env
            .rs
            .iter()
            .enumerate()
            .filter(|&(i, _)| env.rejects_at(i))
            .map(|(_, r)| format!("{r}"))
            .collect();
        format!(
            "observed curve leaves the envelope at r = {}",
            rs.join(", ")
        )
    } else {
        "observed curve stays inside the envelope".to_string()
    }
}
