//! CSV and JSON input/output for patterns, summary curves, test envelopes
//! and intensity rasters.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! results produce byte-identical files and determinism can be checked by
//! comparing output bytes. Statistics that are undefined at a radius are
//! written as `NA`.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::SummaryEstimate;
use crate::geom::{Point, Window};
use crate::intensity::IntensityModel;
use crate::mctest::{Envelope, TestStatistic};
use crate::pattern::{DedupPolicy, Mark, MarkSpace, MarkedPattern, MarkedPoint};

/// How a pattern CSV is interpreted.
#[derive(Debug, Clone)]
pub struct ReadOptions {
    pub dedup: DedupPolicy,
    /// Fixed label universe in index order. `None` infers labels in order
    /// of first appearance (at least one data row is then required).
    pub labels: Option<Vec<String>>,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            dedup: DedupPolicy::Reject,
            labels: None,
        }
    }
}

/// A parsed pattern plus what was discarded on the way.
#[derive(Debug)]
pub struct ReadReport {
    pub pattern: MarkedPattern,
    /// Rows whose location fell outside the window.
    pub n_outside: usize,
    /// Duplicate locations dropped under [`DedupPolicy::KeepFirst`].
    pub n_deduped: usize,
}

/// Reads `x,y,mark` rows from a CSV file. Extra columns are ignored;
/// column order is free.
pub fn read_pattern<P: AsRef<Path>>(
    path: P,
    window: Window,
    opts: &ReadOptions,
) -> Result<ReadReport> {
    read_pattern_from(File::open(path)?, window, opts)
}

/// Same as [`read_pattern`] for any reader.
pub fn read_pattern_from<R: Read>(
    reader: R,
    window: Window,
    opts: &ReadOptions,
) -> Result<ReadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::CsvRecord {
                line: 1,
                message: format!("missing required column `{name}`"),
            })
    };
    let (cx, cy, cm) = (col("x")?, col("y")?, col("mark")?);

    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    if let Some(fixed) = &opts.labels {
        for (i, l) in fixed.iter().enumerate() {
            label_index.insert(l.clone(), i);
            labels.push(l.clone());
        }
    }
    let inferring = opts.labels.is_none();

    let mut points: Vec<MarkedPoint> = Vec::new();
    let mut n_outside = 0usize;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |idx: usize, name: &str| -> Result<f64> {
            let field = record.get(idx).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| Error::CsvRecord {
                line,
                message: format!("cannot parse {name} from `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvRecord {
                    line,
                    message: format!("{name} must be finite, got `{field}`"),
                });
            }
            Ok(v)
        };
        let x = parse(cx, "x")?;
        let y = parse(cy, "y")?;
        let label = record.get(cm).unwrap_or("");
        if label.is_empty() {
            return Err(Error::CsvRecord {
                line,
                message: "empty mark label".into(),
            });
        }
        let mark = match label_index.get(label) {
            Some(&i) => Mark(i),
            None if inferring => {
                let i = labels.len();
                labels.push(label.to_string());
                label_index.insert(label.to_string(), i);
                Mark(i)
            }
            None => {
                return Err(Error::CsvRecord {
                    line,
                    message: format!("unknown mark label `{label}`"),
                });
            }
        };
        let loc = Point::new(x, y);
        if !window.contains(loc) {
            n_outside += 1;
            continue;
        }
        points.push(MarkedPoint { loc, mark });
    }

    let markspace = MarkSpace::counting(&labels)?;
    let (pattern, n_deduped) = MarkedPattern::with_policy(window, markspace, points, opts.dedup)?;
    Ok(ReadReport {
        pattern,
        n_outside,
        n_deduped,
    })
}

/// Writes `x,y,mark` rows.
pub fn write_pattern<P: AsRef<Path>>(path: P, pattern: &MarkedPattern) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["x", "y", "mark"])?;
    let ms = pattern.markspace();
    for p in pattern.points() {
        wtr.write_record([
            p.loc.x.to_string(),
            p.loc.y.to_string(),
            ms.label(p.mark).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the four statistics over the radius grid:
/// `r,f,d,j,k,n_probe,n_ref`.
pub fn write_summary<P: AsRef<Path>>(path: P, est: &SummaryEstimate) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["r", "f", "d", "j", "k", "n_probe", "n_ref"])?;
    for row in &est.rows {
        wtr.write_record([
            row.r.to_string(),
            fmt_opt(row.f),
            fmt_opt(row.d),
            fmt_opt(row.j),
            fmt_opt(row.k),
            row.n_probe.to_string(),
            row.n_ref.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the envelope curves: `r,observed,lower,upper,mean,n_effective`.
pub fn write_envelope<P: AsRef<Path>>(path: P, env: &Envelope) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["r", "observed", "lower", "upper", "mean", "n_effective"])?;
    for i in 0..env.rs.len() {
        wtr.write_record([
            env.rs[i].to_string(),
            fmt_opt(env.observed[i]),
            fmt_opt(env.lower[i]),
            fmt_opt(env.upper[i]),
            fmt_opt(env.mean[i]),
            env.n_effective[i].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the test metadata (statistic, replicate count, rank, seed,
/// nominal level, mark sets, rejection) as JSON.
pub fn write_envelope_meta<P: AsRef<Path>>(path: P, env: &Envelope) -> Result<()> {
    let statistic = match env.statistic {
        TestStatistic::J => "J",
        TestStatistic::D => "D",
    };
    let meta = serde_json::json!({
        "statistic": statistic,
        "n_replicates": env.n_replicates,
        "rank": env.rank,
        "seed": env.seed,
        "nominal_level": env.nominal_level(),
        "c_labels": env.c_labels,
        "d_labels": env.d_labels,
        "rejects": env.rejects(),
    });
    std::fs::write(path, format!("{:#}\n", meta))?;
    Ok(())
}

/// Writes the model evaluated at `res x res` cell centres for every mark:
/// `x,y,mark,value`.
pub fn write_intensity_raster<P: AsRef<Path>>(
    path: P,
    model: &dyn IntensityModel,
    ms: &MarkSpace,
    res: usize,
) -> Result<()> {
    if res == 0 {
        return Err(Error::InvalidParameter {
            name: "raster resolution",
            message: "must be at least 1".into(),
        });
    }
    let w = model.window();
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["x", "y", "mark", "value"])?;
    for iy in 0..res {
        let y = w.ymin() + (iy as f64 + 0.5) * w.height() / res as f64;
        for ix in 0..res {
            let x = w.xmin() + (ix as f64 + 0.5) * w.width() / res as f64;
            for m in ms.marks() {
                wtr.write_record([
                    x.to_string(),
                    y.to_string(),
                    ms.label(m).to_string(),
                    model.eval(Point::new(x, y), m).to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "NA".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{summarize, RGrid, SummaryConfig};
    use crate::intensity::PerMarkIntensity;
    use crate::pattern::MarkSet;
    use std::io::Cursor;

    fn sample_csv() -> &'static str {
        "x,y,mark,extra\n0.25,0.5,oak,ignored\n0.75,0.5,pine,ignored\n0.1,0.9,oak,ignored\n"
    }

    #[test]
    fn reads_and_infers_labels_in_first_appearance_order() {
        let rep = read_pattern_from(
            Cursor::new(sample_csv()),
            Window::unit(),
            &ReadOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.pattern.len(), 3);
        assert_eq!(rep.pattern.markspace().labels(), ["oak", "pine"]);
        assert_eq!(rep.pattern.points()[0].mark, Mark(0));
        assert_eq!(rep.pattern.points()[1].mark, Mark(1));
        assert_eq!(rep.n_outside, 0);
        assert_eq!(rep.n_deduped, 0);
    }

    #[test]
    fn fixed_labels_pin_mark_indices_and_reject_strangers() {
        let opts = ReadOptions {
            labels: Some(vec!["pine".into(), "oak".into()]),
            ..ReadOptions::default()
        };
        let rep = read_pattern_from(Cursor::new(sample_csv()), Window::unit(), &opts).unwrap();
        assert_eq!(rep.pattern.points()[0].mark, Mark(1));
        assert_eq!(rep.pattern.markspace().labels(), ["pine", "oak"]);

        let bad = "x,y,mark\n0.5,0.5,birch\n";
        let opts = ReadOptions {
            labels: Some(vec!["pine".into()]),
            ..ReadOptions::default()
        };
        let err = read_pattern_from(Cursor::new(bad), Window::unit(), &opts);
        assert!(
            matches!(err, Err(Error::CsvRecord { line: 2, ref message }) if message.contains("birch"))
        );
    }

    #[test]
    fn rejects_malformed_rows_with_line_numbers() {
        let bad_float = "x,y,mark\n0.5,oops,a\n";
        let err = read_pattern_from(
            Cursor::new(bad_float),
            Window::unit(),
            &ReadOptions::default(),
        );
        assert!(matches!(err, Err(Error::CsvRecord { line: 2, .. })));

        let nan = "x,y,mark\nNaN,0.5,a\n";
        let err = read_pattern_from(Cursor::new(nan), Window::unit(), &ReadOptions::default());
        assert!(matches!(err, Err(Error::CsvRecord { line: 2, .. })));

        let empty_mark = "x,y,mark\n0.5,0.5,\n";
        let err = read_pattern_from(
            Cursor::new(empty_mark),
            Window::unit(),
            &ReadOptions::default(),
        );
        assert!(matches!(err, Err(Error::CsvRecord { line: 2, .. })));

        let missing = "x,y\n0.5,0.5\n";
        let err = read_pattern_from(
            Cursor::new(missing),
            Window::unit(),
            &ReadOptions::default(),
        );
        assert!(
            matches!(err, Err(Error::CsvRecord { line: 1, ref message }) if message.contains("mark"))
        );
    }

    #[test]
    fn drops_and_counts_points_outside_the_window() {
        let csv = "x,y,mark\n0.5,0.5,a\n1.5,0.5,a\n-0.1,0.2,a\n";
        let rep =
            read_pattern_from(Cursor::new(csv), Window::unit(), &ReadOptions::default()).unwrap();
        assert_eq!(rep.pattern.len(), 1);
        assert_eq!(rep.n_outside, 2);
    }

    #[test]
    fn duplicate_handling_follows_the_policy() {
        let csv = "x,y,mark\n0.5,0.5,a\n0.5,0.5,b\n";
        let err = read_pattern_from(Cursor::new(csv), Window::unit(), &ReadOptions::default());
        assert!(matches!(err, Err(Error::DuplicateLocations { .. })));

        let opts = ReadOptions {
            dedup: DedupPolicy::KeepFirst,
            ..ReadOptions::default()
        };
        let rep = read_pattern_from(Cursor::new(csv), Window::unit(), &opts).unwrap();
        assert_eq!(rep.pattern.len(), 1);
        assert_eq!(rep.n_deduped, 1);
        assert_eq!(
            rep.pattern.markspace().label(rep.pattern.points()[0].mark),
            "a"
        );
    }

    #[test]
    fn pattern_round_trips_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pattern.csv");
        let rep = read_pattern_from(
            Cursor::new(sample_csv()),
            Window::unit(),
            &ReadOptions::default(),
        )
        .unwrap();
        write_pattern(&path, &rep.pattern).unwrap();
        let back = read_pattern(&path, Window::unit(), &ReadOptions::default()).unwrap();
        assert_eq!(back.pattern.len(), rep.pattern.len());
        for (a, b) in rep.pattern.points().iter().zip(back.pattern.points()) {
            assert_eq!(a.loc.x.to_bits(), b.loc.x.to_bits());
            assert_eq!(a.loc.y.to_bits(), b.loc.y.to_bits());
            assert_eq!(
                rep.pattern.markspace().label(a.mark),
                back.pattern.markspace().label(b.mark)
            );
        }
    }

    #[test]
    fn summary_file_marks_undefined_cells_as_na() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        let w = Window::unit();
        let ms = MarkSpace::counting(&["a"]).unwrap();
        let pattern = MarkedPattern::new(w, ms, Vec::new()).unwrap();
        let model = PerMarkIntensity::constant(w, &[1.0]).unwrap();
        let mut cfg = SummaryConfig::new(RGrid::new(vec![0.1, 0.7]).unwrap());
        cfg.probe_per_side = 4;
        let est = summarize(&pattern, &model, MarkSet::full(1), MarkSet::full(1), &cfg).unwrap();
        write_summary(&path, &est).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,f,d,j,k,n_probe,n_ref"));
        // Empty pattern: F defined (no points to find), D undefined, and the
        // second radius exceeds the erosion limit entirely.
        assert_eq!(lines.next(), Some("0.1,0,NA,NA,0,16,0"));
        assert_eq!(lines.next(), Some("0.7,NA,NA,NA,NA,0,0"));
    }
}
