//! Acceptance suite: one test per shipped statistical guarantee, each
//! printing an `[acceptance] criterion N (...): PASS` line (visible with
//! `--nocapture`). The checks are analytic rather than golden-file based:
//! Poisson closed forms, equivalence with naive double-loop estimators,
//! Monte Carlo test size, internal ratio consistency and byte determinism
//! of the CLI binary.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use markpp::{
    fit_scale, sim_marked, summarize, test_independence_ls, test_random_labelling, EnvelopeConfig,
    IntensityModel, KernelIntensity, LeaveOneOutKernel, Mark, MarkSet, MarkSpace, MarkedPattern,
    MarkedPoint, MarkingRule, ParentCoupling, PerMarkIntensity, Point, ProbeGrid, RGrid, SimConfig,
    SpatialField, SummaryConfig, SummaryRow, Surface, TestStatistic, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion<F: FnOnce()>(n: usize, name: &str, body: F) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("[acceptance] criterion {n} ({name}): PASS"),
        Err(cause) => {
            println!("[acceptance] criterion {n} ({name}): FAIL");
            resume_unwind(cause);
        }
    }
}

fn unit() -> Window {
    Window::new(0.0, 1.0, 0.0, 1.0).unwrap()
}

fn two_marks() -> MarkSpace {
    MarkSpace::counting(&["a", "b"]).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

/// Asserts the Monte Carlo mean matches the target within three standard
/// errors and returns the realized |z| score for diagnostics.
fn assert_within_3se(values: &[f64], target: f64, what: &str) -> f64 {
    let (m, se) = mean_and_se(values);
    assert!(
        (m - target).abs() <= 3.0 * se,
        "{what}: mean {m} vs target {target}, |diff| {} > 3 se = {}",
        (m - target).abs(),
        3.0 * se
    );
    (m - target).abs() / se
}

/// Per-radius Monte Carlo columns of one batch of replicated summaries.
struct Batch {
    rs: Vec<f64>,
    f: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    j: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    undefined_j: usize,
    lambda_bar: f64,
    identity_residual: f64,
    elapsed: Duration,
}

/// Simulates `n_reps` independent two-component Poisson patterns with the
/// given per-area component intensities, summarizes each under the known
/// model, and collects the defined statistic values per radius.
fn poisson_batch(surfaces: [Surface; 2], n_reps: usize, seed_base: u64) -> Batch {
    let window = unit();
    let ms = two_marks();
    let fields = || -> Vec<Arc<dyn SpatialField>> {
        surfaces
            .iter()
            .map(|s| Arc::new(*s) as Arc<dyn SpatialField>)
            .collect()
    };
    let model = PerMarkIntensity::from_components(window, &ms, fields()).unwrap();
    let rs = vec![0.02, 0.04, 0.06, 0.08, 0.10];
    let cfg = SummaryConfig::new(RGrid::new(rs.clone()).unwrap());
    let rule = MarkingRule::IndependentComponents(fields());
    let c_set = MarkSet::single(Mark(0));
    let d_set = MarkSet::single(Mark(1));

    let start = Instant::now();
    let nr = rs.len();
    let mut batch = Batch {
        rs,
        f: vec![Vec::with_capacity(n_reps); nr],
        d: vec![Vec::with_capacity(n_reps); nr],
        j: vec![Vec::with_capacity(n_reps); nr],
        k: vec![Vec::with_capacity(n_reps); nr],
        undefined_j: 0,
        lambda_bar: f64::NAN,
        identity_residual: 0.0,
        elapsed: Duration::ZERO,
    };
    for i in 0..n_reps {
        let sim = SimConfig {
            window,
            markspace: ms.clone(),
            seed: seed_base + i as u64,
        };
        let pattern = sim_marked(&sim, &rule).unwrap();
        let est = summarize(&pattern, &model, c_set, d_set, &cfg).unwrap();
        batch.lambda_bar = est.lambda_bar;
        for (ri, row) in est.rows.iter().enumerate() {
            if let Some(v) = row.f {
                batch.f[ri].push(v);
            }
            if let Some(v) = row.d {
                batch.d[ri].push(v);
            }
            if let Some(v) = row.j {
                batch.j[ri].push(v);
            } else {
                batch.undefined_j += 1;
            }
            if let Some(v) = row.k {
                batch.k[ri].push(v);
            }
            if let (Some(j), Some(f), Some(d)) = (row.j, row.f, row.d) {
                let resid = (j * (1.0 - f) - (1.0 - d)).abs();
                batch.identity_residual = batch.identity_residual.max(resid);
            }
        }
    }
    batch.elapsed = start.elapsed();
    batch
}

/// 500 replicates of independent homogeneous components with intensity 100
/// each, shared by criteria 1 to 3 (and the identity sweep of criterion 6).
fn homogeneous_batch() -> &'static Batch {
    static BATCH: OnceLock<Batch> = OnceLock::new();
    BATCH.get_or_init(|| {
        poisson_batch(
            [Surface::Constant(100.0), Surface::Constant(100.0)],
            500,
            1_000,
        )
    })
}

#[test]
fn criterion_01_poisson_j_identity() {
    criterion(1, "poisson j identity", || {
        let b = homogeneous_batch();
        assert!(
            b.elapsed < Duration::from_secs(300),
            "batch took {:?}, budget is 300 s",
            b.elapsed
        );
        // J can drop out only when an empty-space column saturates; that is
        // a vanishing-probability event here.
        assert!(
            b.undefined_j <= 5,
            "{} of 2500 J values undefined",
            b.undefined_j
        );
        let mut worst = 0.0f64;
        for (ri, &r) in b.rs.iter().enumerate() {
            let m = mean(&b.j[ri]);
            worst = worst.max((m - 1.0).abs());
            assert!(
                (m - 1.0).abs() <= 0.05,
                "mean J at r={r} over {} replicates is {m}",
                b.j[ri].len()
            );
        }
        println!("[acceptance]   max |mean J - 1| = {worst:.4} (allowed 0.05)");
    });
}

#[test]
fn criterion_02_poisson_nearest_and_empty_space() {
    criterion(2, "poisson d and f closed form", || {
        let b = homogeneous_batch();
        let mut worst = 0.0f64;
        for (ri, &r) in b.rs.iter().enumerate() {
            let target = 1.0 - (-100.0 * std::f64::consts::PI * r * r).exp();
            assert_eq!(b.f[ri].len(), 500, "undefined F at r={r}");
            assert_eq!(b.d[ri].len(), 500, "undefined D at r={r}");
            worst = worst.max(assert_within_3se(&b.f[ri], target, &format!("F at r={r}")));
            worst = worst.max(assert_within_3se(&b.d[ri], target, &format!("D at r={r}")));
        }
        println!("[acceptance]   max |z| over D and F = {worst:.2} (allowed 3)");
    });
}

#[test]
fn criterion_03_poisson_k_closed_form() {
    criterion(3, "poisson k closed form", || {
        let b = homogeneous_batch();
        let mut worst = 0.0f64;
        for (ri, &r) in b.rs.iter().enumerate() {
            let target = std::f64::consts::PI * r * r;
            assert_eq!(b.k[ri].len(), 500, "undefined K at r={r}");
            worst = worst.max(assert_within_3se(&b.k[ri], target, &format!("K at r={r}")));
        }
        println!("[acceptance]   max |z| over K = {worst:.2} (allowed 3)");
    });
}

#[test]
fn criterion_04_inhomogeneous_reweighting() {
    criterion(4, "inhomogeneous reweighting", || {
        // Both components share a sloped intensity; the infimum over the
        // window is 50, attained on the x = 0 edge.
        let s = Surface::Linear {
            c: 50.0,
            ax: 100.0,
            by: 0.0,
        };
        let b = poisson_batch([s, s], 500, 41_000);
        assert_eq!(b.lambda_bar, 50.0, "exact intensity lower bound");
        assert!(
            b.undefined_j <= 5,
            "{} of 2500 J values undefined",
            b.undefined_j
        );
        let mut worst_j = 0.0f64;
        let mut worst_z = 0.0f64;
        for (ri, &r) in b.rs.iter().enumerate() {
            let m = mean(&b.j[ri]);
            worst_j = worst_j.max((m - 1.0).abs());
            assert!(
                (m - 1.0).abs() <= 0.05,
                "mean J at r={r} over {} replicates is {m}",
                b.j[ri].len()
            );
            let target = 1.0 - (-50.0 * std::f64::consts::PI * r * r).exp();
            assert_eq!(b.f[ri].len(), 500, "undefined F at r={r}");
            assert_eq!(b.d[ri].len(), 500, "undefined D at r={r}");
            worst_z = worst_z.max(assert_within_3se(&b.f[ri], target, &format!("F at r={r}")));
            worst_z = worst_z.max(assert_within_3se(&b.d[ri], target, &format!("D at r={r}")));
        }
        println!(
            "[acceptance]   max |mean J - 1| = {worst_j:.4} (allowed 0.05), max |z| over D and F = {worst_z:.2} (allowed 3)"
        );
    });
}

/// Straight-from-definition re-implementation of all four statistics with
/// plain double loops, used as the independent oracle of criterion 5.
mod naive {
    use super::*;

    pub struct Row {
        pub f: Option<f64>,
        pub d: Option<f64>,
        pub j: Option<f64>,
        pub k: Option<f64>,
    }

    /// The infimum of the model over the window for marks in `d_set`;
    /// affine surfaces attain it at a window corner.
    pub fn corner_lower_bound(
        model: &dyn IntensityModel,
        w: &Window,
        d_set: MarkSet,
        n_marks: usize,
    ) -> f64 {
        let corners = [
            Point::new(w.xmin(), w.ymin()),
            Point::new(w.xmax(), w.ymin()),
            Point::new(w.xmin(), w.ymax()),
            Point::new(w.xmax(), w.ymax()),
        ];
        let mut inf = f64::INFINITY;
        for m in (0..n_marks).map(Mark) {
            if d_set.contains(m) {
                for c in corners {
                    inf = inf.min(model.eval(c, m));
                }
            }
        }
        inf
    }

    #[allow(clippy::too_many_arguments)]
    pub fn rows(
        pattern: &MarkedPattern,
        model: &dyn IntensityModel,
        lambda_bar: f64,
        c_set: MarkSet,
        d_set: MarkSet,
        probes: &[Point],
        rs: &[f64],
        tol: f64,
    ) -> Vec<Row> {
        let w = *pattern.window();
        let ms = pattern.markspace();
        let nu_c: f64 = ms
            .marks()
            .filter(|&m| c_set.contains(m))
            .map(|m| ms.nu(m))
            .sum();
        let nu_d: f64 = ms
            .marks()
            .filter(|&m| d_set.contains(m))
            .map(|m| ms.nu(m))
            .sum();
        let pts = pattern.points();
        let in_core = |p: Point, r: f64| {
            p.x - w.xmin() >= r && w.xmax() - p.x >= r && p.y - w.ymin() >= r && w.ymax() - p.y >= r
        };
        let in_ball = |a: Point, z: Point, r: f64| {
            let (dx, dy) = (a.x - z.x, a.y - z.y);
            dx * dx + dy * dy <= r * r
        };
        rs.iter()
            .map(|&r| {
                let mut f_sum = 0.0;
                let mut f_cnt = 0u64;
                for &a in probes {
                    if !in_core(a, r) {
                        continue;
                    }
                    let mut prod = 1.0;
                    for z in pts {
                        if d_set.contains(z.mark) && in_ball(a, z.loc, r) {
                            prod *= 1.0 - lambda_bar / model.eval(z.loc, z.mark);
                        }
                    }
                    f_sum += prod;
                    f_cnt += 1;
                }
                let f = (f_cnt > 0).then(|| 1.0 - f_sum / f_cnt as f64);

                let mut d_sum = 0.0;
                let mut norm = 0.0;
                let mut k_sum = 0.0;
                let mut refs = 0u64;
                for (ia, a) in pts.iter().enumerate() {
                    if !c_set.contains(a.mark) || !in_core(a.loc, r) {
                        continue;
                    }
                    refs += 1;
                    let wa = 1.0 / model.eval(a.loc, a.mark);
                    let mut prod = 1.0;
                    let mut inv = 0.0;
                    for (iz, z) in pts.iter().enumerate() {
                        if iz != ia && d_set.contains(z.mark) && in_ball(a.loc, z.loc, r) {
                            prod *= 1.0 - lambda_bar / model.eval(z.loc, z.mark);
                            inv += 1.0 / model.eval(z.loc, z.mark);
                        }
                    }
                    d_sum += wa * prod;
                    norm += wa;
                    k_sum += wa * inv;
                }
                let d = (refs > 0).then(|| 1.0 - d_sum / norm);
                let j = match (d, f) {
                    (Some(dv), Some(fv)) if 1.0 - fv > tol => Some((1.0 - dv) / (1.0 - fv)),
                    _ => None,
                };
                let (ew, eh) = (w.width() - 2.0 * r, w.height() - 2.0 * r);
                let k = (ew > 0.0 && eh > 0.0).then(|| k_sum / (ew * eh * nu_c * nu_d));
                Row { f, d, j, k }
            })
            .collect()
    }
}

/// One randomly drawn estimation problem: pattern, analytic model, mark
/// groups, probe set and radius grid.
struct RandomCase {
    pattern: MarkedPattern,
    model: PerMarkIntensity,
    n_marks: usize,
    c_set: MarkSet,
    d_set: MarkSet,
    probes: Vec<Point>,
    rs: Vec<f64>,
}

fn random_case(rng: &mut ChaCha8Rng, max_points: usize) -> RandomCase {
    let wx = 0.5 + 1.5 * rng.random::<f64>();
    let wy = 0.5 + 1.5 * rng.random::<f64>();
    let window = Window::new(0.0, wx, 0.0, wy).unwrap();
    let n_marks = rng.random_range(1..=3usize);
    let labels = ["m0", "m1", "m2"];
    let ms = if rng.random::<bool>() {
        MarkSpace::counting(&labels[..n_marks]).unwrap()
    } else {
        let nu: Vec<f64> = (0..n_marks)
            .map(|_| 0.5 + 1.5 * rng.random::<f64>())
            .collect();
        MarkSpace::with_weights(&labels[..n_marks], &nu).unwrap()
    };

    let n = rng.random_range(0..=max_points);
    let points: Vec<MarkedPoint> = (0..n)
        .map(|_| MarkedPoint {
            loc: Point::new(wx * rng.random::<f64>(), wy * rng.random::<f64>()),
            mark: Mark(rng.random_range(0..n_marks)),
        })
        .collect();
    let pattern = MarkedPattern::new(window, ms, points).unwrap();

    // Positive affine densities: non-negative slopes keep the infimum at
    // the origin corner.
    let fields: Vec<Arc<dyn SpatialField>> = (0..n_marks)
        .map(|_| -> Arc<dyn SpatialField> {
            if rng.random::<bool>() {
                Arc::new(Surface::Constant(0.5 + 9.5 * rng.random::<f64>()))
            } else {
                Arc::new(Surface::Linear {
                    c: 0.5 + 4.5 * rng.random::<f64>(),
                    ax: 5.0 * rng.random::<f64>(),
                    by: 5.0 * rng.random::<f64>(),
                })
            }
        })
        .collect();
    let model = PerMarkIntensity::from_densities(window, fields).unwrap();

    let subset = |rng: &mut ChaCha8Rng| {
        let mut s = MarkSet::empty();
        for m in 0..n_marks {
            if rng.random::<bool>() {
                s = s.insert(Mark(m));
            }
        }
        if s.is_empty() {
            s = s.insert(Mark(rng.random_range(0..n_marks)));
        }
        s
    };
    let c_set = subset(rng);
    let d_set = subset(rng);

    let probes: Vec<Point> = (0..20)
        .map(|_| Point::new(wx * rng.random::<f64>(), wy * rng.random::<f64>()))
        .collect();

    let min_side = wx.min(wy);
    let mut rs: Vec<f64> = (0..rng.random_range(1..=4usize))
        .map(|_| (0.01 + 0.59 * rng.random::<f64>()) * min_side)
        .collect();
    rs.sort_by(f64::total_cmp);
    rs.dedup();

    RandomCase {
        pattern,
        model,
        n_marks,
        c_set,
        d_set,
        probes,
        rs,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn assert_opt_close(engine: Option<f64>, oracle: Option<f64>, what: &str, case: usize, r: f64) {
    match (engine, oracle) {
        (None, None) => {}
        (Some(x), Some(y)) => assert!(
            close(x, y),
            "case {case}, r={r}, {what}: engine {x} vs oracle {y}"
        ),
        _ => panic!(
            "case {case}, r={r}, {what}: definedness differs (engine {engine:?}, oracle {oracle:?})"
        ),
    }
}

#[test]
fn criterion_05_oracle_equivalence() {
    criterion(5, "naive oracle equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
        for case in 0..100 {
            let rc = random_case(&mut rng, 50);
            let window = *rc.pattern.window();

            let mut cfg = SummaryConfig::new(RGrid::new(rc.rs.clone()).unwrap());
            cfg.probes = Some(ProbeGrid::custom(rc.probes.clone(), &window).unwrap());
            let est = summarize(&rc.pattern, &rc.model, rc.c_set, rc.d_set, &cfg).unwrap();

            let lambda_bar = naive::corner_lower_bound(&rc.model, &window, rc.d_set, rc.n_marks);
            assert!(
                close(est.lambda_bar, lambda_bar),
                "case {case}: lower bound {} vs oracle {lambda_bar}",
                est.lambda_bar
            );
            let rows = naive::rows(
                &rc.pattern,
                &rc.model,
                lambda_bar,
                rc.c_set,
                rc.d_set,
                &rc.probes,
                &rc.rs,
                cfg.denominator_tol,
            );
            for (row, orc) in est.rows.iter().zip(rows.iter()) {
                assert_opt_close(row.f, orc.f, "F", case, row.r);
                assert_opt_close(row.d, orc.d, "D", case, row.r);
                assert_opt_close(row.j, orc.j, "J", case, row.r);
                assert_opt_close(row.k, orc.k, "K", case, row.r);
            }
        }
    });
}

fn assert_ratio_identity(rows: &[SummaryRow], what: &str) {
    for row in rows {
        if let (Some(j), Some(f), Some(d)) = (row.j, row.f, row.d) {
            let resid = (j * (1.0 - f) - (1.0 - d)).abs();
            assert!(
                resid <= 1e-12,
                "{what}: residual {resid} at r={} (j={j}, f={f}, d={d})",
                row.r
            );
        }
    }
}

#[test]
fn criterion_06_ratio_identity() {
    criterion(6, "j ratio identity", || {
        // The homogeneous sweep of criteria 1 to 3.
        let b = homogeneous_batch();
        assert!(
            b.identity_residual <= 1e-12,
            "batch residual {}",
            b.identity_residual
        );

        // Random analytic problems with larger patterns.
        let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
        for case in 0..60 {
            let rc = random_case(&mut rng, 200);
            let window = *rc.pattern.window();
            let mut cfg = SummaryConfig::new(RGrid::new(rc.rs.clone()).unwrap());
            cfg.probes = Some(ProbeGrid::custom(rc.probes.clone(), &window).unwrap());
            let est = summarize(&rc.pattern, &rc.model, rc.c_set, rc.d_set, &cfg).unwrap();
            assert_ratio_identity(&est.rows, &format!("random case {case}"));
        }

        // Kernel-estimated intensities, plain and leave-one-out.
        let window = unit();
        let ms = two_marks();
        let pattern = markpp::sim_thomas_cross(
            window,
            ms.clone(),
            25.0,
            [4.0, 4.0],
            0.03,
            ParentCoupling::Shared,
            0xC6,
        )
        .unwrap();
        for loo in [false, true] {
            let fields: Vec<Arc<dyn SpatialField>> = ms
                .marks()
                .map(|m| -> Arc<dyn SpatialField> {
                    let locs: Vec<Point> = pattern
                        .points()
                        .iter()
                        .filter(|p| p.mark == m)
                        .map(|p| p.loc)
                        .collect();
                    let fit = KernelIntensity::fit(
                        &locs,
                        window,
                        0.05,
                        markpp::EdgeCorrection::Torus,
                        128,
                    )
                    .unwrap();
                    if loo {
                        Arc::new(LeaveOneOutKernel::new(fit))
                    } else {
                        Arc::new(fit)
                    }
                })
                .collect();
            let model = PerMarkIntensity::from_components(window, &ms, fields).unwrap();
            let cfg = SummaryConfig::new(RGrid::regular(0.1, 11).unwrap());
            let est = summarize(
                &pattern,
                &model,
                MarkSet::single(Mark(0)),
                MarkSet::single(Mark(1)),
                &cfg,
            )
            .unwrap();
            assert_ratio_identity(&est.rows, &format!("kernel model, leave_one_out={loo}"));
        }
    });
}

/// Exact central 95% interval of a binomial count: the largest `lo` with
/// `P(X < lo) <= 0.025` and the smallest `hi` with `P(X > hi) <= 0.025`.
fn binomial_central_95(n: usize, p: f64) -> (usize, usize) {
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_choose = 0.0f64;
    let mut pmf = vec![0.0f64; n + 1];
    for (k, slot) in pmf.iter_mut().enumerate() {
        if k > 0 {
            log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        *slot = (log_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
    }
    let mut lo = 0;
    let mut acc = 0.0;
    for (k, &q) in pmf.iter().enumerate() {
        acc += q;
        if acc > 0.025 {
            lo = k;
            break;
        }
    }
    let mut hi = n;
    let mut acc = 0.0;
    for (k, &q) in pmf.iter().enumerate().rev() {
        acc += q;
        if acc > 0.025 {
            hi = k;
            break;
        }
    }
    (lo, hi)
}

#[test]
fn criterion_07_test_size_calibration() {
    criterion(7, "monte carlo test size", || {
        let start = Instant::now();
        let window = unit();
        let ms = two_marks();
        let c_set = MarkSet::single(Mark(0));
        let d_set = MarkSet::single(Mark(1));
        // A single prespecified radius; sloped intensities keep the
        // statistic continuous, so rank ties have probability zero.
        let mut sc = SummaryConfig::new(RGrid::new(vec![0.05]).unwrap());
        sc.probe_per_side = 32;
        let trials = 400;
        let (lo, hi) = binomial_central_95(trials, 0.10);

        // Size of the relabelling test under its null: a Poisson ground
        // process labelled independently of location.
        let ground = Surface::Linear {
            c: 100.0,
            ax: 200.0,
            by: 0.0,
        };
        let mut rl_rejects = 0usize;
        for t in 0..trials as u64 {
            let sim = SimConfig {
                window,
                markspace: ms.clone(),
                seed: 70_000 + t,
            };
            let pattern = sim_marked(
                &sim,
                &MarkingRule::IndependentMarking {
                    ground: Arc::new(ground),
                    probs: vec![0.5, 0.5],
                },
            )
            .unwrap();
            let mut cfg = EnvelopeConfig::new(TestStatistic::J, sc.clone());
            cfg.seed = 80_000 + t;
            let env =
                test_random_labelling(&pattern, Arc::new(ground), c_set, d_set, &cfg).unwrap();
            assert_eq!(env.n_effective[0], 99, "undefined replicate in trial {t}");
            if env.rejects_at(0) {
                rl_rejects += 1;
            }
        }
        println!(
            "[acceptance]   relabelling test: {rl_rejects}/{trials} rejections, want [{lo}, {hi}]"
        );
        assert!(
            (lo..=hi).contains(&rl_rejects),
            "relabelling test rejected {rl_rejects} of {trials}, outside [{lo}, {hi}]"
        );

        // Size of the torus-translation test under its null: independent
        // inhomogeneous components.
        let s1 = Surface::Linear {
            c: 50.0,
            ax: 100.0,
            by: 0.0,
        };
        let s2 = Surface::Linear {
            c: 50.0,
            ax: 0.0,
            by: 100.0,
        };
        let mut ls_rejects = 0usize;
        for t in 0..trials as u64 {
            let sim = SimConfig {
                window,
                markspace: ms.clone(),
                seed: 90_000 + t,
            };
            let pattern = sim_marked(
                &sim,
                &MarkingRule::IndependentComponents(vec![Arc::new(s1), Arc::new(s2)]),
            )
            .unwrap();
            let model: Arc<dyn IntensityModel> = Arc::new(
                PerMarkIntensity::from_components(window, &ms, vec![Arc::new(s1), Arc::new(s2)])
                    .unwrap(),
            );
            let mut cfg = EnvelopeConfig::new(TestStatistic::J, sc.clone());
            cfg.seed = 100_000 + t;
            let env = test_independence_ls(&pattern, model, c_set, d_set, &cfg).unwrap();
            assert_eq!(env.n_effective[0], 99, "undefined replicate in trial {t}");
            if env.rejects_at(0) {
                ls_rejects += 1;
            }
        }
        println!(
            "[acceptance]   translation test: {ls_rejects}/{trials} rejections, want [{lo}, {hi}]"
        );
        assert!(
            (lo..=hi).contains(&ls_rejects),
            "translation test rejected {ls_rejects} of {trials}, outside [{lo}, {hi}]"
        );
        assert!(
            start.elapsed() < Duration::from_secs(1800),
            "calibration took {:?}, budget is 1800 s",
            start.elapsed()
        );
    });
}

#[test]
fn criterion_08_random_labelling_collapse() {
    criterion(8, "marked empty space collapses to ground", || {
        let window = unit();
        let labels = ["a", "b", "c"];
        let ground = Surface::Linear {
            c: 50.0,
            ax: 100.0,
            by: 0.0,
        };
        let sim = SimConfig {
            window,
            markspace: MarkSpace::counting(&labels).unwrap(),
            seed: 0xC8,
        };
        let drawn = sim_marked(
            &sim,
            &MarkingRule::IndependentMarking {
                ground: Arc::new(ground),
                probs: vec![0.5, 0.3, 0.2],
            },
        )
        .unwrap();
        // Reference measure = empirical mark distribution.
        let ms = MarkSpace::empirical(&labels, &drawn.mark_counts()).unwrap();
        let pattern = MarkedPattern::new(window, ms.clone(), drawn.points().to_vec()).unwrap();

        let cfg = SummaryConfig::new(RGrid::regular(0.12, 13).unwrap());
        let marked_model =
            PerMarkIntensity::factorized(window, labels.len(), Arc::new(ground)).unwrap();
        let est_marked = summarize(&pattern, &marked_model, ms.all(), ms.all(), &cfg).unwrap();

        let ground_pattern = pattern.ground();
        let ground_ms = ground_pattern.markspace().clone();
        let ground_model = PerMarkIntensity::factorized(window, 1, Arc::new(ground)).unwrap();
        let est_ground = summarize(
            &ground_pattern,
            &ground_model,
            ground_ms.all(),
            ground_ms.all(),
            &cfg,
        )
        .unwrap();

        assert_eq!(
            est_marked.lambda_bar.to_bits(),
            est_ground.lambda_bar.to_bits(),
            "lower bounds differ"
        );
        for (rm, rg) in est_marked.rows.iter().zip(est_ground.rows.iter()) {
            assert_eq!(rm.n_probe, rg.n_probe, "probe counts differ at r={}", rm.r);
            match (rm.f, rg.f) {
                (Some(x), Some(y)) => assert_eq!(
                    x.to_bits(),
                    y.to_bits(),
                    "F at r={} differs: marked {x} vs ground {y}",
                    rm.r
                ),
                (None, None) => {}
                (a, b) => panic!("F definedness differs at r={}: {a:?} vs {b:?}", rm.r),
            }
        }
    });
}

#[test]
fn criterion_09_scale_fit() {
    criterion(9, "global scale fit", || {
        let window = unit();
        let ms = MarkSpace::counting(&["a"]).unwrap();
        // Base model with expected count exactly 3120 on the unit window.
        let base = PerMarkIntensity::constant(window, &[3120.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
        let points: Vec<MarkedPoint> = (0..124)
            .map(|_| MarkedPoint {
                loc: Point::new(rng.random::<f64>(), rng.random::<f64>()),
                mark: Mark(0),
            })
            .collect();
        let pattern = MarkedPattern::new(window, ms, points).unwrap();
        let c = fit_scale(&base, &pattern, 64).unwrap();
        assert!(
            (c - 124.0 / 3120.0).abs() < 1e-12,
            "fitted scale {c} vs 124/3120"
        );
        assert_eq!(format!("{c:.4}"), "0.0397");
    });
}

#[test]
fn criterion_10_cli_determinism() {
    criterion(10, "cli byte determinism", || {
        let bin = env!("CARGO_BIN_EXE_markpp");
        let dir = tempfile::tempdir().unwrap();
        let config = r#"{
            "window": {"xmin": 0.0, "xmax": 1.0, "ymin": 0.0, "ymax": 1.0},
            "marks": {"labels": ["a", "b"]},
            "pattern": {"simulate": {"model": {"thomas-cross": {
                "kappa": 25.0, "mu": [4.0, 4.0], "tau": 0.03, "coupling": "shared"
            }}}},
            "intensity": {"kernel": {"sigma": 0.06, "edge": "torus", "resolution": 128}},
            "summary": {"r_values": [0.02, 0.05, 0.08], "probe_per_side": 32},
            "c_marks": ["a"],
            "d_marks": ["b"],
            "test": {"statistic": "j", "n_replicates": 19, "rank": 1},
            "seed": 5
        }"#;
        std::fs::write(dir.path().join("run.json"), config).unwrap();

        let run = |args: &[&str], threads: &str| {
            let out = Command::new(bin)
                .args(args)
                .env("RAYON_NUM_THREADS", threads)
                .current_dir(dir.path())
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "markpp {args:?} failed with {}:\n{}",
                out.status,
                String::from_utf8_lossy(&out.stderr)
            );
        };
        let bytes = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
        let assert_same = |a: &str, b: &str| {
            assert!(bytes(a) == bytes(b), "{a} and {b} differ");
        };

        run(&["simulate", "-c", "run.json", "--out", "pat1.csv"], "1");
        run(&["simulate", "-c", "run.json", "--out", "pat2.csv"], "4");
        assert_same("pat1.csv", "pat2.csv");

        run(
            &[
                "summary",
                "-c",
                "run.json",
                "--pattern",
                "pat1.csv",
                "--out",
                "sum1.csv",
            ],
            "1",
        );
        run(
            &[
                "summary",
                "-c",
                "run.json",
                "--pattern",
                "pat1.csv",
                "--out",
                "sum2.csv",
            ],
            "4",
        );
        assert_same("sum1.csv", "sum2.csv");

        let rl = |out: &str, meta: &str, threads: &str| {
            run(
                &[
                    "test-randomlabel",
                    "-c",
                    "run.json",
                    "--pattern",
                    "pat1.csv",
                    "--out",
                    out,
                    "--meta",
                    meta,
                ],
                threads,
            );
        };
        rl("env1.csv", "meta1.json", "2");
        rl("env2.csv", "meta2.json", "8");
        assert_same("env1.csv", "env2.csv");
        assert_same("meta1.json", "meta2.json");

        // The summary CSV must carry actual estimates, not just headers.
        let sum = String::from_utf8(bytes("sum1.csv")).unwrap();
        assert_eq!(sum.lines().count(), 4, "three radius rows expected:\n{sum}");
        assert!(dir.path().join("meta1.json").exists());
    });
}
