//! End-to-end tour: simulate a two-mark pattern, estimate the cross
//! summary statistics under the true intensity, then test the random
//! labelling hypothesis (which this pattern violates by construction,
//! since the two components have different spatial trends).
//!
//! Run with `cargo run --release -p markpp --example quickstart`.

use std::sync::Arc;

use markpp::{
    sim_marked, summarize, test_random_labelling, EnvelopeConfig, MarkSpace, MarkingRule,
    PerMarkIntensity, RGrid, SimConfig, SummaryConfig, Surface, TestStatistic, Window,
};

fn main() -> markpp::Result<()> {
    // Unit window, two labels, counting reference measure (weight 1 each).
    let window = Window::new(0.0, 1.0, 0.0, 1.0)?;
    let markspace = MarkSpace::counting(&["oak", "birch"])?;

    // Two independent Poisson components: oaks pile up in the east,
    // birches in the west, so the labels are strongly tied to location.
    let oak = Surface::Linear {
        c: 5.0,
        ax: 190.0,
        by: 0.0,
    };
    let birch = Surface::Linear {
        c: 195.0,
        ax: -190.0,
        by: 0.0,
    };
    let fields: Vec<Arc<dyn markpp::SpatialField>> = vec![Arc::new(oak), Arc::new(birch)];

    let pattern = sim_marked(
        &SimConfig {
            window,
            markspace: markspace.clone(),
            seed: 7,
        },
        &MarkingRule::IndependentComponents(fields.clone()),
    )?;
    println!("simulated {} points", pattern.len());

    // The generating model doubles as the known intensity. Swap in
    // `KernelIntensity::fit` per mark when the truth is unknown.
    let model = PerMarkIntensity::from_components(window, &markspace, fields)?;

    // Cross statistics from oak references to birch targets.
    let c_set = markspace.set_of(&["oak"])?;
    let d_set = markspace.set_of(&["birch"])?;
    let cfg = SummaryConfig::new(RGrid::regular(0.08, 9)?);
    let est = summarize(&pattern, &model, c_set, d_set, &cfg)?;

    println!("lambda_bar = {:.3}", est.lambda_bar);
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "r", "F", "D", "J", "K");
    for row in &est.rows {
        let cell = |v: Option<f64>| match v {
            Some(x) => format!("{x:9.4}"),
            None => format!("{:>9}", "-"),
        };
        println!(
            "{:6.3} {} {} {} {}",
            row.r,
            cell(row.f),
            cell(row.d),
            cell(row.j),
            cell(row.k)
        );
    }

    // Random labelling test: under this null the marks are independent of
    // geometry given the ground pattern. The ground intensity is the exact
    // sum of the two components, here a flat 200.
    let ground = Surface::Constant(200.0);
    let mut env_cfg = EnvelopeConfig::new(
        TestStatistic::J,
        SummaryConfig::new(RGrid::new(vec![0.02, 0.04, 0.06])?),
    );
    env_cfg.seed = 99;
    let envelope = test_random_labelling(&pattern, Arc::new(ground), c_set, d_set, &env_cfg)?;
    let rejected: Vec<f64> = (0..envelope.rs.len())
        .filter(|&i| envelope.rejects_at(i))
        .map(|i| envelope.rs[i])
        .collect();
    println!(
        "random labelling test at level {:.2}: {}",
        envelope.nominal_level(),
        if rejected.is_empty() {
            "no rejection".to_string()
        } else {
            format!("rejected at r = {rejected:?}")
        }
    );
    Ok(())
}
