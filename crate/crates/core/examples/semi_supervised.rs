//! Out-of-distribution consistency with and without unlabelled data.
//!
//! Trains the product-loss model on the labelled benchmark split, then again
//! with 5,000 extra unlabelled rows drawn from shifted class clusters. Both
//! models are scored on labelled rows from the same shifted distribution.
//!
//! ```text
//! cargo run --release --example semi_supervised -- [seed] [shift]
//! ```

use ontoloss::benchmark::{self, Benchmark, DEFAULT_SPLIT, DESK_SHIFT};
use ontoloss::TrainConfig;

fn main() -> ontoloss::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let magnitude: f64 = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DESK_SHIFT);

    let bench = Benchmark::new(&benchmark::desk_spec(seed), DEFAULT_SPLIT)?;
    let shift = bench.synthetic.generator.shift(magnitude, 1000 + seed);
    let unlabelled = bench.shifted_rows(5000, false, &shift, 2000 + seed);
    let ood = bench.shifted_rows(1000, true, &shift, 3000 + seed);

    let supervised = benchmark::desk_train_config(seed, benchmark::desk_product());
    let mixed = TrainConfig {
        semi_supervised: true,
        ..supervised.clone()
    };

    for (name, tc, extra) in [
        ("supervised", &supervised, None),
        ("semi-supervised", &mixed, Some(&unlabelled)),
    ] {
        let model = bench.fit(tc, extra)?.best;
        let in_dist = bench.score(&model, &bench.test, 0.5)?;
        let shifted = bench.score(&model, &ood, 0.5)?;
        println!(
            "{name:<16} test fnr_impl {:.4} micro-F1 {:.4} | shifted fnr_impl {:.4} micro-F1 {:.4}",
            in_dist.fnr_impl.unwrap_or(f64::NAN),
            in_dist.micro_f1.unwrap_or(f64::NAN),
            shifted.fnr_impl.unwrap_or(f64::NAN),
            shifted.micro_f1.unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
