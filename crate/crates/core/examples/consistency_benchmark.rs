//! Baseline vs. fuzzy-loss training on the 50-class synthetic benchmark.
//!
//! ```text
//! cargo run --release --example consistency_benchmark -- [seeds]
//! ```

use std::time::Instant;

use ontoloss::benchmark::{self, Benchmark, DEFAULT_SPLIT};
use ontoloss::losses::{LossVariant, TNormKind};

fn main() -> ontoloss::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);

    let mut lukasiewicz = benchmark::desk_product();
    lukasiewicz.tnorm = TNormKind::Lukasiewicz;
    let mut xu = benchmark::desk_product();
    xu.variant = LossVariant::XuSemantic;
    let variants = [
        ("baseline", benchmark::desk_baseline()),
        ("product", benchmark::desk_product()),
        ("balanced k=2", benchmark::desk_balanced()),
        ("lukasiewicz", lukasiewicz),
        ("xu", xu),
    ];

    println!(
        "{:<14} {:>4} {:>9} {:>8} {:>8} {:>9} {:>6}",
        "variant", "seed", "fnr_impl", "fn_impl", "fn_disj", "micro_f1", "secs"
    );
    for seed in 0..seeds {
        let bench = Benchmark::new(&benchmark::desk_spec(seed), DEFAULT_SPLIT)?;
        for (name, loss) in &variants {
            let start = Instant::now();
            let out = bench.fit(&benchmark::desk_train_config(seed, loss.clone()), None)?;
            let report = bench.score(&out.best, &bench.test, 0.5)?;
            println!(
                "{:<14} {:>4} {:>9.4} {:>8} {:>8} {:>9.4} {:>6.1}",
                name,
                seed,
                report.fnr_impl.unwrap_or(f64::NAN),
                report.fn_impl,
                report.fn_disj,
                report.micro_f1.unwrap_or(f64::NAN),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
