//! Tabulates the implication loss of every variant on a grid of
//! (ŷ_A, ŷ_B) values as CSV, ready for plotting.
//!
//! ```text
//! cargo run --example loss_landscape > landscape.csv
//! ```

use ontoloss::losses::{implication_loss, LossConfig, LossVariant, TNormKind};

fn main() -> ontoloss::Result<()> {
    let balanced = LossVariant::FuzzyBalanced {
        k: 2.0,
        epsilon: 0.01,
    };
    let variants = [
        (
            "product",
            LossConfig::new(TNormKind::Product, LossVariant::FuzzyStandard),
        ),
        (
            "lukasiewicz",
            LossConfig::new(TNormKind::Lukasiewicz, LossVariant::FuzzyStandard),
        ),
        (
            "balanced_product",
            LossConfig::new(TNormKind::Product, balanced),
        ),
        (
            "balanced_lukasiewicz",
            LossConfig::new(TNormKind::Lukasiewicz, balanced),
        ),
        (
            "xu",
            LossConfig::new(TNormKind::Product, LossVariant::XuSemantic),
        ),
    ];

    let header: Vec<&str> = variants.iter().map(|(name, _)| *name).collect();
    println!("y_a,y_b,{}", header.join(","));
    let steps = 20;
    for i in 0..=steps {
        for j in 0..=steps {
            let (a, b) = (
                f64::from(i) / f64::from(steps),
                f64::from(j) / f64::from(steps),
            );
            let values = variants
                .iter()
                .map(|(_, cfg)| implication_loss(cfg, a, b).map(|l| format!("{l:.6}")))
                .collect::<ontoloss::Result<Vec<_>>>()?;
            println!("{a},{b},{}", values.join(","));
        }
    }
    Ok(())
}
