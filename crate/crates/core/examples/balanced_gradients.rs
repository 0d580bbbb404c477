//! Where does a violated implication push? The plain product loss pulls the
//! subclass score down as hard as it pushes the superclass up; the balanced
//! loss shifts the effort towards raising the superclass.

use ontoloss::losses::{combined_loss_grad, LabelVector, LossConfig, LossVariant, TNormKind};
use ontoloss::ConstraintSet;

fn main() -> ontoloss::Result<()> {
    let cs = ConstraintSet::from_parts(vec!["sub".into(), "super".into()], [(0, 1)], [])?;
    let unlabelled = LabelVector::unlabelled(2);

    println!(
        "{:<22} {:>11} {:>9} {:>9} {:>8}",
        "loss", "(ŷ_A, ŷ_B)", "dL/dŷ_A", "dL/dŷ_B", "ratio"
    );
    for (name, variant) in [
        ("product", LossVariant::FuzzyStandard),
        (
            "balanced k=2 ε=0.01",
            LossVariant::FuzzyBalanced {
                k: 2.0,
                epsilon: 0.01,
            },
        ),
        (
            "balanced k=4 ε=0.01",
            LossVariant::FuzzyBalanced {
                k: 4.0,
                epsilon: 0.01,
            },
        ),
        (
            "balanced k=2 ε=0",
            LossVariant::FuzzyBalanced {
                k: 2.0,
                epsilon: 0.0,
            },
        ),
    ] {
        let cfg = LossConfig::new(TNormKind::Product, variant).with_weights(1.0, 1.0);
        for point in [[0.9, 0.1], [0.6, 0.4], [1.0, 0.0]] {
            let g = combined_loss_grad(&cfg, &cs, &unlabelled, &point)?;
            println!(
                "{name:<22} ({:.1}, {:.1}) {:>13.4} {:>9.4} {:>8.2}",
                point[0],
                point[1],
                g[0],
                g[1],
                (g[1] / g[0]).abs()
            );
        }
    }
    Ok(())
}
