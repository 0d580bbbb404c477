//! Scores a handful of predictions for consistency and accuracy.

use ontoloss::metrics::{count_violations, fnr, Family, MetricsReport};
use ontoloss::ConstraintSet;

fn main() -> ontoloss::Result<()> {
    // cat ⊑ mammal, dog ⊑ mammal, cat ⊥ dog
    let names = ["cat", "dog", "mammal"].map(String::from).to_vec();
    let cs = ConstraintSet::from_parts(names, [(0, 2), (1, 2)], [(0, 1)])?;

    let preds = vec![
        vec![0.9, 0.1, 0.8], // consistent
        vec![0.7, 0.2, 0.3], // cat without mammal
        vec![0.6, 0.9, 0.9], // cat and dog
        vec![0.2, 0.1, 0.4], // nothing active
    ];
    let labels = vec![
        Some(vec![true, false, true]),
        Some(vec![true, false, true]),
        Some(vec![false, true, true]),
        None,
    ];

    let counts = count_violations(&cs, &preds, 0.5)?;
    println!("{counts:?}");
    println!(
        "FNR implication {:?}, disjointness {:?}",
        fnr(&counts, Family::Implication),
        fnr(&counts, Family::Disjointness)
    );

    let report = MetricsReport::compute(&cs, &preds, &labels, 0.5, None)?;
    println!("\n{report}\n{}", report.to_json_line());
    Ok(())
}
