//! Compile a small hand-written ontology into its closed constraint set.

use std::collections::BTreeSet;
use std::path::Path;

use ontoloss::ontology::{compile_constraints, select_labels, OntologyGraph};

const EDGES: &str = "\
# child\tparent
carboxylic acid\torganic acid
organic acid\tacid
amino acid\tcarboxylic acid
inorganic acid\tacid
sulfuric acid\tinorganic acid
alkane\thydrocarbon
methane\talkane
";

const DISJOINT: &str = "organic acid\tinorganic acid\nacid\thydrocarbon\n";

fn main() -> ontoloss::Result<()> {
    let mut graph = OntologyGraph::from_tsv(EDGES, Some(DISJOINT), Path::new("inline"))?;
    graph.mark_all_annotated();

    let everything: BTreeSet<_> = (0..graph.len()).map(ontoloss::ClassId).collect();
    let all = compile_constraints(&graph, &everything)?;
    println!(
        "all classes: {} implications, {} disjointness pairs",
        all.implications().len(),
        all.disjointness().len()
    );

    // Keep only classes with at least two annotated subclasses (self included).
    let labels = select_labels(&graph, 2, true);
    let pruned = compile_constraints(&graph, &labels)?;
    println!(
        "labels with >= 2 annotated subclasses: {:?}\n",
        pruned.names()
    );
    print!("{}", pruned.to_text());
    Ok(())
}
