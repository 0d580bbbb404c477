//! Ontology axioms and their compilation into a closed constraint set.
//!
//! Input is a pair of TSV files: direct subsumptions (`child<TAB>parent`)
//! and direct disjointness axioms (`classA<TAB>classB`). The compiled
//! [`ConstraintSet`] holds the transitive closure of subsumption between
//! the selected labels and the disjointness axioms propagated down to all
//! subclasses of either side.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense index of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

impl ClassId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Direct axioms as read from the source files, with interned class names.
#[derive(Debug, Clone, Default)]
pub struct OntologyGraph {
    names: Vec<String>,
    index: HashMap<String, ClassId>,
    /// (child, parent)
    subsumptions: BTreeSet<(ClassId, ClassId)>,
    /// normalized so that `.0 < .1`
    disjointness: BTreeSet<(ClassId, ClassId)>,
    annotated: BTreeSet<ClassId>,
}

impl OntologyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn intern(&mut self, name: &str) -> ClassId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = ClassId(self.names.len());
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn add_subsumption(&mut self, child: &str, parent: &str) -> Result<()> {
        if child == parent {
            return Err(Error::SelfLoop(child.to_owned()));
        }
        let c = self.intern(child);
        let p = self.intern(parent);
        self.subsumptions.insert((c, p));
        Ok(())
    }

    pub fn add_disjointness(&mut self, a: &str, b: &str) -> Result<()> {
        if a == b {
            return Err(Error::InconsistentAxioms(vec![format!(
                "class `{a}` declared disjoint from itself"
            )]));
        }
        let a = self.intern(a);
        let b = self.intern(b);
        self.disjointness.insert((a.min(b), a.max(b)));
        Ok(())
    }

    /// Flags a class as instance-annotated. Unknown names are interned.
    pub fn mark_annotated(&mut self, name: &str) -> ClassId {
        let id = self.intern(name);
        self.annotated.insert(id);
        id
    }

    pub fn mark_all_annotated(&mut self) {
        self.annotated = (0..self.len()).map(ClassId).collect();
    }

    pub fn subsumptions(&self) -> &BTreeSet<(ClassId, ClassId)> {
        &self.subsumptions
    }

    pub fn disjointness(&self) -> &BTreeSet<(ClassId, ClassId)> {
        &self.disjointness
    }

    pub fn annotated(&self) -> &BTreeSet<ClassId> {
        &self.annotated
    }

    pub fn is_annotated(&self, id: ClassId) -> bool {
        self.annotated.contains(&id)
    }

    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let n = self.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(c, p) in &self.subsumptions {
            parents[c.0].push(p.0);
            children[p.0].push(c.0);
        }
        (parents, children)
    }

    /// Parses the two TSV formats from in-memory text. `source` names the
    /// origin in error messages.
    pub fn from_tsv(edges: &str, disjoint: Option<&str>, source: &Path) -> Result<Self> {
        let mut graph = OntologyGraph::new();
        graph.extend_from_tsv(edges, disjoint, source)?;
        Ok(graph)
    }

    /// Adds the axioms of both TSV texts to an existing graph. Classes that
    /// are already interned keep their ids.
    pub fn extend_from_tsv(
        &mut self,
        edges: &str,
        disjoint: Option<&str>,
        source: &Path,
    ) -> Result<()> {
        let graph = self;
        for (line_no, a, b) in tsv_pairs(edges, source)? {
            if a == b {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("self-loop subsumption edge on class `{a}`"),
                ));
            }
            graph.add_subsumption(a, b)?;
        }
        if let Some(text) = disjoint {
            for (line_no, a, b) in tsv_pairs(text, source)? {
                if a == b {
                    return Err(Error::parse(
                        source,
                        line_no,
                        format!("class `{a}` declared disjoint from itself"),
                    ));
                }
                graph.add_disjointness(a, b)?;
            }
        }
        Ok(())
    }
}

fn tsv_pairs<'a>(text: &'a str, source: &Path) -> Result<Vec<(usize, &'a str, &'a str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) if !a.trim().is_empty() && !b.trim().is_empty() => {
                out.push((i + 1, a.trim(), b.trim()))
            }
            _ => {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!("expected two tab-separated class names, got `{line}`"),
                ))
            }
        }
    }
    Ok(out)
}

/// Reads a subsumption edge list and an optional disjointness list.
pub fn parse_ontology(edges_file: &Path, disjoint_file: Option<&Path>) -> Result<OntologyGraph> {
    let mut graph = OntologyGraph::new();
    read_ontology_into(&mut graph, edges_file, disjoint_file)?;
    Ok(graph)
}

/// Interns class names from a file, one per line, in file order. Blank
/// lines and `#` comments are skipped.
pub fn load_class_list(graph: &mut OntologyGraph, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for line in text.lines() {
        let name = line.trim();
        if !name.is_empty() && !name.starts_with('#') {
            graph.intern(name);
        }
    }
    Ok(())
}

/// Like [`parse_ontology`] but adds to an existing graph.
pub fn read_ontology_into(
    graph: &mut OntologyGraph,
    edges_file: &Path,
    disjoint_file: Option<&Path>,
) -> Result<()> {
    let edges = fs::read_to_string(edges_file).map_err(|e| Error::io(edges_file, e))?;
    graph.extend_from_tsv(&edges, None, edges_file)?;
    if let Some(path) = disjoint_file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (line_no, a, b) in tsv_pairs(&text, path)? {
            if a == b {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("class `{a}` declared disjoint from itself"),
                ));
            }
            graph.add_disjointness(a, b)?;
        }
    }
    Ok(())
}

/// Reads a list of annotated class names, one per line, and flags them.
pub fn load_annotations(graph: &mut OntologyGraph, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for line in text.lines() {
        let name = line.trim();
        if name.is_empty() || name.starts_with('#') {
            continue;
        }
        graph.mark_annotated(name);
    }
    Ok(())
}

/// Topological order of the subsumption DAG, children before parents.
///
/// On failure the error carries one witness cycle, first node repeated at
/// the end.
pub fn check_acyclic(graph: &OntologyGraph) -> Result<Vec<ClassId>> {
    let n = graph.len();
    let (parents, children) = graph.adjacency();
    let mut pending_children: Vec<usize> = children.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| pending_children[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(ClassId(v));
        for &p in &parents[v] {
            pending_children[p] -= 1;
            if pending_children[p] == 0 {
                ready.insert(p);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    // Every unplaced node still has an unplaced child, so walking
    // child-wards from any of them must revisit a node.
    let stuck: Vec<bool> = pending_children.iter().map(|&c| c > 0).collect();
    let start = stuck
        .iter()
        .position(|&s| s)
        .expect("some node is unplaced");
    let mut seen_at = vec![usize::MAX; n];
    let mut walk = vec![start];
    seen_at[start] = 0;
    let mut v = start;
    loop {
        v = *children[v]
            .iter()
            .filter(|&&c| stuck[c])
            .min()
            .expect("unplaced node has an unplaced child");
        if seen_at[v] != usize::MAX {
            let mut cycle: Vec<usize> = walk[seen_at[v]..].to_vec();
            cycle.push(v);
            cycle.reverse();
            return Err(Error::Cycle(
                cycle.into_iter().map(|c| graph.names[c].clone()).collect(),
            ));
        }
        seen_at[v] = walk.len();
        walk.push(v);
    }
}

fn reach(start: usize, adjacency: &[Vec<usize>], include_self: bool) -> Vec<usize> {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut out = Vec::new();
    if include_self {
        out.push(start);
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                out.push(w);
                queue.push_back(w);
            }
        }
    }
    out
}

/// Classes with at least `min_annotated_subclasses` annotated descendants.
/// With `count_self` a class counts towards its own total.
pub fn select_labels(
    graph: &OntologyGraph,
    min_annotated_subclasses: usize,
    count_self: bool,
) -> BTreeSet<ClassId> {
    let (_, children) = graph.adjacency();
    (0..graph.len())
        .filter(|&v| {
            let count = reach(v, &children, count_self)
                .into_iter()
                .filter(|&d| graph.is_annotated(ClassId(d)))
                .count();
            count >= min_annotated_subclasses
        })
        .map(ClassId)
        .collect()
}

/// Closed implication and disjointness axioms over a dense label universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    names: Vec<String>,
    implications: Vec<(ClassId, ClassId)>,
    disjointness: Vec<(ClassId, ClassId)>,
}

impl ConstraintSet {
    /// Builds a set from raw pairs without checking closure. Pairs are
    /// deduplicated and sorted, disjointness pairs normalized.
    pub fn from_parts(
        names: Vec<String>,
        implications: impl IntoIterator<Item = (usize, usize)>,
        disjointness: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = names.len();
        let check = |a: usize, b: usize| -> Result<()> {
            if a >= n || b >= n {
                return Err(Error::Dimension {
                    context: "constraint pair",
                    expected: n,
                    actual: a.max(b) + 1,
                });
            }
            if a == b {
                return Err(Error::Invalid(format!(
                    "reflexive constraint pair on class {a}"
                )));
            }
            Ok(())
        };
        let mut imp = BTreeSet::new();
        for (a, b) in implications {
            check(a, b)?;
            imp.insert((ClassId(a), ClassId(b)));
        }
        let mut dis = BTreeSet::new();
        for (a, b) in disjointness {
            check(a, b)?;
            dis.insert((ClassId(a.min(b)), ClassId(a.max(b))));
        }
        Ok(ConstraintSet {
            names,
            implications: imp.into_iter().collect(),
            disjointness: dis.into_iter().collect(),
        })
    }

    pub fn empty(universe_size: usize) -> Self {
        ConstraintSet {
            names: (0..universe_size).map(|i| format!("c{i}")).collect(),
            implications: Vec::new(),
            disjointness: Vec::new(),
        }
    }

    pub fn universe_size(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Ordered pairs (A, B) meaning A ⊑ B, sorted.
    pub fn implications(&self) -> &[(ClassId, ClassId)] {
        &self.implications
    }

    /// Unordered pairs {C, D} stored with `C < D`, sorted.
    pub fn disjointness(&self) -> &[(ClassId, ClassId)] {
        &self.disjointness
    }

    /// Checks closure, irreflexivity, downward-closed disjointness and the
    /// absence of pairs that are both implied and disjoint.
    pub fn validate(&self) -> Result<()> {
        let imp: BTreeSet<_> = self.implications.iter().copied().collect();
        let dis: BTreeSet<_> = self.disjointness.iter().copied().collect();
        let mut problems = Vec::new();
        for &(a, b) in &imp {
            if a == b {
                problems.push(format!("reflexive implication {a}"));
            }
            for &(b2, c) in imp.range((b, ClassId(0))..=(b, ClassId(usize::MAX))) {
                debug_assert_eq!(b2, b);
                if a != c && !imp.contains(&(a, c)) {
                    problems.push(format!("implications not closed: {a}->{b}->{c}"));
                }
            }
            if dis.contains(&(a.min(b), a.max(b))) {
                problems.push(format!("{a} and {b} are both subsumed and disjoint"));
            }
        }
        for &(c, d) in &dis {
            for (x, y) in [(c, d), (d, c)] {
                for &(a, _) in self.implications.iter().filter(|&&(_, sup)| sup == x) {
                    if a != y && !dis.contains(&(a.min(y), a.max(y))) {
                        problems.push(format!("disjointness {x}|{y} not inherited by {a}"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InconsistentAxioms(problems))
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[classes]\n");
        for (i, name) in self.names.iter().enumerate() {
            out.push_str(&format!("{i}\t{name}\n"));
        }
        out.push_str("[implications]\n");
        for (a, b) in &self.implications {
            out.push_str(&format!("{a}\t{b}\n"));
        }
        out.push_str("[disjointness]\n");
        for (a, b) in &self.disjointness {
            out.push_str(&format!("{a}\t{b}\n"));
        }
        out
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Classes,
            Implications,
            Disjointness,
        }
        let mut section = Section::None;
        let mut names: Vec<String> = Vec::new();
        let mut imp = Vec::new();
        let mut dis = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.trim() {
                "[classes]" => section = Section::Classes,
                "[implications]" => section = Section::Implications,
                "[disjointness]" => section = Section::Disjointness,
                _ => {
                    let (a, b) = line.split_once('\t').ok_or_else(|| {
                        Error::parse(source, line_no, "expected two tab-separated fields")
                    })?;
                    let a: usize = a
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(source, line_no, "expected integer id"))?;
                    match section {
                        Section::Classes => {
                            if a != names.len() {
                                return Err(Error::parse(
                                    source,
                                    line_no,
                                    "class ids must be dense",
                                ));
                            }
                            names.push(b.to_owned());
                        }
                        Section::Implications | Section::Disjointness => {
                            let b: usize = b.trim().parse().map_err(|_| {
                                Error::parse(source, line_no, "expected integer id")
                            })?;
                            if section == Section::Implications {
                                imp.push((a, b));
                            } else {
                                dis.push((a, b));
                            }
                        }
                        Section::None => {
                            return Err(Error::parse(source, line_no, "row outside of any section"))
                        }
                    }
                }
            }
        }
        Self::from_parts(names, imp, dis)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Compiles the closed constraint set for `labels`.
///
/// Implications are the transitive closure of subsumption restricted to
/// label pairs; closure paths may pass through non-label classes. Every
/// direct disjointness axiom {C, D} is propagated to all pairs {A, B} with
/// A ⊑* C and B ⊑* D. A class below both sides of a disjointness axiom is
/// reported as [`Error::InconsistentAxioms`].
pub fn compile_constraints(
    graph: &OntologyGraph,
    labels: &BTreeSet<ClassId>,
) -> Result<ConstraintSet> {
    check_acyclic(graph)?;
    let n = graph.len();
    let (parents, children) = graph.adjacency();

    let mut dense = vec![None; n];
    let mut names = Vec::with_capacity(labels.len());
    for (new, &old) in labels.iter().enumerate() {
        if old.0 >= n {
            return Err(Error::Dimension {
                context: "label set",
                expected: n,
                actual: old.0 + 1,
            });
        }
        dense[old.0] = Some(new);
        names.push(graph.name(old).to_owned());
    }

    let mut implications = Vec::new();
    for &a in labels {
        let na = dense[a.0].expect("label is mapped");
        for b in reach(a.0, &parents, false) {
            if let Some(nb) = dense[b] {
                implications.push((na, nb));
            }
        }
    }

    let mut conflicts = Vec::new();
    let mut disjointness = Vec::new();
    for &(c, d) in graph.disjointness() {
        let below_c = reach(c.0, &children, true);
        let below_d = reach(d.0, &children, true);
        let in_d: BTreeSet<usize> = below_d.iter().copied().collect();
        for &x in below_c.iter().filter(|x| in_d.contains(x)) {
            conflicts.push(format!(
                "`{}` is subsumed by both `{}` and `{}`, which are declared disjoint",
                graph.names[x],
                graph.name(c),
                graph.name(d)
            ));
        }
        for &a in &below_c {
            let Some(na) = dense[a] else { continue };
            for &b in &below_d {
                if let Some(nb) = dense[b] {
                    disjointness.push((na, nb));
                }
            }
        }
    }
    if !conflicts.is_empty() {
        conflicts.sort();
        conflicts.dedup();
        return Err(Error::InconsistentAxioms(conflicts));
    }
    ConstraintSet::from_parts(names, implications, disjointness)
}
