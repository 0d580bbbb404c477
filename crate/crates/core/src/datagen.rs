//! Synthetic ontologies with constraint-consistent datasets, Tanimoto
//! similarity over bit-vector fingerprints, diversity subsampling and
//! seeded splits.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::LabelVector;
use crate::ontology::{ClassId, OntologyGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    /// Probability of a direct edge from a class to each earlier class.
    pub dag_density: f64,
    pub n_disjoint_axioms: usize,
    pub n_samples: usize,
    pub feature_dim: usize,
    /// Per-bit flip probability applied after closure.
    pub label_noise: f64,
    pub seed: u64,
    /// Standard deviation of the isotropic feature noise.
    pub feature_noise: f64,
    /// Probability that a sample is assigned a second class.
    pub second_class_prob: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 50,
            dag_density: 0.08,
            n_disjoint_axioms: 8,
            n_samples: 5000,
            feature_dim: 64,
            label_noise: 0.0,
            seed: 0,
            feature_noise: 1.0,
            second_class_prob: 0.25,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.feature_dim == 0 {
            return Err(Error::Invalid(
                "n_classes and feature_dim must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.dag_density) {
            return Err(Error::Invalid(format!(
                "dag_density {} outside [0, 1]",
                self.dag_density
            )));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::Invalid(format!(
                "label_noise {} outside [0, 1)",
                self.label_noise
            )));
        }
        if !(0.0..=1.0).contains(&self.second_class_prob) || self.feature_noise < 0.0 {
            return Err(Error::Invalid(
                "invalid second_class_prob or feature_noise".into(),
            ));
        }
        Ok(())
    }
}

/// Everything needed to draw further samples from a generated task.
#[derive(Debug, Clone)]
pub struct SampleGenerator {
    /// Ancestors-or-self per class.
    closure: Vec<Vec<usize>>,
    prototypes: Vec<Vec<f64>>,
    disjoint: Vec<(usize, usize)>,
    feature_noise: f64,
    second_class_prob: f64,
    label_noise: f64,
}

impl SampleGenerator {
    pub fn n_classes(&self) -> usize {
        self.prototypes.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.prototypes.first().map_or(0, Vec::len)
    }

    fn conflicts(&self, a: usize, b: usize) -> bool {
        let up_a = &self.closure[a];
        let up_b = &self.closure[b];
        self.disjoint.iter().any(|&(c, d)| {
            (up_a.contains(&c) && up_b.contains(&d)) || (up_a.contains(&d) && up_b.contains(&c))
        })
    }

    fn assign(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.n_classes();
        let first = rng.random_range(0..n);
        let mut assigned = vec![first];
        if rng.random::<f64>() < self.second_class_prob {
            let second = rng.random_range(0..n);
            if second != first && !self.conflicts(first, second) {
                assigned.push(second);
            }
        }
        assigned
    }

    fn closed_labels(&self, assigned: &[usize]) -> Vec<bool> {
        let mut y = vec![false; self.n_classes()];
        for &a in assigned {
            for &c in &self.closure[a] {
                y[c] = true;
            }
        }
        y
    }

    /// Features for the assigned classes, with each prototype displaced by
    /// `shift` times a class-specific direction.
    fn features(&self, assigned: &[usize], shift: &Shift, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.feature_dim();
        let mut x = vec![0.0; d];
        for &a in assigned {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += self.prototypes[a][j];
                if let Some(dirs) = &shift.directions {
                    *xj += shift.magnitude * dirs[a][j];
                }
            }
        }
        for xj in x.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *xj += self.feature_noise * z;
        }
        x
    }

    /// Draws `n` samples. Labels respect the closure and the disjointness
    /// axioms before label noise is applied.
    pub fn sample(&self, n: usize, labelled: bool, shift: &Shift, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset::new(self.feature_dim(), self.n_classes());
        for _ in 0..n {
            let assigned = self.assign(&mut rng);
            let mut y = self.closed_labels(&assigned);
            let x = self.features(&assigned, shift, &mut rng);
            if self.label_noise > 0.0 {
                for bit in y.iter_mut() {
                    if rng.random::<f64>() < self.label_noise {
                        *bit = !*bit;
                    }
                }
            }
            let labels = if labelled {
                LabelVector::labelled(y)
            } else {
                LabelVector::unlabelled(self.n_classes())
            };
            ds.push(x, labels).expect("generator shapes are consistent");
        }
        ds
    }

    /// A distribution shift: each class prototype moves by `magnitude`
    /// along its own random unit-variance direction.
    pub fn shift(&self, magnitude: f64, seed: u64) -> Shift {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.feature_dim();
        let directions = (0..self.n_classes())
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Shift {
            magnitude,
            directions: Some(directions),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Shift {
    magnitude: f64,
    directions: Option<Vec<Vec<f64>>>,
}

impl Shift {
    pub fn none() -> Self {
        Shift::default()
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub graph: OntologyGraph,
    pub dataset: Dataset,
    pub generator: SampleGenerator,
}

fn class_name(i: usize) -> String {
    format!("c{i:03}")
}

/// Generates a random ontology and a labelled dataset over it.
///
/// Subsumption edges only point from a class to an earlier one, so the
/// graph is a DAG. Each sample is assigned one class (occasionally two)
/// and labelled with the upward closure of its assignment; features are
/// the sum of the assigned classes' prototypes plus Gaussian noise.
/// Disjointness axioms are drawn from class pairs that share no
/// descendant and are never jointly positive in the generated labels.
pub fn generate(spec: &SyntheticSpec) -> Result<Synthetic> {
    spec.validate()?;
    let n = spec.n_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut graph = OntologyGraph::new();
    for i in 0..n {
        graph.intern(&class_name(i));
    }
    let mut parents = vec![Vec::new(); n];
    for (i, ps) in parents.iter_mut().enumerate() {
        for j in 0..i {
            if rng.random::<f64>() < spec.dag_density {
                ps.push(j);
                graph.add_subsumption(&class_name(i), &class_name(j))?;
            }
        }
    }
    // parents have lower indices, so one forward pass closes everything
    let mut closure: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut up: BTreeSet<usize> = BTreeSet::from([i]);
        for &p in &parents[i] {
            up.extend(closure[p].iter().copied());
        }
        closure.push(up.into_iter().collect());
    }

    let prototypes: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..spec.feature_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();

    let mut generator = SampleGenerator {
        closure,
        prototypes,
        disjoint: Vec::new(),
        feature_noise: spec.feature_noise,
        second_class_prob: spec.second_class_prob,
        label_noise: 0.0,
    };

    let data_seed: u64 = rng.random();
    let clean = generator.sample(spec.n_samples, true, &Shift::none(), data_seed);

    // eligible disjoint pairs: no shared descendant, never co-positive
    let mut shares_descendant = vec![vec![false; n]; n];
    for up in &generator.closure {
        for &a in up {
            for &b in up {
                shares_descendant[a][b] = true;
            }
        }
    }
    let mut co_positive = vec![vec![false; n]; n];
    for y in &clean.labels {
        let pos: Vec<usize> = (0..n).filter(|&c| y.values[c]).collect();
        for &a in &pos {
            for &b in &pos {
                co_positive[a][b] = true;
            }
        }
    }
    let mut eligible: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !shares_descendant[a][b] && !co_positive[a][b])
        .collect();
    if eligible.len() < spec.n_disjoint_axioms {
        return Err(Error::Invalid(format!(
            "infeasible spec: {} disjointness axioms requested but only {} eligible pairs",
            spec.n_disjoint_axioms,
            eligible.len()
        )));
    }
    eligible.shuffle(&mut rng);
    eligible.truncate(spec.n_disjoint_axioms);
    eligible.sort_unstable();
    for &(a, b) in &eligible {
        graph.add_disjointness(&class_name(a), &class_name(b))?;
    }
    generator.disjoint = eligible;

    let mut dataset = clean;
    if spec.label_noise > 0.0 {
        for y in dataset.labels.iter_mut() {
            for bit in y.values.iter_mut() {
                if rng.random::<f64>() < spec.label_noise {
                    *bit = !*bit;
                }
            }
        }
    }
    generator.label_noise = spec.label_noise;
    graph.mark_all_annotated();

    Ok(Synthetic {
        graph,
        dataset,
        generator,
    })
}

/// Writes `classes.txt` (dataset column order), `edges.tsv`,
/// `disjoint.tsv` and `data.tsv` into `dir`.
pub fn write_synthetic(dir: &Path, graph: &OntologyGraph, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut edges = String::new();
    for &(c, p) in graph.subsumptions() {
        edges.push_str(&format!("{}\t{}\n", graph.name(c), graph.name(p)));
    }
    let mut disjoint = String::new();
    for &(a, b) in graph.disjointness() {
        disjoint.push_str(&format!("{}\t{}\n", graph.name(a), graph.name(b)));
    }
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    let mut classes = String::new();
    for name in graph.names() {
        classes.push_str(name);
        classes.push('\n');
    }
    write("classes.txt", &classes)?;
    write("edges.tsv", &edges)?;
    write("disjoint.tsv", &disjoint)?;
    dataset.save(&dir.join("data.tsv"))
}

/// Fixed-length bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    len: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn zeros(len: usize) -> Self {
        Fingerprint {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// From a string of `0`/`1` characters, first character is bit 0.
    pub fn from_bit_str(bits: &str) -> Result<Self> {
        let mut fp = Fingerprint::zeros(bits.len());
        for (i, ch) in bits.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => fp.set(i, true),
                _ => return Err(Error::Invalid(format!("invalid bit character `{ch}`"))),
            }
        }
        Ok(fp)
    }

    /// Hex with bit 0 as the most significant bit of the first digit.
    /// The length is padded up to a multiple of four.
    pub fn to_hex(&self) -> String {
        (0..self.len.div_ceil(4))
            .map(|d| {
                let nibble = (0..4).fold(0u32, |acc, k| {
                    let i = 4 * d + k;
                    (acc << 1) | u32::from(i < self.len && self.get(i))
                });
                char::from_digit(nibble, 16).expect("nibble < 16")
            })
            .collect()
    }

    pub fn from_hex(hex: &str) -> Result<Self> {
        let hex = hex.trim();
        let mut fp = Fingerprint::zeros(hex.len() * 4);
        for (d, ch) in hex.chars().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::Invalid(format!("invalid hex digit `{ch}`")))?;
            for k in 0..4 {
                if nibble >> (3 - k) & 1 == 1 {
                    fp.set(4 * d + k, true);
                }
            }
        }
        Ok(fp)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn load_fingerprints(path: &Path) -> Result<Vec<Fingerprint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fp =
            Fingerprint::from_hex(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if let Some(first) = out.first() {
            let first: &Fingerprint = first;
            if first.len() != fp.len() {
                return Err(Error::parse(
                    path,
                    i + 1,
                    "fingerprint length differs from first row",
                ));
            }
        }
        out.push(fp);
    }
    Ok(out)
}

pub fn save_fingerprints(path: &Path, pool: &[Fingerprint]) -> Result<()> {
    let text: String = pool.iter().map(|fp| fp.to_hex() + "\n").collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// |a ∧ b| / |a ∨ b|, 0 when both are all-zero.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.len != b.len {
        return Err(Error::Dimension {
            context: "fingerprint length",
            expected: a.len,
            actual: b.len,
        });
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 {
        0.0
    } else {
        f64::from(inter) / f64::from(union)
    })
}

/// Shuffles the pool, cuts it into groups and keeps, per group, the items
/// with the lowest summed Tanimoto similarity to the rest of their group.
/// A trailing partial group keeps `floor(keep · len / group_size)` items.
/// Returned indices refer to `pool` and are sorted.
pub fn diversity_subsample(
    pool: &[Fingerprint],
    group_size: usize,
    keep_per_group: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::Invalid("empty fingerprint pool".into()));
    }
    if group_size == 0 || keep_per_group > group_size {
        return Err(Error::Invalid(format!(
            "need 0 < keep_per_group ({keep_per_group}) <= group_size ({group_size})"
        )));
    }
    let len = pool[0].len();
    if let Some(bad) = pool.iter().find(|fp| fp.len() != len) {
        return Err(Error::Dimension {
            context: "fingerprint length",
            expected: len,
            actual: bad.len(),
        });
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut selected = Vec::new();
    for group in order.chunks(group_size) {
        let keep = if group.len() == group_size {
            keep_per_group
        } else {
            keep_per_group * group.len() / group_size
        };
        let mut scores = vec![0.0; group.len()];
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                let s = tanimoto(&pool[group[i]], &pool[group[j]])?;
                scores[i] += s;
                scores[j] += s;
            }
        }
        let mut ranked: Vec<(f64, usize)> = scores.into_iter().zip(group.iter().copied()).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        selected.extend(ranked.into_iter().take(keep).map(|(_, g)| g));
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Clustered random fingerprints: per-cluster template bits, each copy
/// flipping every bit with probability `flip_prob`.
pub fn clustered_fingerprints(
    n_clusters: usize,
    per_cluster: usize,
    len: usize,
    flip_prob: f64,
    seed: u64,
) -> Vec<Fingerprint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates: Vec<Fingerprint> = (0..n_clusters)
        .map(|_| {
            let mut fp = Fingerprint::zeros(len);
            for i in 0..len {
                fp.set(i, rng.random::<bool>());
            }
            fp
        })
        .collect();
    let mut pool = Vec::with_capacity(n_clusters * per_cluster);
    for t in &templates {
        for _ in 0..per_cluster {
            let mut fp = t.clone();
            for i in 0..len {
                if rng.random::<f64>() < flip_prob {
                    fp.set(i, !fp.get(i));
                }
            }
            pool.push(fp);
        }
    }
    pool.shuffle(&mut rng);
    pool
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle followed by a contiguous partition. Validation and test
/// sizes are floored; the remainder goes to training.
pub fn split(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (rt, rv, rs) = ratios;
    if [rt, rv, rs].iter().any(|r| !(r.is_finite() && *r >= 0.0)) || rt + rv + rs <= 0.0 {
        return Err(Error::Invalid(format!("invalid split ratios {ratios:?}")));
    }
    let total = rt + rv + rs;
    let n_val = (n as f64 * rv / total).floor() as usize;
    let n_test = (n as f64 * rs / total).floor() as usize;
    let n_train = n - n_val - n_test;
    for (name, size, ratio) in [
        ("train", n_train, rt),
        ("val", n_val, rv),
        ("test", n_test, rs),
    ] {
        if ratio > 0.0 && size == 0 {
            return Err(Error::Invalid(format!(
                "{name} split is empty for {n} rows at ratios {ratios:?}"
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Split {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// Class ids of `graph` in dataset column order.
pub fn column_classes(graph: &OntologyGraph) -> Vec<ClassId> {
    (0..graph.len()).map(ClassId).collect()
}
