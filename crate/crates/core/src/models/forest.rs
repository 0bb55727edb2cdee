//! Random forest of Gini-split decision trees. Tree `t` draws its bootstrap
//! sample and feature subsets from a rng seeded with `seed + t`, so the whole
//! forest is reproducible from one seed and trees stay independent of each
//! other's draw order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax_tie_low, keyed_line, parse_field, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSubsample {
    /// Consider floor(sqrt(p)) features per split, at least one.
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub features: FeatureSubsample,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 200, max_depth: 6, min_samples_leaf: 3, features: FeatureSubsample::Sqrt }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// The bootstrap draw this tree was grown on: one sample id per draw,
    /// with repeats, always as many as the fit set had samples.
    pub bootstrap: Vec<u64>,
}

impl Tree {
    pub fn predict(&self, features: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    at = if features[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub n_features: usize,
    n_classes: usize,
    pub trees: Vec<Tree>,
    /// Sample ids the fit saw, verbatim.
    pub fit_ids: Vec<u64>,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &i in indices {
            counts[self.y[i]] += 1;
        }
        counts
    }

    fn candidate_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let p = self.x[0].len();
        let m = match self.params.features {
            FeatureSubsample::All => p,
            FeatureSubsample::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
        };
        if m >= p {
            return (0..p).collect();
        }
        let mut all: Vec<usize> = (0..p).collect();
        all.shuffle(rng);
        all.truncate(m);
        all.sort_unstable();
        all
    }

    /// Lowest weighted-Gini split over the candidate features, or None when
    /// no boundary leaves both children with `min_samples_leaf` samples.
    /// Strict comparison keeps the first of equally good splits, so ties go
    /// to the lowest feature index and then the lowest threshold.
    fn best_split(&self, indices: &[usize], features: &[usize]) -> Option<(usize, f64)> {
        let n = indices.len();
        let min_leaf = self.params.min_samples_leaf;
        let total = self.class_counts(indices);
        let mut best: Option<(f64, usize, f64)> = None;
        for &feature in features {
            let mut ordered: Vec<(f64, usize)> =
                indices.iter().map(|&i| (self.x[i][feature], self.y[i])).collect();
            ordered.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left = vec![0usize; self.n_classes];
            for i in 0..n - 1 {
                left[ordered[i].1] += 1;
                if ordered[i + 1].0 <= ordered[i].0 {
                    continue;
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let gini = |counts: &dyn Fn(usize) -> usize, size: usize| {
                    let mut sum_sq = 0.0;
                    for c in 0..self.n_classes {
                        let v = counts(c) as f64;
                        sum_sq += v * v;
                    }
                    1.0 - sum_sq / (size as f64 * size as f64)
                };
                let g_left = gini(&|c| left[c], n_left);
                let g_right = gini(&|c| total[c] - left[c], n_right);
                let weighted = (n_left as f64 * g_left + n_right as f64 * g_right) / n as f64;
                if best.map_or(true, |(score, _, _)| weighted < score) {
                    let threshold = (ordered[i].0 + ordered[i + 1].0) / 2.0;
                    best = Some((weighted, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }

    fn grow(&mut self, indices: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.class_counts(indices);
        let majority = argmax_tie_low(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || indices.len() < 2 * self.params.min_samples_leaf {
            return slot;
        }
        let features = self.candidate_features(rng);
        let Some((feature, threshold)) = self.best_split(indices, &features) else {
            return slot;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            indices.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(&left_idx, depth + 1, rng);
        let right = self.grow(&right_idx, depth + 1, rng);
        self.nodes[slot] = Node::Split { feature, threshold, left, right };
        slot
    }
}

impl ForestModel {
    pub fn train(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
        fit_ids: &[u64],
    ) -> Result<Self, ModelError> {
        if params.n_trees == 0 {
            return Err(ModelError::Format("forest needs at least one tree".into()));
        }
        if params.max_depth == 0 {
            return Err(ModelError::Format("max_depth must be at least 1".into()));
        }
        if params.min_samples_leaf == 0 {
            return Err(ModelError::Format("min_samples_leaf must be at least 1".into()));
        }
        if x.first().is_some_and(|row| row.is_empty()) {
            return Err(ModelError::Format("forest cannot train on zero-width feature vectors".into()));
        }
        if fit_ids.len() != x.len() {
            return Err(ModelError::Format(format!("{} fit ids for {} rows", fit_ids.len(), x.len())));
        }
        let n = x.len();
        let mut trees = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let draw: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut grower = Grower { x, y, n_classes, params, nodes: Vec::new() };
            grower.grow(&draw, 0, &mut rng);
            let bootstrap = draw.iter().map(|&i| fit_ids[i]).collect();
            trees.push(Tree { nodes: grower.nodes, bootstrap });
        }
        Ok(ForestModel { n_features: x[0].len(), n_classes, trees, fit_ids: fit_ids.to_vec() })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        argmax_tie_low(&self.predict_proba(features))
    }

    /// Fraction of trees voting for each class.
    pub fn predict_proba(&self, features: &[f64]) -> Vec<f64> {
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(features)] += 1;
        }
        votes.iter().map(|&v| v as f64 / self.trees.len() as f64).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "MLPMODEL1 forest\nclasses {}\nfeatures {}\nfit_ids",
            self.n_classes, self.n_features
        );
        for id in &self.fit_ids {
            out.push_str(&format!(" {id}"));
        }
        out.push_str(&format!("\ntrees {}\n", self.trees.len()));
        for (t, tree) in self.trees.iter().enumerate() {
            out.push_str(&format!("tree {t} nodes {}\nbootstrap", tree.nodes.len()));
            for id in &tree.bootstrap {
                out.push_str(&format!(" {id}"));
            }
            out.push('\n');
            for node in &tree.nodes {
                match node {
                    Node::Leaf { class } => out.push_str(&format!("leaf {class}\n")),
                    Node::Split { feature, threshold, left, right } => {
                        out.push_str(&format!("split {feature} {threshold} {left} {right}\n"))
                    }
                }
            }
        }
        out
    }

    pub(super) fn from_lines(mut lines: std::str::Lines<'_>) -> Result<Self, ModelError> {
        let n_classes: usize = parse_field(
            keyed_line(lines.next(), "classes")?
                .first()
                .ok_or_else(|| ModelError::Format("missing class count".into()))?,
            "class count",
        )?;
        let n_features: usize = parse_field(
            keyed_line(lines.next(), "features")?
                .first()
                .ok_or_else(|| ModelError::Format("missing feature count".into()))?,
            "feature count",
        )?;
        let fit_ids = keyed_line(lines.next(), "fit_ids")?
            .iter()
            .map(|t| parse_field(t, "fit id"))
            .collect::<Result<Vec<u64>, _>>()?;
        let n_trees: usize = parse_field(
            keyed_line(lines.next(), "trees")?
                .first()
                .ok_or_else(|| ModelError::Format("missing tree count".into()))?,
            "tree count",
        )?;
        let mut trees = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let tokens = keyed_line(lines.next(), "tree")?;
            if tokens.len() != 3 || tokens[1] != "nodes" {
                return Err(ModelError::Format(format!("bad tree header for tree {t}")));
            }
            let index: usize = parse_field(tokens[0], "tree index")?;
            if index != t {
                return Err(ModelError::Format(format!("tree {index} out of order")));
            }
            let n_nodes: usize = parse_field(tokens[2], "node count")?;
            let bootstrap = keyed_line(lines.next(), "bootstrap")?
                .iter()
                .map(|t| parse_field(t, "bootstrap id"))
                .collect::<Result<Vec<u64>, _>>()?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let line = lines
                    .next()
                    .ok_or_else(|| ModelError::Format(format!("tree {t} ends early")))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                let node = match parts.as_slice() {
                    ["leaf", class] => Node::Leaf { class: parse_field(class, "leaf class")? },
                    ["split", feature, threshold, left, right] => Node::Split {
                        feature: parse_field(feature, "split feature")?,
                        threshold: parse_field(threshold, "split threshold")?,
                        left: parse_field(left, "left child")?,
                        right: parse_field(right, "right child")?,
                    },
                    _ => return Err(ModelError::Format(format!("bad node line '{line}'"))),
                };
                nodes.push(node);
            }
            for node in &nodes {
                if let Node::Split { left, right, feature, .. } = node {
                    if *left >= nodes.len() || *right >= nodes.len() || *feature >= n_features {
                        return Err(ModelError::Format(format!("tree {t} has an out-of-range reference")));
                    }
                }
            }
            trees.push(Tree { nodes, bootstrap });
        }
        Ok(ForestModel { n_features, n_classes, trees, fit_ids })
    }
}
