//! Least-squares gradient boosting with small leaf-wise regression trees.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IouFeatures, QualityError};

/// Splits must improve the squared error by more than this.
const MIN_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtHyperparams {
    pub num_leaves: usize,
    pub min_child_samples: usize,
    pub max_bin: usize,
    pub learning_rate: f64,
    pub num_trees: usize,
}

impl Default for GbdtHyperparams {
    fn default() -> Self {
        GbdtHyperparams {
            num_leaves: 3,
            min_child_samples: 7,
            max_bin: 7597,
            learning_rate: 0.1,
            num_trees: 100,
        }
    }
}

impl GbdtHyperparams {
    pub fn validate(&self) -> Result<(), QualityError> {
        let ok = self.num_leaves >= 2
            && self.min_child_samples >= 1
            && self.max_bin >= 2
            && self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && self.num_trees >= 1;
        if ok {
            Ok(())
        } else {
            Err(QualityError::Hyperparams(format!("{self:?}")))
        }
    }
}

/// A regression tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        /// Training rows that reached this leaf.
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }

    /// Index of the leaf `x` lands in, counting leaves left to right.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.leaf_index(x)
                } else {
                    left.num_leaves() + right.leaf_index(x)
                }
            }
        }
    }

    /// Sample counts recorded in the leaves, left to right.
    pub fn leaf_samples(&self) -> Vec<usize> {
        match self {
            Node::Leaf { samples, .. } => vec![*samples],
            Node::Split { left, right, .. } => {
                let mut v = left.leaf_samples();
                v.extend(right.leaf_samples());
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub num_features: usize,
    pub base_prediction: f64,
    pub hyperparams: GbdtHyperparams,
    /// Candidate split thresholds per feature, ascending.
    pub feature_bins: Vec<Vec<f64>>,
    pub trees: Vec<Node>,
    /// Recorded for provenance; training involves no sampling.
    pub seed: u64,
}

impl GbdtModel {
    /// Base plus the sum of tree outputs, unclamped.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.base_prediction + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Prediction clamped to `[0, 1]`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_raw(x).clamp(0.0, 1.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, QualityError> {
        let m: GbdtModel = serde_json::from_str(s).map_err(|e| QualityError::Model(e.to_string()))?;
        if m.format_version != crate::FORMAT_VERSION {
            return Err(QualityError::Model(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        if m.feature_bins.len() != m.num_features {
            return Err(QualityError::Model("feature_bins does not match num_features".into()));
        }
        Ok(m)
    }
}

/// Estimated IoU for one feature row, in `[0, 1]`.
pub fn predict_iou(model: &GbdtModel, f: &IouFeatures) -> f64 {
    model.predict(&f.to_row())
}

/// Split thresholds for one feature: midpoints between consecutive distinct
/// values, thinned to quantiles when there are more than `max_bin` bins.
fn bin_thresholds(values: &[f64], max_bin: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mids: Vec<f64> = sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    if mids.len() < max_bin {
        return mids;
    }
    // Keep max_bin - 1 thresholds spread evenly over the row-weighted
    // distribution.
    let mut all = values.to_vec();
    all.sort_by(f64::total_cmp);
    let n = all.len();
    let mut out: Vec<f64> = (1..max_bin)
        .filter_map(|k| {
            let pos = k * n / max_bin;
            (pos > 0 && all[pos - 1] < all[pos]).then(|| all[pos - 1] + (all[pos] - all[pos - 1]) / 2.0)
        })
        .collect();
    out.dedup();
    out
}

struct Split {
    gain: f64,
    feature: usize,
    bin: usize,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct Grower<'a> {
    bins: &'a [Vec<u32>],
    thresholds: &'a [Vec<f64>],
    min_child: usize,
}

impl Grower<'_> {
    fn best_split(&self, rows: &[usize], residual: &[f64]) -> Option<Split> {
        let n = rows.len();
        if n < 2 * self.min_child {
            return None;
        }
        let total: f64 = rows.iter().map(|&r| residual[r]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, usize)> = None;
        for (f, th) in self.thresholds.iter().enumerate() {
            if th.is_empty() {
                continue;
            }
            let mut sum = vec![0.0; th.len() + 1];
            let mut cnt = vec![0usize; th.len() + 1];
            for &r in rows {
                let b = self.bins[f][r] as usize;
                sum[b] += residual[r];
                cnt[b] += 1;
            }
            let (mut sl, mut nl) = (0.0, 0usize);
            for b in 0..th.len() {
                sl += sum[b];
                nl += cnt[b];
                let nr = n - nl;
                if nl < self.min_child {
                    continue;
                }
                if nr < self.min_child {
                    break;
                }
                let sr = total - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
                if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, b));
                }
            }
        }
        let (gain, feature, bin) = best?;
        let (left, right) = rows
            .iter()
            .partition(|&&r| self.bins[feature][r] as usize <= bin);
        Some(Split { gain, feature, bin, left, right })
    }

    /// Grows one tree leaf-wise; returns it with the rows of each leaf in
    /// left-to-right order.
    fn grow(&self, residual: &[f64], num_leaves: usize, n_rows: usize) -> Option<(Node, Vec<Vec<usize>>)> {
        enum Slot {
            Leaf(Vec<usize>, Option<Split>),
            Split(usize, f64, usize, usize),
        }
        fn leaves_in_order(arena: &[Slot], at: usize, out: &mut Vec<usize>) {
            match &arena[at] {
                Slot::Leaf(..) => out.push(at),
                Slot::Split(_, _, l, r) => {
                    leaves_in_order(arena, *l, out);
                    leaves_in_order(arena, *r, out);
                }
            }
        }
        fn finish(arena: &mut [Slot], at: usize, residual: &[f64], out: &mut Vec<Vec<usize>>) -> Node {
            match std::mem::replace(&mut arena[at], Slot::Leaf(Vec::new(), None)) {
                Slot::Leaf(rows, _) => {
                    let mean = rows.iter().map(|&r| residual[r]).sum::<f64>() / rows.len() as f64;
                    let samples = rows.len();
                    out.push(rows);
                    Node::Leaf { value: mean, samples }
                }
                Slot::Split(feature, threshold, l, r) => {
                    let left = Box::new(finish(arena, l, residual, out));
                    let right = Box::new(finish(arena, r, residual, out));
                    Node::Split { feature, threshold, left, right }
                }
            }
        }

        let all: Vec<usize> = (0..n_rows).collect();
        let first = self.best_split(&all, residual)?;
        let mut arena = vec![Slot::Leaf(all, Some(first))];
        for _ in 1..num_leaves {
            let mut leaves = Vec::new();
            leaves_in_order(&arena, 0, &mut leaves);
            // Leftmost leaf wins ties.
            let mut pick: Option<(f64, usize)> = None;
            for &at in &leaves {
                if let Slot::Leaf(_, Some(s)) = &arena[at] {
                    if pick.is_none_or(|(g, _)| s.gain > g) {
                        pick = Some((s.gain, at));
                    }
                }
            }
            let Some((_, at)) = pick else { break };
            let Slot::Leaf(_, Some(s)) = std::mem::replace(&mut arena[at], Slot::Leaf(Vec::new(), None)) else {
                unreachable!()
            };
            let threshold = self.thresholds[s.feature][s.bin];
            let ls = self.best_split(&s.left, residual);
            let rs = self.best_split(&s.right, residual);
            arena.push(Slot::Leaf(s.left, ls));
            arena.push(Slot::Leaf(s.right, rs));
            arena[at] = Slot::Split(s.feature, threshold, arena.len() - 2, arena.len() - 1);
        }
        let mut rows = Vec::new();
        let tree = finish(&mut arena, 0, residual, &mut rows);
        Some((tree, rows))
    }
}

fn scale_leaves(node: &mut Node, lr: f64) {
    match node {
        Node::Leaf { value, .. } => *value *= lr,
        Node::Split { left, right, .. } => {
            scale_leaves(left, lr);
            scale_leaves(right, lr);
        }
    }
}

fn check_data(x: &[Vec<f64>], y: &[f64]) -> Result<usize, QualityError> {
    if x.len() != y.len() {
        return Err(QualityError::Data(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let Some(first) = x.first() else {
        return Err(QualityError::Data("no training rows".into()));
    };
    let width = first.len();
    if width == 0 {
        return Err(QualityError::Data("rows have no features".into()));
    }
    for (k, row) in x.iter().enumerate() {
        if row.len() != width || row.iter().any(|v| !v.is_finite()) {
            return Err(QualityError::Data(format!("row {k} is malformed")));
        }
    }
    if let Some(k) = y.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(QualityError::Data(format!("label {k} outside [0, 1]")));
    }
    Ok(width)
}

/// Fits a squared-error boosted ensemble. Boosting stops early once no
/// legal split improves the residuals (e.g. constant labels).
pub fn train_gbdt(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &GbdtHyperparams,
    seed: u64,
) -> Result<GbdtModel, QualityError> {
    hp.validate()?;
    let width = check_data(x, y)?;
    let n = x.len();

    let thresholds: Vec<Vec<f64>> = (0..width)
        .map(|f| bin_thresholds(&x.iter().map(|r| r[f]).collect::<Vec<_>>(), hp.max_bin))
        .collect();
    let bins: Vec<Vec<u32>> = thresholds
        .iter()
        .enumerate()
        .map(|(f, th)| x.iter().map(|r| th.partition_point(|&t| t < r[f]) as u32).collect())
        .collect();
    let grower = Grower { bins: &bins, thresholds: &thresholds, min_child: hp.min_child_samples };

    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut trees = Vec::new();
    let mut residual = vec![0.0; n];
    for _ in 0..hp.num_trees {
        for k in 0..n {
            residual[k] = y[k] - pred[k];
        }
        let Some((mut tree, leaf_rows)) = grower.grow(&residual, hp.num_leaves, n) else {
            break;
        };
        scale_leaves(&mut tree, hp.learning_rate);
        let mut values = Vec::new();
        collect_values(&tree, &mut values);
        for (rows, v) in leaf_rows.iter().zip(values) {
            for &r in rows {
                pred[r] += v;
            }
        }
        trees.push(tree);
    }
    log::debug!("trained {} trees on {} rows", trees.len(), n);
    Ok(GbdtModel {
        format_version: crate::FORMAT_VERSION,
        num_features: width,
        base_prediction: base,
        hyperparams: *hp,
        feature_bins: thresholds,
        trees,
        seed,
    })
}

fn collect_values(node: &Node, out: &mut Vec<f64>) {
    match node {
        Node::Leaf { value, .. } => out.push(*value),
        Node::Split { left, right, .. } => {
            collect_values(left, out);
            collect_values(right, out);
        }
    }
}

/// Seeded assignment of `n` items to `k` folds of near-equal size.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &item) in order.iter().enumerate() {
        folds[item] = pos % k;
    }
    folds
}

/// Mean absolute error of clamped predictions over `k` held-out folds.
pub fn crossval_mae(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &GbdtHyperparams,
    k: usize,
    seed: u64,
) -> Result<f64, QualityError> {
    check_data(x, y)?;
    if k < 2 || k > x.len() {
        return Err(QualityError::Data(format!("cannot make {k} folds from {} rows", x.len())));
    }
    let folds = fold_assignment(x.len(), k, seed);
    let mut abs_err = 0.0;
    for fold in 0..k {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for (r, &f) in folds.iter().enumerate() {
            if f != fold {
                tx.push(x[r].clone());
                ty.push(y[r]);
            }
        }
        let model = train_gbdt(&tx, &ty, hp, seed)?;
        for (r, &f) in folds.iter().enumerate() {
            if f == fold {
                abs_err += (model.predict(&x[r]) - y[r]).abs();
            }
        }
    }
    Ok(abs_err / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn step_data(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n).map(|k| vec![-1.0 + 2.0 * k as f64 / (n - 1) as f64]).collect();
        let y = x.iter().map(|r| if r[0] > 0.0 { 1.0 } else { 0.0 }).collect();
        (x, y)
    }

    fn mse(m: &GbdtModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(r, t)| (m.predict(r) - t).powi(2)).sum::<f64>() / y.len() as f64
    }

    /// Every leaf of every tree holds at least `min_child` training rows and
    /// the recorded counts agree with a fresh walk of the data.
    fn assert_structure(m: &GbdtModel, x: &[Vec<f64>]) {
        for t in &m.trees {
            assert!(t.num_leaves() <= m.hyperparams.num_leaves);
            let mut counts = vec![0; t.num_leaves()];
            for r in x {
                counts[t.leaf_index(r)] += 1;
            }
            assert_eq!(counts, t.leaf_samples());
            assert!(counts.iter().all(|&c| c >= m.hyperparams.min_child_samples));
        }
    }

    #[test]
    fn constant_labels_give_base_only() {
        let x: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64]).collect();
        let m = train_gbdt(&x, &[0.5; 20], &GbdtHyperparams::default(), 0).unwrap();
        assert_eq!(m.base_prediction, 0.5);
        assert!(m.trees.is_empty());
        assert_eq!(m.predict(&[3.0]), 0.5);
    }

    #[test]
    fn step_function_is_learned() {
        let (x, y) = step_data(100);
        let m = train_gbdt(&x, &y, &GbdtHyperparams::default(), 1).unwrap();
        assert!(mse(&m, &x, &y) < 0.01);
        assert!(m.predict(&[1.0]) >= 0.9);
        assert!(m.predict(&[-1.0]) <= 0.1);
        assert_structure(&m, &x);
        // The first tree's root is the step.
        let Node::Split { threshold, .. } = &m.trees[0] else { panic!("no split") };
        assert!(threshold.abs() < 0.02);
    }

    #[test]
    fn too_few_rows_for_legal_split() {
        // 10 points with min_child 7: every split leaves a child below 7.
        let x: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64]).collect();
        let y: Vec<f64> = (0..10).map(|k| if k < 5 { 0.0 } else { 1.0 }).collect();
        let m = train_gbdt(&x, &y, &GbdtHyperparams::default(), 0).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(m.base_prediction, 0.5);
        // With 14 points exactly one 7/7 split is legal.
        let x: Vec<Vec<f64>> = (0..14).map(|k| vec![k as f64]).collect();
        let y: Vec<f64> = (0..14).map(|k| if k < 7 { 0.0 } else { 1.0 }).collect();
        let m = train_gbdt(&x, &y, &GbdtHyperparams::default(), 0).unwrap();
        assert_eq!(m.trees[0].leaf_samples(), vec![7, 7]);
    }

    #[test]
    fn clamps_and_round_trips() {
        let m = GbdtModel {
            format_version: crate::FORMAT_VERSION,
            num_features: 1,
            base_prediction: 1.07,
            hyperparams: GbdtHyperparams::default(),
            feature_bins: vec![vec![]],
            trees: vec![],
            seed: 0,
        };
        assert_eq!(m.predict(&[0.0]), 1.0);
        assert_eq!(m.predict_raw(&[0.0]), 1.07);
        let (x, y) = step_data(60);
        let m = train_gbdt(&x, &y, &GbdtHyperparams::default(), 9).unwrap();
        let back = GbdtModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), m.to_json());
        assert!(GbdtModel::from_json("{}").is_err());
    }

    #[test]
    fn quantile_bins_respect_max_bin() {
        let values: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        let th = bin_thresholds(&values, 10);
        assert!(th.len() < 10 && th.len() >= 8);
        assert!(th.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(bin_thresholds(&[1.0, 1.0, 2.0, 4.0], 100), vec![1.5, 3.0]);
    }

    #[test]
    fn crossval_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..600).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let y: Vec<f64> = x.iter().map(|r| (0.2 + 0.6 * r[0]).clamp(0.0, 1.0)).collect();
        let mae = crossval_mae(&x, &y, &GbdtHyperparams::default(), 3, 1).unwrap();
        assert!(mae < 0.02, "{mae}");
        let noise: Vec<f64> = (0..600).map(|_| rng.gen::<f64>()).collect();
        let mae = crossval_mae(&x, &noise, &GbdtHyperparams::default(), 3, 1).unwrap();
        assert!((mae - 0.25).abs() < 0.05, "{mae}");
        assert!(crossval_mae(&x[..2], &y[..2], &GbdtHyperparams::default(), 3, 1).is_err());
    }

    #[test]
    fn folds_partition() {
        let f = fold_assignment(10, 3, 4);
        let mut sizes = [0; 3];
        for &k in &f {
            sizes[k] += 1;
        }
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert!(sizes.iter().all(|&s| s == 3 || s == 4));
        assert_eq!(f, fold_assignment(10, 3, 4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn trees_respect_limits(seed in 0u64..1000, n in 14usize..120, leaves in 2usize..6, min_child in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| (rng.gen::<f64>() * 20.0).round()).collect()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let hp = GbdtHyperparams { num_leaves: leaves, min_child_samples: min_child, num_trees: 20, ..Default::default() };
            let m = train_gbdt(&x, &y, &hp, seed).unwrap();
            assert_structure(&m, &x);
            let again = train_gbdt(&x, &y, &hp, seed).unwrap();
            prop_assert_eq!(m.to_json(), again.to_json());
            for r in &x {
                let p = m.predict(r);
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
