//! Task specifications and the online episode protocol.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{rescale, Permutation, Projection};
use super::dataset::{DataStore, Split};
use super::synthetic::{make_clusters, make_random_task, make_sum_sign};
use super::Example;
use crate::error::{Result, VsmlError};
use crate::seeds::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// An IDX dataset from the data store.
    Dataset {
        name: String,
        #[serde(default = "default_split")]
        split: Split,
    },
    /// `points` fixed Gaussian points, redrawn each episode, cycled.
    Random {
        dims: usize,
        classes: usize,
        #[serde(default = "default_random_points")]
        points: usize,
    },
    /// Classify the sign of the sum of Gaussian inputs.
    SumSign { dims: usize },
    /// Noisy copies of per-episode prototypes in `[-1, 1]^dims`.
    Clusters {
        dims: usize,
        classes: usize,
        noise: f64,
    },
}

fn default_split() -> Split {
    Split::Train
}

fn default_random_points() -> usize {
    20
}

/// Seed choice for an augmentation: fixed, or drawn per episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AugmentSeed {
    Fixed(u64),
    PerEpisode(PerEpisode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerEpisode {
    Episode,
}

impl AugmentSeed {
    pub const EPISODE: AugmentSeed = AugmentSeed::PerEpisode(PerEpisode::Episode);

    fn resolve(self, episode_seed: u64, t: u64) -> u64 {
        match self {
            AugmentSeed::Fixed(s) => s,
            AugmentSeed::PerEpisode(_) => seeds::derive(episode_seed, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub source: Source,
    /// Restrict a dataset to these labels; they are renumbered `0..k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_subset: Option<Vec<usize>>,
    /// Bilinear rescale of dataset images to `size x size`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<AugmentSeed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<AugmentSeed>,
    pub episode_length: usize,
}

impl TaskSpec {
    pub fn new(source: Source, episode_length: usize) -> Self {
        TaskSpec {
            source,
            class_subset: None,
            rescale: None,
            projection: None,
            permutation: None,
            episode_length,
        }
    }

    pub fn with_projection(mut self, seed: AugmentSeed) -> Self {
        self.projection = Some(seed);
        self
    }

    pub fn with_permutation(mut self, seed: AugmentSeed) -> Self {
        self.permutation = Some(seed);
        self
    }

    pub fn validate(&self, store: &DataStore) -> Result<()> {
        if self.episode_length == 0 {
            return Err(VsmlError::config("episode_length must be positive"));
        }
        match &self.source {
            Source::Random { classes, dims, points } => {
                if *classes < 2 || *dims == 0 || *points == 0 {
                    return Err(VsmlError::config("random task needs classes >= 2, dims >= 1, points >= 1"));
                }
            }
            Source::SumSign { dims } if *dims == 0 => {
                return Err(VsmlError::config("sum-sign needs dims >= 1"));
            }
            Source::Clusters { dims, classes, noise } => {
                if *classes < 2 || *dims == 0 || !(noise.is_finite() && *noise >= 0.0) {
                    return Err(VsmlError::config("clusters need classes >= 2, dims >= 1, noise >= 0"));
                }
            }
            _ => {}
        }
        if self.class_subset.is_some() || self.rescale.is_some() {
            if !matches!(self.source, Source::Dataset { .. }) {
                return Err(VsmlError::config(
                    "class_subset and rescale only apply to dataset sources",
                ));
            }
        }
        if let Some(size) = self.rescale {
            if !super::augment::RESCALE_SIZES.contains(&size) {
                return Err(VsmlError::config(format!("unsupported rescale size {size}")));
            }
        }
        if let Source::Dataset { name, split } = &self.source {
            let ds = store.get(name, *split)?;
            if ds.rows != ds.cols && self.rescale.is_some() {
                return Err(VsmlError::config("rescale needs square images"));
            }
            if let Some(subset) = &self.class_subset {
                if subset.len() < 2 || subset.iter().any(|&c| c >= ds.num_classes) {
                    return Err(VsmlError::config(format!(
                        "class subset {subset:?} invalid for {} classes",
                        ds.num_classes
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flattened input width `A^(1)` after rescaling and projection.
    pub fn input_dim(&self, store: &DataStore) -> Result<usize> {
        Ok(match &self.source {
            Source::Dataset { name, split } => match self.rescale {
                Some(s) => s * s,
                None => {
                    let ds = store.get(name, *split)?;
                    ds.rows * ds.cols
                }
            },
            Source::Random { dims, .. } | Source::SumSign { dims } | Source::Clusters { dims, .. } => *dims,
        })
    }

    /// Number of classes `B^(K)`.
    pub fn num_classes(&self, store: &DataStore) -> Result<usize> {
        Ok(match &self.source {
            Source::Dataset { name, split } => match &self.class_subset {
                Some(s) => s.len(),
                None => store.get(name, *split)?.num_classes,
            },
            Source::Random { classes, .. } | Source::Clusters { classes, .. } => *classes,
            Source::SumSign { .. } => 2,
        })
    }

    /// Materialize the episode for `seed`. Identical `(spec, seed)` gives
    /// identical examples.
    pub fn episode(&self, store: &DataStore, seed: u64) -> Result<Episode> {
        self.validate(store)?;
        let t = self.episode_length;
        let data_seed = seeds::derive(seed, tag::DATA);
        let raw: Vec<Example> = match &self.source {
            Source::Random { dims, classes, points } => {
                let pts = make_random_task(data_seed, *points, *dims, *classes);
                cycle_shuffled(&pts, t, data_seed)
            }
            Source::SumSign { dims } => make_sum_sign(data_seed, *dims).take(t).collect(),
            Source::Clusters { dims, classes, noise } => {
                make_clusters(data_seed, *dims, *classes, *noise).take(t).collect()
            }
            Source::Dataset { name, split } => {
                let ds = store.get(name, *split)?;
                let pool: Vec<usize> = match &self.class_subset {
                    Some(subset) => (0..ds.len())
                        .filter(|&i| subset.contains(&(ds.labels[i] as usize)))
                        .collect(),
                    None => (0..ds.len()).collect(),
                };
                if pool.is_empty() {
                    return Err(VsmlError::config(format!("{name}: no examples for the class subset")));
                }
                let order = cycle_shuffled(&pool, t, data_seed);
                order
                    .into_iter()
                    .map(|i| {
                        let mut x: Vec<f64> = ds.pixels(i).iter().map(|&p| p as f64 / 255.0).collect();
                        if let Some(size) = self.rescale {
                            x = rescale(&x, ds.rows, size)?;
                        }
                        let raw_label = ds.labels[i] as usize;
                        let label = match &self.class_subset {
                            Some(s) => s.iter().position(|&c| c == raw_label).expect("filtered"),
                            None => raw_label,
                        };
                        Ok(Example { x, label })
                    })
                    .collect::<Result<_>>()?
            }
        };
        let dim = self.input_dim(store)?;
        let permutation = self
            .permutation
            .map(|s| Permutation::from_seed(dim, s.resolve(seed, tag::PERMUTATION)));
        let projection = self
            .projection
            .map(|s| Projection::from_seed(dim, s.resolve(seed, tag::PROJECTION)));
        let examples = raw
            .into_iter()
            .map(|mut e| {
                if let Some(p) = &permutation {
                    e.x = p.apply(&e.x);
                }
                if let Some(p) = &projection {
                    e.x = p.apply(&e.x);
                }
                e
            })
            .collect();
        Ok(Episode {
            input_dim: dim,
            num_classes: self.num_classes(store)?,
            examples,
        })
    }
}

/// `t` items drawn without replacement; the shuffled pool repeats when it is
/// smaller than `t`.
fn cycle_shuffled<T: Clone>(pool: &[T], t: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    (0..t).map(|i| pool[order[i % pool.len()]].clone()).collect()
}

/// One online learning episode, ready to be fed example by example.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub input_dim: usize,
    pub num_classes: usize,
    pub examples: Vec<Example>,
}

impl Episode {
    /// Every example presented twice in a row (`x1 x1 x2 x2 ...`), keeping
    /// the first `distinct` examples.
    pub fn repeated_pairs(&self, distinct: usize) -> Episode {
        let examples = self
            .examples
            .iter()
            .take(distinct)
            .flat_map(|e| [e.clone(), e.clone()])
            .collect();
        Episode {
            examples,
            ..self.clone()
        }
    }
}

/// A task with its relative sampling weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTask {
    pub task: TaskSpec,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// A weighted mixture of tasks to draw episodes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskDistribution {
    pub tasks: Vec<WeightedTask>,
}

impl TaskDistribution {
    pub fn single(task: TaskSpec) -> Self {
        TaskDistribution {
            tasks: vec![WeightedTask { task, weight: 1.0 }],
        }
    }

    pub fn validate(&self, store: &DataStore) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(VsmlError::config("task distribution is empty"));
        }
        for wt in &self.tasks {
            if !(wt.weight.is_finite() && wt.weight > 0.0) {
                return Err(VsmlError::config("task weights must be positive"));
            }
            wt.task.validate(store)?;
        }
        Ok(())
    }

    /// Choose a task for `seed` (weighted) and materialize its episode.
    pub fn sample(&self, store: &DataStore, seed: u64) -> Result<(usize, Episode)> {
        let idx = if self.tasks.len() == 1 {
            0
        } else {
            let total: f64 = self.tasks.iter().map(|t| t.weight).sum();
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, tag::TASK_CHOICE));
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = self.tasks.len() - 1;
            for (i, t) in self.tasks.iter().enumerate() {
                if u < t.weight {
                    chosen = i;
                    break;
                }
                u -= t.weight;
            }
            chosen
        };
        Ok((idx, self.tasks[idx].task.episode(store, seed)?))
    }

    /// Largest input width over all tasks (used to pad fixed-size learners).
    pub fn max_input_dim(&self, store: &DataStore) -> Result<usize> {
        self.tasks
            .iter()
            .map(|t| t.task.input_dim(store))
            .try_fold(0, |m, d| d.map(|d| m.max(d)))
    }

    pub fn max_classes(&self, store: &DataStore) -> Result<usize> {
        self.tasks
            .iter()
            .map(|t| t.task.num_classes(store))
            .try_fold(0, |m, d| d.map(|d| m.max(d)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::dataset::RawDataset;

    fn clusters(t: usize) -> TaskSpec {
        TaskSpec::new(Source::Clusters { dims: 8, classes: 2, noise: 0.1 }, t)
    }

    fn tiny_store() -> DataStore {
        let mut store = DataStore::new();
        let n = 30;
        let images: Vec<u8> = (0..n * 28 * 28).map(|i| (i % 251) as u8).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        store.insert(RawDataset::new("toy", Split::Train, 28, 28, images, labels).unwrap());
        store
    }

    #[test]
    fn episodes_are_deterministic() {
        let store = DataStore::new();
        let spec = clusters(50).with_projection(AugmentSeed::EPISODE);
        assert_eq!(spec.episode(&store, 1).unwrap(), spec.episode(&store, 1).unwrap());
        assert_ne!(spec.episode(&store, 1).unwrap(), spec.episode(&store, 2).unwrap());
    }

    #[test]
    fn fixed_projection_is_shared_across_episodes() {
        let store = DataStore::new();
        let plain = clusters(5);
        let proj = clusters(5).with_projection(AugmentSeed::Fixed(77));
        for seed in [3, 4] {
            let a = plain.episode(&store, seed).unwrap();
            let b = proj.episode(&store, seed).unwrap();
            let p = Projection::from_seed(8, 77);
            for (ea, eb) in a.examples.iter().zip(&b.examples) {
                assert_eq!(p.apply(&ea.x), eb.x);
                assert_eq!(ea.label, eb.label);
            }
        }
    }

    #[test]
    fn random_task_cycles_its_points() {
        let store = DataStore::new();
        let spec = TaskSpec::new(Source::Random { dims: 4, classes: 3, points: 20 }, 60);
        let ep = spec.episode(&store, 9).unwrap();
        assert_eq!(ep.examples.len(), 60);
        for i in 0..40 {
            assert_eq!(ep.examples[i], ep.examples[i + 20]);
        }
        let mut first: Vec<_> = ep.examples[..20].iter().map(|e| format!("{:?}", e.x)).collect();
        first.sort();
        first.dedup();
        assert_eq!(first.len(), 20);
    }

    #[test]
    fn dataset_subset_and_rescale() {
        let store = tiny_store();
        let mut spec = TaskSpec::new(Source::Dataset { name: "toy".into(), split: Split::Train }, 9);
        spec.class_subset = Some(vec![3, 7, 1]);
        spec.rescale = Some(14);
        assert_eq!(spec.input_dim(&store).unwrap(), 196);
        assert_eq!(spec.num_classes(&store).unwrap(), 3);
        let ep = spec.episode(&store, 0).unwrap();
        assert_eq!(ep.examples.len(), 9);
        for e in &ep.examples {
            assert!(e.label < 3);
            assert_eq!(e.x.len(), 196);
            assert!(e.x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // no repeats: the pool has 9 examples of classes {1,3,7}
        let mut xs: Vec<_> = ep.examples.iter().map(|e| format!("{:?}", e.x)).collect();
        xs.sort();
        xs.dedup();
        assert_eq!(xs.len(), 9);
    }

    #[test]
    fn validation_errors() {
        let store = tiny_store();
        assert!(clusters(0).validate(&store).is_err());
        let mut bad = clusters(5);
        bad.rescale = Some(14);
        assert!(bad.validate(&store).is_err());
        let mut subset = TaskSpec::new(Source::Dataset { name: "toy".into(), split: Split::Train }, 5);
        subset.class_subset = Some(vec![0, 12]);
        assert!(subset.validate(&store).is_err());
        let missing = TaskSpec::new(Source::Dataset { name: "nope".into(), split: Split::Test }, 5);
        assert!(missing.validate(&store).is_err());
    }

    #[test]
    fn repeated_pairs_protocol() {
        let store = DataStore::new();
        let ep = clusters(10).episode(&store, 5).unwrap().repeated_pairs(4);
        assert_eq!(ep.examples.len(), 8);
        for i in 0..4 {
            assert_eq!(ep.examples[2 * i], ep.examples[2 * i + 1]);
        }
    }

    #[test]
    fn spec_json_shape() {
        let spec = clusters(100).with_projection(AugmentSeed::EPISODE).with_permutation(AugmentSeed::Fixed(3));
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"source":{"kind":"clusters","dims":8,"classes":2,"noise":0.1},"projection":"episode","permutation":3,"episode_length":100}"#
        );
        let back: TaskSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<TaskSpec>(r#"{"source":{"kind":"sum_sign","dims":3},"episode_length":1,"bogus":1}"#).is_err());
    }

    #[test]
    fn weighted_sampling_hits_every_task() {
        let store = DataStore::new();
        let dist = TaskDistribution {
            tasks: vec![
                WeightedTask { task: clusters(3), weight: 1.0 },
                WeightedTask { task: TaskSpec::new(Source::SumSign { dims: 5 }, 3), weight: 3.0 },
            ],
        };
        let mut counts = [0usize; 2];
        for s in 0..400 {
            counts[dist.sample(&store, s).unwrap().0] += 1;
        }
        assert!(counts[0] > 60 && counts[1] > 240, "{counts:?}");
        assert_eq!(dist.max_input_dim(&store).unwrap(), 8);
    }
}
