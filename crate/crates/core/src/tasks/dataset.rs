//! MNIST-family datasets loaded from IDX files under a data root.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::idx::read_idx_file;
use crate::error::{Result, VsmlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Grayscale images with labels. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub split: Split,
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub num_classes: usize,
}

impl RawDataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        rows: usize,
        cols: usize,
        images: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if images.len() != labels.len() * rows * cols {
            return Err(VsmlError::Dimension {
                what: "image payload",
                expected: labels.len() * rows * cols,
                actual: images.len(),
            });
        }
        let num_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        Ok(RawDataset {
            name: name.into(),
            split,
            rows,
            cols,
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self, i: usize) -> &[u8] {
        let sz = self.rows * self.cols;
        &self.images[i * sz..(i + 1) * sz]
    }

    /// Load `<root>/<name>/{train,t10k}-{images-idx3,labels-idx1}-ubyte`.
    pub fn load(root: &Path, name: &str, split: Split) -> Result<Self> {
        let dir = root.join(name);
        let prefix = split.file_prefix();
        let images = read_idx_file(&dir.join(format!("{prefix}-images-idx3-ubyte")))?;
        let labels = read_idx_file(&dir.join(format!("{prefix}-labels-idx1-ubyte")))?;
        if images.shape.len() != 3 || labels.shape.len() != 1 {
            return Err(VsmlError::config(format!(
                "{name}: expected rank-3 images and rank-1 labels"
            )));
        }
        if images.shape[0] != labels.shape[0] {
            return Err(VsmlError::Dimension {
                what: "label count",
                expected: images.shape[0],
                actual: labels.shape[0],
            });
        }
        RawDataset::new(name, split, images.shape[1], images.shape[2], images.data, labels.data)
    }
}

/// Loaded datasets keyed by `(name, split)`.
#[derive(Debug, Clone, Default)]
pub struct DataStore {
    sets: HashMap<(String, Split), Arc<RawDataset>>,
}

impl DataStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ds: RawDataset) {
        self.sets.insert((ds.name.clone(), ds.split), Arc::new(ds));
    }

    pub fn get(&self, name: &str, split: Split) -> Result<&Arc<RawDataset>> {
        self.sets.get(&(name.to_string(), split)).ok_or_else(|| {
            VsmlError::config(format!("dataset {name} ({split:?}) is not loaded"))
        })
    }

    pub fn ensure_loaded(&mut self, root: Option<&Path>, name: &str, split: Split) -> Result<()> {
        if self.sets.contains_key(&(name.to_string(), split)) {
            return Ok(());
        }
        let root = root.ok_or_else(|| {
            VsmlError::config(format!("dataset {name} requested but no data root is set"))
        })?;
        self.insert(RawDataset::load(root, name, split)?);
        Ok(())
    }
}
