use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::phantom::{gen_phantom, PhantomSpec};
use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::rng::RngState;

/// One slice. `label` is `None` for unlabeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub label: Option<LabelMap>,
}

impl Sample {
    pub fn labeled(id: impl Into<String>, image: Image, label: LabelMap) -> Self {
        Self {
            id: id.into(),
            image,
            label: Some(label),
        }
    }

    /// Returns the label or an error naming the sample.
    pub fn require_label(&self) -> Result<&LabelMap> {
        self.label
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("sample {} has no label", self.id)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub labeled: usize,
    pub unlabeled: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn new(labeled: usize, unlabeled: usize, validation: usize, test: usize) -> Self {
        Self {
            labeled,
            unlabeled,
            validation,
            test,
        }
    }

    pub fn total(&self) -> usize {
        self.labeled + self.unlabeled + self.validation + self.test
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub labeled: Vec<Sample>,
    pub unlabeled: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub num_classes: u8,
}

impl SplitDataset {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts::new(
            self.labeled.len(),
            self.unlabeled.len(),
            self.validation.len(),
            self.test.len(),
        )
    }

    /// Splits in a fixed order, tagged with their manifest names.
    pub fn splits(&self) -> [(&'static str, &[Sample]); 4] {
        [
            ("labeled", &self.labeled),
            ("unlabeled", &self.unlabeled),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.splits()
            .into_iter()
            .flat_map(|(_, s)| s.iter().map(|x| x.id.as_str()))
    }

    /// Errors if any id appears in more than one place.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.ids() {
            if !seen.insert(id) {
                return Err(Error::invalid(format!("sample id {id} appears more than once")));
            }
        }
        Ok(())
    }

    /// The dataset as it reads back after 8-bit PNG storage.
    pub fn quantized(&self) -> Self {
        let q = |v: &[Sample]| {
            v.iter()
                .map(|s| Sample {
                    image: super::png::quantized(&s.image),
                    ..s.clone()
                })
                .collect()
        };
        Self {
            labeled: q(&self.labeled),
            unlabeled: q(&self.unlabeled),
            validation: q(&self.validation),
            test: q(&self.test),
            num_classes: self.num_classes,
        }
    }
}

/// Shuffles `samples` with `rng` and cuts it into the four splits in order
/// labeled, unlabeled, validation, test. Samples beyond the requested total
/// are dropped. Unlabeled samples lose their labels.
pub fn make_splits(samples: Vec<Sample>, counts: SplitCounts, rng: &mut RngState) -> Result<SplitDataset> {
    if counts.total() > samples.len() {
        return Err(Error::invalid(format!(
            "requested {} samples across splits but only {} are available",
            counts.total(),
            samples.len()
        )));
    }
    let num_classes = samples
        .iter()
        .find_map(|s| s.label.as_ref().map(LabelMap::num_classes))
        .unwrap_or(2);
    let needs_label = counts.labeled + counts.validation + counts.test;
    if needs_label > 0 && samples.iter().any(|s| s.label.is_none()) {
        return Err(Error::invalid("every sample must carry a label before splitting"));
    }
    let mut samples = samples;
    samples.shuffle(rng);
    let mut it = samples.into_iter();
    let mut take = |n: usize| it.by_ref().take(n).collect::<Vec<_>>();
    let labeled = take(counts.labeled);
    let mut unlabeled = take(counts.unlabeled);
    for s in &mut unlabeled {
        s.label = None;
    }
    let validation = take(counts.validation);
    let test = take(counts.test);
    let ds = SplitDataset {
        labeled,
        unlabeled,
        validation,
        test,
        num_classes,
    };
    ds.check_disjoint()?;
    Ok(ds)
}

/// Generates `counts.total()` phantoms, each from its own stream of `seed`,
/// then splits them with a further stream.
pub fn generate_dataset(spec: &PhantomSpec, counts: SplitCounts, seed: u64) -> Result<SplitDataset> {
    let root = RngState::new(seed);
    let gen = root.split(0);
    let samples = (0..counts.total())
        .map(|i| {
            let (img, lbl) = gen_phantom(spec, &mut gen.split(i as u64))?;
            Ok(Sample::labeled(format!("phantom_{i:05}"), img, lbl))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = make_splits(samples, counts, &mut root.split(1))?;
    ds.num_classes = spec.num_classes;
    Ok(ds)
}

/// SHA-256 over the per-split id lists. Two datasets with the same digest
/// assign the same ids to the same splits.
pub fn split_digest(ds: &SplitDataset) -> String {
    let mut h = Sha256::new();
    for (name, samples) in ds.splits() {
        let ids: BTreeSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
        h.update(name.as_bytes());
        h.update([0u8]);
        for id in ids {
            h.update(id.as_bytes());
            h.update(*b"\n");
        }
        h.update([0xffu8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
