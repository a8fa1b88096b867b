use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::png::{read_image_png, read_label_png, write_image_png, write_label_png};
use super::split::{Sample, SplitDataset};
use crate::error::{Error, Result};
use crate::image::LabelMap;
use crate::io_util::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One line of the manifest. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub image_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_path: Option<String>,
    pub split: String,
    pub spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<u8>,
}

/// Writes `images/<id>.png`, `labels/<id>.png` and the manifest under `dir`
/// and returns the manifest path.
pub fn save_manifest(ds: &SplitDataset, dir: &Path) -> Result<PathBuf> {
    ds.check_disjoint()?;
    let mut lines = String::new();
    for (split, samples) in ds.splits() {
        for s in samples {
            let image_path = format!("images/{}.png", s.id);
            write_image_png(&s.image, &dir.join(&image_path))?;
            let label_path = match &s.label {
                Some(lbl) => {
                    let p = format!("labels/{}.png", s.id);
                    write_label_png(lbl, &dir.join(&p))?;
                    Some(p)
                }
                None => None,
            };
            let rec = ManifestRecord {
                id: s.id.clone(),
                image_path,
                label_path,
                split: split.to_string(),
                spacing: s.image.spacing(),
                num_classes: Some(ds.num_classes),
            };
            lines.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            lines.push('\n');
        }
    }
    let path = dir.join(MANIFEST_FILE);
    write_atomic(&path, lines.as_bytes())?;
    Ok(path)
}

/// Reads a manifest written by [`save_manifest`] or by hand. Records without
/// `num_classes` take one more than the largest label index in the file.
pub fn load_manifest(path: &Path) -> Result<SplitDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let bad = |line: usize, id: &str, msg: String| Error::format(path, format!("line {line} (id {id:?}): {msg}"));

    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(raw).map_err(|e| bad(i + 1, "?", format!("malformed record: {e}")))?;
        records.push((i + 1, rec));
    }

    let declared: Vec<u8> = records.iter().filter_map(|(_, r)| r.num_classes).collect();
    if declared.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::format(path, "records disagree on num_classes"));
    }

    let mut loaded = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        if !(rec.spacing.is_finite() && rec.spacing > 0.0) {
            return Err(bad(*line, &rec.id, format!("spacing {} must be positive", rec.spacing)));
        }
        let image = read_image_png(&resolve(&rec.image_path))
            .map_err(|e| bad(*line, &rec.id, e.to_string()))?
            .with_spacing(rec.spacing);
        let label = match &rec.label_path {
            Some(p) => {
                let lbl = read_label_png(&resolve(p), u8::MAX).map_err(|e| bad(*line, &rec.id, e.to_string()))?;
                if lbl.dims() != image.dims() {
                    return Err(bad(
                        *line,
                        &rec.id,
                        format!("label is {:?} but image is {:?}", lbl.dims(), image.dims()),
                    ));
                }
                Some(lbl)
            }
            None => None,
        };
        loaded.push((*line, rec, image, label));
    }

    let num_classes = match declared.first() {
        Some(&c) => c,
        None => loaded
            .iter()
            .filter_map(|(_, _, _, l)| l.as_ref())
            .flat_map(|l| l.data().iter().copied())
            .max()
            .map_or(2, |m| (m + 1).max(2)),
    };

    let mut ds = SplitDataset {
        labeled: Vec::new(),
        unlabeled: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        num_classes,
    };
    for (line, rec, image, label) in loaded {
        let label = label
            .map(|l| {
                LabelMap::new(l.height(), l.width(), l.data().to_vec(), num_classes)
                    .map_err(|e| bad(line, &rec.id, e.to_string()))
            })
            .transpose()?;
        let sample = Sample {
            id: rec.id.clone(),
            image,
            label,
        };
        let target = match rec.split.as_str() {
            "labeled" => &mut ds.labeled,
            "unlabeled" => &mut ds.unlabeled,
            "validation" => &mut ds.validation,
            "test" => &mut ds.test,
            other => return Err(bad(line, &rec.id, format!("unknown split {other:?}"))),
        };
        if rec.split != "unlabeled" && sample.label.is_none() {
            return Err(bad(line, &rec.id, format!("{} sample needs a label_path", rec.split)));
        }
        target.push(sample);
    }
    ds.check_disjoint().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, PhantomSpec, SplitCounts};

    #[test]
    fn round_trip_is_quantized_identity() {
        let dir = tempfile::tempdir().unwrap();
        let spec = PhantomSpec {
            image_size: 16,
            ..PhantomSpec::default()
        };
        let ds = generate_dataset(&spec, SplitCounts::new(2, 3, 1, 1), 0).unwrap();
        let path = save_manifest(&ds, dir.path()).unwrap();
        let back = load_manifest(&path).unwrap();
        assert_eq!(back, ds.quantized());
    }

    #[test]
    fn missing_png_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        fs::write(
            &path,
            r#"{"id":"a","image_path":"images/nope.png","split":"unlabeled","spacing":1.0}"#,
        )
        .unwrap();
        let msg = load_manifest(&path).unwrap_err().to_string();
        assert!(msg.contains("nope.png"), "{msg}");
    }

    #[test]
    fn malformed_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        fs::write(&path, "{\"id\": 3}\n").unwrap();
        let msg = load_manifest(&path).unwrap_err().to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }
}
