//! Dice, Hausdorff and HD95 on binary masks, per-class records and
//! mean/std aggregation over samples.
//!
//! Hausdorff distances are computed on the full foreground point sets via an
//! exact squared Euclidean distance transform. HD95 is the 95th percentile
//! (linear interpolation) of the pooled directed distances from both sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, BinaryMask, LabelMap};

/// `2|P ∩ G| / (|P| + |G|)`; 1 when both are empty.
pub fn dice(p: &BinaryMask, g: &BinaryMask) -> Result<f64> {
    ensure_same_dims("dice", p.dims(), g.dims())?;
    let (mut inter, mut np, mut ng) = (0usize, 0usize, 0usize);
    for (&a, &b) in p.data().iter().zip(g.data()) {
        np += a as usize;
        ng += b as usize;
        inter += (a && b) as usize;
    }
    if np + ng == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (np + ng) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hausdorff {
    pub hd: f64,
    pub hd95: f64,
    /// Exactly one of the masks was empty; distances are the image diagonal.
    pub degenerate: bool,
}

/// Squared distance from every pixel to the nearest set pixel of `mask`
/// (`f64::INFINITY` everywhere when the mask is empty).
pub fn squared_distance_transform(mask: &BinaryMask) -> Vec<f64> {
    let (h, w) = mask.dims();
    let mut grid: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v { 0.0 } else { f64::INFINITY })
        .collect();
    let n = h.max(w);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for c in 0..w {
        for r in 0..h {
            f[r] = grid[r * w + c];
        }
        edt_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for r in 0..h {
            grid[r * w + c] = d[r];
        }
    }
    for r in 0..h {
        f[..w].copy_from_slice(&grid[r * w..(r + 1) * w]);
        edt_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        grid[r * w..(r + 1) * w].copy_from_slice(&d[..w]);
    }
    grid
}

/// Lower envelope of parabolas (Felzenszwalb and Huttenlocher).
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(i) => i,
        None => {
            d.fill(f64::INFINITY);
            return;
        }
    };
    let mut k = 0;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let parabola = |p: usize| f[p] + (p * p) as f64;
        let mut s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        // z[0] is -inf, so this never pops the last parabola.
        while s <= z[k] {
            k -= 1;
            s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Symmetric Hausdorff distance and HD95 between two masks, in `spacing` units.
pub fn hausdorff(p: &BinaryMask, g: &BinaryMask, spacing: f64) -> Result<Hausdorff> {
    ensure_same_dims("hausdorff", p.dims(), g.dims())?;
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("spacing {spacing} must be positive")));
    }
    match (p.is_empty(), g.is_empty()) {
        (true, true) => {
            return Ok(Hausdorff {
                hd: 0.0,
                hd95: 0.0,
                degenerate: false,
            })
        }
        (true, false) | (false, true) => {
            let (h, w) = p.dims();
            let diag = ((h * h + w * w) as f64).sqrt() * spacing;
            return Ok(Hausdorff {
                hd: diag,
                hd95: diag,
                degenerate: true,
            });
        }
        _ => {}
    }
    let to_g = squared_distance_transform(g);
    let to_p = squared_distance_transform(p);
    let mut pooled: Vec<f64> = p
        .data()
        .iter()
        .zip(&to_g)
        .filter(|(&on, _)| on)
        .chain(g.data().iter().zip(&to_p).filter(|(&on, _)| on))
        .map(|(_, &d2)| d2.sqrt() * spacing)
        .collect();
    pooled.sort_by(f64::total_cmp);
    Ok(Hausdorff {
        hd: *pooled.last().expect("both masks non-empty"),
        hd95: percentile_linear(&pooled, 0.95),
        degenerate: false,
    })
}

/// Per-class scores of one sample; index `i` holds foreground class `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub id: String,
    pub dsc: Vec<f64>,
    pub hd: Vec<f64>,
    pub hd95: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// Scores every foreground class of `pred` against `truth`.
pub fn evaluate_labels(pred: &LabelMap, truth: &LabelMap, spacing: f64, id: &str) -> Result<MetricsRecord> {
    ensure_same_dims("evaluate", pred.dims(), truth.dims())?;
    if pred.num_classes() != truth.num_classes() {
        return Err(Error::invalid("prediction and truth disagree on class count"));
    }
    let mut rec = MetricsRecord {
        id: id.to_string(),
        dsc: Vec::new(),
        hd: Vec::new(),
        hd95: Vec::new(),
        degenerate: Vec::new(),
    };
    for c in 1..truth.num_classes() {
        let (p, g) = (pred.class_mask(c), truth.class_mask(c));
        let hd = hausdorff(&p, &g, spacing)?;
        rec.dsc.push(dice(&p, &g)?);
        rec.hd.push(hd.hd);
        rec.hd95.push(hd.hd95);
        rec.degenerate.push(hd.degenerate);
    }
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Arithmetic mean and population standard deviation.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("cannot summarise an empty list"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub dsc: MeanStd,
    pub hd: MeanStd,
    pub hd95: MeanStd,
    pub degenerate_count: usize,
}

/// Table-shaped summary: one column per foreground class plus "Mean".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub num_samples: usize,
    pub classes: Vec<ColumnSummary>,
    /// Class-averaged column: the mean is the average of the class means,
    /// the std is taken over per-sample class averages.
    pub mean: ColumnSummary,
}

/// Display names for foreground classes; cardiac-style names for the default
/// four-class layout.
pub fn class_names(num_classes: usize) -> Vec<String> {
    if num_classes == 4 {
        return vec!["RV".into(), "Myo".into(), "LV".into()];
    }
    (1..num_classes).map(|c| format!("class{c}")).collect()
}

pub fn aggregate(records: &[MetricsRecord]) -> Result<Aggregate> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("no records to aggregate"))?;
    let nc = first.dsc.len();
    if records
        .iter()
        .any(|r| r.dsc.len() != nc || r.hd.len() != nc || r.hd95.len() != nc)
    {
        return Err(Error::invalid("records disagree on class count"));
    }
    let names = class_names(nc + 1);
    let column = |pick: &dyn Fn(&MetricsRecord) -> &Vec<f64>, c: usize| -> Result<MeanStd> {
        MeanStd::of(&records.iter().map(|r| pick(r)[c]).collect::<Vec<_>>())
    };
    let classes = (0..nc)
        .map(|c| {
            Ok(ColumnSummary {
                name: names[c].clone(),
                dsc: column(&|r| &r.dsc, c)?,
                hd: column(&|r| &r.hd, c)?,
                hd95: column(&|r| &r.hd95, c)?,
                degenerate_count: records.iter().filter(|r| r.degenerate[c]).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_col =
        |pick: &dyn Fn(&MetricsRecord) -> &Vec<f64>, per_class: &dyn Fn(&ColumnSummary) -> f64| -> Result<MeanStd> {
            let per_sample: Vec<f64> = records
                .iter()
                .map(|r| pick(r).iter().sum::<f64>() / nc.max(1) as f64)
                .collect();
            let std = MeanStd::of(&per_sample)?.std;
            let mean = classes.iter().map(per_class).sum::<f64>() / nc.max(1) as f64;
            Ok(MeanStd { mean, std })
        };
    let mean = ColumnSummary {
        name: "Mean".into(),
        dsc: mean_col(&|r| &r.dsc, &|c| c.dsc.mean)?,
        hd: mean_col(&|r| &r.hd, &|c| c.hd.mean)?,
        hd95: mean_col(&|r| &r.hd95, &|c| c.hd95.mean)?,
        degenerate_count: classes.iter().map(|c| c.degenerate_count).sum(),
    };
    Ok(Aggregate {
        num_samples: records.len(),
        classes,
        mean,
    })
}

impl Aggregate {
    /// Plain-text table: `DSC(%) (std)` and `HD95 (std)` per column.
    pub fn render_table(&self) -> String {
        let cols: Vec<&ColumnSummary> = self.classes.iter().chain(std::iter::once(&self.mean)).collect();
        let mut head = String::from("| metric ");
        let mut dsc = String::from("| DSC(%) ");
        let mut hd95 = String::from("| HD95   ");
        for c in &cols {
            head.push_str(&format!("| {:>16} ", c.name));
            dsc.push_str(&format!(
                "| {:>16} ",
                format!("{:.2}({:.2})", 100.0 * c.dsc.mean, c.dsc.std)
            ));
            hd95.push_str(&format!("| {:>16} ", format!("{:.2}({:.2})", c.hd95.mean, c.hd95.std)));
        }
        format!("{head}|\n{dsc}|\n{hd95}|\n")
    }
}
