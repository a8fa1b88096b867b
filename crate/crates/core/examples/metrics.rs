//! Scores a shifted prediction against its ground truth with Dice, HD and
//! HD95 and prints the table-style summary.

use sm2c::data::{gen_phantom, PhantomSpec};
use sm2c::metrics::{aggregate, evaluate_labels};
use sm2c::{LabelMap, RngState};

fn shift_right(lbl: &LabelMap, by: usize) -> sm2c::Result<LabelMap> {
    let (h, w) = lbl.dims();
    let data = (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            if c >= by {
                lbl.get(r, c - by)
            } else {
                0
            }
        })
        .collect();
    LabelMap::new(h, w, data, lbl.num_classes())
}

fn main() -> sm2c::Result<()> {
    let spec = PhantomSpec::default();
    let mut records = Vec::new();
    for i in 0..5 {
        let (_, truth) = gen_phantom(&spec, &mut RngState::new(i))?;
        let pred = shift_right(&truth, 1 + i as usize)?;
        let rec = evaluate_labels(&pred, &truth, 1.0, &format!("slice{i}"))?;
        println!("slice{i}: dsc {:?} hd95 {:?}", rec.dsc, rec.hd95);
        records.push(rec);
    }
    print!("{}", aggregate(&records)?.render_table());
    Ok(())
}
