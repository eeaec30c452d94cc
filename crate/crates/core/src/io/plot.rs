use std::fmt::Write;

use crate::dsp::RfdmSequence;
use crate::error::{Error, Result};
use crate::model::EpochStats;

fn frame_checked(seq: &RfdmSequence, frame: usize) -> Result<&[f64]> {
    if frame >= seq.n_frames {
        return Err(Error::Index {
            index: frame,
            len: seq.n_frames,
        });
    }
    Ok(seq.frame(frame))
}

/// 8-bit binary PGM of one frame, min-max scaled. Rows are range bins,
/// columns Doppler bins. A constant frame maps to a single gray level (0).
pub fn frame_pgm(seq: &RfdmSequence, frame: usize) -> Result<Vec<u8>> {
    let map = frame_checked(seq, frame)?;
    let lo = map.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", seq.n_doppler, seq.n_range).into_bytes();
    out.extend(map.iter().map(|&v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    Ok(out)
}

/// One frame as CSV: a row per range bin, values printed as f32.
pub fn frame_csv(seq: &RfdmSequence, frame: usize) -> Result<String> {
    let map = frame_checked(seq, frame)?;
    let mut out = String::new();
    for row in map.chunks(seq.n_doppler.max(1)) {
        let cells: Vec<String> = row.iter().map(|&v| (v as f32).to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Square count matrix with a header row of class names; rows are true classes.
pub fn confusion_csv(names: &[&str], counts: &[Vec<u64>]) -> Result<String> {
    if counts.len() != names.len() || counts.iter().any(|r| r.len() != names.len()) {
        return Err(Error::Shape {
            op: "confusion csv",
            expected: vec![names.len(), names.len()],
            got: vec![counts.len(), counts.first().map_or(0, Vec::len)],
        });
    }
    let mut out = String::from("true\\predicted");
    for n in names {
        write!(out, ",{n}").expect("writing to a String");
    }
    out.push('\n');
    for (name, row) in names.iter().zip(counts) {
        out.push_str(name);
        for c in row {
            write!(out, ",{c}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn curve_csv(curve: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_acc\n");
    for e in curve {
        writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_acc).expect("writing to a String");
    }
    out
}
