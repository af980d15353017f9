//! Per-frame presence labels and the plain-text label file format.
//!
//! A label file holds one record per line: the frame index followed by 100
//! comma-separated `0`/`1` triplet flags. No header, ASCII only.

use crate::error::{Error, Result};
use crate::taxonomy::{TripletTaxonomy, NUM_INSTRUMENTS, NUM_TARGETS, NUM_TRIPLETS, NUM_VERBS};

/// Binary presence vectors; component vectors are the taxonomy projection
/// of the triplet vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector {
    pub triplet: Vec<u8>,
    pub instrument: Vec<u8>,
    pub verb: Vec<u8>,
    pub target: Vec<u8>,
}

impl LabelVector {
    pub fn from_triplets(flags: &[u8], tax: &TripletTaxonomy) -> Result<Self> {
        if flags.len() != NUM_TRIPLETS {
            return Err(Error::Data(format!(
                "expected {NUM_TRIPLETS} triplet flags, found {}",
                flags.len()
            )));
        }
        if let Some(bad) = flags.iter().find(|&&f| f > 1) {
            return Err(Error::Data(format!("triplet flag {bad} is not binary")));
        }
        let mut lv = LabelVector {
            triplet: flags.to_vec(),
            instrument: vec![0; NUM_INSTRUMENTS],
            verb: vec![0; NUM_VERBS],
            target: vec![0; NUM_TARGETS],
        };
        for k in lv.active_triplets() {
            let t = tax.triplet(k);
            lv.instrument[t.instrument] = 1;
            lv.verb[t.verb] = 1;
            lv.target[t.target] = 1;
        }
        Ok(lv)
    }

    pub fn from_active(active: &[usize], tax: &TripletTaxonomy) -> Result<Self> {
        let mut flags = vec![0u8; NUM_TRIPLETS];
        for &k in active {
            if k >= NUM_TRIPLETS {
                return Err(Error::Data(format!("triplet id {k} out of range")));
            }
            flags[k] = 1;
        }
        Self::from_triplets(&flags, tax)
    }

    pub fn active_triplets(&self) -> Vec<usize> {
        (0..self.triplet.len())
            .filter(|&k| self.triplet[k] == 1)
            .collect()
    }

    /// True when the component vectors equal the projection of the triplet vector.
    pub fn is_consistent(&self, tax: &TripletTaxonomy) -> bool {
        LabelVector::from_triplets(&self.triplet, tax).is_ok_and(|p| &p == self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub frame: usize,
    pub label: LabelVector,
}

/// Frame indices must be strictly increasing.
pub fn parse_label_file(
    text: &str,
    source_name: &str,
    tax: &TripletTaxonomy,
) -> Result<Vec<LabelRecord>> {
    let mut out: Vec<LabelRecord> = Vec::new();
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(out);
    }
    for (i, line) in body.split('\n').enumerate() {
        let lineno = i + 1;
        let err = |m: String| Error::parse(source_name, lineno, m);
        if !line.is_ascii() {
            return Err(err("non-ASCII content".into()));
        }
        let mut fields = line.split(',');
        let frame_field = fields.next().unwrap_or("");
        if frame_field.is_empty() || !frame_field.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err(format!(
                "frame index {frame_field:?} is not a non-negative integer"
            )));
        }
        let frame: usize = frame_field
            .parse()
            .map_err(|_| err(format!("frame index {frame_field:?} overflows")))?;
        let mut flags = Vec::with_capacity(NUM_TRIPLETS);
        for f in fields {
            match f {
                "0" => flags.push(0),
                "1" => flags.push(1),
                other => return Err(err(format!("flag {other:?} is not 0 or 1"))),
            }
        }
        if flags.len() != NUM_TRIPLETS {
            return Err(err(format!(
                "expected {NUM_TRIPLETS} flags, found {}",
                flags.len()
            )));
        }
        if let Some(prev) = out.last() {
            if frame <= prev.frame {
                return Err(err(format!(
                    "frame index {frame} does not follow {}",
                    prev.frame
                )));
            }
        }
        let label = LabelVector::from_triplets(&flags, tax).map_err(|e| err(e.to_string()))?;
        out.push(LabelRecord { frame, label });
    }
    Ok(out)
}

pub fn format_label_file(records: &[LabelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.frame.to_string());
        for f in &r.label.triplet {
            out.push(',');
            out.push(if *f == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}
