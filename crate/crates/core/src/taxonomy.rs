//! The 100-way triplet vocabulary and its projection onto components.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const NUM_INSTRUMENTS: usize = 6;
pub const NUM_VERBS: usize = 10;
pub const NUM_TARGETS: usize = 15;
pub const NUM_TRIPLETS: usize = 100;
/// Instrument-verb pairs, indexed `i * NUM_VERBS + v`.
pub const NUM_IV: usize = NUM_INSTRUMENTS * NUM_VERBS;
/// Instrument-target pairs, indexed `i * NUM_TARGETS + t`.
pub const NUM_IT: usize = NUM_INSTRUMENTS * NUM_TARGETS;

const DEFAULT_TAXONOMY: &str = include_str!("../data/taxonomy.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub instrument: usize,
    pub verb: usize,
    pub target: usize,
}

impl Triplet {
    pub fn iv(&self) -> usize {
        self.instrument * NUM_VERBS + self.verb
    }

    pub fn it(&self) -> usize {
        self.instrument * NUM_TARGETS + self.target
    }
}

/// Total, injective map from triplet ids `0..100` to component indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletTaxonomy {
    triplets: Vec<Triplet>,
    instrument_names: Vec<String>,
    verb_names: Vec<String>,
    target_names: Vec<String>,
}

impl Default for TripletTaxonomy {
    fn default() -> Self {
        TripletTaxonomy::parse(DEFAULT_TAXONOMY, "taxonomy.csv").expect("bundled taxonomy is valid")
    }
}

fn name_slot(
    names: &mut [Option<String>],
    idx: usize,
    name: &str,
    kind: &str,
    line: usize,
    src: &str,
) -> Result<()> {
    match &names[idx] {
        Some(existing) if existing != name => Err(Error::parse(
            src,
            line,
            format!("{kind} {idx} named both {existing:?} and {name:?}"),
        )),
        _ => {
            names[idx] = Some(name.to_string());
            Ok(())
        }
    }
}

impl TripletTaxonomy {
    /// Parses `triplet,instrument,verb,target,instrument_name,verb_name,target_name` rows.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut slots: Vec<Option<Triplet>> = vec![None; NUM_TRIPLETS];
        let mut inames: Vec<Option<String>> = vec![None; NUM_INSTRUMENTS];
        let mut vnames: Vec<Option<String>> = vec![None; NUM_VERBS];
        let mut tnames: Vec<Option<String>> = vec![None; NUM_TARGETS];
        let mut seen = HashSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
            if fields.len() != 7 {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("expected 7 fields, found {}", fields.len()),
                ));
            }
            let num = |k: usize, bound: usize, what: &str| -> Result<usize> {
                let v: usize = fields[k].parse().map_err(|_| {
                    Error::parse(
                        source_name,
                        line,
                        format!("{what} {:?} is not an index", fields[k]),
                    )
                })?;
                if v >= bound {
                    return Err(Error::parse(
                        source_name,
                        line,
                        format!("{what} {v} out of range 0..{bound}"),
                    ));
                }
                Ok(v)
            };
            let id = num(0, NUM_TRIPLETS, "triplet")?;
            let t = Triplet {
                instrument: num(1, NUM_INSTRUMENTS, "instrument")?,
                verb: num(2, NUM_VERBS, "verb")?,
                target: num(3, NUM_TARGETS, "target")?,
            };
            if slots[id].is_some() {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("triplet {id} defined twice"),
                ));
            }
            if !seen.insert(t) {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("triplet {id} duplicates the tuple {t:?}"),
                ));
            }
            for (k, name) in [(4, "instrument"), (5, "verb"), (6, "target")] {
                if fields[k].is_empty() {
                    return Err(Error::parse(
                        source_name,
                        line,
                        format!("empty {name} name"),
                    ));
                }
            }
            name_slot(
                &mut inames,
                t.instrument,
                fields[4],
                "instrument",
                line,
                source_name,
            )?;
            name_slot(&mut vnames, t.verb, fields[5], "verb", line, source_name)?;
            name_slot(
                &mut tnames,
                t.target,
                fields[6],
                "target",
                line,
                source_name,
            )?;
            slots[id] = Some(t);
        }

        let missing: Vec<usize> = (0..NUM_TRIPLETS).filter(|&k| slots[k].is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::parse(
                source_name,
                0,
                format!("triplet ids missing: {missing:?}"),
            ));
        }
        let fill = |names: Vec<Option<String>>, kind: &str| -> Vec<String> {
            names
                .into_iter()
                .enumerate()
                .map(|(i, n)| n.unwrap_or_else(|| format!("{kind}_{i}")))
                .collect()
        };
        Ok(TripletTaxonomy {
            triplets: slots.into_iter().map(|s| s.expect("checked")).collect(),
            instrument_names: fill(inames, "instrument"),
            verb_names: fill(vnames, "verb"),
            target_names: fill(tnames, "target"),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, t) in self.triplets.iter().enumerate() {
            out.push_str(&format!(
                "{k},{},{},{},{},{},{}\n",
                t.instrument,
                t.verb,
                t.target,
                self.instrument_names[t.instrument],
                self.verb_names[t.verb],
                self.target_names[t.target]
            ));
        }
        out
    }

    pub fn triplet(&self, k: usize) -> Triplet {
        self.triplets[k]
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn find(&self, t: Triplet) -> Option<usize> {
        self.triplets.iter().position(|&x| x == t)
    }

    pub fn instrument_names(&self) -> &[String] {
        &self.instrument_names
    }

    pub fn verb_names(&self) -> &[String] {
        &self.verb_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn triplet_name(&self, k: usize) -> String {
        let t = self.triplets[k];
        format!(
            "{}:{}:{}",
            self.instrument_names[t.instrument],
            self.verb_names[t.verb],
            self.target_names[t.target]
        )
    }

    /// Hex SHA-256 of the canonical text form; checkpoints carry it.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
