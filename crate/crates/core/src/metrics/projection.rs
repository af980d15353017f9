use crate::labels::LabelVector;
use crate::taxonomy::{TripletTaxonomy, NUM_INSTRUMENTS, NUM_IT, NUM_IV, NUM_TARGETS, NUM_VERBS};

/// Per-head score vectors derived from 100 triplet scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentScores {
    pub instrument: Vec<f64>,
    pub verb: Vec<f64>,
    pub target: Vec<f64>,
    pub iv: Vec<f64>,
    pub it: Vec<f64>,
}

/// Each component or pair scores the maximum over the triplets that contain
/// it, or 0 when no triplet does.
pub fn project_components(triplet_scores: &[f64], tax: &TripletTaxonomy) -> ComponentScores {
    let mut slots = [
        vec![None; NUM_INSTRUMENTS],
        vec![None; NUM_VERBS],
        vec![None; NUM_TARGETS],
        vec![None; NUM_IV],
        vec![None; NUM_IT],
    ];
    for (k, &s) in triplet_scores.iter().enumerate() {
        let t = tax.triplet(k);
        for (slot, idx) in slots
            .iter_mut()
            .zip([t.instrument, t.verb, t.target, t.iv(), t.it()])
        {
            slot[idx] = Some(slot[idx].map_or(s, |m: f64| m.max(s)));
        }
    }
    let [instrument, verb, target, iv, it] =
        slots.map(|v| v.into_iter().map(|s| s.unwrap_or(0.0)).collect());
    ComponentScores {
        instrument,
        verb,
        target,
        iv,
        it,
    }
}

/// Instrument-verb and instrument-target presence implied by the active triplets.
pub fn pair_labels(label: &LabelVector, tax: &TripletTaxonomy) -> (Vec<u8>, Vec<u8>) {
    let mut iv = vec![0; NUM_IV];
    let mut it = vec![0; NUM_IT];
    for k in label.active_triplets() {
        let t = tax.triplet(k);
        iv[t.iv()] = 1;
        it[t.it()] = 1;
    }
    (iv, it)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::NUM_TRIPLETS;

    #[test]
    fn single_active_triplet_propagates() {
        let tax = TripletTaxonomy::default();
        let mut s = vec![0.0; NUM_TRIPLETS];
        s[17] = 0.4;
        let p = project_components(&s, &tax);
        let t = tax.triplet(17);
        assert_eq!(
            (
                p.instrument[t.instrument],
                p.verb[t.verb],
                p.target[t.target],
                p.iv[t.iv()],
                p.it[t.it()]
            ),
            (0.4, 0.4, 0.4, 0.4, 0.4)
        );
    }

    #[test]
    fn shared_instrument_takes_max() {
        let tax = TripletTaxonomy::default();
        let mut s = vec![0.0; NUM_TRIPLETS];
        // both grasper triplets
        s[1] = 0.3;
        s[7] = 0.7;
        assert_eq!(project_components(&s, &tax).instrument[0], 0.7);
    }

    #[test]
    fn absent_pairs_score_zero() {
        let tax = TripletTaxonomy::default();
        let p = project_components(&vec![0.9; NUM_TRIPLETS], &tax);
        let present: std::collections::HashSet<usize> =
            tax.triplets().iter().map(|t| t.iv()).collect();
        for (i, &v) in p.iv.iter().enumerate() {
            assert_eq!(v, if present.contains(&i) { 0.9 } else { 0.0 });
        }
    }
}
