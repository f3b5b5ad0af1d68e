//! Exhaustive generation of trivalent diagrams of a given degree.

use crate::diagram::{canonical_form, Chord, Parity, TrivalentDiagram};
use crate::error::{Error, Result};
use rayon::prelude::*;
use std::collections::BTreeSet;

pub const MAX_ENUMERATION_DEGREE: usize = 5;

/// Canonical keys of all connected diagrams of degree `n` (self-loops excluded,
/// degenerate diagrams such as isolated or parallel chords included).
///
/// Ordered by decreasing number of interval vertices, then by chord list.
pub fn enumerate_diagrams(n: usize, parity: Parity) -> Result<Vec<TrivalentDiagram>> {
    if n == 0 || n > MAX_ENUMERATION_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree: n,
            max: MAX_ENUMERATION_DEGREE,
        });
    }
    let splits: Vec<(usize, usize)> = (1..=2 * n)
        .rev()
        .map(|k| (k, 2 * n - k))
        .filter(|&(k, s)| (k + 3 * s) % 2 == 0)
        .collect();
    let per_split: Vec<Vec<TrivalentDiagram>> = splits
        .par_iter()
        .map(|&(k, s)| enumerate_split(k, s, parity))
        .collect();
    Ok(per_split.into_iter().flatten().collect())
}

/// Keys with exactly `k` interval and `s` free vertices.
pub fn enumerate_split(k: usize, s: usize, parity: Parity) -> Vec<TrivalentDiagram> {
    let nv = k + s;
    let mut stubs: Vec<usize> = (0..nv).map(|v| if v < k { 1 } else { 3 }).collect();
    let mut chords = Vec::new();
    let mut found: BTreeSet<Vec<Chord>> = BTreeSet::new();
    let mut state = Gen {
        k,
        s,
        parity,
        found: &mut found,
    };
    state.extend(&mut stubs, &mut chords, 0, 0, 0);
    found
        .into_iter()
        .map(|c| {
            let labels = match parity {
                Parity::Odd => Vec::new(),
                Parity::Even => (1..=c.len()).collect(),
            };
            TrivalentDiagram::from_parts(k, s, parity, c, labels)
        })
        .collect()
}

struct Gen<'a> {
    k: usize,
    s: usize,
    parity: Parity,
    found: &'a mut BTreeSet<Vec<Chord>>,
}

impl Gen<'_> {
    /// Pairs stubs: the lowest vertex with open stubs connects to partners in
    /// nondecreasing order; untouched free vertices are entered lowest first.
    fn extend(
        &mut self,
        stubs: &mut Vec<usize>,
        chords: &mut Vec<Chord>,
        touched_free: usize,
        current: usize,
        min_partner: usize,
    ) {
        let nv = self.k + self.s;
        let Some(v) = (current..nv).find(|&v| stubs[v] > 0) else {
            let d = TrivalentDiagram::from_parts(
                self.k,
                self.s,
                self.parity,
                chords.clone(),
                match self.parity {
                    Parity::Odd => Vec::new(),
                    Parity::Even => (1..=chords.len()).collect(),
                },
            );
            if d.is_connected() {
                self.found.insert(canonical_form(&d).key.chords().to_vec());
            }
            return;
        };
        let lower = if v == current { min_partner.max(v + 1) } else { v + 1 };
        let frontier = self.k + touched_free;
        for w in lower..nv {
            if stubs[w] == 0 {
                continue;
            }
            let fresh = w >= frontier;
            if fresh && w != frontier {
                // only the lowest untouched free vertex may be entered
                break;
            }
            stubs[v] -= 1;
            stubs[w] -= 1;
            chords.push(Chord::new(v, w));
            let touched = if fresh { touched_free + 1 } else { touched_free };
            // a vertex already left behind must have been touched
            let v_is_touched = v < self.k || v < self.k + touched;
            if v_is_touched {
                self.extend(stubs, chords, touched, v, w);
            }
            chords.pop();
            stubs[v] += 1;
            stubs[w] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_one_has_single_chord() {
        let ds = enumerate_diagrams(1, Parity::Odd).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].chords(), &[Chord::new(0, 1)]);
    }

    #[test]
    fn degree_two_chord_diagrams_are_three_pairings() {
        assert_eq!(enumerate_split(4, 0, Parity::Odd).len(), 3);
    }

    #[test]
    fn degree_zero_rejected() {
        assert!(enumerate_diagrams(0, Parity::Odd).is_err());
    }

    #[test]
    fn enumerated_diagrams_satisfy_invariants() {
        for n in 1..=3 {
            for d in enumerate_diagrams(n, Parity::Odd).unwrap() {
                assert!(d.has_valid_valence(), "{d}");
                assert!(d.is_connected(), "{d}");
                assert!(!d.has_self_loop());
                assert_eq!(d.interval_vertices() + d.free_vertices(), 2 * n);
            }
        }
    }
}
