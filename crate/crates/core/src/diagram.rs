//! Decorated trivalent diagrams on an oriented interval.
//!
//! Vertices `0..k` are interval vertices in their order along the interval;
//! vertices `k..k+s` are free (trivalent) vertices. Each chord is an ordered
//! pair `tail -> head`. In even parity every chord additionally carries a
//! label, and the labels form a permutation of `1..=chords`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Odd => "odd",
            Parity::Even => "even",
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odd" | "o" => Ok(Parity::Odd),
            "even" | "e" => Ok(Parity::Even),
            other => Err(Error::InvalidInput(format!("unknown parity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Chord {
    pub tail: usize,
    pub head: usize,
}

impl Chord {
    pub fn new(tail: usize, head: usize) -> Self {
        Chord { tail, head }
    }

    pub fn reversed(self) -> Self {
        Chord {
            tail: self.head,
            head: self.tail,
        }
    }

    pub fn is_loop(self) -> bool {
        self.tail == self.head
    }

    pub fn touches(self, v: usize) -> bool {
        self.tail == v || self.head == v
    }

    /// The endpoint opposite `v`.
    pub fn other(self, v: usize) -> usize {
        if self.tail == v {
            self.head
        } else {
            self.tail
        }
    }

    fn normalized(self) -> (usize, usize) {
        (self.tail.min(self.head), self.tail.max(self.head))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrivalentDiagram {
    k: usize,
    s: usize,
    parity: Parity,
    chords: Vec<Chord>,
    /// Chord labels (even parity only), 1-based.
    labels: Vec<usize>,
}

impl TrivalentDiagram {
    /// Builds a diagram, checking only that indices are in range and labels
    /// form a permutation. Valence is checked by [`TrivalentDiagram::validate`].
    pub fn new(
        k: usize,
        s: usize,
        parity: Parity,
        chords: Vec<Chord>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let nv = k + s;
        if chords.iter().any(|c| c.tail >= nv || c.head >= nv) {
            return Err(Error::InvalidInput("chord endpoint out of range".into()));
        }
        let labels = match (parity, labels) {
            (Parity::Odd, None) => Vec::new(),
            (Parity::Odd, Some(l)) if l.is_empty() => Vec::new(),
            (Parity::Odd, Some(_)) => {
                return Err(Error::InvalidInput("odd-parity diagrams carry no chord labels".into()))
            }
            (Parity::Even, None) => (1..=chords.len()).collect(),
            (Parity::Even, Some(l)) => {
                let mut sorted = l.clone();
                sorted.sort_unstable();
                if sorted != (1..=chords.len()).collect::<Vec<_>>() {
                    return Err(Error::InvalidInput("chord labels must be a permutation".into()));
                }
                l
            }
        };
        Ok(TrivalentDiagram {
            k,
            s,
            parity,
            chords,
            labels,
        })
    }

    /// The degree-1 diagram: two interval vertices and one chord.
    pub fn single_chord(parity: Parity) -> Self {
        Self::new(2, 0, parity, vec![Chord::new(0, 1)], None).expect("valid")
    }

    /// A pure chord diagram on `2 * pairs.len()` interval vertices.
    pub fn chord_diagram(parity: Parity, pairs: &[(usize, usize)]) -> Result<Self> {
        let chords = pairs.iter().map(|&(a, b)| Chord::new(a, b)).collect();
        Self::new(2 * pairs.len(), 0, parity, chords, None)
    }

    pub fn degree(&self) -> usize {
        (self.k + self.s) / 2
    }

    pub fn interval_vertices(&self) -> usize {
        self.k
    }

    pub fn free_vertices(&self) -> usize {
        self.s
    }

    pub fn vertex_count(&self) -> usize {
        self.k + self.s
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn chords(&self) -> &[Chord] {
        &self.chords
    }

    /// Chord labels; empty in odd parity.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn is_interval(&self, v: usize) -> bool {
        v < self.k
    }

    pub fn is_free(&self, v: usize) -> bool {
        v >= self.k && v < self.k + self.s
    }

    /// Number of chord ends at each vertex (a loop counts twice).
    pub fn valences(&self) -> Vec<usize> {
        let mut val = vec![0; self.vertex_count()];
        for c in &self.chords {
            val[c.tail] += 1;
            val[c.head] += 1;
        }
        val
    }

    pub fn has_valid_valence(&self) -> bool {
        (self.k + self.s) % 2 == 0
            && self
                .valences()
                .iter()
                .enumerate()
                .all(|(v, &d)| if self.is_interval(v) { d == 1 } else { d == 3 })
    }

    /// Connected once the interval itself is counted as joining all interval vertices.
    pub fn is_connected(&self) -> bool {
        let nv = self.vertex_count();
        if nv == 0 || self.k == 0 {
            return false;
        }
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let union = |p: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(p, a), find(p, b));
            if ra != rb {
                p[ra] = rb;
            }
        };
        for i in 1..self.k {
            union(&mut parent, 0, i);
        }
        for c in &self.chords {
            union(&mut parent, c.tail, c.head);
        }
        let root = find(&mut parent, 0);
        (0..nv).all(|v| find(&mut parent, v) == root)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.has_valid_valence() {
            return Err(Error::InvalidInput("valence invariant violated".into()));
        }
        if !self.is_connected() {
            return Err(Error::InvalidInput("diagram is not connected".into()));
        }
        Ok(())
    }

    pub fn has_self_loop(&self) -> bool {
        self.chords.iter().any(|c| c.is_loop())
    }

    pub fn has_double_chord(&self) -> bool {
        let mut seen: Vec<(usize, usize)> = self.chords.iter().map(|c| c.normalized()).collect();
        seen.sort_unstable();
        seen.windows(2).any(|w| w[0] == w[1])
    }

    /// A chord joining interval vertices `i` and `i + 1`.
    pub fn has_isolated_chord(&self) -> bool {
        self.chords.iter().any(|c| {
            let (a, b) = c.normalized();
            b < self.k && b == a + 1
        })
    }

    /// Chords incident to `v`, as indices into [`Self::chords`].
    pub fn incident(&self, v: usize) -> Vec<usize> {
        self.chords
            .iter()
            .enumerate()
            .filter(|(_, c)| c.touches(v))
            .map(|(i, _)| i)
            .collect()
    }

    /// Concatenation along the interval: `self` first, then `other`.
    pub fn product(&self, other: &TrivalentDiagram) -> Result<TrivalentDiagram> {
        if self.parity != other.parity {
            return Err(Error::InvalidInput("product of diagrams of different parity".into()));
        }
        let (k1, s1, k2) = (self.k, self.s, other.k);
        let k = k1 + k2;
        let map1 = |v: usize| if v < k1 { v } else { k + (v - k1) };
        let map2 = |v: usize| if v < k2 { k1 + v } else { k + s1 + (v - k2) };
        let mut chords: Vec<Chord> = self
            .chords
            .iter()
            .map(|c| Chord::new(map1(c.tail), map1(c.head)))
            .collect();
        chords.extend(other.chords.iter().map(|c| Chord::new(map2(c.tail), map2(c.head))));
        let labels = match self.parity {
            Parity::Odd => None,
            Parity::Even => {
                let shift = self.chords.len();
                let mut l = self.labels.clone();
                l.extend(other.labels.iter().map(|x| x + shift));
                Some(l)
            }
        };
        TrivalentDiagram::new(k, self.s + other.s, self.parity, chords, labels)
    }

    /// Stable text encoding `n;k;s;parity;chords=(i>j,...);labels=(...)`, 1-based vertices.
    pub fn encode(&self) -> String {
        let chords: Vec<String> = self
            .chords
            .iter()
            .map(|c| format!("{}>{}", c.tail + 1, c.head + 1))
            .collect();
        let labels: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        format!(
            "{};{};{};{};chords=({});labels=({})",
            self.degree(),
            self.k,
            self.s,
            self.parity.as_str(),
            chords.join(","),
            labels.join(",")
        )
    }

    pub fn decode(text: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("malformed diagram encoding `{text}`"));
        let parts: Vec<&str> = text.trim().split(';').collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let n: usize = parts[0].parse().map_err(|_| bad())?;
        let k: usize = parts[1].parse().map_err(|_| bad())?;
        let s: usize = parts[2].parse().map_err(|_| bad())?;
        let parity: Parity = parts[3].parse()?;
        let inner = |p: &str, prefix: &str| -> Result<Vec<String>> {
            let body = p
                .strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(bad)?;
            Ok(if body.is_empty() {
                Vec::new()
            } else {
                body.split(',').map(str::to_owned).collect()
            })
        };
        let mut chords = Vec::new();
        for c in inner(parts[4], "chords=")? {
            let (a, b) = c.split_once('>').ok_or_else(bad)?;
            let a: usize = a.parse().map_err(|_| bad())?;
            let b: usize = b.parse().map_err(|_| bad())?;
            if a == 0 || b == 0 {
                return Err(bad());
            }
            chords.push(Chord::new(a - 1, b - 1));
        }
        let labels: Vec<usize> = inner(parts[5], "labels=")?
            .iter()
            .map(|l| l.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let d = TrivalentDiagram::new(
            k,
            s,
            parity,
            chords,
            if labels.is_empty() { None } else { Some(labels) },
        )?;
        if d.degree() != n || (k + s) != 2 * n {
            return Err(bad());
        }
        Ok(d)
    }

    pub(crate) fn from_parts(k: usize, s: usize, parity: Parity, chords: Vec<Chord>, labels: Vec<usize>) -> Self {
        TrivalentDiagram {
            k,
            s,
            parity,
            chords,
            labels,
        }
    }
}

impl fmt::Display for TrivalentDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

/// Result of normalizing a decorated diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonical {
    pub key: TrivalentDiagram,
    /// Sign relating the input to `key` under the decoration rules; 0 when the
    /// diagram equals its own negative (or is degenerate).
    pub sign: i8,
    /// Same relation under the orientation convention used by the integrals,
    /// in which reversing any chord (interval-interval ones included) flips the sign.
    pub geometric_sign: i8,
    /// Order of the automorphism group (free-vertex relabelings and parallel-chord swaps).
    pub automorphisms: usize,
}

/// Canonical representative under free-vertex relabeling, chord reorientation
/// and (even parity) chord relabeling.
///
/// The key orients every chord from its smaller to its larger vertex index,
/// sorts the chords, and numbers the labels in sorted order. Among free-vertex
/// orders that are compatible with colour refinement the lexicographically
/// smallest chord list wins.
pub fn canonical_form(d: &TrivalentDiagram) -> Canonical {
    let k = d.k;
    let s = d.s;
    let classes = refined_free_classes(d);

    let mut best: Option<Vec<(usize, usize)>> = None;
    let mut best_perms: Vec<Vec<usize>> = Vec::new();
    let mut perm = vec![usize::MAX; s];
    let mut used = vec![false; s];
    // Enumerate orders class by class: positions of class i precede those of class i+1.
    let mut slots: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut start = 0;
    for class in &classes {
        slots.push((start, class.clone()));
        start += class.len();
    }
    search_orders(
        d,
        &slots,
        0,
        0,
        &mut perm,
        &mut used,
        &mut best,
        &mut best_perms,
    );
    let encoding = best.unwrap_or_default();

    let chords: Vec<Chord> = encoding.iter().map(|&(a, b)| Chord::new(a, b)).collect();
    let labels = match d.parity {
        Parity::Odd => Vec::new(),
        Parity::Even => (1..=chords.len()).collect(),
    };
    let key = TrivalentDiagram::from_parts(k, s, d.parity, chords, labels);

    let mut parallel = 1usize;
    {
        let mut i = 0;
        while i < encoding.len() {
            let mut j = i;
            while j < encoding.len() && encoding[j] == encoding[i] {
                j += 1;
            }
            parallel *= factorial(j - i);
            i = j;
        }
    }
    let automorphisms = best_perms.len() * parallel;

    if d.has_self_loop() {
        return Canonical {
            key,
            sign: 0,
            geometric_sign: 0,
            automorphisms,
        };
    }
    if d.parity == Parity::Even && d.has_double_chord() {
        // swapping the labels of two parallel chords negates the diagram
        return Canonical {
            key,
            sign: 0,
            geometric_sign: 0,
            automorphisms,
        };
    }

    let signs: Vec<(i8, i8)> = best_perms
        .iter()
        .map(|p| decoration_sign(d, p, &encoding))
        .collect();
    let (sign, geometric_sign) = signs[0];
    let consistent = signs.iter().all(|&x| x == signs[0]);
    if consistent {
        Canonical {
            key,
            sign,
            geometric_sign,
            automorphisms,
        }
    } else {
        Canonical {
            key,
            sign: 0,
            geometric_sign: 0,
            automorphisms,
        }
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Sign of `d` relative to the key reached through free-vertex map `perm`
/// (`perm[j]` = new position of free vertex `k + j`).
fn decoration_sign(d: &TrivalentDiagram, perm: &[usize], encoding: &[(usize, usize)]) -> (i8, i8) {
    let k = d.k;
    let relabel = |v: usize| if v < k { v } else { k + perm[v - k] };
    let mut free_end_reversals = 0usize;
    let mut all_reversals = 0usize;
    let mut mapped: Vec<(usize, usize)> = Vec::with_capacity(d.chords.len());
    for c in &d.chords {
        let (a, b) = (relabel(c.tail), relabel(c.head));
        if a > b {
            all_reversals += 1;
            if a >= k || b >= k {
                free_end_reversals += 1;
            }
        }
        mapped.push((a.min(b), a.max(b)));
    }
    match d.parity {
        Parity::Odd => {
            let vperm = permutation_sign(perm);
            let algebraic = vperm * parity_sign(free_end_reversals);
            let geometric = vperm * parity_sign(all_reversals);
            (algebraic, geometric)
        }
        Parity::Even => {
            // chord with label L in d lands at sorted position p; the key labels that chord p+1
            let mut order: Vec<usize> = (0..mapped.len()).collect();
            order.sort_by_key(|&i| (mapped[i], d.labels[i]));
            debug_assert!(order.iter().map(|&i| mapped[i]).eq(encoding.iter().copied()));
            // permutation sending old label -> new label
            let mut label_map = vec![0usize; mapped.len()];
            for (newpos, &i) in order.iter().enumerate() {
                label_map[d.labels[i] - 1] = newpos;
            }
            let sign = permutation_sign(&label_map) * parity_sign(free_end_reversals);
            (sign, sign)
        }
    }
}

pub(crate) fn parity_sign(count: usize) -> i8 {
    if count % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign of a permutation given as an image vector.
pub fn permutation_sign(p: &[usize]) -> i8 {
    let mut seen = vec![false; p.len()];
    let mut transpositions = 0;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        transpositions += len - 1;
    }
    parity_sign(transpositions)
}

#[allow(clippy::too_many_arguments)]
fn search_orders(
    d: &TrivalentDiagram,
    slots: &[(usize, Vec<usize>)],
    slot: usize,
    offset: usize,
    perm: &mut Vec<usize>,
    used: &mut Vec<bool>,
    best: &mut Option<Vec<(usize, usize)>>,
    best_perms: &mut Vec<Vec<usize>>,
) {
    if slot == slots.len() {
        let enc = encode_with(d, perm);
        match best {
            Some(b) if enc > *b => {}
            Some(b) if enc == *b => best_perms.push(perm.clone()),
            _ => {
                *best = Some(enc);
                best_perms.clear();
                best_perms.push(perm.clone());
            }
        }
        return;
    }
    let (start, members) = &slots[slot];
    if offset == members.len() {
        search_orders(d, slots, slot + 1, 0, perm, used, best, best_perms);
        return;
    }
    for &m in members {
        let j = m - d.k;
        if used[j] {
            continue;
        }
        used[j] = true;
        perm[j] = start + offset;
        search_orders(d, slots, slot, offset + 1, perm, used, best, best_perms);
        used[j] = false;
    }
}

fn encode_with(d: &TrivalentDiagram, perm: &[usize]) -> Vec<(usize, usize)> {
    let k = d.k;
    let relabel = |v: usize| if v < k { v } else { k + perm[v - k] };
    let mut enc: Vec<(usize, usize)> = d
        .chords
        .iter()
        .map(|c| {
            let (a, b) = (relabel(c.tail), relabel(c.head));
            (a.min(b), a.max(b))
        })
        .collect();
    enc.sort_unstable();
    enc
}

/// Free vertices grouped into colour classes by iterated neighbourhood refinement,
/// classes listed in canonical colour order.
fn refined_free_classes(d: &TrivalentDiagram) -> Vec<Vec<usize>> {
    let nv = d.vertex_count();
    let k = d.k;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for c in &d.chords {
        adj[c.tail].push(c.head);
        adj[c.head].push(c.tail);
    }
    let mut color: Vec<usize> = (0..nv).map(|v| if v < k { v } else { k }).collect();
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..nv)
            .map(|v| {
                let mut ns: Vec<usize> = adj[v].iter().map(|&u| color[u]).collect();
                ns.sort_unstable();
                (color[v], ns)
            })
            .collect();
        let mut distinct = sigs.clone();
        distinct.sort();
        distinct.dedup();
        let next: Vec<usize> = sigs
            .iter()
            .map(|s| distinct.binary_search(s).expect("present"))
            .collect();
        let before = {
            let mut c = color.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        if distinct.len() == before {
            break;
        }
        color = next;
    }
    let mut classes: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in k..nv {
        classes.entry(color[v]).or_default().push(v);
    }
    classes.into_values().collect()
}
