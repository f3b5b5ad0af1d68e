//! Relations among trivalent diagrams, diagram-space dimensions and weight systems.
//!
//! Columns of every relation matrix are the canonical keys produced by
//! [`enumerate_diagrams`]. Decorated variants never appear as separate
//! columns: [`canonical_form`] maps them onto keys with a sign, so the
//! identification rows are implicit and only self-negating keys get an
//! explicit vanishing row.
//!
//! Odd-parity STU and IHX rows are produced through orientations by cyclic
//! order at free vertices. A decoration (free-vertex order plus chord
//! orientations) determines such an orientation up to the sign of the
//! permutation between the chord-grouped and vertex-grouped orderings of
//! half-edges; see [`orientation_sign`]. In that language a free vertex whose
//! cyclic order is `(root, x, y)` acts as the bracket `[x, y]`, STU reads
//! `S = T - U` with `x` attached to the left, and IHX is the Jacobi identity.

use crate::diagram::{canonical_form, permutation_sign, Chord, Parity, TrivalentDiagram};
use crate::enumerate::enumerate_diagrams;
use crate::error::{Error, Result};
use crate::rational::{primitive_integer_vector, q, Echelon, SparseVec, Q};
use num_traits::Zero;
use serde::Serialize;
use std::collections::HashMap;

/// Why a relation row exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Stu,
    IsolatedChord,
    DoubleChord,
    SelfNegating,
}

/// Options controlling which degenerate diagrams are quotiented out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationOptions {
    /// Impose a vanishing row for every diagram with two parallel chords.
    pub kill_double_chords: bool,
}

impl RelationOptions {
    /// Even parity: parallel chords vanish by the label-swap symmetry anyway.
    /// Odd parity: STU identifies a two-legged bubble with twice the tripod
    /// with adjacent legs, so killing bubbles would kill the whole degree-2
    /// space; parallel chords are kept (their integrals vanish pointwise).
    pub fn for_parity(parity: Parity) -> Self {
        RelationOptions {
            kill_double_chords: parity == Parity::Even,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelationMatrix {
    pub ncols: usize,
    pub rows: Vec<SparseVec>,
    pub kinds: Vec<RowKind>,
}

impl RelationMatrix {
    pub fn rank(&self) -> usize {
        Echelon::from_rows(self.ncols, &self.rows).rank()
    }

    /// Coordinate-format triples `(row, col, value)`.
    pub fn triples(&self) -> Vec<(usize, usize, String)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.entries()
                    .iter()
                    .map(move |(c, v)| (r, *c, v.to_string()))
            })
            .collect()
    }

    pub fn count(&self, kind: RowKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }
}

/// A rational linear functional on the diagrams of one degree and parity.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem {
    pub degree: usize,
    pub parity: Parity,
    /// Coefficient per key, indexed like [`DiagramSpace::keys`].
    pub coefficients: Vec<Q>,
    pub primitive: bool,
}

impl WeightSystem {
    pub fn zero(space: &DiagramSpace) -> Self {
        WeightSystem {
            degree: space.degree,
            parity: space.parity,
            coefficients: vec![Q::zero(); space.keys.len()],
            primitive: true,
        }
    }

    pub fn evaluate(&self, v: &SparseVec) -> Q {
        v.dot_dense(&self.coefficients)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(Zero::is_zero)
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, &Q)> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
    }
}

/// Per-key data for one degree and parity.
#[derive(Debug, Clone)]
pub struct DiagramSpace {
    pub degree: usize,
    pub parity: Parity,
    pub options: RelationOptions,
    pub keys: Vec<TrivalentDiagram>,
    index: HashMap<TrivalentDiagram, usize>,
    /// Automorphism group orders, per key.
    pub automorphisms: Vec<usize>,
    /// Keys equal to their own negative.
    pub self_negating: Vec<bool>,
}

impl DiagramSpace {
    pub fn new(n: usize, parity: Parity) -> Result<Self> {
        Self::with_options(n, parity, RelationOptions::for_parity(parity))
    }

    pub fn with_options(n: usize, parity: Parity, options: RelationOptions) -> Result<Self> {
        let keys = enumerate_diagrams(n, parity)?;
        let index = keys.iter().cloned().enumerate().map(|(i, d)| (d, i)).collect();
        let canon: Vec<_> = keys.iter().map(canonical_form).collect();
        Ok(DiagramSpace {
            degree: n,
            parity,
            options,
            automorphisms: canon.iter().map(|c| c.automorphisms).collect(),
            self_negating: canon.iter().map(|c| c.sign == 0).collect(),
            keys,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn index_of(&self, key: &TrivalentDiagram) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Expresses a decorated diagram in key coordinates, using the decoration
    /// rules (`geometric = false`) or the integral orientation convention.
    pub fn vector_of(&self, d: &TrivalentDiagram, geometric: bool) -> SparseVec {
        let c = canonical_form(d);
        let sign = if geometric { c.geometric_sign } else { c.sign };
        if sign == 0 {
            return SparseVec::new();
        }
        let col = self
            .index_of(&c.key)
            .unwrap_or_else(|| panic!("{} is not an enumerated key", c.key));
        SparseVec::from_entries([(col, q(sign as i64))])
    }

    /// All relation rows: STU instances and vanishing diagrams.
    pub fn relation_matrix(&self) -> RelationMatrix {
        let mut rows = Vec::new();
        let mut kinds = Vec::new();
        for (col, key) in self.keys.iter().enumerate() {
            let unit = || SparseVec::from_entries([(col, q(1))]);
            if key.has_isolated_chord() {
                rows.push(unit());
                kinds.push(RowKind::IsolatedChord);
            }
            if self.options.kill_double_chords && key.has_double_chord() {
                rows.push(unit());
                kinds.push(RowKind::DoubleChord);
            }
            if self.self_negating[col] {
                rows.push(unit());
                kinds.push(RowKind::SelfNegating);
            }
        }
        for row in self.stu_instances() {
            rows.push(row);
            kinds.push(RowKind::Stu);
        }
        RelationMatrix {
            ncols: self.keys.len(),
            rows,
            kinds,
        }
    }

    /// One row per (key, free vertex adjacent to the interval).
    pub fn stu_instances(&self) -> Vec<SparseVec> {
        let mut out = Vec::new();
        for key in &self.keys {
            for (chord_a, u, v) in interval_attachments(key) {
                let row = match self.parity {
                    Parity::Odd => self.stu_odd(key, chord_a, u, v),
                    Parity::Even => self.stu_even(key, chord_a, u, v),
                };
                out.push(row);
            }
        }
        out
    }

    fn stu_odd(&self, s_diag: &TrivalentDiagram, a: usize, u: usize, v: usize) -> SparseVec {
        let [b, c] = other_two(s_diag, v, a);
        // cyclic order at v: (a, b, c) with b attached on the left in T
        let s_eps = orientation_sign(s_diag, &[(v, vec![half_at(s_diag, a, v), half_at(s_diag, b, v), half_at(s_diag, c, v)])]);
        let (t, u_diag) = resolve_vertex(s_diag, a, u, v, b, c);
        let t_eps = orientation_sign(&t, &[]);
        let u_eps = orientation_sign(&u_diag, &[]);
        let s_vec = self.vector_of(s_diag, true).scale(&q(s_eps as i64));
        let t_vec = self.vector_of(&t, true).scale(&q(t_eps as i64));
        let u_vec = self.vector_of(&u_diag, true).scale(&q(u_eps as i64));
        s_vec.axpy(&q(-1), &t_vec).axpy(&q(1), &u_vec)
    }

    fn stu_even(&self, s_diag: &TrivalentDiagram, a: usize, u: usize, v: usize) -> SparseVec {
        let labels = s_diag.labels();
        let [mut b, mut c] = other_two(s_diag, v, a);
        if labels[b] > labels[c] {
            std::mem::swap(&mut b, &mut c);
        }
        // normalize orientations: a: u -> v, b: v -> x, c: v -> y
        let mut chords = s_diag.chords().to_vec();
        let mut flips = 0;
        if chords[a].tail != u {
            chords[a] = chords[a].reversed();
            flips += 1;
        }
        for &e in &[b, c] {
            if chords[e].tail != v {
                chords[e] = chords[e].reversed();
                flips += 1;
            }
        }
        let normalized = TrivalentDiagram::from_parts(
            s_diag.interval_vertices(),
            s_diag.free_vertices(),
            Parity::Even,
            chords,
            labels.to_vec(),
        );
        let (t, u_diag) = resolve_vertex(&normalized, a, u, v, b, c);
        let label_a = labels[a];
        let j = u + 1;
        let nv = s_diag.interval_vertices();
        let factor = crate::diagram::parity_sign(label_a + j + nv + flips) as i64;
        let s_vec = self.vector_of(s_diag, false).scale(&q(factor));
        let t_vec = self.vector_of(&t, false);
        let u_vec = self.vector_of(&u_diag, false);
        s_vec.axpy(&q(-1), &t_vec).axpy(&q(1), &u_vec)
    }

    /// IHX combinations, one per (key, free-free chord joining distinct vertices
    /// that share no other chord).
    pub fn ihx_rows(&self) -> Vec<SparseVec> {
        let mut out = Vec::new();
        for key in &self.keys {
            for (e, chord) in key.chords().iter().enumerate() {
                let (v, w) = (chord.tail, chord.head);
                if !(key.is_free(v) && key.is_free(w)) || v == w {
                    continue;
                }
                let shared = key
                    .chords()
                    .iter()
                    .filter(|c| c.touches(v) && c.touches(w))
                    .count();
                if shared > 1 {
                    continue;
                }
                out.push(self.ihx_instance(key, e, v, w));
            }
        }
        out
    }

    fn ihx_instance(&self, d: &TrivalentDiagram, e: usize, v: usize, w: usize) -> SparseVec {
        let [a, b] = other_two(d, w, e);
        let [c, dd] = other_two(d, v, e);
        // I = [[a,b],c] seen from dd; H = [a,[b,c]]; X = [b,[a,c]]
        let terms: [(i64, [usize; 2], [usize; 2], usize); 3] = [
            (1, [c, dd], [a, b], 0),
            (-1, [a, dd], [b, c], 1),
            (1, [b, dd], [a, c], 2),
        ];
        let mut acc = SparseVec::new();
        for (coef, at_v, at_w, which) in terms {
            let term = rewire(d, e, v, w, at_v, at_w);
            let vec = match self.parity {
                Parity::Odd => {
                    // v: (e, first, dd) so that from dd the vertex reads [e-subtree, first]
                    let v_order = match which {
                        0 => vec![half_at(&term, e, v), half_at(&term, c, v), half_at(&term, dd, v)],
                        1 => vec![half_at(&term, dd, v), half_at(&term, a, v), half_at(&term, e, v)],
                        _ => vec![half_at(&term, dd, v), half_at(&term, b, v), half_at(&term, e, v)],
                    };
                    let w_order = vec![half_at(&term, e, w), half_at(&term, at_w[0], w), half_at(&term, at_w[1], w)];
                    let eps = orientation_sign(&term, &[(v, v_order), (w, w_order)]);
                    self.vector_of(&term, true).scale(&q(eps as i64))
                }
                Parity::Even => self.vector_of(&term, false),
            };
            acc = acc.axpy(&q(coef), &vec);
        }
        acc
    }
}

/// `(chord index, interval vertex, free vertex)` for every chord joining the interval to a free vertex.
fn interval_attachments(d: &TrivalentDiagram) -> Vec<(usize, usize, usize)> {
    d.chords()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            if d.is_interval(c.tail) && d.is_free(c.head) {
                Some((i, c.tail, c.head))
            } else if d.is_interval(c.head) && d.is_free(c.tail) {
                Some((i, c.head, c.tail))
            } else {
                None
            }
        })
        .collect()
}

/// The two chords at trivalent `v` other than `skip`, in chord-list order.
fn other_two(d: &TrivalentDiagram, v: usize, skip: usize) -> [usize; 2] {
    let mut inc: Vec<usize> = d.incident(v).into_iter().filter(|&i| i != skip).collect();
    // a loop at v would appear once but occupy two slots
    if inc.len() == 1 {
        inc.push(inc[0]);
    }
    [inc[0], inc[1]]
}

/// Half-edge id of chord `i` at vertex `v` (`2i` = tail, `2i+1` = head).
fn half_at(d: &TrivalentDiagram, i: usize, v: usize) -> usize {
    if d.chords()[i].tail == v {
        2 * i
    } else {
        2 * i + 1
    }
}

/// Sign between the chord-grouped half-edge order `(tail, head)` per chord and
/// the vertex-grouped order (interval vertices in order, then free vertices
/// in order, each listing its half-edges in the cyclic order given by
/// `cyclic`, or in increasing id when not listed).
pub fn orientation_sign(d: &TrivalentDiagram, cyclic: &[(usize, Vec<usize>)]) -> i8 {
    let mut seq = Vec::with_capacity(2 * d.chords().len());
    for vtx in 0..d.vertex_count() {
        if let Some((_, order)) = cyclic.iter().find(|(x, _)| *x == vtx) {
            seq.extend_from_slice(order);
        } else {
            let mut hs: Vec<usize> = Vec::new();
            for (i, c) in d.chords().iter().enumerate() {
                if c.tail == vtx {
                    hs.push(2 * i);
                }
                if c.head == vtx {
                    hs.push(2 * i + 1);
                }
            }
            hs.sort_unstable();
            seq.extend(hs);
        }
    }
    permutation_sign(&seq)
}

/// Removes interval vertex `u` and free vertex `v` (joined by chord `a`) and
/// attaches `b` and `c` to two new adjacent interval vertices at `u`'s place.
/// Returns `(T, U)`: in `T` chord `b` takes the left vertex, in `U` the right one.
fn resolve_vertex(
    d: &TrivalentDiagram,
    a: usize,
    u: usize,
    v: usize,
    b: usize,
    c: usize,
) -> (TrivalentDiagram, TrivalentDiagram) {
    let k = d.interval_vertices();
    let s = d.free_vertices();
    // old vertex -> new vertex (u and v handled separately)
    let remap = |x: usize| -> usize {
        if x < u || x >= k.max(v) {
            x
        } else {
            x + 1
        }
    };
    let build = |left: usize, right: usize| -> TrivalentDiagram {
        let mut chords = Vec::new();
        let mut labels = Vec::new();
        let label_a = d.labels().get(a).copied();
        for (i, ch) in d.chords().iter().enumerate() {
            if i == a {
                continue;
            }
            let target = |x: usize| -> usize {
                if x == v {
                    if i == left {
                        u
                    } else {
                        debug_assert_eq!(i, right);
                        u + 1
                    }
                } else {
                    remap(x)
                }
            };
            chords.push(Chord::new(target(ch.tail), target(ch.head)));
            if let Some(la) = label_a {
                let l = d.labels()[i];
                labels.push(if l > la { l - 1 } else { l });
            }
        }
        TrivalentDiagram::from_parts(k + 1, s - 1, d.parity(), chords, labels)
    };
    (build(b, c), build(c, b))
}

/// Replaces the neighbourhood of internal chord `e = (v, w)`: chords `at_v`
/// end at `v`, chords `at_w` end at `w`; outer ends and orientations relative
/// to the outer ends are kept, `e` stays `v -> w`.
fn rewire(
    d: &TrivalentDiagram,
    e: usize,
    v: usize,
    w: usize,
    at_v: [usize; 2],
    at_w: [usize; 2],
) -> TrivalentDiagram {
    let mut chords = d.chords().to_vec();
    chords[e] = Chord::new(v, w);
    for (&legs, centre) in [(&at_v, v), (&at_w, w)] {
        for &leg in legs.iter() {
            let ch = d.chords()[leg];
            let inner_is_tail = ch.tail == v || ch.tail == w;
            chords[leg] = if inner_is_tail {
                Chord::new(centre, ch.head)
            } else {
                Chord::new(ch.tail, centre)
            };
        }
    }
    TrivalentDiagram::from_parts(
        d.interval_vertices(),
        d.free_vertices(),
        d.parity(),
        chords,
        d.labels().to_vec(),
    )
}

pub fn stu_rows(n: usize, parity: Parity) -> Result<RelationMatrix> {
    Ok(DiagramSpace::new(n, parity)?.relation_matrix())
}

/// Dimension of the diagram space: number of keys minus the rank of the relations.
pub fn diagram_space_dimension(n: usize, parity: Parity) -> Result<usize> {
    let space = DiagramSpace::new(n, parity)?;
    let rel = space.relation_matrix();
    Ok(space.len() - rel.rank())
}

/// Concatenations `d1 . d2` over enumerated keys with `deg d1 + deg d2 = n`,
/// as key-coordinate vectors in `space`.
pub fn product_vectors(space: &DiagramSpace) -> Result<Vec<SparseVec>> {
    let n = space.degree;
    let mut out = Vec::new();
    let lower: Vec<Vec<TrivalentDiagram>> = (1..n)
        .map(|m| enumerate_diagrams(m, space.parity))
        .collect::<Result<_>>()?;
    for n1 in 1..n {
        let n2 = n - n1;
        for d1 in &lower[n1 - 1] {
            for d2 in &lower[n2 - 1] {
                let p = d1.product(d2)?;
                out.push(space.vector_of(&p, false));
            }
        }
    }
    Ok(out)
}

/// True iff `w` vanishes on every product of lower-degree diagrams.
pub fn primitivity_filter(space: &DiagramSpace, w: &WeightSystem) -> Result<bool> {
    Ok(product_vectors(space)?
        .iter()
        .all(|p| w.evaluate(p).is_zero()))
}

/// Basis of the weight systems of degree `n`: primitive ones first, then a
/// completion to the full dual. Each vector is scaled to coprime integers.
pub fn weight_basis(space: &DiagramSpace) -> Result<Vec<WeightSystem>> {
    let rel = space.relation_matrix();
    let ncols = space.len();
    let full = Echelon::from_rows(ncols, &rel.rows);
    let mut with_products = full.clone();
    for p in product_vectors(space)? {
        with_products.insert(p);
    }
    let primitive = with_products.null_space();
    let all = full.null_space();

    let mut span = Echelon::new(ncols);
    let mut out = Vec::new();
    for (vecs, flag) in [(primitive, true), (all, false)] {
        for w in vecs {
            let sv = SparseVec::from_entries(w.iter().cloned().enumerate());
            if span.insert(sv) {
                out.push(WeightSystem {
                    degree: space.degree,
                    parity: space.parity,
                    coefficients: primitive_integer_vector(&w),
                    primitive: flag,
                });
            }
        }
    }
    Ok(out)
}

/// True iff every IHX combination lies in the row space of the relations.
pub fn ihx_consistency(space: &DiagramSpace) -> bool {
    let rel = space.relation_matrix();
    let ech = Echelon::from_rows(space.len(), &rel.rows);
    space.ihx_rows().iter().all(|r| ech.contains(r))
}

pub fn check_degree(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        Err(Error::UnsupportedDegree { degree: n, max })
    } else {
        Ok(())
    }
}
