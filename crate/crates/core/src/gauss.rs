//! Type-2 and type-3 invariants read off Gauss diagrams.
//!
//! `v2` is the Polyak–Viro arrow count. `v3` is taken from the Jones
//! polynomial of the closure, computed by the Kauffman bracket state sum on
//! the planar diagram encoded by the Gauss diagram, normalized as
//! `v3 = -(V'''(1) + 3 V''(1)) / 36` so that the trefoils give `+1` and `-1`.
//! The same polynomial also yields `v2 = -V''(1) / 6`, an independent check
//! on the arrow count.

use crate::error::{Error, Result};
use crate::projection::GaussDiagramRec;
use std::collections::BTreeMap;

/// Arrows run from the over-passage to the under-passage. `v2` sums
/// `sign(c) sign(c')` over pairs whose passages interleave as
/// `c_over < c'_under < c_under < c'_over`.
pub fn v2(g: &GaussDiagramRec) -> i64 {
    let cs = &g.crossings;
    let mut total = 0;
    for a in cs {
        let (a_from, a_to) = (a.t_over(), a.t_under());
        if a_from > a_to {
            continue;
        }
        for b in cs {
            let (b_from, b_to) = (b.t_over(), b.t_under());
            if a_from < b_to && b_to < a_to && a_to < b_from {
                total += (a.sign * b.sign) as i64;
            }
        }
    }
    total
}

/// Laurent polynomial with integer coefficients, keyed by exponent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Laurent(pub BTreeMap<i64, i64>);

impl Laurent {
    pub fn monomial(exp: i64, coeff: i64) -> Self {
        let mut m = BTreeMap::new();
        if coeff != 0 {
            m.insert(exp, coeff);
        }
        Laurent(m)
    }

    fn add_assign(&mut self, other: &Laurent) {
        for (&e, &c) in &other.0 {
            let entry = self.0.entry(e).or_insert(0);
            *entry += c;
            if *entry == 0 {
                self.0.remove(&e);
            }
        }
    }

    fn mul(&self, other: &Laurent) -> Laurent {
        let mut out = Laurent::default();
        for (&e1, &c1) in &self.0 {
            for (&e2, &c2) in &other.0 {
                out.add_assign(&Laurent::monomial(e1 + e2, c1 * c2));
            }
        }
        out
    }

    fn shift(&self, by: i64) -> Laurent {
        Laurent(self.0.iter().map(|(&e, &c)| (e + by, c)).collect())
    }

    /// `sum c e (e-1) ... (e-m+1)`, the m-th derivative at 1.
    pub fn derivative_at_one(&self, m: u32) -> i64 {
        self.0
            .iter()
            .map(|(&e, &c)| c * (0..m as i64).map(|i| e - i).product::<i64>())
            .sum()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.0.iter().map(|(&e, &c)| c as f64 * x.powi(e as i32)).sum()
    }
}

/// A crossing in planar-diagram form: edges `[a, b, c, d]` counterclockwise
/// starting from the incoming under-edge.
pub type PdCrossing = [usize; 4];

/// Planar-diagram code of the closure of the long knot.
pub fn pd_code(g: &GaussDiagramRec) -> Vec<PdCrossing> {
    let passages = g.passages();
    let m = passages.len();
    let mut over_at = vec![0usize; g.len()];
    let mut under_at = vec![0usize; g.len()];
    for (pos, p) in passages.iter().enumerate() {
        if p.over {
            over_at[p.crossing] = pos;
        } else {
            under_at[p.crossing] = pos;
        }
    }
    // edge `pos` leaves passage `pos`; the closing edge is `m - 1`
    let incoming = |pos: usize| (pos + m - 1) % m;
    g.crossings
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (p, q) = (over_at[i], under_at[i]);
            if c.sign > 0 {
                [incoming(q), p, q, incoming(p)]
            } else {
                [incoming(q), incoming(p), q, p]
            }
        })
        .collect()
}

/// Kauffman bracket in the variable `A`.
pub fn kauffman_bracket(pd: &[PdCrossing]) -> Laurent {
    let n = pd.len();
    if n == 0 {
        return Laurent::monomial(0, 1);
    }
    let edges = pd.iter().flatten().copied().max().unwrap_or(0) + 1;
    let delta = Laurent(BTreeMap::from([(2, -1), (-2, -1)]));
    let mut delta_pow = vec![Laurent::monomial(0, 1)];
    for k in 1..=edges {
        delta_pow.push(delta_pow[k - 1].mul(&delta));
    }
    let mut total = Laurent::default();
    let mut parent = vec![0usize; edges];
    let mut used: Vec<usize> = pd.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    for state in 0u64..(1u64 << n) {
        for (i, p) in parent.iter_mut().enumerate() {
            *p = i;
        }
        let mut a_count = 0i64;
        for (i, x) in pd.iter().enumerate() {
            let a_smoothing = state >> i & 1 == 0;
            let (p1, p2) = if a_smoothing {
                a_count += 1;
                ((x[0], x[1]), (x[2], x[3]))
            } else {
                ((x[0], x[3]), (x[1], x[2]))
            };
            union(&mut parent, p1.0, p1.1);
            union(&mut parent, p2.0, p2.1);
        }
        let loops = used.iter().filter(|&&e| find(&mut parent, e) == e).count();
        let b_count = n as i64 - a_count;
        total.add_assign(&delta_pow[loops - 1].shift(a_count - b_count));
    }
    total
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra] = rb;
    }
}

/// Writhe of a planar-diagram code whose edges are numbered consecutively
/// along the knot (modulo the edge count).
pub fn pd_writhe(pd: &[PdCrossing]) -> i64 {
    let m = 2 * pd.len();
    pd.iter()
        .map(|x| if (x[1] + m - x[3]) % m == 1 { 1 } else { -1 })
        .sum()
}

/// Jones polynomial in `t`, from a planar-diagram code.
pub fn jones_from_pd(pd: &[PdCrossing]) -> Result<Laurent> {
    let writhe = pd_writhe(pd);
    // (-A^3)^{-w} <D>, then A = t^{-1/4}
    let sign = if writhe % 2 == 0 { 1 } else { -1 };
    let f = kauffman_bracket(pd).shift(-3 * writhe);
    let mut out = BTreeMap::new();
    for (&e, &c) in &f.0 {
        if e % 4 != 0 {
            return Err(Error::InvalidInput(format!("bracket exponent {e} not divisible by 4")));
        }
        out.insert(-e / 4, sign * c);
    }
    Ok(Laurent(out))
}

pub fn jones(g: &GaussDiagramRec) -> Result<Laurent> {
    if g.is_empty() {
        return Ok(Laurent::monomial(0, 1));
    }
    jones_from_pd(&pd_code(g))
}

fn exact_div(num: i64, den: i64, what: &str) -> Result<i64> {
    if num % den != 0 {
        return Err(Error::InvalidInput(format!("{what}: {num}/{den} is not an integer")));
    }
    Ok(num / den)
}

/// `-V''(1) / 6`.
pub fn v2_from_jones(g: &GaussDiagramRec) -> Result<i64> {
    let v = jones(g)?;
    exact_div(-v.derivative_at_one(2), 6, "v2")
}

/// `-(V'''(1) + 3 V''(1)) / 36`.
pub fn v3(g: &GaussDiagramRec) -> Result<i64> {
    let v = jones(g)?;
    exact_div(-(v.derivative_at_one(3) + 3 * v.derivative_at_one(2)), 36, "v3")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_trefoil_pd_gives_tabulated_jones() {
        // all crossings negative
        let pd = [[1, 4, 2, 5], [3, 6, 4, 1], [5, 2, 6, 3]];
        assert_eq!(pd_writhe(&pd), -3);
        let v = jones_from_pd(&pd).unwrap();
        assert_eq!(v, Laurent(BTreeMap::from([(-4, -1), (-3, 1), (-1, 1)])));
    }

    #[test]
    fn figure_eight_pd_gives_tabulated_jones() {
        let pd = [[4, 2, 5, 1], [8, 6, 1, 5], [6, 3, 7, 4], [2, 7, 3, 8]];
        let v = jones_from_pd(&pd).unwrap();
        assert_eq!(
            v,
            Laurent(BTreeMap::from([(-2, 1), (-1, -1), (0, 1), (1, -1), (2, 1)]))
        );
    }
}
