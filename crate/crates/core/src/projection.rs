//! Plane projections of long knots and the Gauss diagrams they determine.

use crate::error::{Error, Result};
use crate::knot::LongKnot;
use crate::vec3::{self, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Polyline resolution on `[0, 1]`.
pub const PROJECTION_SAMPLES: usize = 4096;
/// Each straight end is represented by one segment of this length.
const RAY_LENGTH: f64 = 50.0;
const MIN_DEPTH_GAP: f64 = 1e-7;
const MIN_SIN_ANGLE: f64 = 1e-4;
const MIN_CROSSING_SEPARATION: f64 = 1e-7;
pub const MAX_PROJECTION_RETRIES: usize = 8;

/// Viewing direction used when none is given.
pub const DEFAULT_DIRECTION: Vec3 = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Parameter of the earlier passage.
    pub t_first: f64,
    /// Parameter of the later passage.
    pub t_second: f64,
    /// Whether the earlier passage is the over-strand.
    pub first_over: bool,
    pub sign: i8,
}

impl Crossing {
    pub fn t_over(&self) -> f64 {
        if self.first_over {
            self.t_first
        } else {
            self.t_second
        }
    }

    pub fn t_under(&self) -> f64 {
        if self.first_over {
            self.t_second
        } else {
            self.t_first
        }
    }
}

/// One visit of the knot to a crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passage {
    pub t: f64,
    pub crossing: usize,
    pub over: bool,
}

/// Crossings of a generic projection, sorted by their earlier parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussDiagramRec {
    pub crossings: Vec<Crossing>,
    /// Viewing direction the diagram was read from.
    pub direction: Vec3,
}

impl GaussDiagramRec {
    pub fn new(mut crossings: Vec<Crossing>, direction: Vec3) -> Result<Self> {
        for c in &crossings {
            if !(c.t_first < c.t_second) || (c.sign != 1 && c.sign != -1) {
                return Err(Error::InvalidInput(format!("bad crossing {c:?}")));
            }
        }
        crossings.sort_by(|a, b| a.t_first.total_cmp(&b.t_first));
        let mut ts: Vec<f64> = crossings.iter().flat_map(|c| [c.t_first, c.t_second]).collect();
        ts.sort_by(f64::total_cmp);
        if ts.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("repeated passage parameter".into()));
        }
        Ok(GaussDiagramRec {
            crossings,
            direction,
        })
    }

    /// Builds a diagram from passages listed along the knot as
    /// `(crossing label, over?)` with one sign per label; parameters are the
    /// positions in the list.
    pub fn from_code(code: &[(usize, bool)], signs: &[i8]) -> Result<Self> {
        let mut seen: Vec<Vec<(usize, bool)>> = vec![Vec::new(); signs.len()];
        for (pos, &(label, over)) in code.iter().enumerate() {
            let slot = seen
                .get_mut(label)
                .ok_or_else(|| Error::InvalidInput(format!("crossing label {label} has no sign")))?;
            slot.push((pos, over));
        }
        let mut crossings = Vec::new();
        for (label, visits) in seen.iter().enumerate() {
            match visits[..] {
                [(p, o1), (q, o2)] if o1 != o2 => crossings.push(Crossing {
                    t_first: p as f64,
                    t_second: q as f64,
                    first_over: o1,
                    sign: signs[label],
                }),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "crossing {label} needs one over and one under passage"
                    )))
                }
            }
        }
        GaussDiagramRec::new(crossings, DEFAULT_DIRECTION)
    }

    pub fn len(&self) -> usize {
        self.crossings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }

    pub fn passages(&self) -> Vec<Passage> {
        let mut out: Vec<Passage> = self
            .crossings
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                [
                    Passage {
                        t: c.t_first,
                        crossing: i,
                        over: c.first_over,
                    },
                    Passage {
                        t: c.t_second,
                        crossing: i,
                        over: !c.first_over,
                    },
                ]
            })
            .collect();
        out.sort_by(|a, b| a.t.total_cmp(&b.t));
        out
    }

    /// Diagram of the reflected knot: every crossing changes over/under and sign.
    pub fn mirror(&self) -> Self {
        GaussDiagramRec {
            crossings: self
                .crossings
                .iter()
                .map(|c| Crossing {
                    first_over: !c.first_over,
                    sign: -c.sign,
                    ..*c
                })
                .collect(),
            direction: self.direction,
        }
    }

    /// `self` followed by `other` along the line.
    pub fn concat(&self, other: &GaussDiagramRec) -> Self {
        let shift = self
            .crossings
            .iter()
            .map(|c| c.t_second)
            .fold(0.0, f64::max)
            - other.crossings.iter().map(|c| c.t_first).fold(f64::INFINITY, f64::min)
            + 1.0;
        let mut crossings = self.crossings.clone();
        crossings.extend(other.crossings.iter().map(|c| Crossing {
            t_first: c.t_first + shift,
            t_second: c.t_second + shift,
            ..*c
        }));
        GaussDiagramRec {
            crossings,
            direction: self.direction,
        }
    }

    pub fn writhe(&self) -> i64 {
        self.crossings.iter().map(|c| c.sign as i64).sum()
    }
}

struct Segment {
    i: usize,
    a: [f64; 2],
    b: [f64; 2],
    ha: f64,
    hb: f64,
    ta: f64,
    tb: f64,
    xmin: f64,
    xmax: f64,
}

/// Reads the Gauss diagram of `knot` seen from `direction`. Non-generic views
/// are retried with deterministic jitter of growing size.
pub fn gauss_projection(knot: &LongKnot, direction: Vec3) -> Result<GaussDiagramRec> {
    let n = vec3::norm(direction);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput("projection direction must be nonzero".into()));
    }
    let d0 = vec3::scale(direction, 1.0 / n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut d = d0;
    for attempt in 0..=MAX_PROJECTION_RETRIES {
        if let Some(g) = try_projection(knot, d) {
            return Ok(g);
        }
        let size = 1e-3 * (attempt + 1) as f64;
        let jitter = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let v = vec3::add(d0, vec3::scale(jitter, size));
        d = vec3::scale(v, 1.0 / vec3::norm(v));
    }
    Err(Error::DegenerateProjection(MAX_PROJECTION_RETRIES))
}

fn try_projection(knot: &LongKnot, d: Vec3) -> Option<GaussDiagramRec> {
    let (e1, e2) = vec3::orthonormal_complement(d);
    let mut ts = Vec::with_capacity(PROJECTION_SAMPLES + 3);
    ts.push(-RAY_LENGTH);
    ts.extend((0..=PROJECTION_SAMPLES).map(|i| i as f64 / PROJECTION_SAMPLES as f64));
    ts.push(1.0 + RAY_LENGTH);
    let pts: Vec<Vec3> = ts.iter().map(|&t| knot.evaluate(t)).collect();
    let proj = |p: Vec3| [vec3::dot(p, e1), vec3::dot(p, e2)];

    let mut segs: Vec<Segment> = (0..pts.len() - 1)
        .map(|i| {
            let a = proj(pts[i]);
            let b = proj(pts[i + 1]);
            Segment {
                i,
                a,
                b,
                ha: vec3::dot(pts[i], d),
                hb: vec3::dot(pts[i + 1], d),
                ta: ts[i],
                tb: ts[i + 1],
                xmin: a[0].min(b[0]),
                xmax: a[0].max(b[0]),
            }
        })
        .collect();
    segs.sort_by(|x, y| x.xmin.total_cmp(&y.xmin));

    let mut found: Vec<(f64, f64, f64, f64, [f64; 2])> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for (idx, s) in segs.iter().enumerate() {
        active.retain(|&j| segs[j].xmax >= s.xmin);
        for &j in &active {
            let r = &segs[j];
            if r.i.abs_diff(s.i) <= 1 {
                continue;
            }
            if let Some((u, v)) = intersect(r.a, r.b, s.a, s.b) {
                let (first, second, uf, us) = if r.i < s.i { (r, s, u, v) } else { (s, r, v, u) };
                let t1 = first.ta + uf * (first.tb - first.ta);
                let t2 = second.ta + us * (second.tb - second.ta);
                let h1 = first.ha + uf * (first.hb - first.ha);
                let h2 = second.ha + us * (second.hb - second.ha);
                let at = [
                    first.a[0] + uf * (first.b[0] - first.a[0]),
                    first.a[1] + uf * (first.b[1] - first.a[1]),
                ];
                found.push((t1, t2, h1, h2, at));
            }
        }
        active.push(idx);
    }

    let mut crossings = Vec::with_capacity(found.len());
    for (k, &(t1, t2, h1, h2, at)) in found.iter().enumerate() {
        if (h1 - h2).abs() < MIN_DEPTH_GAP {
            return None;
        }
        for other in &found[k + 1..] {
            let gap = (other.4[0] - at[0]).hypot(other.4[1] - at[1]);
            if gap < MIN_CROSSING_SEPARATION {
                return None;
            }
        }
        let first_over = h1 > h2;
        let d1 = knot.derivative(t1);
        let d2 = knot.derivative(t2);
        let (o, u) = if first_over { (d1, d2) } else { (d2, d1) };
        let (o, u) = (proj(o), proj(u));
        let cross = o[0] * u[1] - o[1] * u[0];
        let sin = cross / (o[0].hypot(o[1]) * u[0].hypot(u[1]));
        if !(sin.abs() > MIN_SIN_ANGLE) {
            return None;
        }
        crossings.push(Crossing {
            t_first: t1,
            t_second: t2,
            first_over,
            sign: if cross > 0.0 { 1 } else { -1 },
        });
    }
    GaussDiagramRec::new(crossings, d).ok()
}

/// Parameters `(u, v)` in `[0, 1)` at which segments `ab` and `cd` meet.
fn intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let w = [c[0] - a[0], c[1] - a[1]];
    let u = (w[0] * s[1] - w[1] * s[0]) / den;
    let v = (w[0] * r[1] - w[1] * r[0]) / den;
    if (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v) {
        Some((u, v))
    } else {
        None
    }
}
