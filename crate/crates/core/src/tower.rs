//! Punctured knots, evaluable points of the tower stages, and the map that
//! picks, for each configuration of interval points, a punctured knot defined
//! at all of them.
//!
//! Everything lives on the compactified parameter `s` in `[0, 1]` used by the
//! integrator, so holes may cover parts of the straight ends as well as the
//! knotted part. Holes are indexed from 0.

use crate::error::{Error, Result};
use crate::integrals::{
    self, AnomalyConfig, IntervalEvaluator, InvariantOptions, InvariantReport, MCEstimate,
    SamplingOptions,
};
use crate::algebra::{DiagramSpace, WeightSystem};
use crate::diagram::TrivalentDiagram;
use crate::knot::{smoothstep, LongKnot};
use crate::vec3::{self, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Disjoint closed subintervals of `[0, 1]`, in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PunctureSpec {
    pub holes: Vec<(f64, f64)>,
}

impl PunctureSpec {
    pub fn new(holes: Vec<(f64, f64)>) -> Result<Self> {
        if holes.len() < 2 {
            return Err(Error::InvalidInput("a puncture spec needs at least two holes".into()));
        }
        let mut prev = 0.0;
        for (i, &(a, b)) in holes.iter().enumerate() {
            if !(a < b && a > prev && b < 1.0) || (i > 0 && a <= prev) {
                return Err(Error::InvalidInput(format!(
                    "hole {i} = [{a}, {b}] is not an ordered, disjoint subinterval of (0, 1)"
                )));
            }
            prev = b;
        }
        Ok(PunctureSpec { holes })
    }

    /// `k + 1` equal holes of width `1 / (4k + 4)`, equally spaced.
    pub fn for_stage(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("stage must be at least 1".into()));
        }
        let r = k + 1;
        let w = hole_width(k);
        let gap = (1.0 - r as f64 * w) / (r + 1) as f64;
        let holes = (0..r)
            .map(|i| {
                let a = gap * (i + 1) as f64 + w * i as f64;
                (a, a + w)
            })
            .collect();
        PunctureSpec::new(holes)
    }

    pub fn len(&self) -> usize {
        self.holes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holes.is_empty()
    }

    /// Index of the hole containing `s`.
    pub fn hole_at(&self, s: f64) -> Option<usize> {
        self.holes.iter().position(|&(a, b)| a <= s && s <= b)
    }

    /// `A(x)`: holes containing some point of `x`.
    pub fn occupied(&self, x: &[f64]) -> Vec<usize> {
        let mut out: Vec<usize> = x.iter().filter_map(|&s| self.hole_at(s)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The spec with the last hole forgotten.
    pub fn drop_last(&self) -> Result<Self> {
        PunctureSpec::new(self.holes[..self.holes.len() - 1].to_vec())
    }
}

fn hole_width(k: usize) -> f64 {
    1.0 / (4 * k + 4) as f64
}

/// One member of a family of long knots.
#[derive(Debug, Clone)]
enum Member {
    Knot(Arc<LongKnot>),
    /// `(1 - u) k0 + u k1`, evaluated as [`LongKnot::interpolate`] does.
    Lerp { k0: Arc<LongKnot>, k1: Arc<LongKnot>, u: f64 },
}

impl Member {
    fn eval(&self, t: f64) -> (Vec3, Vec3) {
        match self {
            Member::Knot(k) => k.eval(t),
            Member::Lerp { k0, u, .. } if *u == 0.0 => k0.eval(t),
            Member::Lerp { k1, u, .. } if *u == 1.0 => k1.eval(t),
            Member::Lerp { k0, k1, u } => {
                let (p0, d0) = k0.eval(t);
                let (p1, d1) = k1.eval(t);
                (vec3::lerp(p0, p1, *u), vec3::lerp(d0, d1, *u))
            }
        }
    }
}

/// A long knot with the holes in `removed` cut out of its domain.
#[derive(Debug, Clone)]
pub struct PuncturedKnot {
    member: Member,
    spec: Arc<PunctureSpec>,
    removed: Vec<usize>,
}

impl PuncturedKnot {
    pub fn removed(&self) -> &[usize] {
        &self.removed
    }

    pub fn spec(&self) -> &PunctureSpec {
        &self.spec
    }

    /// Removed hole containing the compactified parameter `s`, if any.
    pub fn hole_at(&self, s: f64) -> Option<usize> {
        self.removed
            .iter()
            .copied()
            .find(|&i| self.spec.holes[i].0 <= s && s <= self.spec.holes[i].1)
    }

    /// Point and derivative at line parameter `t`, whose compactified
    /// parameter is `s`.
    pub fn eval_at(&self, s: f64, t: f64) -> Result<(Vec3, Vec3)> {
        match self.hole_at(s) {
            Some(hole) => Err(Error::OutsideDomain { t: s, hole }),
            None => Ok(self.member.eval(t)),
        }
    }

    /// Point and derivative at line parameter `t`.
    pub fn eval(&self, t: f64) -> Result<(Vec3, Vec3)> {
        self.eval_at(integrals::interval_unmap(t), t)
    }

    /// The same knot with the holes in `more` removed as well.
    pub fn restrict(&self, more: &[usize]) -> Result<PuncturedKnot> {
        let mut removed = self.removed.clone();
        for &i in more {
            if i >= self.spec.len() {
                return Err(Error::InvalidInput(format!("hole {i} out of range")));
            }
            removed.push(i);
        }
        removed.sort_unstable();
        removed.dedup();
        Ok(PuncturedKnot {
            member: self.member.clone(),
            spec: self.spec.clone(),
            removed,
        })
    }

    /// Largest pointwise distance to `other` over `samples` domain points
    /// common to both.
    pub fn distance(&self, other: &PuncturedKnot, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let s = (i as f64 + 0.5) / samples as f64;
            let t = integrals::interval_map(s).0;
            if let (Ok((p, _)), Ok((q, _))) = (self.eval_at(s, t), other.eval_at(s, t)) {
                worst = worst.max(vec3::norm(vec3::sub(p, q)));
            }
        }
        worst
    }
}

/// `K` on the domain with the holes in `subset` removed.
pub fn restrict(k: &LongKnot, spec: &PunctureSpec, subset: &[usize]) -> Result<PuncturedKnot> {
    if subset.is_empty() {
        return Err(Error::InvalidInput("puncture subset must be nonempty".into()));
    }
    PuncturedKnot {
        member: Member::Knot(Arc::new(k.clone())),
        spec: Arc::new(spec.clone()),
        removed: Vec::new(),
    }
    .restrict(subset)
}

#[derive(Debug, Clone)]
enum Family {
    Constant(Arc<LongKnot>),
    /// Vertex `i` carries `(1 - c_i) k0 + c_i k1`; a simplex point carries the
    /// barycentric average of the `c_i`.
    Affine { k0: Arc<LongKnot>, k1: Arc<LongKnot>, params: Vec<f64> },
}

/// An evaluable point of the stage-`r` homotopy limit: for every nonempty
/// subset `S` of the `r + 1` holes, a family `alpha_S` of knots punctured at
/// `S`, parametrized by the simplex spanned by `S`.
#[derive(Debug, Clone)]
pub struct HolimPoint {
    stage: usize,
    spec: Arc<PunctureSpec>,
    family: Family,
}

impl HolimPoint {
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn spec(&self) -> &PunctureSpec {
        &self.spec
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, Family::Constant(_))
    }

    /// `alpha_S` at the point with barycentric coordinates `bary` (one per
    /// element of `subset`).
    pub fn alpha(&self, subset: &[usize], bary: &[f64]) -> Result<PuncturedKnot> {
        if subset.is_empty() || subset.len() != bary.len() {
            return Err(Error::InvalidInput("alpha needs a nonempty subset and matching coordinates".into()));
        }
        check_barycentric(bary)?;
        let member = match &self.family {
            Family::Constant(k) => Member::Knot(k.clone()),
            Family::Affine { k0, k1, params } => {
                let u = subset.iter().zip(bary).map(|(&i, &b)| b * params[i]).sum();
                Member::Lerp {
                    k0: k0.clone(),
                    k1: k1.clone(),
                    u,
                }
            }
        };
        PuncturedKnot {
            member,
            spec: self.spec.clone(),
            removed: Vec::new(),
        }
        .restrict(subset)
    }

    /// `h_t`: the family indexed by the support of `t`, read at `t`.
    pub fn evaluate(&self, t: &[f64]) -> Result<PuncturedKnot> {
        if t.len() != self.spec.len() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, stage {} needs {}",
                t.len(),
                self.stage,
                self.spec.len()
            )));
        }
        let subset: Vec<usize> = (0..t.len()).filter(|&i| t[i] > 0.0).collect();
        let bary: Vec<f64> = subset.iter().map(|&i| t[i]).collect();
        self.alpha(&subset, &bary)
    }

    /// Largest disagreement between `alpha_{S+i}` on the face opposite `i` and
    /// `alpha_S` followed by puncturing at `i`, over `trials` random faces.
    pub fn face_residual(&self, trials: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.spec.len();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let mut subset: Vec<usize> = (0..r).filter(|_| rng.random::<bool>()).collect();
            if subset.is_empty() || subset.len() == r {
                subset = vec![rng.random_range(0..r)];
            }
            let extra = loop {
                let i = rng.random_range(0..r);
                if !subset.contains(&i) {
                    break i;
                }
            };
            let bary = random_barycentric(subset.len(), &mut rng);
            let small = self.alpha(&subset, &bary)?.restrict(&[extra])?;
            let mut bigger: Vec<(usize, f64)> = subset.iter().copied().zip(bary.iter().copied()).collect();
            bigger.push((extra, 0.0));
            bigger.sort_by_key(|p| p.0);
            let (bs, bb): (Vec<usize>, Vec<f64>) = bigger.into_iter().unzip();
            let big = self.alpha(&bs, &bb)?;
            worst = worst.max(small.distance(&big, 257));
        }
        Ok(worst)
    }
}

fn check_barycentric(b: &[f64]) -> Result<()> {
    let sum: f64 = b.iter().sum();
    if b.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("{b:?} is not a point of the simplex")));
    }
    Ok(())
}

fn random_barycentric(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let sum: f64 = e.iter().sum();
    e.iter().map(|x| x / sum).collect()
}

/// The constant family at `K`, on the default spec of stage `r`.
pub fn knot_to_holim(k: &LongKnot, r: usize) -> Result<HolimPoint> {
    knot_to_holim_with(k, PunctureSpec::for_stage(r)?)
}

pub fn knot_to_holim_with(k: &LongKnot, spec: PunctureSpec) -> Result<HolimPoint> {
    Ok(HolimPoint {
        stage: spec.len() - 1,
        spec: Arc::new(spec),
        family: Family::Constant(Arc::new(k.clone())),
    })
}

/// Interpolation steps checked for embedding in [`synthetic_family`].
const SYNTHETIC_CHECKS: usize = 8;

/// Straight-line isotopies from `k0` to `k1`: vertex `i` of the stage-`r`
/// simplex carries the knot at `i / r` along the segment.
pub fn synthetic_family(k0: &LongKnot, k1: &LongKnot, spec: PunctureSpec) -> Result<HolimPoint> {
    for j in 0..=SYNTHETIC_CHECKS {
        let u = j as f64 / SYNTHETIC_CHECKS as f64;
        LongKnot::interpolate(k0, k1, u).check_embedding()?;
    }
    let r = spec.len() - 1;
    Ok(HolimPoint {
        stage: r,
        family: Family::Affine {
            k0: Arc::new(k0.clone()),
            k1: Arc::new(k1.clone()),
            params: (0..=r).map(|i| i as f64 / r as f64).collect(),
        },
        spec: Arc::new(spec),
    })
}

/// Forgets the families whose index set contains the last hole.
pub fn tower_projection(h: &HolimPoint) -> Result<HolimPoint> {
    if h.stage <= 1 {
        return Err(Error::InvalidInput("no stage below 1".into()));
    }
    let family = match &h.family {
        Family::Constant(k) => Family::Constant(k.clone()),
        Family::Affine { k0, k1, params } => Family::Affine {
            k0: k0.clone(),
            k1: k1.clone(),
            params: params[..params.len() - 1].to_vec(),
        },
    };
    Ok(HolimPoint {
        stage: h.stage - 1,
        spec: Arc::new(h.spec.drop_last()?),
        family,
    })
}

/// The map from ordered configurations of at most `k` points of `[0, 1]` to
/// the simplex spanned by the `k + 1` holes.
///
/// Hole `i` gets weight `phi(dl) phi(dr)`, with `dl` (`dr`) the distance from
/// the hole to the nearest point on its left (right), and weight 0 if a point
/// lies inside. `phi` vanishes up to the hole's collar, a quarter of its
/// width, and rises to 1 by smoothstep over a further `delta`. The output is
/// the normalized weight vector. Duplicated points and points at 0 or 1 never
/// change a nearest distance, so the face equations hold exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMap {
    pub stage: usize,
    pub spec: PunctureSpec,
    pub delta: f64,
}

impl GammaMap {
    /// Default spec of stage `k` with `delta` a quarter of the hole width.
    pub fn for_stage(k: usize) -> Result<Self> {
        GammaMap::new(PunctureSpec::for_stage(k)?, hole_width(k) / 4.0)
    }

    /// Requires `k + 1` holes and room between them for both blends.
    pub fn new(spec: PunctureSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput("delta must be positive".into()));
        }
        let reach = |i: usize| {
            let (a, b) = spec.holes[i];
            (b - a) / 4.0 + delta
        };
        let n = spec.len();
        let mut prev_end = 0.0;
        let mut prev_reach = 0.0;
        for i in 0..n {
            if spec.holes[i].0 - prev_end <= prev_reach + reach(i) {
                return Err(Error::InvalidInput(format!("hole {i} leaves no room for the blend")));
            }
            prev_end = spec.holes[i].1;
            prev_reach = reach(i);
        }
        if 1.0 - prev_end <= prev_reach {
            return Err(Error::InvalidInput("last hole leaves no room for the blend".into()));
        }
        Ok(GammaMap {
            stage: n - 1,
            spec,
            delta,
        })
    }

    /// As [`GammaMap::new`] without the spacing checks, for mutation tests.
    pub fn new_unchecked(spec: PunctureSpec, delta: f64) -> Self {
        GammaMap {
            stage: spec.len() - 1,
            spec,
            delta,
        }
    }

    fn phi(&self, hole: usize, d: f64) -> f64 {
        let (a, b) = self.spec.holes[hole];
        let collar = (b - a) / 4.0;
        smoothstep(((d - collar) / self.delta).clamp(0.0, 1.0))
    }

    /// `gamma^n(x)` for sorted `x` with `n <= k`.
    pub fn gamma(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() > self.stage {
            return Err(Error::InvalidInput(format!(
                "{} points exceed stage {}",
                x.len(),
                self.stage
            )));
        }
        if x.windows(2).any(|w| !(w[0] <= w[1])) || x.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::InvalidInput("configuration must be sorted in [0, 1]".into()));
        }
        let mut w: Vec<f64> = self
            .spec
            .holes
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let mut left = f64::INFINITY;
                let mut right = f64::INFINITY;
                for &s in x {
                    if s < a {
                        left = left.min(a - s);
                    } else if s > b {
                        right = right.min(s - b);
                    } else {
                        return 0.0;
                    }
                }
                self.phi(i, left) * self.phi(i, right)
            })
            .collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::GammaContract(format!("every hole is blocked at {x:?}")));
        }
        for v in w.iter_mut() {
            *v /= total;
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaViolation {
    pub condition: String,
    pub x: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub stage: usize,
    pub trials: usize,
    /// Largest difference in the face equations (required to be 0).
    pub max_face_residual: f64,
    /// Largest barycentric weight found on a hole that must be blocked.
    pub max_blocked_weight: f64,
    pub violations: usize,
    /// The first few violations.
    pub examples: Vec<GammaViolation>,
}

impl GammaReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

const MAX_REPORTED_VIOLATIONS: usize = 10;

fn sorted_uniform(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    x.sort_by(f64::total_cmp);
    x
}

/// Samples configurations and checks the face equations (duplicated point,
/// point at 0, point at 1) for exact equality, and that every hole occupied
/// by `x` stays blocked on the `delta / 2` ball around `x`.
pub fn check_gamma(g: &GammaMap, trials: usize, seed: u64) -> GammaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = g.stage;
    let mut report = GammaReport {
        stage: k,
        trials,
        max_face_residual: 0.0,
        max_blocked_weight: 0.0,
        violations: 0,
        examples: Vec::new(),
    };
    let flag = |report: &mut GammaReport, condition: &str, x: &[f64], detail: String| {
        report.violations += 1;
        if report.examples.len() < MAX_REPORTED_VIOLATIONS {
            report.examples.push(GammaViolation {
                condition: condition.to_string(),
                x: x.to_vec(),
                detail,
            });
        }
    };
    for trial in 0..trials {
        let n = rng.random_range(1..=k);
        let mut x = sorted_uniform(n, &mut rng);
        // every other trial puts one point in a hole, often at its edge
        if trial % 2 == 1 {
            let hole = rng.random_range(0..g.spec.len());
            let (a, b) = g.spec.holes[hole];
            let j = rng.random_range(0..n);
            x[j] = match rng.random_range(0..3) {
                0 => a,
                1 => b,
                _ => rng.random_range(a..=b),
            };
            x.sort_by(f64::total_cmp);
        }
        let base = match g.gamma(&x) {
            Ok(v) => v,
            Err(e) => {
                flag(&mut report, "domain", &x, e.to_string());
                continue;
            }
        };

        // condition i)
        if n < k {
            let j = rng.random_range(0..n);
            let mut dup = x.clone();
            dup.insert(j, x[j]);
            let mut front = vec![0.0];
            front.extend_from_slice(&x);
            let mut back = x.clone();
            back.push(1.0);
            for (what, y) in [("duplicate", dup), ("start", front), ("end", back)] {
                match g.gamma(&y) {
                    Ok(v) => {
                        let res = v
                            .iter()
                            .zip(&base)
                            .map(|(p, q)| (p - q).abs())
                            .fold(0.0, f64::max);
                        report.max_face_residual = report.max_face_residual.max(res);
                        if v != base {
                            flag(&mut report, "i", &y, format!("{what} face differs by {res:e}"));
                        }
                    }
                    Err(e) => flag(&mut report, "i", &y, e.to_string()),
                }
            }
        }

        // condition ii)
        let occupied = g.spec.occupied(&x);
        if !occupied.is_empty() {
            for _ in 0..4 {
                let mut y: Vec<f64> = x
                    .iter()
                    .map(|&s| (s + rng.random_range(-0.5..0.5) * g.delta).clamp(0.0, 1.0))
                    .collect();
                y.sort_by(f64::total_cmp);
                match g.gamma(&y) {
                    Ok(v) => {
                        let worst = occupied.iter().map(|&i| v[i]).fold(0.0, f64::max);
                        report.max_blocked_weight = report.max_blocked_weight.max(worst);
                        if worst != 0.0 {
                            flag(
                                &mut report,
                                "ii",
                                &y,
                                format!("holes {occupied:?} of {x:?} carry weight {worst:e}"),
                            );
                        }
                    }
                    Err(e) => flag(&mut report, "ii", &y, e.to_string()),
                }
            }
        }
    }
    report
}

/// Interval points evaluated on `h_{gamma(s)}`.
pub struct TowerEvaluator<'a> {
    pub holim: &'a HolimPoint,
    pub gamma: &'a GammaMap,
}

impl IntervalEvaluator for TowerEvaluator<'_> {
    fn eval_interval(&self, s: &[f64], t: &[f64], out: &mut Vec<(Vec3, Vec3)>) -> Result<()> {
        let bary = self.gamma.gamma(s)?;
        let h = self.holim.evaluate(&bary)?;
        out.clear();
        for (&si, &ti) in s.iter().zip(t) {
            match h.eval_at(si, ti) {
                Ok(v) => out.push(v),
                Err(Error::OutsideDomain { hole, .. }) => {
                    return Err(Error::GammaContract(format!(
                        "interval point {si} lies in hole {hole} removed at gamma({s:?})"
                    )))
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn is_straight_line(&self) -> bool {
        match &self.holim.family {
            Family::Constant(k) => k.is_straight(),
            Family::Affine { k0, k1, .. } => k0.is_straight() && k1.is_straight(),
        }
    }
}

fn check_tower_input(d: &TrivalentDiagram, h: &HolimPoint, g: &GammaMap) -> Result<()> {
    if g.spec != *h.spec {
        return Err(Error::InvalidInput("gamma map and holim point use different punctures".into()));
    }
    if h.stage < d.vertex_count() {
        return Err(Error::InvalidInput(format!(
            "stage {} is below the {} vertices of the diagram",
            h.stage,
            d.vertex_count()
        )));
    }
    Ok(())
}

/// `I(D, h)`, with the sampling schedule of [`integrals::integrate`].
pub fn integrate_tower(
    d: &TrivalentDiagram,
    h: &HolimPoint,
    g: &GammaMap,
    opts: SamplingOptions,
) -> Result<MCEstimate> {
    check_tower_input(d, h, g)?;
    integrals::integrate_with(d, &TowerEvaluator { holim: h, gamma: g }, opts)
}

/// `M_D I(D_1, h)`.
pub fn correction_tower(
    d: &TrivalentDiagram,
    h: &HolimPoint,
    g: &GammaMap,
    opts: SamplingOptions,
    anomaly: &AnomalyConfig,
) -> Result<MCEstimate> {
    integrals::correction_with(d, &TowerEvaluator { holim: h, gamma: g }, opts, anomaly)
}

/// `T(W)(h)`, with the calibration of the knot pipeline.
pub fn invariant_tower(
    space: &DiagramSpace,
    w: &WeightSystem,
    h: &HolimPoint,
    g: &GammaMap,
    opts: &InvariantOptions,
) -> Result<InvariantReport> {
    if let Some(d) = space.keys.first() {
        check_tower_input(d, h, g)?;
    }
    integrals::invariant_with(space, w, &TowerEvaluator { holim: h, gamma: g }, opts)
}
