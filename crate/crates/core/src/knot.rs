//! Long knots in R^3: smooth embeddings that coincide with `t -> (t, 0, 0)`
//! outside `[0, 1]`.
//!
//! Standard knots are polynomial (Chebyshev) or inverted torus-knot cores,
//! sheared so that their end points land on `(0,0,0)` and `(1,0,0)`, then
//! blended into the straight line over short collars with a C² smoothstep.

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Samples on `[0, 1]` used by the discrete embedding check.
pub const EMBEDDING_GRID: usize = 2048;
/// Pairs closer than this in parameter are not compared by the embedding check.
pub const EMBEDDING_SEPARATION: f64 = 0.02;

/// Quintic smoothstep `s^3 (10 - 15 s + 6 s^2)` clamped to `[0, 1]`.
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

pub fn smoothstep_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        30.0 * s * s * (1.0 - s) * (1.0 - s)
    }
}

#[derive(Debug, Clone)]
pub struct LongKnot {
    name: String,
    shape: Shape,
}

#[derive(Debug, Clone)]
enum Shape {
    Line,
    Blended(Arc<Blended>),
    Spline(Arc<Spline>),
    Displaced {
        base: Arc<LongKnot>,
        modes: Arc<Vec<Vec3>>,
    },
    Mirror(Arc<LongKnot>),
    Concat(Arc<LongKnot>, Arc<LongKnot>),
    Interpolated {
        k0: Arc<LongKnot>,
        k1: Arc<LongKnot>,
        u: f64,
    },
}

#[derive(Debug, Clone, Copy)]
enum Core {
    Chebyshev([usize; 3]),
    InvertedTorus { p: usize, q: usize },
}

const TORUS_MAJOR: f64 = 2.0;
const TORUS_MINOR: f64 = 1.0;

impl Core {
    /// Point and derivative with respect to the core parameter.
    fn eval(self, u: f64) -> (Vec3, Vec3) {
        match self {
            Core::Chebyshev(ns) => {
                let mut p = [0.0; 3];
                let mut d = [0.0; 3];
                for i in 0..3 {
                    (p[i], d[i]) = chebyshev(ns[i], u);
                }
                (p, d)
            }
            Core::InvertedTorus { p, q } => inverted_torus(p, q, u),
        }
    }
}

/// `T_n(u)` and `T_n'(u)` by the three-term recurrence.
fn chebyshev(n: usize, u: f64) -> (f64, f64) {
    let (mut t0, mut t1) = (1.0, u);
    let (mut d0, mut d1) = (0.0, 1.0);
    if n == 0 {
        return (1.0, 0.0);
    }
    for _ in 1..n {
        let t2 = 2.0 * u * t1 - t0;
        let d2 = 2.0 * t1 + 2.0 * u * d1 - d0;
        (t0, t1, d0, d1) = (t1, t2, d1, d2);
    }
    (t1, d1)
}

fn torus_point(p: usize, q: usize, th: f64) -> (Vec3, Vec3) {
    let (pf, qf) = (p as f64, q as f64);
    let rho = TORUS_MAJOR + TORUS_MINOR * (qf * th).cos();
    let drho = -TORUS_MINOR * qf * (qf * th).sin();
    let (s, c) = (pf * th).sin_cos();
    let pos = [rho * c, rho * s, TORUS_MINOR * (qf * th).sin()];
    let der = [
        drho * c - rho * pf * s,
        drho * s + rho * pf * c,
        TORUS_MINOR * qf * (qf * th).cos(),
    ];
    (pos, der)
}

/// Torus knot inverted in the unit sphere about its point at `th = 0`, then
/// turned so the parameter runs from `-x` to `+x`. The axis flips are chosen
/// so `torus(2,3)` has the positive crossings of [`LongKnot::trefoil`].
fn inverted_torus(p: usize, q: usize, th: f64) -> (Vec3, Vec3) {
    let (base, tangent) = torus_point(p, q, 0.0);
    let tau = vec3::scale(tangent, 1.0 / vec3::norm(tangent));
    let (n1, n2) = vec3::orthonormal_complement(tau);
    let (c, dc) = torus_point(p, q, th);
    let w = vec3::sub(c, base);
    let r2 = vec3::dot(w, w);
    let y = vec3::scale(w, 1.0 / r2);
    let dy = vec3::sub(
        vec3::scale(dc, 1.0 / r2),
        vec3::scale(w, 2.0 * vec3::dot(w, dc) / (r2 * r2)),
    );
    let frame = |v: Vec3| [-vec3::dot(v, tau), vec3::dot(v, n1), -vec3::dot(v, n2)];
    (frame(y), frame(dy))
}

/// A core curve on `[u0, u1]`, mapped affinely so its ends are the origin and
/// `e_x`, blended into the line on collars of width `collar`.
#[derive(Debug, Clone)]
struct Blended {
    core: Core,
    u0: f64,
    u1: f64,
    collar: f64,
    matrix: [Vec3; 3],
    origin: Vec3,
}

impl Blended {
    fn new(core: Core, u0: f64, u1: f64, collar: f64, z_scale: f64) -> Self {
        let (lo, _) = core.eval(u0);
        let (hi, _) = core.eval(u1);
        let d = vec3::sub(hi, lo);
        // shear along x so the chord becomes e_x; the (x, y) projection and
        // the depth order at its crossings are unchanged
        let inv = 1.0 / d[0];
        let matrix = [
            [inv, 0.0, 0.0],
            [-d[1] * inv * inv, inv, 0.0],
            [-d[2] * inv * inv * z_scale, 0.0, inv * z_scale],
        ];
        Blended {
            core,
            u0,
            u1,
            collar,
            matrix,
            origin: lo,
        }
    }

    fn weight(&self, t: f64) -> (f64, f64) {
        let c = self.collar;
        let (a, da) = (smoothstep(t / c), smoothstep_deriv(t / c) / c);
        let (b, db) = (smoothstep((1.0 - t) / c), -smoothstep_deriv((1.0 - t) / c) / c);
        if a <= b {
            (a, da)
        } else {
            (b, db)
        }
    }

    fn core_point(&self, t: f64) -> (Vec3, Vec3) {
        let span = self.u1 - self.u0;
        let (p, d) = self.core.eval(self.u0 + span * t);
        (
            vec3::mat_vec(&self.matrix, vec3::sub(p, self.origin)),
            vec3::scale(vec3::mat_vec(&self.matrix, d), span),
        )
    }

    fn eval(&self, t: f64) -> (Vec3, Vec3) {
        let (w, dw) = self.weight(t);
        let line = [t, 0.0, 0.0];
        let (c, dc) = self.core_point(t);
        let pos = vec3::lerp(line, c, w);
        let der = vec3::add(
            vec3::lerp([1.0, 0.0, 0.0], dc, w),
            vec3::scale(vec3::sub(c, line), dw),
        );
        (pos, der)
    }
}

/// Uniform cubic B-spline whose control polygon continues the x-axis with
/// spacing `h` on both sides, so the curve equals `(t, 0, 0)` outside `[0, 1]`.
#[derive(Debug, Clone)]
struct Spline {
    h: f64,
    /// Control points with indices `2 ..= m + 1`; all others lie on the axis.
    points: Vec<Vec3>,
}

impl Spline {
    fn control(&self, i: i64) -> Vec3 {
        let m = self.points.len() as i64;
        if (2..=m + 1).contains(&i) {
            self.points[(i - 2) as usize]
        } else {
            [i as f64 * self.h, 0.0, 0.0]
        }
    }

    fn eval(&self, t: f64) -> (Vec3, Vec3) {
        let x = t / self.h;
        let base = x.floor() as i64;
        let mut pos = [0.0; 3];
        let mut der = [0.0; 3];
        for i in base - 1..=base + 2 {
            let (b, db) = cubic_bspline(x - i as f64);
            let c = self.control(i);
            pos = vec3::add(pos, vec3::scale(c, b));
            der = vec3::add(der, vec3::scale(c, db / self.h));
        }
        (pos, der)
    }
}

/// Centered uniform cubic B-spline on `(-2, 2)` and its derivative.
fn cubic_bspline(x: f64) -> (f64, f64) {
    let a = x.abs();
    let sg = x.signum();
    if a >= 2.0 {
        (0.0, 0.0)
    } else if a >= 1.0 {
        let r = 2.0 - a;
        (r * r * r / 6.0, -sg * r * r / 2.0)
    } else {
        (
            (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0,
            sg * (-2.0 * a + 1.5 * a * a),
        )
    }
}

/// JSON description of a custom spline knot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// Interior control points; the control polygon is continued along the
    /// x-axis at equal spacing `1 / (len + 3)`.
    pub points: Vec<Vec3>,
}

/// Bump that vanishes with its first two derivatives at 0 and 1, peak 1.
fn window(t: f64) -> (f64, f64) {
    if t <= 0.0 || t >= 1.0 {
        return (0.0, 0.0);
    }
    let s = t * (1.0 - t);
    (64.0 * s * s * s, 192.0 * s * s * (1.0 - 2.0 * t))
}

fn displacement(modes: &[Vec3], t: f64) -> (Vec3, Vec3) {
    let (w, dw) = window(t);
    if w == 0.0 && dw == 0.0 {
        return ([0.0; 3], [0.0; 3]);
    }
    let mut f = [0.0; 3];
    let mut df = [0.0; 3];
    for (j, a) in modes.iter().enumerate() {
        let k = (j + 1) as f64 * PI;
        let (s, c) = (k * t).sin_cos();
        f = vec3::add(f, vec3::scale(*a, s));
        df = vec3::add(df, vec3::scale(*a, k * c));
    }
    (
        vec3::scale(f, w),
        vec3::add(vec3::scale(df, w), vec3::scale(f, dw)),
    )
}

const PERTURB_MODES: usize = 6;
const SUP_GRID: usize = 8192;

impl LongKnot {
    pub fn unknot() -> Self {
        LongKnot {
            name: "unknot".into(),
            shape: Shape::Line,
        }
    }

    fn blended(name: &str, core: Core, u0: f64, u1: f64, collar: f64, z_scale: f64) -> Self {
        LongKnot {
            name: name.into(),
            shape: Shape::Blended(Arc::new(Blended::new(core, u0, u1, collar, z_scale))),
        }
    }

    /// Harmonic knot `(T_a, T_b, T_c)` on `[-1.2, 1.2]`.
    pub fn chebyshev(name: &str, a: usize, b: usize, c: usize) -> Self {
        Self::blended(name, Core::Chebyshev([a, b, c]), -1.2, 1.2, 0.05, 1.0)
    }

    pub fn trefoil() -> Self {
        Self::chebyshev("trefoil", 3, 4, 5)
    }

    pub fn figure_eight() -> Self {
        Self::chebyshev("figure_eight", 3, 5, 7)
    }

    /// A curved but unknotted arc: the trefoil's planar shadow with monotone height.
    pub fn bent_unknot() -> Self {
        Self::chebyshev("bent_unknot", 3, 4, 1)
    }

    pub fn torus(p: usize, q: usize) -> Result<Self> {
        if p < 2 || q < 2 || num_integer::gcd(p, q) != 1 {
            return Err(Error::InvalidInput(format!(
                "torus({p},{q}) needs coprime p, q >= 2"
            )));
        }
        let theta0 = 0.25 / p.max(q) as f64;
        Ok(Self::blended(
            &format!("torus({p},{q})"),
            Core::InvertedTorus { p, q },
            theta0,
            2.0 * PI - theta0,
            0.02,
            1.0,
        ))
    }

    pub fn from_spline(spec: &SplineSpec) -> Result<Self> {
        if spec.points.is_empty() {
            return Err(Error::InvalidInput("spline knot needs control points".into()));
        }
        if spec.points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite control point".into()));
        }
        let h = 1.0 / (spec.points.len() + 3) as f64;
        let knot = LongKnot {
            name: spec.name.clone().unwrap_or_else(|| "spline".into()),
            shape: Shape::Spline(Arc::new(Spline {
                h,
                points: spec.points.clone(),
            })),
        };
        knot.check_embedding()?;
        Ok(knot)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SplineSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::from_spline(&spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn is_straight(&self) -> bool {
        matches!(self.shape, Shape::Line)
    }

    /// Reflection `z -> -z`.
    pub fn mirror(&self) -> Self {
        LongKnot {
            name: format!("mirror:{}", self.name),
            shape: Shape::Mirror(Arc::new(self.clone())),
        }
    }

    /// `self` compressed into `[0, 1/2]` followed by `other` in `[1/2, 1]`.
    pub fn concat(&self, other: &LongKnot) -> Self {
        LongKnot {
            name: format!("{}#{}", self.name, other.name),
            shape: Shape::Concat(Arc::new(self.clone()), Arc::new(other.clone())),
        }
    }

    /// Pointwise `(1 - u) k0 + u k1`.
    pub fn interpolate(k0: &LongKnot, k1: &LongKnot, u: f64) -> Self {
        if u == 0.0 {
            return k0.clone();
        }
        if u == 1.0 {
            return k1.clone();
        }
        LongKnot {
            name: format!("lerp({},{},{u})", k0.name, k1.name),
            shape: Shape::Interpolated {
                k0: Arc::new(k0.clone()),
                k1: Arc::new(k1.clone()),
                u,
            },
        }
    }

    /// Point and derivative at `t`.
    pub fn eval(&self, t: f64) -> (Vec3, Vec3) {
        if !(0.0..=1.0).contains(&t) {
            return ([t, 0.0, 0.0], [1.0, 0.0, 0.0]);
        }
        match &self.shape {
            Shape::Line => ([t, 0.0, 0.0], [1.0, 0.0, 0.0]),
            Shape::Blended(b) => b.eval(t),
            Shape::Spline(s) => s.eval(t),
            Shape::Displaced { base, modes } => {
                let (p, d) = base.eval(t);
                let (f, df) = displacement(modes, t);
                (vec3::add(p, f), vec3::add(d, df))
            }
            Shape::Mirror(k) => {
                let (p, d) = k.eval(t);
                ([p[0], p[1], -p[2]], [d[0], d[1], -d[2]])
            }
            Shape::Concat(a, b) => {
                let (k, s, shift) = if t <= 0.5 { (a, 2.0 * t, 0.0) } else { (b, 2.0 * t - 1.0, 0.5) };
                let (p, d) = k.eval(s);
                ([0.5 * p[0] + shift, 0.5 * p[1], 0.5 * p[2]], d)
            }
            Shape::Interpolated { k0, k1, u } => {
                let (p0, d0) = k0.eval(t);
                let (p1, d1) = k1.eval(t);
                (vec3::lerp(p0, p1, *u), vec3::lerp(d0, d1, *u))
            }
        }
    }

    pub fn evaluate(&self, t: f64) -> Vec3 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> Vec3 {
        self.eval(t).1
    }

    /// Minimum distance between segments of the grid polyline more than
    /// [`EMBEDDING_SEPARATION`] apart in parameter, including the distance
    /// from interior samples to the two straight rays. Segments rather than
    /// points, so that strands passing through each other between samples
    /// still count.
    pub fn embedding_margin(&self) -> f64 {
        let n = EMBEDDING_GRID;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| self.evaluate(i as f64 / (n - 1) as f64))
            .collect();
        let gap = (EMBEDDING_SEPARATION * (n - 1) as f64).ceil() as usize;
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + gap..n - 1 {
                if i + 1 < n {
                    best = best.min(vec3::segment_distance(pts[i], pts[i + 1], pts[j], pts[j + 1]));
                }
            }
            let t = i as f64 / (n - 1) as f64;
            let p = pts[i];
            if t > EMBEDDING_SEPARATION {
                best = best.min(ray_distance(p, false));
            }
            if t < 1.0 - EMBEDDING_SEPARATION {
                best = best.min(ray_distance(p, true));
            }
        }
        best
    }

    pub fn min_speed(&self) -> f64 {
        let n = EMBEDDING_GRID;
        (0..n)
            .map(|i| vec3::norm(self.derivative(i as f64 / (n - 1) as f64)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_embedding(&self) -> Result<f64> {
        let margin = self.embedding_margin();
        if !(margin > 1e-6) {
            return Err(Error::NotEmbedded(format!(
                "{}: sample separation {margin:e}",
                self.name
            )));
        }
        let speed = self.min_speed();
        if !(speed > 1e-9) {
            return Err(Error::NotEmbedded(format!(
                "{}: vanishing derivative ({speed:e})",
                self.name
            )));
        }
        Ok(margin)
    }

    /// Adds a smooth displacement supported in `[0, 1]` with sup-norm at most
    /// `amplitude`, drawn from `seed`.
    pub fn perturb(&self, seed: u64, amplitude: f64) -> Result<LongKnot> {
        if amplitude == 0.0 {
            return Ok(self.clone());
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidInput(format!("amplitude {amplitude}")));
        }
        let margin = self.embedding_margin();
        if amplitude >= margin / 4.0 {
            return Err(Error::NotEmbedded(format!(
                "amplitude {amplitude:e} not below a quarter of the embedding margin {margin:e}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Vec3> = (0..PERTURB_MODES)
            .map(|j| {
                let decay = 1.0 / (j + 1) as f64;
                [
                    rng.random_range(-1.0..1.0) * decay,
                    rng.random_range(-1.0..1.0) * decay,
                    rng.random_range(-1.0..1.0) * decay,
                ]
            })
            .collect();
        // sup over a fine grid plus the slope times half a cell bounds the true sup
        let mut grid_max: f64 = 0.0;
        let mut slope_max: f64 = 0.0;
        for i in 0..=SUP_GRID {
            let (f, df) = displacement(&raw, i as f64 / SUP_GRID as f64);
            grid_max = grid_max.max(vec3::norm(f));
            slope_max = slope_max.max(vec3::norm(df));
        }
        let bound = grid_max + slope_max * 0.5 / SUP_GRID as f64;
        let s = amplitude / bound;
        let modes: Vec<Vec3> = raw.iter().map(|a| vec3::scale(*a, s)).collect();
        let out = LongKnot {
            name: format!("{}~{seed}", self.name),
            shape: Shape::Displaced {
                base: Arc::new(self.clone()),
                modes: Arc::new(modes),
            },
        };
        out.check_embedding()?;
        Ok(out)
    }

    /// Sup-norm of `other - self` on a fine grid.
    pub fn distance(&self, other: &LongKnot) -> f64 {
        (0..=SUP_GRID)
            .map(|i| {
                let t = i as f64 / SUP_GRID as f64;
                vec3::norm(vec3::sub(self.evaluate(t), other.evaluate(t)))
            })
            .fold(0.0, f64::max)
    }
}

/// Distance from `p` to the ray `x <= 0` (or `x >= 1` when `right`) on the axis.
fn ray_distance(p: Vec3, right: bool) -> f64 {
    let x = if right { p[0].max(1.0) } else { p[0].min(0.0) };
    vec3::norm(vec3::sub(p, [x, 0.0, 0.0]))
}

/// Names understood by [`standard_knot`].
pub const STANDARD_NAMES: &[&str] = &[
    "unknot",
    "bent_unknot",
    "trefoil",
    "figure_eight",
    "torus(p,q)",
];

/// Looks up a knot by name. Accepts the names in [`STANDARD_NAMES`], a
/// `mirror:` prefix, and `#` for concatenation (`trefoil#trefoil`).
pub fn standard_knot(name: &str) -> Result<LongKnot> {
    let name = name.trim();
    if name.contains('#') {
        let mut parts = name.split('#');
        let first = standard_knot(parts.next().unwrap_or_default())?;
        return parts.try_fold(first, |acc, p| Ok(acc.concat(&standard_knot(p)?)));
    }
    if let Some(rest) = name.strip_prefix("mirror:") {
        return Ok(standard_knot(rest)?.mirror());
    }
    match name {
        "unknot" => Ok(LongKnot::unknot()),
        "bent_unknot" => Ok(LongKnot::bent_unknot()),
        "trefoil" => Ok(LongKnot::trefoil()),
        "figure_eight" | "figure-eight" | "figure8" => Ok(LongKnot::figure_eight()),
        _ => {
            if let Some(args) = name.strip_prefix("torus(").and_then(|r| r.strip_suffix(')')) {
                let nums: Vec<usize> = args
                    .split(',')
                    .map(|x| x.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::UnknownKnot(name.into()))?;
                if let [p, q] = nums[..] {
                    return LongKnot::torus(p, q);
                }
            }
            Err(Error::UnknownKnot(name.into()))
        }
    }
}
