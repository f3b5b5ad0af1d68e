use crate::output::Report;
use crate::{InvariantChoice, KnotArgs, OutArgs, ParityArg, SamplingArgs};
use anyhow::{bail, Context, Result};
use clap::Args;
use knot_tower::gauss::v2_from_jones;
use knot_tower::integrals::derive_seed;
use knot_tower::rational::dense_rank;
use knot_tower::tower::knot_to_holim_with;
use knot_tower::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Largest degree for which `dims` also runs the dense elimination.
const DENSE_CHECK_DEGREE: usize = 4;
/// Agreement threshold, in combined standard errors.
const SIGMAS: f64 = 3.0;

fn load_knot(k: &KnotArgs) -> Result<LongKnot> {
    match &k.knot_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(LongKnot::from_json(&text)?)
        }
        None => Ok(standard_knot(&k.knot)?),
    }
}

fn sampling(s: &SamplingArgs) -> SamplingOptions {
    SamplingOptions::new(s.budget, s.seed)
        .with_workers(s.workers)
        .with_proposal(s.proposal.into())
}

fn load_anomaly(path: &Option<PathBuf>) -> Result<AnomalyConfig> {
    let Some(path) = path else {
        return Ok(AnomalyConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: AnomalyConfig = serde_json::from_str(&text).context("parsing anomaly table")?;
    if let Some((k, v)) = cfg.values.iter().find(|(_, v)| !v.is_finite()) {
        bail!("anomaly constant for {k} is {v}");
    }
    Ok(cfg)
}

fn invariant_setup(c: &InvariantChoice, s: &SamplingArgs) -> Result<(DiagramSpace, WeightSystem, InvariantOptions)> {
    let space = DiagramSpace::new(c.degree, Parity::Odd)?;
    let basis = weight_basis(&space)?;
    let Some(w) = basis.into_iter().nth(c.weight) else {
        bail!("degree {} has no weight system with index {}", c.degree, c.weight);
    };
    let mut opts = InvariantOptions::new(sampling(s));
    opts.anomaly = load_anomaly(&c.anomaly)?;
    opts.weighting = c.weighting.into();
    opts.calibration = c.calibration;
    Ok((space, w, opts))
}

fn oracle_value(k: &LongKnot, degree: usize) -> Result<Option<i64>> {
    let g = gauss_projection(k, DEFAULT_DIRECTION)?;
    Ok(match degree {
        2 => Some(v2(&g)),
        3 => Some(v3(&g)?),
        _ => None,
    })
}

fn within(e: &MCEstimate, target: f64) -> bool {
    (e.value - target).abs() <= SIGMAS * e.std_error
}

#[derive(Args)]
pub struct DimsArgs {
    #[arg(long, default_value_t = 4)]
    max_degree: usize,
    #[arg(long, value_enum, default_value = "both")]
    parity: ParityArg,
    /// Exit with status 1 unless every check passes.
    #[arg(long)]
    check: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct DimsRow {
    degree: usize,
    parity: &'static str,
    keys: usize,
    relations: usize,
    rank: usize,
    dense_rank: Option<usize>,
    dimension: usize,
    primitive: usize,
    ihx_consistent: bool,
}

pub fn dims(a: DimsArgs) -> Result<bool> {
    if a.max_degree == 0 || a.max_degree > MAX_ENUMERATION_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree: a.max_degree,
            max: MAX_ENUMERATION_DEGREE,
        }
        .into());
    }
    let mut rows = Vec::new();
    for parity in a.parity.parities() {
        for n in 1..=a.max_degree {
            let space = DiagramSpace::new(n, parity)?;
            let rel = space.relation_matrix();
            let rank = rel.rank();
            let dense = (n <= DENSE_CHECK_DEGREE).then(|| dense_rank(space.len(), &rel.rows));
            let primitive = weight_basis(&space)?.iter().filter(|w| w.primitive).count();
            rows.push(DimsRow {
                degree: n,
                parity: parity.as_str(),
                keys: space.len(),
                relations: rel.rows.len(),
                rank,
                dense_rank: dense,
                dimension: space.len() - rank,
                primitive,
                ihx_consistent: ihx_consistency(&space),
            });
        }
    }
    let ok = rows.iter().all(|r| {
        r.dense_rank.is_none_or(|d| d == r.rank) && r.ihx_consistent && (r.degree != 1 || r.dimension == 0)
    });
    let summary = rows
        .iter()
        .map(|r| format!("n={} {:4} dim={} primitive={}", r.degree, r.parity, r.dimension, r.primitive))
        .collect::<Vec<_>>()
        .join("\n");
    let report = Report::new(&serde_json::json!({ "rows": rows, "consistent": ok }), summary)?
        .with_rows(&rows)?
        .checked(ok || !a.check);
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(report.ok)
}

#[derive(Args)]
pub struct WeightsArgs {
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, value_enum, default_value = "odd")]
    parity: ParityArg,
    #[arg(long)]
    primitive_only: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct WeightEntry {
    index: usize,
    primitive: bool,
    coefficients: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct WeightRow {
    weight: usize,
    primitive: bool,
    diagram: String,
    coefficient: String,
}

pub fn weights(a: WeightsArgs) -> Result<bool> {
    let parity = match a.parity {
        ParityArg::Odd => Parity::Odd,
        ParityArg::Even => Parity::Even,
        ParityArg::Both => bail!("weights needs a single parity"),
    };
    let space = DiagramSpace::new(a.degree, parity)?;
    let basis = weight_basis(&space)?;
    let entries: Vec<WeightEntry> = basis
        .iter()
        .enumerate()
        .filter(|(_, w)| w.primitive || !a.primitive_only)
        .map(|(index, w)| WeightEntry {
            index,
            primitive: w.primitive,
            coefficients: w.support().map(|(i, c)| (space.keys[i].encode(), c.to_string())).collect(),
        })
        .collect();
    let rows: Vec<WeightRow> = entries
        .iter()
        .flat_map(|e| {
            e.coefficients.iter().map(move |(d, c)| WeightRow {
                weight: e.index,
                primitive: e.primitive,
                diagram: d.clone(),
                coefficient: c.clone(),
            })
        })
        .collect();
    let summary = format!(
        "degree {} {}: {} weight systems, {} primitive",
        a.degree,
        parity.as_str(),
        basis.len(),
        basis.iter().filter(|w| w.primitive).count()
    );
    let doc = serde_json::json!({ "degree": a.degree, "parity": parity.as_str(), "weights": entries });
    let report = Report::new(&doc, summary)?.with_rows(&rows)?;
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(true)
}

#[derive(Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    knot: KnotArgs,
    /// Diagram encoding; repeat for several. Seeds are used as given.
    #[arg(long, conflicts_with = "degree")]
    diagram: Vec<String>,
    /// Integrate every key of this degree, with the per-key seeds the invariant uses.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    anomaly: Option<PathBuf>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct IntegralRow {
    diagram: String,
    value: f64,
    std_error: f64,
    samples: u64,
    seed: u64,
    rejected: u64,
    tail_mass: f64,
    correction: f64,
    correction_std_error: f64,
}

pub fn integrate(a: IntegrateArgs) -> Result<bool> {
    let k = load_knot(&a.knot)?;
    let anomaly = load_anomaly(&a.anomaly)?;
    let base = sampling(&a.sampling);
    let jobs: Vec<(TrivalentDiagram, SamplingOptions)> = match a.degree {
        Some(n) => {
            if !(1..=integrals::MAX_INTEGRATION_DEGREE).contains(&n) {
                return Err(Error::UnsupportedDegree {
                    degree: n,
                    max: integrals::MAX_INTEGRATION_DEGREE,
                }
                .into());
            }
            DiagramSpace::new(n, Parity::Odd)?
                .keys
                .into_iter()
                .enumerate()
                .map(|(i, d)| (d, SamplingOptions { seed: derive_seed(base.seed, i as u64), ..base }))
                .collect()
        }
        None if a.diagram.is_empty() => bail!("give --diagram or --degree"),
        None => a
            .diagram
            .iter()
            .map(|e| Ok((TrivalentDiagram::decode(e)?, base)))
            .collect::<Result<_>>()?,
    };
    let mut rows = Vec::new();
    for (d, opts) in jobs {
        d.validate()?;
        let e = knot_tower::integrate(&d, &k, opts)?;
        let c = correction(&d, &k, base, &anomaly)?;
        rows.push(IntegralRow {
            diagram: d.encode(),
            value: e.value,
            std_error: e.std_error,
            samples: e.samples,
            seed: e.seed,
            rejected: e.diagnostics.rejected,
            tail_mass: e.diagnostics.tail_mass,
            correction: c.value,
            correction_std_error: c.std_error,
        });
    }
    let summary = rows
        .iter()
        .map(|r| format!("{}  {:+.6} ± {:.6}", r.diagram, r.value, r.std_error))
        .collect::<Vec<_>>()
        .join("\n");
    let doc = serde_json::json!({ "knot": k.name(), "integrals": rows });
    let report = Report::new(&doc, summary)?.with_rows(&rows)?;
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(true)
}

#[derive(Args)]
pub struct InvariantArgs {
    #[command(flatten)]
    knot: KnotArgs,
    #[command(flatten)]
    choice: InvariantChoice,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Compare with the Gauss-diagram value. At degree 2 exit with status 1
    /// unless they agree within 3 sigma; other degrees only report the ratio,
    /// since the calibration does not fix their scale.
    #[arg(long)]
    check: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct InvariantDoc<'a> {
    knot: &'a str,
    value: f64,
    std_error: f64,
    oracle: Option<i64>,
    /// Only judged at degree 2, the degree the calibration is fixed on.
    agrees: Option<bool>,
    oracle_ratio: Option<f64>,
    report: &'a InvariantReport,
}

#[derive(Serialize)]
struct TermRow<'a> {
    diagram: &'a str,
    weight_coefficient: f64,
    multiplicity: f64,
    value: f64,
    std_error: f64,
    correction: f64,
}

fn term_rows(r: &InvariantReport) -> Vec<TermRow<'_>> {
    r.terms
        .iter()
        .map(|t| TermRow {
            diagram: &t.diagram,
            weight_coefficient: t.weight_coefficient,
            multiplicity: t.multiplicity,
            value: t.integral.value,
            std_error: t.integral.std_error,
            correction: t.correction.value,
        })
        .collect()
}

pub fn invariant(a: InvariantArgs) -> Result<bool> {
    let k = load_knot(&a.knot)?;
    let (space, w, opts) = invariant_setup(&a.choice, &a.sampling)?;
    let r = knot_tower::invariant(&space, &w, &k, &opts)?;
    let oracle = if a.check { oracle_value(&k, a.choice.degree)? } else { None };
    let agrees = oracle.filter(|_| a.choice.degree == 2).map(|o| within(&r.estimate, o as f64));
    let oracle_ratio = oracle.filter(|&o| o != 0).map(|o| r.estimate.value / o as f64);
    let summary = format!(
        "{} degree {}: {:+.4} ± {:.4}{}",
        k.name(),
        r.degree,
        r.estimate.value,
        r.estimate.std_error,
        oracle.map(|o| format!(" (oracle {o})")).unwrap_or_default()
    );
    let doc = InvariantDoc {
        knot: k.name(),
        value: r.estimate.value,
        std_error: r.estimate.std_error,
        oracle,
        agrees,
        oracle_ratio,
        report: &r,
    };
    let report = Report::new(&doc, summary)?.with_rows(&term_rows(&r))?.checked(agrees != Some(false));
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(report.ok)
}

#[derive(Args)]
pub struct TowerArgs {
    #[command(flatten)]
    knot: KnotArgs,
    /// Tower stage; defaults to the vertex count 2n.
    #[arg(long)]
    stage: Option<usize>,
    #[command(flatten)]
    choice: InvariantChoice,
    /// Use the straight-line family from the knot to this perturbation seed
    /// instead of the constant family.
    #[arg(long)]
    synthetic: Option<u64>,
    /// Perturbation size as a fraction of the embedding margin (below 1/4).
    #[arg(long, default_value_t = 0.2)]
    amplitude: f64,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    out: OutArgs,
}

pub fn tower_integrate(a: TowerArgs) -> Result<bool> {
    let k = load_knot(&a.knot)?;
    let (space, w, opts) = invariant_setup(&a.choice, &a.sampling)?;
    let stage = a.stage.unwrap_or(2 * a.choice.degree);
    let g = GammaMap::for_stage(stage)?;
    let h = match a.synthetic {
        None => knot_to_holim_with(&k, g.spec.clone())?,
        Some(seed) => {
            let p = k.perturb(seed, a.amplitude * k.embedding_margin())?;
            synthetic_family(&k, &p, g.spec.clone())?
        }
    };
    let r = invariant_tower(&space, &w, &h, &g, &opts)?;
    let summary = format!(
        "{} stage {} degree {}: {:+.4} ± {:.4}",
        k.name(),
        stage,
        r.degree,
        r.estimate.value,
        r.estimate.std_error
    );
    let doc = serde_json::json!({
        "knot": k.name(),
        "stage": stage,
        "family": if h.is_constant() { "constant" } else { "synthetic" },
        "value": r.estimate.value,
        "std_error": r.estimate.std_error,
        "report": r,
    });
    let report = Report::new(&doc, summary)?.with_rows(&term_rows(&r))?;
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(true)
}

#[derive(Args)]
pub struct FactorArgs {
    #[command(flatten)]
    knot: KnotArgs,
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Tower stage; defaults to the vertex count 2n.
    #[arg(long)]
    stage: Option<usize>,
    #[arg(long, default_value = "1e4", value_parser = crate::parse_budget)]
    budget: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, env = "KNOT_TOWER_WORKERS", default_value_t = integrals::DEFAULT_WORKERS)]
    workers: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct FactorRow {
    diagram: String,
    knot_value: f64,
    tower_value: f64,
    knot_std_error: f64,
    tower_std_error: f64,
    identical: bool,
}

pub fn factor_check(a: FactorArgs) -> Result<bool> {
    let k = load_knot(&a.knot)?;
    if !(1..=integrals::MAX_INTEGRATION_DEGREE).contains(&a.degree) {
        return Err(Error::UnsupportedDegree {
            degree: a.degree,
            max: integrals::MAX_INTEGRATION_DEGREE,
        }
        .into());
    }
    let stage = a.stage.unwrap_or(2 * a.degree);
    let g = GammaMap::for_stage(stage)?;
    let h = knot_to_holim_with(&k, g.spec.clone())?;
    let space = DiagramSpace::new(a.degree, Parity::Odd)?;
    let mut rows = Vec::new();
    for (i, d) in space.keys.iter().enumerate() {
        let opts = SamplingOptions::new(a.budget, derive_seed(a.seed, i as u64)).with_workers(a.workers);
        let x = knot_tower::integrate(d, &k, opts)?;
        let y = integrate_tower(d, &h, &g, opts)?;
        rows.push(FactorRow {
            diagram: d.encode(),
            knot_value: x.value,
            tower_value: y.value,
            knot_std_error: x.std_error,
            tower_std_error: y.std_error,
            identical: x == y,
        });
    }
    let same = rows.iter().filter(|r| r.identical).count();
    let ok = same == rows.len();
    let summary = format!("{} stage {stage}: {same}/{} diagrams bit-identical", k.name(), rows.len());
    let doc = serde_json::json!({ "knot": k.name(), "stage": stage, "degree": a.degree, "all_identical": ok, "rows": rows });
    let report = Report::new(&doc, summary)?.with_rows(&rows)?.checked(ok);
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(report.ok)
}

#[derive(Args)]
pub struct GammaArgs {
    #[arg(long, default_value_t = 6)]
    stage: usize,
    #[arg(long, default_value = "1e4", value_parser = crate::parse_budget)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Negative control: narrow hole 1 to 1.5 delta; the check then passes
    /// only if violations are found.
    #[arg(long)]
    mutate: bool,
    #[command(flatten)]
    out: OutArgs,
}

pub fn gamma_check(a: GammaArgs) -> Result<bool> {
    let mut g = GammaMap::for_stage(a.stage)?;
    if a.mutate {
        let mut spec = g.spec.clone();
        let (lo, hi) = spec.holes[1];
        let c = 0.5 * (lo + hi);
        spec.holes[1] = (c - 0.75 * g.delta, c + 0.75 * g.delta);
        g = GammaMap::new_unchecked(spec, g.delta);
    }
    let r = check_gamma(&g, a.trials as usize, a.seed);
    let ok = r.passed() != a.mutate;
    let summary = format!(
        "stage {}{}: {} trials, {} violations",
        r.stage,
        if a.mutate { " (mutated)" } else { "" },
        r.trials,
        r.violations
    );
    let doc = serde_json::json!({ "mutated": a.mutate, "delta": g.delta, "holes": g.spec.holes, "report": r });
    let report = Report::new(&doc, summary)?.with_rows(&r.examples)?.checked(ok);
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(report.ok)
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    knot: KnotArgs,
    /// Viewing direction `x,y,z`.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DIRECTION, allow_hyphen_values = true)]
    direction: Vec<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct OracleDoc {
    knot: String,
    direction: [f64; 3],
    crossings: usize,
    writhe: i64,
    v2: i64,
    v2_from_jones: i64,
    v3: i64,
    /// `(exponent, coefficient)` pairs of the Jones polynomial.
    jones: Vec<(i64, i64)>,
}

pub fn oracle(a: OracleArgs) -> Result<bool> {
    let k = load_knot(&a.knot)?;
    let &[x, y, z] = a.direction.as_slice() else {
        bail!("--direction needs three components, got {}", a.direction.len());
    };
    let dir = [x, y, z];
    let g = gauss_projection(&k, dir)?;
    let doc = OracleDoc {
        knot: k.name().to_string(),
        direction: dir,
        crossings: g.len(),
        writhe: g.writhe(),
        v2: v2(&g),
        v2_from_jones: v2_from_jones(&g)?,
        v3: v3(&g)?,
        jones: jones(&g)?.0.into_iter().collect(),
    };
    let summary = format!("{}: v2 = {}, v3 = {}, {} crossings", doc.knot, doc.v2, doc.v3, doc.crossings);
    let ok = doc.v2 == doc.v2_from_jones;
    let report = Report::new(&doc, summary)?.with_rows(&[&doc])?.checked(ok);
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(report.ok)
}

#[derive(Args)]
pub struct SuiteArgs {
    /// Knots to test; repeat the flag for several.
    #[arg(long = "knot", default_values_t = ["unknot".to_string(), "trefoil".to_string(), "figure_eight".to_string()])]
    knots: Vec<String>,
    #[arg(long, default_value_t = 5)]
    perturbations: u64,
    /// Perturbation size as a fraction of the embedding margin (below 1/4).
    #[arg(long, default_value_t = 0.2)]
    amplitude: f64,
    #[command(flatten)]
    choice: InvariantChoice,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct SuiteRow {
    knot: String,
    perturbation: Option<u64>,
    value: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct SuiteKnot {
    knot: String,
    consistent: bool,
    worst_pair_sigmas: f64,
}

pub fn perturb_suite(a: SuiteArgs) -> Result<bool> {
    let (space, w, opts) = invariant_setup(&a.choice, &a.sampling)?;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for name in &a.knots {
        let k = standard_knot(name)?;
        let amp = a.amplitude * k.embedding_margin();
        let mut estimates = Vec::new();
        for j in 0..=a.perturbations {
            let (knot, tag) = if j == 0 {
                (k.clone(), None)
            } else {
                let seed = derive_seed(a.sampling.seed, j);
                (k.perturb(seed, amp)?, Some(seed))
            };
            let e = knot_tower::invariant(&space, &w, &knot, &opts)?.estimate;
            rows.push(SuiteRow {
                knot: name.clone(),
                perturbation: tag,
                value: e.value,
                std_error: e.std_error,
            });
            estimates.push(e);
        }
        let mut worst: f64 = 0.0;
        for (i, x) in estimates.iter().enumerate() {
            for y in &estimates[i + 1..] {
                let sigma = x.std_error.hypot(y.std_error);
                let gap = (x.value - y.value).abs();
                worst = worst.max(if sigma > 0.0 { gap / sigma } else if gap == 0.0 { 0.0 } else { f64::INFINITY });
            }
        }
        verdicts.push(SuiteKnot {
            knot: name.clone(),
            consistent: worst <= SIGMAS,
            worst_pair_sigmas: worst,
        });
    }
    let ok = verdicts.iter().all(|v| v.consistent);
    let summary = verdicts
        .iter()
        .map(|v| format!("{}: worst pair {:.2} sigma{}", v.knot, v.worst_pair_sigmas, if v.consistent { "" } else { "  FAIL" }))
        .collect::<Vec<_>>()
        .join("\n");
    let doc = serde_json::json!({ "degree": a.choice.degree, "knots": verdicts, "runs": rows });
    let report = Report::new(&doc, summary)?.with_rows(&rows)?.checked(ok);
    report.emit(a.out.format, a.out.output.as_deref())?;
    Ok(report.ok)
}
