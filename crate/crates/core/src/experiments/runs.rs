use std::fs;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::family::{parse_rational, rational_text, FamilySpec};
use super::ExperimentError;
use crate::exec::Execution;
use crate::heights::{lambda_height, neron_tate_product, total_height, HeightConfig};

/// One sampled parameter value and the heights measured there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(with = "ratio_text")]
    pub t: BigRational,
    #[serde(with = "ratio_text")]
    pub lambda: BigRational,
    pub h_lambda: f64,
    pub nt_height: f64,
    pub total_height: f64,
    /// `|total_height - nt_height| / max(1, h_lambda)`.
    pub st_ratio: f64,
}

mod ratio_text {
    use super::*;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_text(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| D::Error::custom(format!("bad rational {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub t: String,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub heights: HeightConfig,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            heights: HeightConfig::default(),
            execution: Execution::Parallel,
        }
    }
}

impl RunConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        RunConfig {
            heights: HeightConfig::with_tolerance(tolerance),
            ..Default::default()
        }
    }
}

/// Heights of the family member at `t`. The point is rebuilt exactly and
/// checked against the curve before anything is measured.
pub fn evaluate_sample(
    family: &FamilySpec,
    t: &BigRational,
    cfg: &HeightConfig,
) -> Result<RunRecord, ExperimentError> {
    let p = family.point_at(t)?;
    let h_lambda = lambda_height(p.lambda()).value();
    let nt = neron_tate_product(&p, cfg)?.value;
    let total = total_height(&p).value();
    Ok(RunRecord {
        t: t.clone(),
        lambda: p.lambda().clone(),
        h_lambda,
        nt_height: nt,
        total_height: total,
        st_ratio: (total - nt).abs() / h_lambda.max(1.0),
    })
}

/// Evaluates every sample (concurrently if configured), keeping input order.
/// Failing samples are logged and returned separately.
pub fn sweep(
    family: &FamilySpec,
    samples: &[BigRational],
    cfg: &RunConfig,
) -> (Vec<RunRecord>, Vec<SkippedSample>) {
    let results = cfg
        .execution
        .map(samples, |t| evaluate_sample(family, t, &cfg.heights));
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in samples.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("skipping t = {}: {}", rational_text(t), e);
                skipped.push(SkippedSample {
                    t: rational_text(t),
                    reason: e.to_string(),
                });
            }
        }
    }
    (records, skipped)
}

fn quartile_len(n: usize, at_least: usize) -> usize {
    n.div_ceil(4).max(at_least).min(n)
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NEG_INFINITY, f64::max)
}

/// Common shape of the three experiment outputs, for persistence.
pub trait Run {
    fn kind(&self) -> &'static str;
    fn records(&self) -> &[RunRecord];
    fn skipped(&self) -> &[SkippedSample];
    fn diagnostics(&self) -> serde_json::Value;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightInequalityRun {
    pub records: Vec<RunRecord>,
    pub skipped: Vec<SkippedSample>,
    /// `max h_lambda / max(1, nt_height)`; zero for an empty run.
    pub empirical_c: f64,
    /// Every canonical height is below the tolerance: the section looks
    /// torsion, which the inequality excludes by hypothesis.
    pub degenerate: bool,
    /// First `t` from which `nt_height >= h_lambda / 4` holds for all later samples.
    pub growth_onset: Option<String>,
}

pub fn run_height_inequality(
    family: &FamilySpec,
    samples: &[BigRational],
    cfg: &RunConfig,
) -> HeightInequalityRun {
    let (records, skipped) = sweep(family, samples, cfg);
    HeightInequalityRun::from_records(records, skipped, cfg.heights.tolerance)
}

impl HeightInequalityRun {
    /// Summarizes already evaluated records; `tolerance` is the torsion threshold.
    pub fn from_records(
        records: Vec<RunRecord>,
        skipped: Vec<SkippedSample>,
        tolerance: f64,
    ) -> Self {
        let empirical_c = records
            .iter()
            .map(|r| r.h_lambda / r.nt_height.max(1.0))
            .fold(0.0, f64::max);
        let degenerate =
            !records.is_empty() && records.iter().all(|r| r.nt_height.abs() <= tolerance);
        let mut onset = None;
        for r in records.iter().rev() {
            if r.nt_height >= r.h_lambda / 4.0 {
                onset = Some(rational_text(&r.t));
            } else {
                break;
            }
        }
        if degenerate {
            log::info!("all canonical heights vanish: degenerate (torsion) section");
        }
        HeightInequalityRun {
            records,
            skipped,
            empirical_c,
            degenerate,
            growth_onset: onset,
        }
    }
}

impl Run for HeightInequalityRun {
    fn kind(&self) -> &'static str {
        "height-ineq"
    }
    fn records(&self) -> &[RunRecord] {
        &self.records
    }
    fn skipped(&self) -> &[SkippedSample] {
        &self.skipped
    }
    fn diagnostics(&self) -> serde_json::Value {
        serde_json::json!({
            "empirical_c": self.empirical_c,
            "degenerate": self.degenerate,
            "growth_onset": self.growth_onset,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SilvermanTateRun {
    pub records: Vec<RunRecord>,
    pub skipped: Vec<SkippedSample>,
    pub max_ratio: f64,
    pub first_quartile_max: f64,
    pub last_quartile_max: f64,
}

impl SilvermanTateRun {
    /// `last_quartile_max <= factor * first_quartile_max`.
    pub fn no_growth_trend(&self, factor: f64) -> bool {
        self.last_quartile_max <= factor * self.first_quartile_max
    }
}

pub fn run_silverman_tate(
    family: &FamilySpec,
    samples: &[BigRational],
    cfg: &RunConfig,
) -> SilvermanTateRun {
    let (records, skipped) = sweep(family, samples, cfg);
    SilvermanTateRun::from_records(records, skipped)
}

impl SilvermanTateRun {
    pub fn from_records(records: Vec<RunRecord>, skipped: Vec<SkippedSample>) -> Self {
        let n = records.len();
        let q = quartile_len(n, 1);
        let ratios: Vec<f64> = records.iter().map(|r| r.st_ratio).collect();
        let run = SilvermanTateRun {
            max_ratio: max_of(ratios.iter().copied()),
            first_quartile_max: max_of(ratios[..q].iter().copied()),
            last_quartile_max: max_of(ratios[n - q..].iter().copied()),
            records,
            skipped,
        };
        if !run.no_growth_trend(2.0) {
            log::warn!(
                "last-quartile ratio {} exceeds twice the first-quartile ratio {}",
                run.last_quartile_max,
                run.first_quartile_max
            );
        }
        run
    }
}

impl Run for SilvermanTateRun {
    fn kind(&self) -> &'static str {
        "silverman-tate"
    }
    fn records(&self) -> &[RunRecord] {
        &self.records
    }
    fn skipped(&self) -> &[SkippedSample] {
        &self.skipped
    }
    fn diagnostics(&self) -> serde_json::Value {
        serde_json::json!({
            "max_ratio": self.max_ratio,
            "first_quartile_max": self.first_quartile_max,
            "last_quartile_max": self.last_quartile_max,
            "last_le_2x_first": self.no_growth_trend(2.0),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecializationRun {
    pub records: Vec<RunRecord>,
    pub skipped: Vec<SkippedSample>,
    /// `(h_lambda, nt_height / h_lambda)` sorted by `h_lambda`.
    pub points: Vec<(f64, f64)>,
    /// Largest pairwise difference of ratios in the top quartile (by `h_lambda`).
    pub top_quartile_spread: f64,
    /// Mean ratio over the top quartile.
    pub limit_estimate: f64,
}

pub fn run_specialization_ratio(
    family: &FamilySpec,
    samples: &[BigRational],
    cfg: &RunConfig,
) -> SpecializationRun {
    let (all, skipped) = sweep(family, samples, cfg);
    SpecializationRun::from_records(all, skipped)
}

impl SpecializationRun {
    /// Records with `h(lambda) = 0` move to `skipped`.
    pub fn from_records(all: Vec<RunRecord>, mut skipped: Vec<SkippedSample>) -> Self {
        let mut records = Vec::with_capacity(all.len());
        for r in all {
            if r.h_lambda > 0.0 {
                records.push(r);
            } else {
                skipped.push(SkippedSample {
                    t: rational_text(&r.t),
                    reason: "h(lambda) = 0".into(),
                });
            }
        }
        let mut points: Vec<(f64, f64)> = records
            .iter()
            .map(|r| (r.h_lambda, r.nt_height / r.h_lambda))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let q = quartile_len(points.len(), 2);
        let top = &points[points.len() - q..];
        let hi = max_of(top.iter().map(|p| p.1));
        let lo = -max_of(top.iter().map(|p| -p.1));
        SpecializationRun {
            top_quartile_spread: if top.is_empty() { 0.0 } else { hi - lo },
            limit_estimate: if top.is_empty() {
                f64::NAN
            } else {
                top.iter().map(|p| p.1).sum::<f64>() / top.len() as f64
            },
            points,
            records,
            skipped,
        }
    }
}

impl Run for SpecializationRun {
    fn kind(&self) -> &'static str {
        "specialization"
    }
    fn records(&self) -> &[RunRecord] {
        &self.records
    }
    fn skipped(&self) -> &[SkippedSample] {
        &self.skipped
    }
    fn diagnostics(&self) -> serde_json::Value {
        serde_json::json!({
            "points": self.points,
            "top_quartile_spread": self.top_quartile_spread,
            "limit_estimate": self.limit_estimate,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParameters {
    pub samples: Vec<String>,
    pub tolerance: f64,
    pub precision: String,
}

impl RunParameters {
    pub fn new(samples: &[BigRational], cfg: &RunConfig) -> Self {
        RunParameters {
            samples: samples.iter().map(rational_text).collect(),
            tolerance: cfg.heights.tolerance,
            precision: "f64".into(),
        }
    }
}

#[derive(Serialize)]
struct RunDocument<'a> {
    kind: &'a str,
    family: &'a FamilySpec,
    parameters: &'a RunParameters,
    records: &'a [RunRecord],
    skipped: &'a [SkippedSample],
    diagnostics: serde_json::Value,
    library_version: &'static str,
}

/// Writes `<dir>/<kind>.json` (the whole run) and `<dir>/<kind>.csv` (records only).
pub fn write_run(
    dir: &Path,
    family: &FamilySpec,
    params: &RunParameters,
    run: &dyn Run,
) -> Result<(PathBuf, PathBuf), ExperimentError> {
    fs::create_dir_all(dir)?;
    let doc = RunDocument {
        kind: run.kind(),
        family,
        parameters: params,
        records: run.records(),
        skipped: run.skipped(),
        diagnostics: run.diagnostics(),
        library_version: env!("CARGO_PKG_VERSION"),
    };
    let json_path = dir.join(format!("{}.json", run.kind()));
    fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
    let csv_path = dir.join(format!("{}.csv", run.kind()));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in run.records() {
        w.serialize(r)?;
    }
    if run.records().is_empty() {
        w.write_record([
            "t",
            "lambda",
            "h_lambda",
            "nt_height",
            "total_height",
            "st_ratio",
        ])?;
    }
    w.flush()?;
    Ok((json_path, csv_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{
        builtin_family_x2, identity_family, parse_samples, two_torsion_family,
    };

    fn cfg() -> RunConfig {
        RunConfig::with_tolerance(1e-6)
    }

    #[test]
    fn empty_run() {
        let r = run_height_inequality(&builtin_family_x2(), &[], &cfg());
        assert!(r.records.is_empty());
        assert_eq!(r.empirical_c, 0.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn identity_section_is_degenerate() {
        let s = parse_samples("2..6").unwrap();
        let r = run_height_inequality(&identity_family(), &s, &cfg());
        assert!(r.degenerate);
        assert!(r.records.iter().all(|x| x.nt_height == 0.0));
        let max_h = r.records.iter().map(|x| x.h_lambda).fold(0.0, f64::max);
        assert_eq!(r.empirical_c, max_h);
        let sp = run_specialization_ratio(&two_torsion_family(), &s, &cfg());
        assert!(sp.points.iter().all(|p| p.1.abs() < 1e-6));
    }

    #[test]
    fn x2_growth_and_skips() {
        let s = parse_samples("1..12").unwrap();
        let r = run_height_inequality(&builtin_family_x2(), &s, &cfg());
        assert_eq!(r.skipped.len(), 1, "t = 1 gives lambda = 0");
        assert_eq!(r.records.len(), 11);
        assert!(r.empirical_c.is_finite() && r.empirical_c > 0.0);
        for w in r.records.windows(2) {
            assert!(w[1].h_lambda > w[0].h_lambda);
        }
        // The canonical height alternates with the parity of t (the 2-adic
        // term differs), but grows along each parity class.
        for w in r.records.windows(3) {
            assert!(w[2].nt_height > w[0].nt_height);
        }
    }

    #[test]
    fn single_and_pair_diagnostics() {
        let fam = builtin_family_x2();
        let one = parse_samples("5").unwrap();
        let st = run_silverman_tate(&fam, &one, &cfg());
        assert_eq!(st.max_ratio, st.records[0].st_ratio);
        let two = parse_samples("5,9").unwrap();
        let sp = run_specialization_ratio(&fam, &two, &cfg());
        assert!((sp.top_quartile_spread - (sp.points[0].1 - sp.points[1].1).abs()).abs() < 1e-15);
    }

    #[test]
    fn torsion_section_ratio_is_finite() {
        let s = parse_samples("2..5").unwrap();
        let st = run_silverman_tate(&two_torsion_family(), &s, &cfg());
        for r in &st.records {
            assert!((r.st_ratio - r.total_height / r.h_lambda.max(1.0)).abs() < 1e-6);
        }
        assert!(st.max_ratio.is_finite());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let s = parse_samples("2..9").unwrap();
        let mut c = cfg();
        let a = run_silverman_tate(&builtin_family_x2(), &s, &c);
        c.execution = Execution::Sequential;
        let b = run_silverman_tate(&builtin_family_x2(), &s, &c);
        assert_eq!(a, b);
    }

    #[test]
    fn persistence() {
        let dir = tempfile::tempdir().unwrap();
        let fam = builtin_family_x2();
        let s = parse_samples("2..4").unwrap();
        let run = run_silverman_tate(&fam, &s, &cfg());
        let (json, csv) =
            write_run(dir.path(), &fam, &RunParameters::new(&s, &cfg()), &run).unwrap();
        let text = fs::read_to_string(csv).unwrap();
        assert!(text.starts_with("t,lambda,h_lambda,nt_height,total_height,st_ratio\n2,-6,"));
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(doc["kind"], "silverman-tate");
        assert_eq!(doc["records"].as_array().unwrap().len(), 3);
        let back: RunRecord = serde_json::from_value(doc["records"][0].clone()).unwrap();
        assert_eq!(back, run.records[0]);
    }
}
