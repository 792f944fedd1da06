//! Artifact writers. Everything except `meta.json` is a pure function of the
//! sample, so identical runs give identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use rsamp_core::posterior::SUMMARY_PROBS;
use rsamp_core::{histogram, summarize, PosteriorSample, ReferencePosterior, Summary};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct QuantileJson {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct ReferenceJson {
    pub kind: String,
    pub mean: f64,
    pub ks: f64,
}

#[derive(Debug, Serialize)]
pub struct CoordinateJson {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub mc_se: f64,
    pub quantiles: Vec<QuantileJson>,
    pub reference: Option<ReferenceJson>,
}

/// Schema of `summary.json`.
#[derive(Debug, Serialize)]
pub struct SummaryJson {
    pub method: String,
    #[serde(rename = "B")]
    pub b: usize,
    pub proposed: usize,
    pub invalid: usize,
    pub accepted: Option<usize>,
    pub delta: f64,
    pub delta_scale: String,
    pub ess: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub coordinates: Vec<CoordinateJson>,
}

#[derive(Debug, Serialize)]
pub struct MetaJson<'a> {
    pub model: &'a str,
    pub method: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub delta: f64,
    pub kept: usize,
    pub proposed: usize,
    pub invalid: usize,
    pub sampler_seconds: f64,
}

fn reference_kind(r: &ReferencePosterior) -> &'static str {
    match r {
        ReferencePosterior::Normal { .. } => "normal",
        ReferencePosterior::Gamma { .. } => "gamma",
        ReferencePosterior::TruncatedMixture { .. } => "truncated-mixture",
        ReferencePosterior::InverseGamma { .. } => "inverse-gamma",
    }
}

pub fn summary_json(
    sample: &PosteriorSample,
    summary: &Summary,
    labels: &[String],
    references: &[(usize, ReferencePosterior)],
) -> SummaryJson {
    let coordinates = summary
        .coordinates
        .iter()
        .enumerate()
        .map(|(k, c)| CoordinateJson {
            name: labels[k].clone(),
            mean: c.mean,
            sd: c.sd,
            mc_se: c.mc_se,
            quantiles: SUMMARY_PROBS
                .iter()
                .zip(&c.quantiles)
                .map(|(p, v)| QuantileJson { p: *p, value: *v })
                .collect(),
            reference: references
                .iter()
                .find(|(i, _)| *i == k)
                .map(|(_, r)| ReferenceJson {
                    kind: reference_kind(r).into(),
                    mean: r.mean(),
                    ks: c.ks.unwrap_or(f64::NAN),
                }),
        })
        .collect();
    SummaryJson {
        method: sample.method.tag().into(),
        b: sample.kept_count(),
        proposed: sample.proposed,
        invalid: sample.invalid.len(),
        accepted: sample.accepted,
        delta: sample.delta,
        delta_scale: sample.delta_scale.tag().into(),
        ess: summary.ess,
        seed: sample.master_seed,
        warnings: sample.warnings.clone(),
        coordinates,
    }
}

/// `b, theta_1..K, weight_norm, j_value, vol_inv, valid`, ordered by b.
/// Invalid draws get empty parameter fields and `valid = 0`.
pub fn write_draws(path: &Path, sample: &PosteriorSample) -> Result<(), CliError> {
    let k = sample.param_dim();
    let weights = sample.normalized_weights()?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["b".to_string()];
    header.extend((1..=k).map(|i| format!("theta_{i}")));
    header.extend(["weight_norm", "j_value", "vol_inv", "valid"].map(String::from));
    w.write_record(&header)?;

    let mut rows: Vec<(u64, Vec<String>)> = sample
        .draws
        .iter()
        .zip(&weights)
        .map(|(d, wn)| {
            let mut r = vec![d.b.to_string()];
            r.extend(d.theta.iter().map(|x| x.to_string()));
            r.extend([
                wn.to_string(),
                d.j_value.to_string(),
                d.vol_inv.to_string(),
                "1".into(),
            ]);
            (d.b, r)
        })
        .collect();
    rows.extend(sample.invalid.iter().map(|inv| {
        let mut r = vec![inv.b.to_string()];
        r.extend(std::iter::repeat_n(String::new(), k));
        r.extend(["0".into(), String::new(), String::new(), "0".into()]);
        (inv.b, r)
    }));
    // chains record one row per step, so keep the sort stable
    rows.sort_by_key(|(b, _)| *b);
    for (_, r) in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histograms(
    path: &Path,
    sample: &PosteriorSample,
    labels: &[String],
    bins: usize,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["coordinate", "bin_lo", "bin_hi", "weight"])?;
    for (k, label) in labels.iter().enumerate() {
        for bin in histogram(sample, k, bins)? {
            w.write_record([
                label.clone(),
                bin.lo.to_string(),
                bin.hi.to_string(),
                bin.weight.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_report(path: &Path, model: &str, summary: &SummaryJson) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# {} on {model}\n", summary.method)?;
    writeln!(
        f,
        "kept {} of {} proposals ({} invalid), delta = {:.6e} ({} scale), ESS = {:.1}\n",
        summary.b,
        summary.proposed,
        summary.invalid,
        summary.delta,
        summary.delta_scale,
        summary.ess
    )?;
    for warning in &summary.warnings {
        writeln!(f, "warning: {warning}\n")?;
    }
    writeln!(
        f,
        "| parameter | mean | sd | MC s.e. | 2.5% | 50% | 97.5% |"
    )?;
    writeln!(f, "|---|---|---|---|---|---|---|")?;
    for c in &summary.coordinates {
        writeln!(
            f,
            "| {} | {:.5} | {:.5} | {:.5} | {:.5} | {:.5} | {:.5} |",
            c.name,
            c.mean,
            c.sd,
            c.mc_se,
            c.quantiles[0].value,
            c.quantiles[2].value,
            c.quantiles[4].value
        )?;
    }
    let refs: Vec<&CoordinateJson> = summary
        .coordinates
        .iter()
        .filter(|c| c.reference.is_some())
        .collect();
    if !refs.is_empty() {
        writeln!(f, "\n## Comparison with the exact posterior\n")?;
        writeln!(
            f,
            "| parameter | reference | exact mean | sample mean | |diff| / MC s.e. | weighted KS |"
        )?;
        writeln!(f, "|---|---|---|---|---|---|")?;
        for c in refs {
            let r = c.reference.as_ref().expect("filtered");
            writeln!(
                f,
                "| {} | {} | {:.5} | {:.5} | {:.2} | {:.4} |",
                c.name,
                r.kind,
                r.mean,
                c.mean,
                (c.mean - r.mean).abs() / c.mc_se,
                r.ks
            )?;
        }
    }
    Ok(())
}

/// Writes draws, summary, histograms and the report for one run.
pub fn write_run(
    dir: &Path,
    model: &str,
    sample: &PosteriorSample,
    labels: &[String],
    references: &[(usize, ReferencePosterior)],
    bins: usize,
) -> Result<SummaryJson, CliError> {
    fs::create_dir_all(dir)?;
    let summary = summarize(sample, references)?;
    let json = summary_json(sample, &summary, labels, references);
    write_draws(&dir.join("draws.csv"), sample)?;
    write_json(&dir.join("summary.json"), &json)?;
    write_histograms(&dir.join("histogram.csv"), sample, labels, bins)?;
    write_report(&dir.join("report.md"), model, &json)?;
    Ok(json)
}
