//! Result tables rebuilt from per-replicate records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;

use crate::replicate::UnitRecord;

pub const LOSS_HEADER: [&str; 8] = [
    "estimator",
    "surrogate_value",
    "surrogate_se",
    "true_ise",
    "acceptance_rate",
    "B",
    "B'",
    "epsilon",
];

const KEY: [&str; 4] = ["replicate", "seed", "observation", "target"];

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "inf".into())
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn header(extra: &[&str]) -> Vec<String> {
    KEY.iter().chain(extra).map(|s| s.to_string()).collect()
}

/// Writes `losses.csv`, `selection.csv`, `comparisons.csv`, `fits.jsonl`
/// and, when present, `importance.csv` and `curves.csv`. Records must be
/// sorted by replicate.
pub fn write_tables(dir: &Path, records: &[UnitRecord]) -> Result<()> {
    let mut losses = writer(&dir.join("losses.csv"))?;
    let mut selection = writer(&dir.join("selection.csv"))?;
    let mut comparisons = writer(&dir.join("comparisons.csv"))?;
    let mut fits = BufWriter::new(File::create(dir.join("fits.jsonl"))?);
    losses.write_record(header(&LOSS_HEADER))?;
    selection.write_record(header(&["selected", "best_true", "agree"]))?;
    comparisons.write_record(header(&[
        "first",
        "second",
        "delta",
        "se",
        "ci_low",
        "ci_high",
        "decision",
        "true_delta",
        "agree",
    ]))?;

    let has_importance = records.iter().flat_map(|r| &r.targets).any(|t| t.importance.is_some());
    let has_curves = records.iter().flat_map(|r| &r.targets).any(|t| t.curves.is_some());
    let mut importance = if has_importance {
        let mut w = writer(&dir.join("importance.csv"))?;
        let cutoff = records
            .iter()
            .flat_map(|r| &r.targets)
            .filter_map(|t| t.importance.as_ref())
            .map(|i| i.breakdown.len())
            .max()
            .unwrap_or(0);
        let mut h = header(&["statistic", "u"]);
        h.extend((1..=cutoff).map(|i| format!("u_{i}")));
        w.write_record(&h)?;
        Some(w)
    } else {
        None
    };
    let mut curves = if has_curves {
        let mut w = writer(&dir.join("curves.csv"))?;
        w.write_record(header(&["estimator", "theta", "density"]))?;
        Some(w)
    } else {
        None
    };

    for rec in records {
        for t in &rec.targets {
            let key = [
                rec.replicate.to_string(),
                rec.seed.to_string(),
                rec.observation.clone(),
                t.target.clone(),
            ];
            let row = |extra: Vec<String>| key.iter().cloned().chain(extra).collect::<Vec<_>>();
            for e in &t.estimators {
                losses.write_record(row(vec![
                    e.estimator.clone(),
                    num(e.surrogate.value),
                    num(e.surrogate.se),
                    num(e.true_ise),
                    num(t.acceptance_rate),
                    t.b_train.to_string(),
                    t.b_validation.to_string(),
                    opt(t.epsilon),
                ]))?;
                let line = serde_json::json!({
                    "replicate": rec.replicate,
                    "seed": rec.seed,
                    "observation": rec.observation,
                    "target": t.target,
                    "estimator": e.estimator,
                    "fit_seed": e.seed,
                    "tuning": e.tuning,
                    "surrogate_value": e.surrogate.value,
                    "surrogate_se": e.surrogate.se,
                    "true_ise": e.true_ise,
                    "warnings": e.surrogate.warnings,
                });
                writeln!(fits, "{line}")?;
            }
            let agree = match (&t.selected, &t.best_true) {
                (Some(a), Some(b)) => (a == b).to_string(),
                _ => String::new(),
            };
            selection.write_record(row(vec![
                t.selected.clone().unwrap_or_default(),
                t.best_true.clone().unwrap_or_default(),
                agree,
            ]))?;
            for c in &t.comparisons {
                comparisons.write_record(row(vec![
                    c.first.clone(),
                    c.second.clone(),
                    num(c.delta),
                    num(c.se),
                    num(c.ci.0),
                    num(c.ci.1),
                    serde_json::to_value(c.decision)?
                        .as_str()
                        .unwrap_or_default()
                        .to_string(),
                    num(c.true_delta),
                    c.agree.map(|a| a.to_string()).unwrap_or_default(),
                ]))?;
            }
            if let (Some(w), Some(imp)) = (importance.as_mut(), &t.importance) {
                for (j, name) in imp.names.iter().enumerate() {
                    let mut r = row(vec![name.clone(), num(imp.u[j])]);
                    r.extend(imp.breakdown.iter().map(|b| num(b[j])));
                    w.write_record(&r)?;
                }
            }
            if let (Some(w), Some(cv)) = (curves.as_mut(), &t.curves) {
                for (label, dens) in &cv.densities {
                    for (th, d) in cv.thetas.iter().zip(dens) {
                        w.write_record(row(vec![label.clone(), num(*th), num(*d)]))?;
                    }
                }
            }
        }
    }
    losses.flush()?;
    selection.flush()?;
    comparisons.flush()?;
    fits.flush()?;
    if let Some(mut w) = importance {
        w.flush()?;
    }
    if let Some(mut w) = curves {
        w.flush()?;
    }
    Ok(())
}
