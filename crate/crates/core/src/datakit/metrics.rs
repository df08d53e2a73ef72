use serde::{Serialize, Serializer};

use super::Label;
use crate::gcgat::GcGatModel;
use crate::Error;

use super::DatasetManifest;

/// Confusion counts with bad as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Bad, Label::Bad) => self.tp += 1,
            (Label::Good, Label::Bad) => self.fp += 1,
            (Label::Good, Label::Good) => self.tn += 1,
            (Label::Bad, Label::Good) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio_or_undefined<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("undefined"),
    }
}

/// Rates in `[0, 1]`; `None` marks a ratio whose denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(serialize_with = "ratio_or_undefined")]
    pub fpr: Option<f64>,
    #[serde(serialize_with = "ratio_or_undefined")]
    pub fnr: Option<f64>,
    #[serde(serialize_with = "ratio_or_undefined")]
    pub tpr: Option<f64>,
    #[serde(serialize_with = "ratio_or_undefined")]
    pub precision: Option<f64>,
    #[serde(serialize_with = "ratio_or_undefined")]
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "tp,fp,tn,fn,fpr,fnr,tpr,precision,f1";

    pub fn csv_row(&self, c: &ConfusionCounts) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{}",
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            f(self.fpr),
            f(self.fnr),
            f(self.tpr),
            f(self.precision),
            f(self.f1)
        )
    }
}

/// F1 from precision and recall. Undefined if either is undefined; 0 when both are 0.
pub fn f1_score(precision: Option<f64>, recall: Option<f64>) -> Option<f64> {
    let (p, r) = (precision?, recall?);
    Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

pub fn compute_metrics(c: &ConfusionCounts) -> MetricsReport {
    let precision = ratio(c.tp, c.tp + c.fp);
    let tpr = ratio(c.tp, c.tp + c.fn_);
    MetricsReport {
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.tp + c.fn_),
        tpr,
        precision,
        f1: f1_score(precision, tpr),
    }
}

/// Predicts every manifest entry and tallies the confusion counts.
pub fn evaluate(model: &GcGatModel, manifest: &DatasetManifest) -> crate::Result<(ConfusionCounts, MetricsReport)> {
    let mut counts = ConfusionCounts::default();
    for (entry, graph) in manifest.graphs()? {
        let p = model
            .predict(&graph)
            .map_err(|e| Error::in_file(&manifest.resolve(&entry), Error::from(e)))?;
        counts.record(entry.label, p.class);
    }
    Ok((counts, compute_metrics(&counts)))
}
