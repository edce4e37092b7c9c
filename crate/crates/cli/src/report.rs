//! Human-readable tables and `key = value` report files.

use std::fmt::Write;

use molcap_core::harness::{AblationRow, CallCounters, EvalReport, TrainReport, ABLATION_FOOTER};
use molcap_core::metrics::MetricScores;

/// Metric keys used in `key = value` reports, in column order.
pub const METRIC_KEYS: [&str; 6] = ["bleu2", "bleu4", "meteor", "rouge1", "rouge2", "rouge_l"];

pub const METRIC_NOTE: &str =
    "scores in percent; METEOR uses exact matches only, so values are comparable within this tool, not across toolkits";

fn mark(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn score_cells(p: [f64; 6]) -> String {
    p.iter().map(|v| format!("{v:>8.1}")).collect()
}

fn metric_header() -> String {
    MetricScores::NAMES.iter().map(|n| format!("{n:>8}")).collect()
}

pub fn metrics_kv(prefix: &str, scores: &MetricScores) -> String {
    let mut s = String::new();
    for (k, v) in METRIC_KEYS.iter().zip(scores.percentages()) {
        let _ = writeln!(s, "{prefix}{k} = {v:.1}");
    }
    s
}

pub fn metrics_table(scores: &MetricScores) -> String {
    format!("{}\n{}\n", metric_header(), score_cells(scores.percentages()))
}

pub fn train_table(report: &TrainReport) -> String {
    let mut s = String::from("epoch      loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(s, "{:>5} {:>9.5}", i + 1, l);
    }
    s
}

pub fn train_kv(report: &TrainReport) -> String {
    let mut s = format!("epochs = {}\nsteps = {}\n", report.epoch_losses.len(), report.step_losses.len());
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(s, "epoch.{}.loss = {l:?}", i + 1);
    }
    if let Some(l) = report.step_losses.last() {
        let _ = writeln!(s, "final_loss = {l:?}");
    }
    s
}

pub fn eval_table(report: &EvalReport) -> String {
    let mut s = format!("{:<10}{:>6}{}\n", "subset", "n", metric_header());
    let _ = writeln!(s, "{:<10}{:>6}{}", "all", report.predictions.len(), score_cells(report.overall.percentages()));
    for b in &report.buckets {
        match &b.scores {
            Some(sc) => {
                let _ = writeln!(s, "{:<10}{:>6}{}", b.name, b.count, score_cells(sc.percentages()));
            }
            None => {
                let _ = writeln!(s, "{:<10}{:>6}{:>8}", b.name, 0, "-");
            }
        }
    }
    let _ = writeln!(s, "\n{METRIC_NOTE}");
    s
}

pub fn eval_kv(report: &EvalReport) -> String {
    let mut s = format!("records = {}\n", report.predictions.len());
    s.push_str(&metrics_kv("", &report.overall));
    for b in &report.buckets {
        let _ = writeln!(s, "{}.count = {}", b.name, b.count);
        if let Some(sc) = &b.scores {
            s.push_str(&metrics_kv(&format!("{}.", b.name), sc));
        }
    }
    s
}

/// The five-row ablation table with the full-scale reference rows as footer.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let head = format!("{:>6}{:>7}{:>5}{}", "Graph", "SMILES", "CTA", metric_header());
    let mut s = format!("{head}\n");
    for r in rows {
        let a = r.ablation;
        let _ = writeln!(
            s,
            "{:>6}{:>7}{:>5}{}",
            mark(a.use_graph),
            mark(a.use_smiles),
            mark(a.use_cross_token_attention),
            score_cells(r.scores.percentages())
        );
    }
    let _ = writeln!(s, "\nreference (full-scale ChEBI-20, pretrained weights; not comparable):");
    for (r, reference) in rows.iter().zip(ABLATION_FOOTER) {
        let a = r.ablation;
        let _ = writeln!(
            s,
            "{:>6}{:>7}{:>5}{}",
            mark(a.use_graph),
            mark(a.use_smiles),
            mark(a.use_cross_token_attention),
            score_cells(reference)
        );
    }
    let _ = writeln!(s, "\n{METRIC_NOTE}");
    s
}

pub fn ablation_kv(rows: &[AblationRow]) -> String {
    let mut s = format!("rows = {}\n", rows.len());
    for (i, r) in rows.iter().enumerate() {
        let a = r.ablation;
        let p = format!("row{}.", i + 1);
        let _ = writeln!(s, "{p}use_graph = {}", a.use_graph);
        let _ = writeln!(s, "{p}use_smiles = {}", a.use_smiles);
        let _ = writeln!(s, "{p}use_cross_token_attention = {}", a.use_cross_token_attention);
        s.push_str(&metrics_kv(&p, &r.scores));
        for (name, c) in CallCounters::NAMES.iter().zip(r.counters) {
            let _ = writeln!(s, "{p}calls.{name} = {c}");
        }
        let _ = writeln!(s, "{p}final_loss = {:?}", r.final_loss);
    }
    s
}
