//! Plain-text and CSV renderings of a score report.

use std::fmt::Write as _;

use super::benchmark::{ScoreReport, ScoreStage};

fn stage_name(s: ScoreStage) -> &'static str {
    match s {
        ScoreStage::Raw => "raw",
        ScoreStage::Aligned => "aligned",
    }
}

pub fn render_table(report: &ScoreReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3}  {:<16} {:<12} {:<10} {:<8} {:>5}  {:>7} {:>7} {:>7}",
        "k", "model", "ontology", "origin", "stage", "n", "f1_node", "f1_rel", "ged_s"
    );
    for a in &report.aggregates {
        let _ = writeln!(
            out,
            "{:>3}  {:<16} {:<12} {:<10} {:<8} {:>5}  {:>7.3} {:>7.3} {:>7.3}",
            a.k,
            a.model,
            a.ontology,
            a.origin,
            stage_name(a.stage),
            a.n,
            a.f1_node,
            a.f1_rel,
            a.ged_s
        );
    }
    let _ = writeln!(out, "failed queries: {}", report.failures.len());
    if !report.references.is_empty() {
        let _ = writeln!(out, "\nreference points (3B model, not asserted):");
        for r in &report.references {
            let _ = writeln!(
                out,
                "{:>3}  {:<10} {:<8} f1_node {:.2}  ged_s {:.2}",
                r.k,
                r.origin,
                stage_name(r.stage),
                r.f1_node,
                r.ged_s
            );
        }
    }
    out
}

/// One row per aggregate group.
pub fn to_csv(report: &ScoreReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "model", "ontology", "origin", "stage", "n", "f1_node", "f1_rel", "ged_s"])?;
    for a in &report.aggregates {
        w.write_record([
            a.k.to_string(),
            a.model.clone(),
            a.ontology.clone(),
            a.origin.clone(),
            stage_name(a.stage).to_string(),
            a.n.to_string(),
            a.f1_node.to_string(),
            a.f1_rel.to_string(),
            a.ged_s.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::benchmark::{aggregate, QueryRecord};

    fn report() -> ScoreReport {
        let rec = |stage, f| QueryRecord {
            query_id: "q".into(),
            k: 3,
            model: "m, with comma".into(),
            ontology: "o".into(),
            origin: "templated".into(),
            stage,
            query_text: String::new(),
            f1_node: f,
            f1_rel: f,
            ged_s: f,
        };
        let records = vec![rec(ScoreStage::Raw, 0.5), rec(ScoreStage::Raw, 1.0), rec(ScoreStage::Aligned, 1.0)];
        ScoreReport {
            aggregates: aggregate(&records),
            records,
            failures: vec![],
            references: vec![],
            prompt_hash: String::new(),
            seed: 0,
        }
    }

    #[test]
    fn csv_quotes_and_means() {
        let csv = to_csv(&report()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("3,\"m, with comma\",o,templated,raw,2,0.75"));
    }

    #[test]
    fn table_lists_groups() {
        let t = render_table(&report());
        assert!(t.contains("aligned"));
        assert!(t.contains("failed queries: 0"));
    }
}
