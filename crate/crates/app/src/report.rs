//! Plain-text fit report: run facts, the hyperparameter table and the fixed-effect table.

use std::fmt::Write;

use carcasswatch_core::inference::{FitArtifact, HyperName, PosteriorSummary};

const HEADER: [&str; 6] = ["mean", "sd", "0.1quant", "0.5quant", "0.9quant", "mode"];

fn table(out: &mut String, title: &str, rows: &[(String, &PosteriorSummary)], flag_significant: bool) {
    let width = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(4);
    writeln!(out, "{title}").unwrap();
    write!(out, "{:width$}", "").unwrap();
    for h in HEADER {
        write!(out, " {h:>12}").unwrap();
    }
    out.push('\n');
    for (name, s) in rows {
        write!(out, "{name:width$}").unwrap();
        for v in [s.mean, s.sd, s.q10, s.q50, s.q90, s.mode] {
            write!(out, " {v:>12.4}").unwrap();
        }
        if flag_significant && s.significant {
            out.push_str(" *");
        }
        out.push('\n');
    }
}

pub fn fit_report(a: &FitArtifact, records: usize, rejected: usize) -> String {
    let mut out = String::new();
    writeln!(out, "carcasswatch fit report").unwrap();
    writeln!(out, "records used: {records}; rows rejected: {rejected}").unwrap();
    writeln!(
        out,
        "cell-week observations: {}; latent dimension: {}; mesh vertices: {}; charted cells: {}",
        a.n_observations,
        a.latent_labels.len(),
        a.mesh.vertices_km.len(),
        a.cells.len()
    )
    .unwrap();
    writeln!(
        out,
        "log hyperparameter posterior at the mode: {:.6}; evaluations: {}; converged: {}",
        a.hyper.log_posterior,
        a.hyper.evaluations,
        if a.hyper.converged { "yes" } else { "no" }
    )
    .unwrap();
    writeln!(out, "chart band level: {}; fingerprint: {}", a.settings.level, a.spec_fingerprint).unwrap();
    out.push('\n');

    let hyper: Vec<(String, &PosteriorSummary)> = a
        .hyper_summaries
        .iter()
        .map(|s| {
            let label = HyperName::from_key(&s.name).map_or(s.name.as_str(), |h| h.label());
            (label.to_owned(), s)
        })
        .collect();
    table(&mut out, "Hyperparameters", &hyper, false);
    out.push('\n');
    let fixed: Vec<(String, &PosteriorSummary)> = a.fixed_effects.iter().map(|s| (s.name.clone(), s)).collect();
    table(&mut out, "Fixed effects (* : 80% interval excludes zero)", &fixed, true);
    out
}
