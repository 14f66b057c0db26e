//! Comparison tables and plot scripts.

use std::fmt::Write as _;
use std::path::Path;

use diffmts_core::eval::EvalReport;

use crate::config::Variant;
use crate::error::{io_err, CliError, CliResult};

/// One evaluated run placed in the table.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub variant: Variant,
    pub column: String,
    pub report: EvalReport,
}

/// Parses `variant[:column]=path` and loads the report.
pub fn parse_entry(spec: &str) -> CliResult<Entry> {
    let (key, path) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("entry `{spec}` is not variant[:column]=path")))?;
    let (name, column) = key.split_once(':').unwrap_or((key, "run"));
    let variant = Variant::parse(name).ok_or_else(|| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        CliError::Usage(format!(
            "unknown variant `{name}` (expected one of {})",
            names.join(", ")
        ))
    })?;
    let path = Path::new(path);
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let report = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("{}: not an evaluation report: {e}", path.display())))?;
    Ok(Entry {
        variant,
        column: column.to_string(),
        report,
    })
}

/// Markdown table with one block per metric, one row per variant and one
/// column per dataset setting plus an average.
pub fn comparison_table(entries: &[Entry]) -> String {
    let mut columns: Vec<&str> = Vec::new();
    for e in entries {
        if !columns.contains(&e.column.as_str()) {
            columns.push(&e.column);
        }
    }
    let variants: Vec<Variant> = Variant::ALL
        .into_iter()
        .filter(|v| entries.iter().any(|e| e.variant == *v))
        .collect();
    type Metric = fn(&EvalReport) -> f64;
    let metrics: [(&str, Metric); 4] = [
        ("Discriminative Score (Lower the better)", |r| {
            r.discriminative_score
        }),
        ("Predictive Score (Lower the better)", |r| {
            r.predictive_score
        }),
        ("DTW Distance (Lower the better)", |r| r.dtw_mean),
        ("Fréchet Distance (Lower the better)", |r| r.frechet_mean),
    ];

    let mut out = String::new();
    write!(out, "| Model |").unwrap();
    for c in &columns {
        write!(out, " {c} |").unwrap();
    }
    out.push_str(" Average |\n|---|");
    out.push_str(&"---|".repeat(columns.len() + 1));
    out.push('\n');
    for (title, metric) in metrics {
        writeln!(out, "| **{title}** |{}", " |".repeat(columns.len() + 1)).unwrap();
        for v in &variants {
            write!(out, "| {} |", v.label()).unwrap();
            let mut sum = 0.0;
            let mut n = 0;
            for c in &columns {
                match entries.iter().find(|e| e.variant == *v && e.column == *c) {
                    Some(e) => {
                        let x = metric(&e.report);
                        sum += x;
                        n += 1;
                        write!(out, " {x:.3} |").unwrap();
                    }
                    None => out.push_str(" - |"),
                }
            }
            if n > 0 {
                writeln!(out, " {:.3} |", sum / n as f64).unwrap();
            } else {
                out.push_str(" - |\n");
            }
        }
    }
    out
}

/// Gnuplot scripts for whichever inputs are given, as `(file name, body)`.
pub fn gnuplot_scripts(
    loss: Option<&Path>,
    pca: Option<&Path>,
    samples: Option<&Path>,
) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(p) = loss {
        out.push((
            "loss.gp".to_string(),
            format!(
                "set datafile separator ','\n\
                 set key autotitle columnhead\n\
                 set xlabel 'epoch'\n\
                 set ylabel 'loss'\n\
                 set logscale y\n\
                 plot '{0}' using 1:2 with lines title 'l_noise', \\\n     \
                 '{0}' using 1:3 with lines title 'l_mmd', \\\n     \
                 '{0}' using 1:4 with lines title 'l_total'\n",
                p.display()
            ),
        ));
    }
    if let Some(p) = pca {
        out.push((
            "pca.gp".to_string(),
            format!(
                "set datafile separator ','\n\
                 set xlabel 'PC1'\n\
                 set ylabel 'PC2'\n\
                 plot '{0}' using 3:(strcol(2) eq 'real' ? $4 : 1/0) skip 1 with points pt 7 ps 0.5 title 'real', \\\n     \
                 '{0}' using 3:(strcol(2) eq 'synth' ? $4 : 1/0) skip 1 with points pt 7 ps 0.5 title 'synthetic'\n",
                p.display()
            ),
        ));
    }
    if let Some(p) = samples {
        out.push((
            "samples.gp".to_string(),
            format!(
                "# usage: gnuplot -e \"id=0; ch=0\" samples.gp\n\
                 if (!exists('id')) id = 0\n\
                 if (!exists('ch')) ch = 0\n\
                 set datafile separator ','\n\
                 set xlabel 'time index'\n\
                 set ylabel 'value'\n\
                 plot '{0}' using 3:(($1 == id && $2 == ch) ? $4 : 1/0) skip 1 with lines \
                 title sprintf('sample %d, channel %d', id, ch)\n",
                p.display()
            ),
        ));
    }
    out
}
