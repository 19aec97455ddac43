//! JSON report and plot-data files.
//!
//! Files land in the output directory as `<command>.json` plus, per artifact,
//! `<command>_<name>.csv` (and `.bin` dumps when `outputs.binary` is set).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use levy_liouville::Tolerances;
use serde::Serialize;
use serde_json::Value;

use crate::commands::{Artifact, Outcome};
use crate::config::{Command, RunConfig};
use crate::CliError;

#[derive(Serialize)]
pub struct Provenance {
    pub tool_version: &'static str,
    pub seed: u64,
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    pub generated_at: u64,
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub command: String,
    pub config_echo: &'a RunConfig,
    pub residuals: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, String>,
    pub tolerances: Tolerances,
    pub results: Value,
    pub artifacts: Vec<String>,
    pub provenance: Provenance,
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit(cmd: Command, cfg: &RunConfig, outcome: Outcome, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let stem = cmd.name().replace('-', "_");
    let mut files = Vec::new();
    for art in &outcome.artifacts {
        match art {
            Artifact::Table { name, header, rows } if !cfg.outputs.no_csv => {
                let file = format!("{stem}_{name}.csv");
                write_table(&dir.join(&file), header, rows)?;
                files.push(file);
            }
            Artifact::Grid { name, data } => {
                if !cfg.outputs.no_csv {
                    let file = format!("{stem}_{name}.csv");
                    data.write_csv(dir.join(&file))?;
                    files.push(file);
                }
                if cfg.outputs.binary {
                    let file = format!("{stem}_{name}.bin");
                    data.write_binary(dir.join(&file))?;
                    files.push(file);
                }
            }
            Artifact::Hoelder(r) if !cfg.outputs.no_csv => {
                let file = format!("{stem}_probes.csv");
                r.write_csv(dir.join(&file))?;
                files.push(file);
            }
            Artifact::Density(table) => {
                let (bin, side) = (format!("{stem}_table.bin"), format!("{stem}_table.json"));
                table.write(dir.join(&bin), dir.join(&side))?;
                files.extend([bin, side]);
            }
            Artifact::Batch(batch) => {
                let file = format!("{stem}_batch.bin");
                batch.write_binary(dir.join(&file))?;
                files.push(file);
            }
            _ => {}
        }
    }
    let report = Report {
        command: cmd.name(),
        config_echo: cfg,
        residuals: outcome.residuals,
        verdicts: outcome.verdicts,
        tolerances: cfg.tolerances,
        results: outcome.results,
        artifacts: files,
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            generated_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(dir.join(format!("{stem}.json")), text)?;
    Ok(())
}
