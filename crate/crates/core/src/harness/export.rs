use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::ResultTable;
use crate::error::{invalid, Result};

pub const RAW_FILE: &str = "results_raw.csv";
pub const SUMMARY_FILE: &str = "results_summary.csv";

fn raw_csv(table: &ResultTable) -> String {
    let mut out = String::from("method,demos,seed,episodes,censored,threshold,error\n");
    for r in &table.rows {
        let episodes = r.episodes.map_or(String::new(), |e| e.to_string());
        let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method.name(),
            r.demos,
            r.seed,
            episodes,
            u8::from(r.censored),
            r.threshold,
            error
        );
    }
    out
}

/// Long format, one row per (method, demo count): demo count on the x
/// axis, mean episodes on a log-scaled y axis.
fn summary_csv(table: &ResultTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# env={} slip={}", table.env.name(), table.slip);
    let _ = writeln!(out, "# eval_every={} budget={} censored_value={}", table.eval_every, table.budget, table.budget + 1);
    let _ = writeln!(out, "# x=demos y=mean_episodes y_scale=log");
    out.push_str("method,demos,n,mean_episodes,median_episodes,censored,failed,u_vs_align_rudder,p_vs_align_rudder\n");
    for s in &table.summaries {
        let (u, p) = table
            .comparison(s.demos, s.method)
            .map_or((String::new(), String::new()), |c| (c.test.u.to_string(), c.test.p.to_string()));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.method.name(),
            s.demos,
            s.n,
            s.mean,
            s.median,
            s.censored,
            s.failed,
            u,
            p
        );
    }
    out
}

/// Writes the raw-rows and summary CSVs into `dir`, creating it if needed.
pub fn export(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return invalid("nothing to export");
    }
    fs::create_dir_all(dir)?;
    let raw = dir.join(RAW_FILE);
    let summary = dir.join(SUMMARY_FILE);
    fs::write(&raw, raw_csv(table))?;
    fs::write(&summary, summary_csv(table))?;
    Ok(vec![raw, summary])
}

/// Writes each cell's MSA, scoring matrix and PSSM under
/// `dir/artifacts/demos{n}_seed{s}/`.
pub fn write_artifacts(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for a in &table.artifacts {
        let sub = dir.join("artifacts").join(format!("demos{}_seed{}", a.demos, a.seed));
        fs::create_dir_all(&sub)?;
        for (name, body) in [("msa.fasta", &a.msa_fasta), ("scoring.csv", &a.scoring_csv), ("pssm.csv", &a.pssm_csv)] {
            let path = sub.join(name);
            fs::write(&path, body)?;
            written.push(path);
        }
    }
    Ok(written)
}
