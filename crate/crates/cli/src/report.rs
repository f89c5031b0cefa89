//! Output files: results tables, region boundaries, trajectory dumps,
//! and the run manifest.

use anyhow::{Context, Result};
use platoon_core::gains::RegionBoundary;
use platoon_core::montecarlo::{ComparisonTable, SafetyMetrics};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Formats a float with six significant digits, plain decimal where the
/// magnitude allows and exponent notation otherwise.
pub fn sig6(x: f64) -> String {
    fmt_sig(x, 6)
}

pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        format!("{:.*e}", sig - 1, x)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

pub const RESULTS_HEADER: &str = "r,d_m,D0_mps2,P,N_expected,S_sum_mps,S_per_collision_mps,n,seed";

/// One results row per `(variant, leader deceleration)`.
pub fn results_csv(rows: &[(usize, f64, &SafetyMetrics)]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for (r, d, m) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r,
            sig6(*d),
            sig6(m.d0),
            sig6(m.p_collision),
            sig6(m.expected_collisions),
            sig6(m.severity_sum),
            sig6(m.severity_per_collision),
            m.iterations,
            m.seed
        );
    }
    out
}

/// Pairwise per-deceleration metric deltas between variants.
pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("r_a,d_a_m,r_b,d_b_m,D0_mps2,delta_P,delta_N\n");
    for delta in &table.deltas {
        for (d0, dp, dn) in &delta.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                delta.left.0,
                sig6(delta.left.1),
                delta.right.0,
                sig6(delta.right.1),
                sig6(*d0),
                sig6(*dp),
                sig6(*dn)
            );
        }
    }
    out
}

/// Two-column `kv kp` text, the two boundary segments separated by a
/// blank line.
pub fn region_file(boundary: &RegionBoundary) -> String {
    let mut out = String::new();
    for p in &boundary.upper {
        let _ = writeln!(out, "{:.9e} {:.9e}", p[0], p[1]);
    }
    out.push('\n');
    for p in &boundary.lower {
        let _ = writeln!(out, "{:.9e} {:.9e}", p[0], p[1]);
    }
    out
}

/// Written next to every results file; embeds the resolved config so the
/// run can be reproduced from the manifest alone.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: ToolInfo,
    pub config: &'a crate::config::FileConfig,
}

#[derive(Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
    pub command: String,
    pub created: String,
    pub outputs: Vec<String>,
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    outputs: &[PathBuf],
    config: &crate::config::FileConfig,
) -> Result<PathBuf> {
    let manifest = RunManifest {
        tool: ToolInfo {
            name: "platoon-sim",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            created: chrono::Utc::now().to_rfc3339(),
            outputs: outputs
                .iter()
                .map(|p| {
                    p.file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default()
                })
                .collect(),
        },
        config,
    };
    let path = dir.join("manifest.toml");
    std::fs::write(&path, toml::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}
