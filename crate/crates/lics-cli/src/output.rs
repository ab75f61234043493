//! Plot-ready file emission: trajectory tables, matrix files with axis
//! headers, and JSON summaries. All text output is UTF-8, line oriented,
//! newline terminated, with floats at 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lics::dynamics::Trajectory;
use lics::sweep::SweepResult;

use crate::{CliError, CliResult};

/// 9 significant digits.
pub fn fmt_g9(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> CliResult<()> {
    let mut text = String::new();
    text.push_str("T,re_a_m,im_a_m,re_a_n,im_a_n,re_a_f,im_a_f,pop_m,pop_n,pop_f,W,sum_total\n");
    for s in traj.iter() {
        let cols = [
            s.t,
            s.a_m.re,
            s.a_m.im,
            s.a_n.re,
            s.a_n.im,
            s.a_f.re,
            s.a_f.im,
            s.pop_m(),
            s.pop_n(),
            s.pop_f(),
            s.w,
            s.sum_total(),
        ];
        let row: Vec<String> = cols.iter().map(|&c| fmt_g9(c)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Matrix file: `# key=value` headers, then the grid with the first row
/// holding the second-axis values (corner cell fixed at 0) and the first
/// column holding the first-axis values.
pub fn write_matrix_file(path: &Path, result: &SweepResult, obs_index: usize) -> CliResult<()> {
    let obs = result.observables[obs_index];
    let matrix = &result.matrices[obs_index];
    let mut text = String::new();
    writeln!(text, "# observable={obs}").ok();
    writeln!(text, "# axis1={}", result.axis1.label).ok();
    writeln!(
        text,
        "# axis2={}",
        result
            .axis2
            .as_ref()
            .map(|a| a.label.as_str())
            .unwrap_or("none")
    )
    .ok();
    writeln!(text, "# rows={}", result.n_rows).ok();
    writeln!(text, "# cols={}", result.n_cols).ok();
    writeln!(text, "# workers={}", result.metadata.workers).ok();
    writeln!(
        text,
        "# failed_cells={}",
        result
            .metadata
            .failed_cells
            .iter()
            .map(|c| format!("{}:{}", c[0], c[1]))
            .collect::<Vec<_>>()
            .join(",")
    )
    .ok();

    let axis2_values: Vec<f64> = match &result.axis2 {
        Some(a) => a.values.clone(),
        None => vec![0.0; result.n_cols],
    };
    let mut header_row = vec!["0".to_string()];
    header_row.extend(axis2_values.iter().map(|&v| fmt_g9(v)));
    text.push_str(&header_row.join(" "));
    text.push('\n');
    for i in 0..result.n_rows {
        let mut row = vec![fmt_g9(result.axis1.values[i])];
        row.extend(
            matrix[i * result.n_cols..(i + 1) * result.n_cols]
                .iter()
                .map(|&v| fmt_g9(v)),
        );
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// A matrix file read back: headers plus the grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMatrix {
    pub observable: String,
    pub axis1_label: String,
    pub axis2_label: String,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
}

pub fn parse_matrix_file(text: &str) -> CliResult<ParsedMatrix> {
    let mut observable = String::new();
    let mut axis1_label = String::new();
    let mut axis2_label = String::new();
    let mut axis1 = Vec::new();
    let mut axis2 = Vec::new();
    let mut values = Vec::new();
    let mut n_cols = 0usize;
    let bad = |m: &str| CliError::Config(format!("matrix file: {m}"));

    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((k, v)) = rest.split_once('=') {
                match k {
                    "observable" => observable = v.to_string(),
                    "axis1" => axis1_label = v.to_string(),
                    "axis2" => axis2_label = v.to_string(),
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| bad(&format!("{e}: `{t}`"))))
            .collect::<CliResult<_>>()?;
        if axis2.is_empty() && values.is_empty() && axis1.is_empty() {
            // first data row: corner + axis2 values
            if nums.len() < 2 {
                return Err(bad("header row too short"));
            }
            axis2 = nums[1..].to_vec();
            n_cols = axis2.len();
        } else {
            if nums.len() != n_cols + 1 {
                return Err(bad(&format!(
                    "row has {} entries, expected {}",
                    nums.len(),
                    n_cols + 1
                )));
            }
            axis1.push(nums[0]);
            values.extend_from_slice(&nums[1..]);
        }
    }
    let n_rows = axis1.len();
    if n_rows == 0 {
        return Err(bad("no data rows"));
    }
    Ok(ParsedMatrix {
        observable,
        axis1_label,
        axis2_label,
        axis1,
        axis2,
        values,
        n_rows,
        n_cols,
    })
}

pub fn write_axes_file(path: &Path, result: &SweepResult) -> CliResult<()> {
    let mut text = String::new();
    writeln!(
        text,
        "# axis1={} count={}",
        result.axis1.label,
        result.axis1.values.len()
    )
    .ok();
    let row: Vec<String> = result.axis1.values.iter().map(|&v| fmt_g9(v)).collect();
    text.push_str(&row.join(" "));
    text.push('\n');
    if let Some(axis2) = &result.axis2 {
        writeln!(text, "# axis2={} count={}", axis2.label, axis2.values.len()).ok();
        let row: Vec<String> = axis2.values.iter().map(|&v| fmt_g9(v)).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
