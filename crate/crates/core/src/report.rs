//! Deterministic report serialization.
//!
//! Identical inputs produce byte-identical text: floats print in
//! shortest round-trip form, field order is fixed, and nothing
//! environment-dependent (timestamps, absolute paths, thread counts)
//! is ever written. Complex numbers serialize as `[re, im]` pairs
//! everywhere.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{GoldenThompson, SweepRow};
use crate::config::VertexNames;
use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::linalg::CMatrix;
use crate::operator::KernelMatrix;
use crate::stochastic::KernelEstimate;

fn display_name(names: &VertexNames, x: VertexId) -> Result<String> {
    names
        .name(x)
        .map(str::to_string)
        .ok_or(Error::UnknownVertex(x))
}

/// CSV with one row per kernel block entry: `t,x,y,i,j,re,im`.
pub fn kernel_csv(kernel: &KernelMatrix, names: &VertexNames) -> Result<String> {
    let mut out = String::from("t,x,y,i,j,re,im\n");
    let nu = kernel.rank();
    for x in 0..kernel.vertex_count() as u32 {
        for y in 0..kernel.vertex_count() as u32 {
            let block = kernel.block(VertexId(x), VertexId(y))?;
            let (xn, yn) = (
                display_name(names, VertexId(x))?,
                display_name(names, VertexId(y))?,
            );
            for i in 0..nu {
                for j in 0..nu {
                    let z = block[(i, j)];
                    let _ = writeln!(out, "{},{xn},{yn},{i},{j},{},{}", kernel.t(), z.re, z.im);
                }
            }
        }
    }
    Ok(out)
}

/// CSV with columns `t,trace`.
pub fn trace_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("t,trace\n");
    for &(t, trace) in rows {
        let _ = writeln!(out, "{t},{trace}");
    }
    out
}

/// CSV with columns `hbar,quantum_trace,classical_trace,gap`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("hbar,quantum_trace,classical_trace,gap\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.hbar, row.quantum_trace, row.classical_trace, row.gap
        );
    }
    out
}

/// CSV with columns `t,value` for Kato functional grids.
pub fn kato_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("t,value\n");
    for &(t, value) in rows {
        let _ = writeln!(out, "{t},{value}");
    }
    out
}

/// The Monte Carlo report: target block, counts, mean and standard
/// error, and the seed that replays it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub x: String,
    pub y: String,
    pub t: f64,
    pub hbar: f64,
    pub paths: u64,
    pub paths_hit: u64,
    pub paths_exploded: u64,
    /// `mean[i][j] = [re, im]`.
    pub mean: Vec<Vec<[f64; 2]>>,
    pub stderr: Vec<Vec<f64>>,
    pub seed: u64,
}

impl McReport {
    pub fn new(estimate: &KernelEstimate, names: &VertexNames) -> Result<Self> {
        let nu = estimate.rank();
        let mean_matrix = estimate.mean();
        let se = estimate.std_error();
        let mean = (0..nu)
            .map(|i| {
                (0..nu)
                    .map(|j| [mean_matrix[(i, j)].re, mean_matrix[(i, j)].im])
                    .collect()
            })
            .collect();
        let stderr = (0..nu).map(|i| (0..nu).map(|j| se[(i, j)]).collect()).collect();
        Ok(Self {
            x: display_name(names, estimate.source())?,
            y: display_name(names, estimate.target())?,
            t: estimate.t(),
            hbar: estimate.hbar(),
            paths: estimate.paths_total(),
            paths_hit: estimate.paths_hit(),
            paths_exploded: estimate.paths_exploded(),
            mean,
            stderr,
            seed: estimate.seed(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Golden-Thompson check as a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenThompsonReport {
    pub beta: f64,
    pub hbar: f64,
    pub quantum_trace: f64,
    pub classical_bound: f64,
    pub holds: bool,
}

impl From<GoldenThompson> for GoldenThompsonReport {
    fn from(g: GoldenThompson) -> Self {
        Self {
            beta: g.beta,
            hbar: g.hbar,
            quantum_trace: g.quantum_trace,
            classical_bound: g.classical_bound,
            holds: g.holds,
        }
    }
}

impl GoldenThompsonReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// One entry of an exact-vs-Monte-Carlo comparison.
#[derive(Debug, Clone, Copy)]
pub struct EntryComparison {
    pub i: usize,
    pub j: usize,
    pub exact: num_complex::Complex64,
    pub estimate: num_complex::Complex64,
    pub stderr: f64,
    /// `|exact − estimate| / stderr`; infinite when the scatter is zero
    /// but the difference is not.
    pub z: f64,
}

/// Per-entry z-scores of a Monte Carlo estimate against the exact
/// kernel block it targets.
#[derive(Debug, Clone)]
pub struct KernelComparison {
    pub entries: Vec<EntryComparison>,
    pub max_z: f64,
    pub max_abs_error: f64,
}

pub fn compare_with_exact(exact: &CMatrix, estimate: &KernelEstimate) -> Result<KernelComparison> {
    let nu = estimate.rank();
    if exact.nrows() != nu || exact.ncols() != nu {
        return Err(Error::InvalidArgument(format!(
            "exact block is {}x{}, estimate has rank {nu}",
            exact.nrows(),
            exact.ncols()
        )));
    }
    let mean = estimate.mean();
    let se = estimate.std_error();
    let mut entries = Vec::with_capacity(nu * nu);
    let mut max_z = 0.0f64;
    let mut max_abs = 0.0f64;
    for i in 0..nu {
        for j in 0..nu {
            let diff = (exact[(i, j)] - mean[(i, j)]).norm();
            let z = if diff == 0.0 {
                0.0
            } else if se[(i, j)] == 0.0 {
                f64::INFINITY
            } else {
                diff / se[(i, j)]
            };
            max_z = max_z.max(z);
            max_abs = max_abs.max(diff);
            entries.push(EntryComparison {
                i,
                j,
                exact: exact[(i, j)],
                estimate: mean[(i, j)],
                stderr: se[(i, j)],
                z,
            });
        }
    }
    Ok(KernelComparison {
        entries,
        max_z,
        max_abs_error: max_abs,
    })
}

/// CSV with columns
/// `i,j,exact_re,exact_im,mc_re,mc_im,stderr,z`.
pub fn compare_csv(cmp: &KernelComparison) -> String {
    let mut out = String::from("i,j,exact_re,exact_im,mc_re,mc_im,stderr,z\n");
    for e in &cmp.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.i, e.j, e.exact.re, e.exact.im, e.estimate.re, e.estimate.im, e.stderr, e.z
        );
    }
    out
}

/// Run metadata written beside every report: tool version, subcommand,
/// echoed flags, a hash of the config text, and the vertex dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSidecar {
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub flags: Vec<(String, String)>,
    pub vertex_ids: Vec<String>,
}

impl MetaSidecar {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{Connection, Potential};
    use crate::instances;
    use crate::operator;
    use crate::stochastic;

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let p = instances::two_vertex_scalar();
        let run = || {
            let est = stochastic::fk_kernel_estimate(
                &p.graph,
                &p.connection,
                &p.potential,
                1.0,
                VertexId(0),
                VertexId(1),
                1.0,
                2_000,
                9,
                1_000_000,
            )
            .unwrap();
            McReport::new(&est, &p.names).unwrap().to_json()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(a.contains("\"seed\": 9"));
    }

    #[test]
    fn kernel_csv_has_expected_shape() {
        let p = instances::two_vertex_scalar();
        let op = operator::assemble(&p.graph, &p.connection, None, 1.0).unwrap();
        let k = op.kernel(1.0).unwrap();
        let csv = kernel_csv(&k, &p.names).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,y,i,j,re,im");
        assert_eq!(lines.len(), 1 + 4); // 2x2 vertex pairs, rank 1
        assert!(lines[1].starts_with("1,a,a,0,0,"));
    }

    #[test]
    fn comparison_flags_gauge_mismatch() {
        // estimate on flux θ, exact on a shifted flux: z must blow up
        let theta = 0.9;
        let mc_problem = instances::triangle_flux(theta);
        let exact_problem = instances::triangle_flux(theta + 2.0);
        let (x, y) = (VertexId(0), VertexId(1));
        let t = 1.0;
        let est = stochastic::fk_kernel_estimate(
            &mc_problem.graph,
            &mc_problem.connection,
            &mc_problem.potential,
            1.0,
            x,
            y,
            t,
            50_000,
            12,
            1_000_000,
        )
        .unwrap();

        let matched = operator::assemble(&mc_problem.graph, &mc_problem.connection, None, 1.0)
            .unwrap()
            .kernel(t)
            .unwrap()
            .block(x, y)
            .unwrap();
        let cmp = compare_with_exact(&matched, &est).unwrap();
        assert!(cmp.max_z <= 4.0, "matched comparison should pass: {}", cmp.max_z);

        let mismatched = operator::assemble(&exact_problem.graph, &exact_problem.connection, None, 1.0)
            .unwrap()
            .kernel(t)
            .unwrap()
            .block(x, y)
            .unwrap();
        let cmp = compare_with_exact(&mismatched, &est).unwrap();
        assert!(cmp.max_z > 4.0, "mismatch must be detected: {}", cmp.max_z);
    }

    #[test]
    fn trace_and_sweep_csv_headers() {
        assert!(trace_csv(&[(1.0, 2.0)]).starts_with("t,trace\n1,2\n"));
        let row = SweepRow {
            hbar: 1.0,
            quantum_trace: 2.0,
            classical_trace: 3.0,
            gap: 1.0,
        };
        assert_eq!(sweep_csv(&[row]).lines().count(), 2);
        assert!(kato_csv(&[(0.1, 0.1)]).starts_with("t,value\n"));
    }

    #[test]
    fn mc_report_roundtrips_through_json() {
        let p = instances::two_vertex_scalar();
        let est = stochastic::fk_kernel_estimate(
            &p.graph,
            &Connection::trivial(1),
            &Potential::zero(2, 1),
            1.0,
            VertexId(0),
            VertexId(0),
            0.5,
            500,
            3,
            1_000,
        )
        .unwrap();
        let report = McReport::new(&est, &p.names).unwrap();
        let parsed: McReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(report, parsed);
    }
}
