//! Kato-class functionals, partition functions, the Golden-Thompson
//! trace bound, and the semiclassical sweep.
//!
//! On a finite graph the quantum partition function at inverse
//! temperature `β` and scale `ℏ` is `tr exp(-βℏ H_{Φ,V/ℏ})`; its
//! classical counterpart is `Σ_x tr exp(-βV(x))`. The bound
//! `quantum ≤ classical` holds for every `ℏ`, and the gap closes as
//! `ℏ → 0⁺` — note `exp(-βℏ(Δ_Φ + V/ℏ)) = exp(-β(ℏΔ_Φ + V))`, so the
//! kinetic term is simply switched off.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bundle::{Connection, Potential};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg;
use crate::operator;
use crate::tol;

/// `sup_x ∫₀ᵗ Σ_y exp(-sH)(x,y) |w(y)| m(y) ds` for the scalar
/// Laplacian of the graph, evaluated exactly through its spectrum:
/// each eigenvalue contributes `(1 - e^{-tλ})/λ` (continued as `t` at
/// `λ = 0`).
pub fn kato_functional(g: &WeightedGraph, w: &[Complex64], t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} must be strictly positive and finite"
        )));
    }
    let n = g.vertex_count();
    if w.len() != n {
        return Err(Error::InvalidArgument(format!(
            "weight function has {} entries, graph has {n} vertices",
            w.len()
        )));
    }
    let op = operator::assemble(g, &Connection::trivial(1), None, 1.0)?;
    let eig_vectors = op.eigenvectors();
    let measures = g.measures();

    // coefficients of D_{√m}|w| in the eigenbasis of S
    let weighted = linalg::CVector::from_iterator(
        n,
        w.iter()
            .zip(measures)
            .map(|(wx, &m)| Complex64::new(wx.norm() * m.sqrt(), 0.0)),
    );
    let coeffs = eig_vectors.adjoint() * weighted;

    let integrals: Vec<f64> = op
        .eigenvalues()
        .iter()
        .map(|&lambda| {
            if lambda == 0.0 {
                t
            } else {
                -(-t * lambda).exp_m1() / lambda
            }
        })
        .collect();

    let mut worst = 0.0f64;
    for x in 0..n {
        let mut total = Complex64::new(0.0, 0.0);
        for (j, &integral) in integrals.iter().enumerate() {
            total += eig_vectors[(x, j)] * coeffs[j] * integral;
        }
        worst = worst.max(total.re / measures[x].sqrt());
    }
    Ok(worst)
}

/// `Σ_x tr exp(-βV(x))`: vertices off the support of `V` contribute the
/// full fiber dimension.
pub fn classical_partition_function(v: &Potential, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta = {beta} must be strictly positive and finite"
        )));
    }
    let mut total = (v.vertex_count() - v.support().count()) as f64 * v.rank() as f64;
    for x in v.support() {
        let eig = linalg::hermitian_eigen(v.entry(x).expect("support entry"))?;
        total += eig.values.iter().map(|&mu| (-beta * mu).exp()).sum::<f64>();
    }
    Ok(total)
}

/// One point of the semiclassical sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub hbar: f64,
    /// `tr exp(-βℏ H_{Φ,V/ℏ})`.
    pub quantum_trace: f64,
    /// `Σ_x tr exp(-βV(x))`.
    pub classical_trace: f64,
    /// `classical_trace - quantum_trace`; nonnegative up to
    /// [`tol::TRACE_BOUND`] on every row.
    pub gap: f64,
}

/// The default `ℏ` grid: 13 geometric points from 1 down to 10⁻³.
pub fn default_hbar_grid() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-0.25 * k as f64)).collect()
}

/// Computes `tr exp(-βℏ H_{Φ,V/ℏ})` against the classical value for
/// every `ℏ` in a strictly decreasing grid, asserting the trace bound
/// row by row. Rows are independent and computed concurrently; output
/// order follows the grid.
pub fn semiclassical_sweep(
    g: &WeightedGraph,
    phi: &Connection,
    v: &Potential,
    beta: f64,
    hbar_grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if hbar_grid.is_empty() {
        return Err(Error::InvalidArgument("hbar grid is empty".into()));
    }
    for h in hbar_grid {
        if !(h.is_finite() && *h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "hbar = {h} must be strictly positive and finite"
            )));
        }
    }
    if hbar_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "hbar grid must be strictly decreasing".into(),
        ));
    }
    let classical_trace = classical_partition_function(v, beta)?;
    let rows: Vec<SweepRow> = hbar_grid
        .par_iter()
        .map(|&hbar| -> Result<SweepRow> {
            let op = operator::assemble(g, phi, Some(v), hbar)?;
            let quantum_trace = op.trace(beta * hbar)?;
            Ok(SweepRow {
                hbar,
                quantum_trace,
                classical_trace,
                gap: classical_trace - quantum_trace,
            })
        })
        .collect::<Result<_>>()?;
    for row in &rows {
        if row.gap < -tol::TRACE_BOUND {
            return Err(Error::Numeric(format!(
                "trace bound violated at hbar = {}: gap = {}",
                row.hbar, row.gap
            )));
        }
    }
    Ok(rows)
}

/// Result of a single trace-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenThompson {
    pub beta: f64,
    pub hbar: f64,
    pub quantum_trace: f64,
    pub classical_bound: f64,
    pub holds: bool,
}

/// Checks `tr exp(-βℏ H_{Φ,V/ℏ}) ≤ Σ_x tr exp(-βV(x))`, with
/// [`tol::TRACE_BOUND`] slack.
pub fn golden_thompson_check(
    g: &WeightedGraph,
    phi: &Connection,
    v: &Potential,
    beta: f64,
    hbar: f64,
) -> Result<GoldenThompson> {
    let op = operator::assemble(g, phi, Some(v), hbar)?;
    let quantum_trace = op.trace(beta * hbar)?;
    let classical_bound = classical_partition_function(v, beta)?;
    Ok(GoldenThompson {
        beta,
        hbar,
        quantum_trace,
        classical_bound,
        holds: quantum_trace <= classical_bound + tol::TRACE_BOUND,
    })
}
