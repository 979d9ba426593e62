//! Dense assembly of the covariant Schrödinger operator on a finite
//! graph, and its heat semigroup through an exact spectral
//! decomposition.
//!
//! Sections flatten vertex-major: fiber component `i` over vertex `x`
//! sits at index `x·ν + i`. The operator acts as
//!
//! ```text
//! (HΨ)(x) = (1/m(x)) Σ_y b(x,y) (Ψ(x) − Φ_{y,x} Ψ(y)) + V(x) Ψ(x) / ℏ,
//! ```
//!
//! which is self-adjoint in the `m`-weighted inner product but not
//! entrywise Hermitian when `m` varies. Conjugating by `diag(√m) ⊗ I`
//! produces the Hermitian matrix `S`, which is eigendecomposed once at
//! assembly; semigroup kernels and traces are then functions of the
//! cached spectrum.

use num_complex::Complex64;

use crate::bundle::{Connection, Potential, Section};
use crate::error::{Error, Result};
use crate::graph::{VertexId, WeightedGraph};
use crate::linalg::{self, CMatrix, CVector, HermitianEigen};
use crate::tol;

/// The assembled operator with its cached spectral decomposition.
/// Immutable after construction; safe for shared concurrent reads.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    n: usize,
    nu: usize,
    measures: Vec<f64>,
    /// The action matrix `M` (vertex-major block layout).
    action: CMatrix,
    /// Eigenvalues of the symmetrized matrix `S`, ascending.
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvector columns of `S`.
    eigenvectors: CMatrix,
}

/// Builds `H` for the given data. `v = None` means zero potential; `ℏ`
/// scales the potential term only.
pub fn assemble(
    g: &WeightedGraph,
    phi: &Connection,
    v: Option<&Potential>,
    hbar: f64,
) -> Result<AssembledOperator> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hbar = {hbar} must be strictly positive and finite"
        )));
    }
    let nu = phi.rank();
    let n = g.vertex_count();
    if let Some(v) = v {
        if v.rank() != nu {
            return Err(Error::InvalidArgument(format!(
                "potential rank {} does not match connection rank {nu}",
                v.rank()
            )));
        }
        if v.vertex_count() != n {
            return Err(Error::InvalidArgument(format!(
                "potential covers {} vertices, graph has {n}",
                v.vertex_count()
            )));
        }
    }

    let dim = n * nu;
    let mut action = CMatrix::zeros(dim, dim);
    let mut sym = CMatrix::zeros(dim, dim);

    // Diagonal blocks: (deg(x)/m(x)) I + V(x)/ℏ. The √m conjugation
    // cancels on the diagonal, so M and S share these blocks.
    for x in g.vertices() {
        let m = g.measure(x)?;
        let rate = g.degree(x)? / m;
        if !rate.is_finite() {
            return Err(Error::RateOverflow {
                vertex: x,
                degree: g.degree(x)?,
                measure: m,
            });
        }
        let base = x.idx() * nu;
        for i in 0..nu {
            action[(base + i, base + i)] += Complex64::new(rate, 0.0);
            sym[(base + i, base + i)] += Complex64::new(rate, 0.0);
        }
        if let Some(vx) = v.and_then(|v| v.entry(x)) {
            for i in 0..nu {
                for j in 0..nu {
                    let val = vx[(i, j)].unscale(hbar);
                    action[(base + i, base + j)] += val;
                    sym[(base + i, base + j)] += val;
                }
            }
        }
    }

    // Off-diagonal blocks. S gets the same scalar on both orientations
    // and adjoint matrices, so it is Hermitian by construction.
    for e in g.edges() {
        let (mu, mv) = (g.measure(e.u)?, g.measure(e.v)?);
        let t_vu = phi.transport(e.v, e.u)?; // F_v → F_u
        let t_uv = phi.transport(e.u, e.v)?;
        let s = e.b / (mu.sqrt() * mv.sqrt());
        let (bu, bv) = (e.u.idx() * nu, e.v.idx() * nu);
        for i in 0..nu {
            for j in 0..nu {
                action[(bu + i, bv + j)] -= t_vu[(i, j)].scale(e.b / mu);
                action[(bv + i, bu + j)] -= t_uv[(i, j)].scale(e.b / mv);
                sym[(bu + i, bv + j)] -= t_vu[(i, j)].scale(s);
                sym[(bv + i, bu + j)] -= t_uv[(i, j)].scale(s);
            }
        }
    }

    linalg::require_hermitian(&sym, tol::HERMITIAN, "symmetrized operator")?;
    let HermitianEigen { values, vectors } = linalg::hermitian_eigen(&sym)?;
    if v.is_none() {
        // With no potential the spectrum is nonnegative up to solver slack.
        if values[0] < -tol::SPECTRUM {
            return Err(Error::Numeric(format!(
                "negative eigenvalue {} for a nonnegative operator",
                values[0]
            )));
        }
    }

    Ok(AssembledOperator {
        n,
        nu,
        measures: g.measures().to_vec(),
        action,
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

impl AssembledOperator {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.n * self.nu
    }

    /// Eigenvalues of the operator, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector columns of the symmetrized matrix `S`.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// The raw action matrix `M` in vertex-major block layout.
    pub fn action(&self) -> &CMatrix {
        &self.action
    }

    /// Applies `M` to a flat coefficient vector.
    pub fn apply(&self, flat: &CVector) -> CVector {
        &self.action * flat
    }

    /// Flattens a section into the operator's coefficient layout.
    pub fn flatten_section(&self, psi: &Section) -> Result<CVector> {
        if psi.rank() != self.nu {
            return Err(Error::InvalidArgument(format!(
                "section rank {} does not match operator rank {}",
                psi.rank(),
                self.nu
            )));
        }
        let mut flat = CVector::zeros(self.dim());
        for x in psi.support() {
            if x.idx() >= self.n {
                return Err(Error::UnknownVertex(x));
            }
            let v = psi.value(x).expect("support entry");
            for i in 0..self.nu {
                flat[x.idx() * self.nu + i] = v[i];
            }
        }
        Ok(flat)
    }

    /// The `m`-weighted inner product `⟨a, b⟩_m = Σ_x (a(x), b(x))_x m(x)`
    /// on flat coefficient vectors.
    pub fn m_inner(&self, a: &CVector, b: &CVector) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for x in 0..self.n {
            for i in 0..self.nu {
                let k = x * self.nu + i;
                total += (a[k] * b[k].conj()).scale(self.measures[x]);
            }
        }
        total
    }

    /// The kernel of `exp(-tM)`: block `K(t,x,y) = [exp(-tM)]_{xy} / m(y)`,
    /// so that `exp(-tH)Ψ(x) = Σ_y K(t,x,y) Ψ(y) m(y)`.
    pub fn kernel(&self, t: f64) -> Result<KernelMatrix> {
        let propagator = self.propagator(t)?;
        Ok(KernelMatrix {
            t,
            n: self.n,
            nu: self.nu,
            measures: self.measures.clone(),
            propagator,
        })
    }

    /// `exp(-tM)` reconstructed from the cached decomposition of `S`:
    /// rows rescaled by `1/√m`, columns by `√m`.
    fn propagator(&self, t: f64) -> Result<CMatrix> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time t = {t} must be nonnegative and finite"
            )));
        }
        let dim = self.dim();
        if t == 0.0 {
            return Ok(linalg::identity(dim));
        }
        // A = D^{-1} U e^{-tΛ}, rows of U scaled by 1/√m(x)
        let mut left = self.eigenvectors.clone();
        for x in 0..self.n {
            let inv = 1.0 / self.measures[x].sqrt();
            for i in 0..self.nu {
                for z in left.row_mut(x * self.nu + i).iter_mut() {
                    *z = z.scale(inv);
                }
            }
        }
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let decay = (-t * lambda).exp();
            for z in left.column_mut(j).iter_mut() {
                *z = z.scale(decay);
            }
        }
        // B = U^H D, columns of U^H scaled by √m(y)
        let mut right = self.eigenvectors.adjoint();
        for y in 0..self.n {
            let root = self.measures[y].sqrt();
            for i in 0..self.nu {
                for z in right.column_mut(y * self.nu + i).iter_mut() {
                    *z = z.scale(root);
                }
            }
        }
        Ok(left * right)
    }

    /// `tr exp(-tM) = Σ_i exp(-t λ_i)`.
    pub fn trace(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time t = {t} must be nonnegative and finite"
            )));
        }
        Ok(self.eigenvalues.iter().map(|&l| (-t * l).exp()).sum())
    }
}

/// The semigroup kernel at one time: blocks `K(t,x,y) ∈ Hom(F_y, F_x)`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    t: f64,
    n: usize,
    nu: usize,
    measures: Vec<f64>,
    /// The full matrix `exp(-tM)`.
    propagator: CMatrix,
}

impl KernelMatrix {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.nu
    }

    fn check(&self, x: VertexId) -> Result<usize> {
        if x.idx() < self.n {
            Ok(x.idx())
        } else {
            Err(Error::UnknownVertex(x))
        }
    }

    /// The `ν×ν` block `K(t,x,y)`.
    pub fn block(&self, x: VertexId, y: VertexId) -> Result<CMatrix> {
        let (bx, by) = (self.check(x)? * self.nu, self.check(y)? * self.nu);
        let mut out = CMatrix::zeros(self.nu, self.nu);
        let inv_m = 1.0 / self.measures[self.check(y)?];
        for i in 0..self.nu {
            for j in 0..self.nu {
                out[(i, j)] = self.propagator[(bx + i, by + j)].scale(inv_m);
            }
        }
        Ok(out)
    }

    /// Scalar kernel value, for rank-1 bundles.
    pub fn scalar(&self, x: VertexId, y: VertexId) -> Result<Complex64> {
        if self.nu != 1 {
            return Err(Error::InvalidArgument(format!(
                "scalar() requires rank 1, bundle has rank {}",
                self.nu
            )));
        }
        Ok(self.block(x, y)?[(0, 0)])
    }

    /// `Σ_x tr K(t,x,x) m(x)`; agrees with the spectral trace.
    pub fn trace_m(&self) -> f64 {
        (0..self.n * self.nu)
            .map(|k| self.propagator[(k, k)].re)
            .sum()
    }

    /// `Σ_y K(t,x,y) m(y)`; the identity block for a conservative scalar
    /// semigroup.
    pub fn row_sum(&self, x: VertexId) -> Result<CMatrix> {
        let bx = self.check(x)? * self.nu;
        let mut out = CMatrix::zeros(self.nu, self.nu);
        for y in 0..self.n {
            for i in 0..self.nu {
                for j in 0..self.nu {
                    out[(i, j)] += self.propagator[(bx + i, y * self.nu + j)];
                }
            }
        }
        Ok(out)
    }

    /// Semigroup composition `Σ_z K₁(t,x,z) K₂(s,z,y) m(z)`, which is
    /// again a kernel (at time `t + s` when both come from the same
    /// operator).
    pub fn compose(&self, other: &KernelMatrix) -> Result<KernelMatrix> {
        if self.n != other.n || self.nu != other.nu || self.measures != other.measures {
            return Err(Error::InvalidArgument(
                "kernels live on different graphs or bundles".into(),
            ));
        }
        Ok(KernelMatrix {
            t: self.t + other.t,
            n: self.n,
            nu: self.nu,
            measures: self.measures.clone(),
            propagator: &self.propagator * &other.propagator,
        })
    }

    /// Largest deviation from `K(t,x,y)* = K(t,y,x)` over all pairs.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.n {
            for y in 0..self.n {
                let kxy = self
                    .block(VertexId(x as u32), VertexId(y as u32))
                    .expect("in range");
                let kyx = self
                    .block(VertexId(y as u32), VertexId(x as u32))
                    .expect("in range");
                worst = worst.max(linalg::max_abs(&(kxy.adjoint() - kyx)));
            }
        }
        worst
    }

    /// Largest entrywise difference between two kernels.
    pub fn max_diff(&self, other: &KernelMatrix) -> f64 {
        let mut worst = 0.0f64;
        for col in 0..self.n * self.nu {
            let inv_m = 1.0 / self.measures[col / self.nu];
            for row in 0..self.n * self.nu {
                let d = (self.propagator[(row, col)] - other.propagator[(row, col)]).norm();
                worst = worst.max(d * inv_m);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::evaluate_form;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_vertex() -> WeightedGraph {
        WeightedGraph::build(vec![1.0, 1.0], &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn two_vertex_scalar_action_matrix() {
        let g = two_vertex();
        let op = assemble(&g, &Connection::trivial(1), None, 1.0).unwrap();
        let m = op.action();
        assert!((m[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_vertex_with_potential() {
        let g = WeightedGraph::build(vec![1.0], &[]).unwrap();
        let v = Potential::from_entries(1, 1, [(VertexId(0), CMatrix::from_element(1, 1, c(0.7, 0.0)))])
            .unwrap();
        let op = assemble(&g, &Connection::trivial(1), Some(&v), 1.0).unwrap();
        assert!((op.action()[(0, 0)] - c(0.7, 0.0)).norm() < 1e-15);
        assert_eq!(op.dim(), 1);
    }

    #[test]
    fn two_vertex_phase_connection_matrix_and_spectrum() {
        let g = two_vertex();
        let theta = 0.9;
        // Φ_{1,2} in 1-based labels is transport(0→1) here: store e^{iθ}
        let phi = Connection::from_edges(
            &g,
            1,
            [(VertexId(0), VertexId(1), CMatrix::from_element(1, 1, Complex64::from_polar(1.0, theta)))],
        )
        .unwrap();
        let op = assemble(&g, &phi, None, 1.0).unwrap();
        let m = op.action();
        // M = [[1, -e^{-iθ}], [-e^{iθ}, 1]]
        assert!((m[(0, 1)] - (-Complex64::from_polar(1.0, -theta))).norm() < 1e-14);
        assert!((m[(1, 0)] - (-Complex64::from_polar(1.0, theta))).norm() < 1e-14);
        let eigs = op.eigenvalues();
        assert!(eigs[0].abs() < 1e-12);
        assert!((eigs[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_represents_the_form() {
        // ⟨MΨ₁, Ψ₂⟩_m equals the form, on a non-uniform-measure instance
        let g = WeightedGraph::build(
            vec![0.7, 2.0, 1.3, 0.4],
            &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (0, 3, 0.8)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nu = 2;
        let phi = crate::instances::random_connection(&mut rng, &g, nu);
        let v = crate::instances::random_potential(&mut rng, 4, nu, 1.0);
        let hbar = 0.7;
        let op = assemble(&g, &phi, Some(&v), hbar).unwrap();

        for _ in 0..5 {
            let psi1 = crate::instances::random_section(&mut rng, 4, nu, 3);
            let psi2 = crate::instances::random_section(&mut rng, 4, nu, 3);
            let form = evaluate_form(&g, &phi, Some(&v), hbar, &psi1, &psi2).unwrap();
            let lhs = op.m_inner(
                &op.apply(&op.flatten_section(&psi1).unwrap()),
                &op.flatten_section(&psi2).unwrap(),
            );
            let scale = 1.0 + form.norm();
            assert!(
                (lhs - form).norm() <= tol::KERNEL * scale,
                "matrix-form mismatch: {lhs} vs {form}"
            );
        }
    }

    #[test]
    fn kernel_two_vertex_closed_form() {
        let g = two_vertex();
        let op = assemble(&g, &Connection::trivial(1), None, 1.0).unwrap();
        let k = op.kernel(1.0).unwrap();
        let diag = (1.0 + (-2.0f64).exp()) / 2.0;
        let off = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((k.scalar(VertexId(0), VertexId(0)).unwrap().re - diag).abs() < 1e-12);
        assert!((k.scalar(VertexId(0), VertexId(1)).unwrap().re - off).abs() < 1e-12);
    }

    #[test]
    fn kernel_at_time_zero_is_identity_over_measure() {
        let g = WeightedGraph::build(vec![2.0, 0.5], &[(0, 1, 1.0)]).unwrap();
        let op = assemble(&g, &Connection::trivial(1), None, 1.0).unwrap();
        let k = op.kernel(0.0).unwrap();
        assert!((k.scalar(VertexId(0), VertexId(0)).unwrap().re - 0.5).abs() < 1e-15);
        assert!((k.scalar(VertexId(1), VertexId(1)).unwrap().re - 2.0).abs() < 1e-15);
        assert!(k.scalar(VertexId(0), VertexId(1)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn triangle_flux_spectrum_and_trace_match_circulant_oracle() {
        let theta = 1.1;
        let p = crate::instances::triangle_flux(theta);
        let op = assemble(&p.graph, &p.connection, None, 1.0).unwrap();
        // circulant oracle: eigenvalues 2 - 2cos((θ + 2πk)/3)
        let mut oracle: Vec<f64> = (0..3)
            .map(|k| 2.0 - 2.0 * ((theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect();
        oracle.sort_by(f64::total_cmp);
        for (a, b) in oracle.iter().zip(op.eigenvalues()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let t = 0.8;
        let trace_oracle: f64 = oracle.iter().map(|&l| (-t * l).exp()).sum();
        assert!((op.trace(t).unwrap() - trace_oracle).abs() < 1e-12);
        assert!((op.kernel(t).unwrap().trace_m() - trace_oracle).abs() < 1e-12);
    }

    #[test]
    fn trace_at_zero_counts_dimensions() {
        let g = WeightedGraph::build(vec![1.0, 1.0, 1.0], &[(0, 1, 1.0)]).unwrap();
        let op = assemble(&g, &Connection::trivial(2), None, 1.0).unwrap();
        assert!((op.trace(0.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn trace_single_vertex_diagonal_potential() {
        let g = WeightedGraph::build(vec![1.0], &[]).unwrap();
        let (a, b) = (0.4, -1.2);
        let v = Potential::from_entries(
            1,
            2,
            [(
                VertexId(0),
                CMatrix::from_row_slice(2, 2, &[c(a, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(b, 0.0)]),
            )],
        )
        .unwrap();
        let op = assemble(&g, &Connection::trivial(2), Some(&v), 1.0).unwrap();
        let beta = 1.7;
        let expected = (-beta * a).exp() + (-beta * b).exp();
        assert!((op.trace(beta).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn negative_time_rejected() {
        let g = two_vertex();
        let op = assemble(&g, &Connection::trivial(1), None, 1.0).unwrap();
        assert!(op.kernel(-0.1).is_err());
        assert!(op.trace(-0.1).is_err());
    }

    #[test]
    fn semigroup_law_and_symmetry() {
        let p = crate::instances::n6_mixed();
        let op = assemble(&p.graph, &p.connection, Some(&p.potential), 1.0).unwrap();
        for (t, s) in [(0.3, 0.7), (1.0, 1.0), (0.11, 1.9)] {
            let kt = op.kernel(t).unwrap();
            let ks = op.kernel(s).unwrap();
            let kts = op.kernel(t + s).unwrap();
            assert!(kt.compose(&ks).unwrap().max_diff(&kts) < tol::KERNEL);
            assert!(kt.symmetry_defect() < tol::KERNEL);
        }
    }

    #[test]
    fn scalar_conservativity() {
        let g = WeightedGraph::build(
            vec![1.0, 0.5, 2.0, 1.5],
            &[(0, 1, 1.0), (1, 2, 0.7), (2, 3, 1.2), (0, 2, 0.4)],
        )
        .unwrap();
        let op = assemble(&g, &Connection::trivial(1), None, 1.0).unwrap();
        let k = op.kernel(0.9).unwrap();
        for x in g.vertices() {
            let row = k.row_sum(x).unwrap();
            assert!((row[(0, 0)] - c(1.0, 0.0)).norm() < tol::KERNEL);
            for y in g.vertices() {
                assert!(k.scalar(x, y).unwrap().re > -1e-12);
                assert!(k.scalar(x, y).unwrap().im.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn semigroup_domination_by_scalar_kernel() {
        let p = crate::instances::n6_mixed();
        let (vplus, _) = crate::bundle::kato_decompose(&p.potential).unwrap();
        let op = assemble(&p.graph, &p.connection, Some(&vplus), 1.0).unwrap();
        let scalar = assemble(&p.graph, &Connection::trivial(1), None, 1.0).unwrap();
        for t in [0.5, 1.0] {
            let k = op.kernel(t).unwrap();
            let ks = scalar.kernel(t).unwrap();
            for x in p.graph.vertices() {
                for y in p.graph.vertices() {
                    let block_norm = linalg::operator_norm(&k.block(x, y).unwrap());
                    let bound = ks.scalar(x, y).unwrap().re;
                    assert!(
                        block_norm <= bound + tol::KERNEL,
                        "domination fails at ({x},{y}): {block_norm} > {bound}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauge_covariance_of_kernel_and_spectrum() {
        let p = crate::instances::n6_mixed();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let entries: Vec<_> = p
            .graph
            .vertices()
            .map(|x| (x, crate::instances::random_unitary(&mut rng, 2)))
            .collect();
        let gauge = crate::bundle::GaugeTransform::from_entries(2, entries).unwrap();
        let (phi2, v2) =
            crate::bundle::gauge_transform(&p.graph, &p.connection, &p.potential, &gauge).unwrap();

        let op = assemble(&p.graph, &p.connection, Some(&p.potential), 1.0).unwrap();
        let op2 = assemble(&p.graph, &phi2, Some(&v2), 1.0).unwrap();

        for (a, b) in op.eigenvalues().iter().zip(op2.eigenvalues()) {
            assert!((a - b).abs() < tol::SPECTRUM, "spectra differ: {a} vs {b}");
        }

        let t = 0.6;
        let k = op.kernel(t).unwrap();
        let k2 = op2.kernel(t).unwrap();
        for x in p.graph.vertices() {
            for y in p.graph.vertices() {
                let expected =
                    gauge.matrix(x).as_ref() * k.block(x, y).unwrap() * gauge.matrix(y).adjoint();
                let got = k2.block(x, y).unwrap();
                assert!(linalg::max_abs(&(expected - got)) < tol::KERNEL);
            }
        }
    }

    #[test]
    fn hbar_scales_potential_only() {
        let g = two_vertex();
        let v = Potential::from_entries(2, 1, [(VertexId(0), CMatrix::from_element(1, 1, c(3.0, 0.0)))])
            .unwrap();
        let op = assemble(&g, &Connection::trivial(1), Some(&v), 0.5).unwrap();
        assert!((op.action()[(0, 0)] - c(1.0 + 6.0, 0.0)).norm() < 1e-14);
        assert!((op.action()[(1, 1)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn empty_graph_rejected() {
        let g = WeightedGraph::build(vec![], &[]).unwrap();
        assert!(matches!(
            assemble(&g, &Connection::trivial(1), None, 1.0),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn random_rank_checks() {
        let g = two_vertex();
        let v = Potential::zero(2, 2);
        assert!(assemble(&g, &Connection::trivial(1), Some(&v), 1.0).is_err());
        let v3 = Potential::zero(3, 1);
        assert!(assemble(&g, &Connection::trivial(1), Some(&v3), 1.0).is_err());
    }
}
