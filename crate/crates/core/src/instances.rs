//! Ready-made problem instances and deterministic random generators,
//! shared by tests, benchmarks, and the example configurations.

use std::borrow::Cow;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::{Connection, Potential, Section};
use crate::config::{Problem, VertexNames};
use crate::error::Result;
use crate::graph::{GraphProvider, VertexId, WeightedGraph};
use crate::linalg::{CMatrix, CVector};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Two vertices, one unit edge, unit measures, trivial line bundle,
/// zero potential. The kernel at time `t` is known in closed form from
/// the eigenvalues `{0, 2}`.
pub fn two_vertex_scalar() -> Problem {
    let graph = WeightedGraph::build(vec![1.0, 1.0], &[(0, 1, 1.0)]).unwrap();
    let connection = Connection::identity_on(&graph, 1).unwrap();
    Problem {
        connection,
        potential: Potential::zero(2, 1),
        hbar: 1.0,
        names: VertexNames::from_names(vec!["a".into(), "b".into()]),
        kato_weight: vec![c(1.0, 0.0); 2],
        graph,
    }
}

/// Three isolated vertices with a rank-2 mixed-sign potential. With no
/// kinetic term the quantum and classical partition functions coincide
/// for every `ℏ`.
pub fn edgeless_mixed() -> Problem {
    let graph = WeightedGraph::build(vec![1.0, 0.5, 2.0], &[]).unwrap();
    let v0 = CMatrix::from_row_slice(
        2,
        2,
        &[c(1.2, 0.0), c(0.3, 0.4), c(0.3, -0.4), c(-0.7, 0.0)],
    );
    let v1 = CMatrix::from_row_slice(
        2,
        2,
        &[c(-0.5, 0.0), c(0.0, 0.1), c(0.0, -0.1), c(0.9, 0.0)],
    );
    let v2 = CMatrix::from_row_slice(
        2,
        2,
        &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.5, 0.0)],
    );
    let potential = Potential::from_entries(
        3,
        2,
        [(VertexId(0), v0), (VertexId(1), v1), (VertexId(2), v2)],
    )
    .unwrap();
    Problem {
        connection: Connection::identity_on(&graph, 2).unwrap(),
        potential,
        hbar: 1.0,
        names: VertexNames::from_names(vec!["a".into(), "b".into(), "c".into()]),
        kato_weight: vec![c(1.0, 0.0); 3],
        graph,
    }
}

/// The unit triangle with equal phases `e^{iθ/3}` along the oriented
/// cycle `0 → 1 → 2 → 0`, so the holonomy around the cycle is `e^{iθ}`
/// and the operator's spectrum is `2 - 2cos((θ + 2πk)/3)`.
pub fn triangle_flux(theta: f64) -> Problem {
    let graph =
        WeightedGraph::build(vec![1.0; 3], &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let phase = CMatrix::from_element(1, 1, Complex64::from_polar(1.0, theta / 3.0));
    let connection = Connection::from_edges(
        &graph,
        1,
        [
            (VertexId(0), VertexId(1), phase.clone()),
            (VertexId(1), VertexId(2), phase.clone()),
            (VertexId(2), VertexId(0), phase),
        ],
    )
    .unwrap();
    Problem {
        connection,
        potential: Potential::zero(3, 1),
        hbar: 1.0,
        names: VertexNames::from_names(vec!["a".into(), "b".into(), "c".into()]),
        kato_weight: vec![c(1.0, 0.0); 3],
        graph,
    }
}

/// The fixed-seed six-vertex instance used throughout the test suite:
/// a ring with two chords, non-uniform weights and measures, a random
/// rank-2 unitary connection, and a mixed-sign Hermitian potential.
pub fn n6_mixed() -> Problem {
    let mut rng = rand::SeedableRng::seed_from_u64(0xC0F);
    let nu = 2;
    let pairs: [(u32, u32); 8] = [
        (0, 1),
        (1, 2),
        (2, 3),
        (3, 4),
        (4, 5),
        (0, 5),
        (0, 3),
        (1, 4),
    ];
    let edges: Vec<(u32, u32, f64)> = pairs
        .iter()
        .map(|&(u, v)| (u, v, 0.5 + rng.gen::<f64>()))
        .collect();
    let measures: Vec<f64> = (0..6).map(|_| 0.5 + 1.5 * rng.gen::<f64>()).collect();
    let graph = WeightedGraph::build(measures, &edges).unwrap();
    let connection = random_connection(&mut rng, &graph, nu);
    let potential = random_potential(&mut rng, 6, nu, 1.0);
    Problem {
        connection,
        potential,
        hbar: 1.0,
        names: VertexNames::from_names((0..6).map(|i| format!("v{i}")).collect()),
        kato_weight: vec![c(1.0, 0.0); 6],
        graph,
    }
}

/// A Haar-ish random unitary: Q factor of a random complex matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, nu: usize) -> CMatrix {
    let m = CMatrix::from_fn(nu, nu, |_, _| {
        c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    });
    m.qr().q()
}

/// A random Hermitian matrix with entries of order `scale`.
pub fn random_hermitian(rng: &mut ChaCha8Rng, nu: usize, scale: f64) -> CMatrix {
    let m = CMatrix::from_fn(nu, nu, |_, _| {
        c(
            scale * (rng.gen::<f64>() * 2.0 - 1.0),
            scale * (rng.gen::<f64>() * 2.0 - 1.0),
        )
    });
    (&m + m.adjoint()).scale(0.5)
}

/// A random unitary connection over the edges of `g`.
pub fn random_connection(rng: &mut ChaCha8Rng, g: &WeightedGraph, nu: usize) -> Connection {
    let entries: Vec<_> = g
        .edges()
        .iter()
        .map(|e| (e.u, e.v, random_unitary(rng, nu)))
        .collect();
    Connection::from_edges(g, nu, entries).expect("random unitaries are unitary")
}

/// A random Hermitian potential on every vertex of a graph with `n`
/// vertices.
pub fn random_potential(rng: &mut ChaCha8Rng, n: usize, nu: usize, scale: f64) -> Potential {
    let entries: Vec<_> = (0..n)
        .map(|x| (VertexId(x as u32), random_hermitian(rng, nu, scale)))
        .collect();
    Potential::from_entries(n, nu, entries).expect("hermitian by construction")
}

/// A random section supported on `support_size` vertices drawn from
/// `0..n`.
pub fn random_section(rng: &mut ChaCha8Rng, n: usize, nu: usize, support_size: usize) -> Section {
    let mut s = Section::zero(nu);
    for _ in 0..support_size {
        let x = VertexId(rng.gen_range(0..n as u32));
        let v = CVector::from_fn(nu, |_, _| {
            c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        });
        s.set(x, v).expect("rank matches");
    }
    s
}

/// The half line `0 — 1 — 2 — ⋯` with unit edge weights: a graph far
/// too large to materialize, served lazily through [`GraphProvider`].
#[derive(Debug, Clone, Copy)]
pub struct HalfLine {
    measure: f64,
}

impl HalfLine {
    pub fn unit() -> Self {
        Self { measure: 1.0 }
    }

    pub fn with_measure(measure: f64) -> Self {
        Self { measure }
    }
}

impl GraphProvider for HalfLine {
    fn neighbors(&self, x: VertexId) -> Result<Cow<'_, [(VertexId, f64)]>> {
        let mut out = Vec::with_capacity(2);
        if x.0 > 0 {
            out.push((VertexId(x.0 - 1), 1.0));
        }
        if x.0 < u32::MAX {
            out.push((VertexId(x.0 + 1), 1.0));
        }
        Ok(Cow::Owned(out))
    }

    fn measure(&self, _x: VertexId) -> Result<f64> {
        Ok(self.measure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn n6_instance_is_reproducible_and_mixed_sign() {
        let a = n6_mixed();
        let b = n6_mixed();
        assert_eq!(a.graph.edges(), b.graph.edges());
        for e in a.graph.edges() {
            assert_eq!(
                a.connection.transport(e.u, e.v).unwrap().as_ref(),
                b.connection.transport(e.u, e.v).unwrap().as_ref()
            );
        }
        // the potential really mixes signs somewhere
        let mut has_negative = false;
        let mut has_positive = false;
        for x in a.graph.vertices() {
            let eig = linalg::hermitian_eigen(a.potential.entry(x).unwrap()).unwrap();
            has_negative |= eig.values[0] < 0.0;
            has_positive |= *eig.values.last().unwrap() > 0.0;
        }
        assert!(has_negative && has_positive);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = rand::SeedableRng::seed_from_u64(5);
        for nu in 1..=4 {
            let u = random_unitary(&mut rng, nu);
            assert!(linalg::unitary_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn half_line_is_symmetric_provider() {
        let line = HalfLine::unit();
        let nbrs = line.neighbors(VertexId(0)).unwrap();
        assert_eq!(nbrs.as_ref(), &[(VertexId(1), 1.0)]);
        let nbrs = line.neighbors(VertexId(5)).unwrap();
        assert_eq!(nbrs.as_ref(), &[(VertexId(4), 1.0), (VertexId(6), 1.0)]);
    }
}
