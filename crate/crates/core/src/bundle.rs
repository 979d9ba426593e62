//! Hermitian vector bundles over a graph: unitary connections,
//! potentials with their spectral positive/negative split, finitely
//! supported sections, the covariant derivative and its quadratic form,
//! and gauge transformations.
//!
//! Fibers are identified with `ℂ^ν` through fixed orthonormal frames, so
//! every fiber inner product is the standard Hermitian dot product and a
//! connection factor is a plain unitary `ν×ν` matrix. The rank `ν` is
//! constant across vertices.

use std::borrow::Cow;
use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{VertexId, WeightedGraph};
use crate::linalg::{self, CMatrix, CVector};
use crate::tol;

/// Bundle shape as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundleSpec {
    pub rank: usize,
}

impl BundleSpec {
    pub fn new(rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument(
                "bundle rank must be at least 1".into(),
            ));
        }
        Ok(Self { rank })
    }
}

/// Fiber inner product `(u, v)`: linear in `u`, conjugate-linear in `v`.
#[inline]
pub fn fiber_inner(u: &CVector, v: &CVector) -> Complex64 {
    v.dotc(u)
}

/// A unitary connection: one unitary `Φ_{x,y} : F_x → F_y` per oriented
/// edge, with the reverse orientation `Φ_{y,x} = Φ_{x,y}*` — so
/// `Φ_{y,x} = Φ_{x,y}^{-1}` holds exactly by construction.
#[derive(Debug, Clone)]
pub struct Connection {
    nu: usize,
    kind: ConnectionKind,
}

#[derive(Debug, Clone)]
enum ConnectionKind {
    /// Identity transport on every edge; never materialized, so it works
    /// on provider-backed graphs of any size.
    Trivial,
    /// Explicit matrices, both orientations stored.
    Explicit(BTreeMap<(VertexId, VertexId), CMatrix>),
}

impl Connection {
    /// The identity connection, usable with any graph.
    pub fn trivial(nu: usize) -> Self {
        Self {
            nu,
            kind: ConnectionKind::Trivial,
        }
    }

    /// Identity matrices materialized on every edge of `g`.
    pub fn identity_on(g: &WeightedGraph, nu: usize) -> Result<Self> {
        Self::from_edges(g, nu, std::iter::empty())
    }

    /// Builds a connection over the edges of `g` from explicit
    /// `(from, to, Φ_{from,to})` entries; edges of `g` not listed get the
    /// identity. Either orientation may be supplied — the reverse is the
    /// adjoint. Every matrix must be `ν×ν` and unitary within
    /// [`tol::UNITARY`].
    pub fn from_edges(
        g: &WeightedGraph,
        nu: usize,
        entries: impl IntoIterator<Item = (VertexId, VertexId, CMatrix)>,
    ) -> Result<Self> {
        if nu == 0 {
            return Err(Error::InvalidArgument(
                "bundle rank must be at least 1".into(),
            ));
        }
        let mut map: BTreeMap<(VertexId, VertexId), CMatrix> = BTreeMap::new();
        for (from, to, mat) in entries {
            if g.weight(from, to)? == 0.0 {
                return Err(Error::NotAnEdge { x: from, y: to });
            }
            if mat.nrows() != nu || mat.ncols() != nu {
                return Err(Error::InvalidArgument(format!(
                    "connection matrix on ({from}, {to}) is {}x{}, expected {nu}x{nu}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            linalg::require_unitary(&mat, tol::UNITARY, &format!("connection on ({from}, {to})"))?;
            if map.contains_key(&(from, to)) {
                return Err(Error::InvalidArgument(format!(
                    "connection on edge {{{from}, {to}}} listed more than once"
                )));
            }
            map.insert((to, from), mat.adjoint());
            map.insert((from, to), mat);
        }
        for e in g.edges() {
            if !map.contains_key(&(e.u, e.v)) {
                map.insert((e.u, e.v), linalg::identity(nu));
                map.insert((e.v, e.u), linalg::identity(nu));
            }
        }
        Ok(Self {
            nu,
            kind: ConnectionKind::Explicit(map),
        })
    }

    pub fn rank(&self) -> usize {
        self.nu
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.kind, ConnectionKind::Trivial)
    }

    /// The transport matrix `Φ_{from,to} : F_from → F_to`.
    ///
    /// Callers are responsible for only asking along edges; the trivial
    /// connection answers any pair with the identity, an explicit one
    /// errors on pairs it does not store.
    pub fn transport(&self, from: VertexId, to: VertexId) -> Result<Cow<'_, CMatrix>> {
        match &self.kind {
            ConnectionKind::Trivial => Ok(Cow::Owned(linalg::identity(self.nu))),
            ConnectionKind::Explicit(map) => map
                .get(&(from, to))
                .map(Cow::Borrowed)
                .ok_or(Error::NotAnEdge { x: from, y: to }),
        }
    }
}

/// A pointwise self-adjoint endomorphism field over a finite vertex set;
/// vertices without an explicit entry carry the zero matrix.
#[derive(Debug, Clone)]
pub struct Potential {
    n: usize,
    nu: usize,
    entries: BTreeMap<VertexId, CMatrix>,
}

impl Potential {
    pub fn zero(n: usize, nu: usize) -> Self {
        Self {
            n,
            nu,
            entries: BTreeMap::new(),
        }
    }

    /// Builds from explicit `(vertex, V(vertex))` entries. Every matrix
    /// must be `ν×ν` and Hermitian within [`tol::HERMITIAN`].
    pub fn from_entries(
        n: usize,
        nu: usize,
        entries: impl IntoIterator<Item = (VertexId, CMatrix)>,
    ) -> Result<Self> {
        if nu == 0 {
            return Err(Error::InvalidArgument(
                "bundle rank must be at least 1".into(),
            ));
        }
        let mut map = BTreeMap::new();
        for (x, mat) in entries {
            if x.idx() >= n {
                return Err(Error::UnknownVertex(x));
            }
            if mat.nrows() != nu || mat.ncols() != nu {
                return Err(Error::InvalidArgument(format!(
                    "potential matrix at {x} is {}x{}, expected {nu}x{nu}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            linalg::require_hermitian(&mat, tol::HERMITIAN, &format!("potential at {x}"))?;
            if map.insert(x, mat).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "potential at {x} listed more than once"
                )));
            }
        }
        Ok(Self { n, nu, entries: map })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.nu
    }

    /// The stored matrix, or `None` where the potential vanishes.
    pub fn entry(&self, x: VertexId) -> Option<&CMatrix> {
        self.entries.get(&x)
    }

    /// `V(x)`, materializing the zero matrix off the support.
    pub fn matrix(&self, x: VertexId) -> Result<Cow<'_, CMatrix>> {
        if x.idx() >= self.n {
            return Err(Error::UnknownVertex(x));
        }
        Ok(match self.entries.get(&x) {
            Some(m) => Cow::Borrowed(m),
            None => Cow::Owned(CMatrix::zeros(self.nu, self.nu)),
        })
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.keys().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Splits `V = V⁺ − V⁻` with both parts nonnegative, by spectral
/// decomposition at each vertex: `V⁺(x)` keeps the nonnegative part of
/// the spectrum and `V⁻(x) = V⁺(x) − V(x)`.
pub fn kato_decompose(v: &Potential) -> Result<(Potential, Potential)> {
    let mut plus = BTreeMap::new();
    let mut minus = BTreeMap::new();
    for (&x, mat) in &v.entries {
        linalg::require_hermitian(mat, tol::HERMITIAN, &format!("potential at {x}"))?;
        let eig = linalg::hermitian_eigen(mat)?;
        let mut p = CMatrix::zeros(v.nu, v.nu);
        for (j, &lambda) in eig.values.iter().enumerate() {
            if lambda > 0.0 {
                let col = eig.vectors.column(j);
                p += (col * col.adjoint()).scale(lambda);
            }
        }
        let m = &p - mat;
        plus.insert(x, p);
        minus.insert(x, m);
    }
    Ok((
        Potential {
            n: v.n,
            nu: v.nu,
            entries: plus,
        },
        Potential {
            n: v.n,
            nu: v.nu,
            entries: minus,
        },
    ))
}

/// A finitely supported section: `Ψ(x) ∈ ℂ^ν` on finitely many vertices,
/// zero elsewhere.
#[derive(Debug, Clone)]
pub struct Section {
    nu: usize,
    entries: BTreeMap<VertexId, CVector>,
}

impl Section {
    pub fn zero(nu: usize) -> Self {
        Self {
            nu,
            entries: BTreeMap::new(),
        }
    }

    /// The section that is the `component`-th frame vector at `x` and
    /// zero elsewhere.
    pub fn indicator(x: VertexId, component: usize, nu: usize) -> Result<Self> {
        if component >= nu {
            return Err(Error::InvalidArgument(format!(
                "component {component} out of range for rank {nu}"
            )));
        }
        let mut v = CVector::zeros(nu);
        v[component] = Complex64::new(1.0, 0.0);
        let mut s = Self::zero(nu);
        s.set(x, v)?;
        Ok(s)
    }

    pub fn set(&mut self, x: VertexId, value: CVector) -> Result<()> {
        if value.len() != self.nu {
            return Err(Error::InvalidArgument(format!(
                "section value at {x} has dimension {}, expected {}",
                value.len(),
                self.nu
            )));
        }
        self.entries.insert(x, value);
        Ok(())
    }

    /// The stored value, or `None` where the section vanishes.
    pub fn value(&self, x: VertexId) -> Option<&CVector> {
        self.entries.get(&x)
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.keys().copied()
    }

    pub fn rank(&self) -> usize {
        self.nu
    }

    /// `‖Ψ‖²_m = Σ_x |Ψ(x)|² m(x)`.
    pub fn norm_sq_m(&self, g: &WeightedGraph) -> Result<f64> {
        let mut total = 0.0;
        for (&x, v) in &self.entries {
            total += v.norm_squared() * g.measure(x)?;
        }
        Ok(total)
    }
}

/// A per-vertex unitary change of frame; vertices without an entry use
/// the identity.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    nu: usize,
    entries: BTreeMap<VertexId, CMatrix>,
}

impl GaugeTransform {
    pub fn identity(nu: usize) -> Self {
        Self {
            nu,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        nu: usize,
        entries: impl IntoIterator<Item = (VertexId, CMatrix)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (x, mat) in entries {
            if mat.nrows() != nu || mat.ncols() != nu {
                return Err(Error::InvalidArgument(format!(
                    "gauge factor at {x} is {}x{}, expected {nu}x{nu}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            linalg::require_unitary(&mat, tol::UNITARY, &format!("gauge factor at {x}"))?;
            map.insert(x, mat);
        }
        Ok(Self { nu, entries: map })
    }

    pub fn rank(&self) -> usize {
        self.nu
    }

    pub fn matrix(&self, x: VertexId) -> Cow<'_, CMatrix> {
        match self.entries.get(&x) {
            Some(m) => Cow::Borrowed(m),
            None => Cow::Owned(linalg::identity(self.nu)),
        }
    }
}

/// The covariant difference `∇_Φ Ψ(x,y) = Φ_{y,x} Ψ(y) − Ψ(x) ∈ F_x`
/// along the edge `(x,y)`.
pub fn covariant_derivative(
    g: &WeightedGraph,
    phi: &Connection,
    psi: &Section,
    x: VertexId,
    y: VertexId,
) -> Result<CVector> {
    if g.weight(x, y)? == 0.0 {
        return Err(Error::NotAnEdge { x, y });
    }
    covariant_difference(phi, psi, x, y)
}

/// Same as [`covariant_derivative`] but without the edge-membership
/// check; used by the form evaluation which already walks edges.
fn covariant_difference(
    phi: &Connection,
    psi: &Section,
    x: VertexId,
    y: VertexId,
) -> Result<CVector> {
    let nu = phi.rank();
    Ok(match (psi.value(y), psi.value(x)) {
        (None, None) => CVector::zeros(nu),
        (None, Some(px)) => -px,
        (Some(py), None) => phi.transport(y, x)?.as_ref() * py,
        (Some(py), Some(px)) => phi.transport(y, x)?.as_ref() * py - px,
    })
}

/// The sesquilinear form
/// `Q(Ψ₁,Ψ₂) = ½ Σ_{x∼y} b(x,y) (∇_Φ Ψ₁(x,y), ∇_Φ Ψ₂(x,y))_x
///            + Σ_x (V(x)Ψ₁(x)/ℏ, Ψ₂(x))_x m(x)`,
/// with the second sum dropped when `v` is absent. The sum runs over
/// ordered adjacent pairs, which the leading ½ compensates.
pub fn evaluate_form(
    g: &WeightedGraph,
    phi: &Connection,
    v: Option<&Potential>,
    hbar: f64,
    psi1: &Section,
    psi2: &Section,
) -> Result<Complex64> {
    check_hbar(hbar)?;
    let nu = phi.rank();
    if psi1.rank() != nu || psi2.rank() != nu {
        return Err(Error::InvalidArgument(format!(
            "section rank does not match connection rank {nu}"
        )));
    }
    if let Some(v) = v {
        if v.rank() != nu {
            return Err(Error::InvalidArgument(format!(
                "potential rank {} does not match connection rank {nu}",
                v.rank()
            )));
        }
    }

    // Directed edges incident to the joint support carry every nonzero
    // term; everything else differentiates zero against zero.
    let mut kinetic = Complex64::new(0.0, 0.0);
    let mut seen: std::collections::BTreeSet<(VertexId, VertexId)> = Default::default();
    for s in psi1.support().chain(psi2.support()) {
        for &(nbr, b) in g.neighbors(s)? {
            for (x, y) in [(s, nbr), (nbr, s)] {
                if seen.insert((x, y)) {
                    let d1 = covariant_difference(phi, psi1, x, y)?;
                    let d2 = covariant_difference(phi, psi2, x, y)?;
                    kinetic += fiber_inner(&d1, &d2).scale(b);
                }
            }
        }
    }
    let mut total = kinetic.scale(0.5);

    if let Some(v) = v {
        for x in psi1.support() {
            let (Some(p1), Some(p2)) = (psi1.value(x), psi2.value(x)) else {
                continue;
            };
            if let Some(vx) = v.entry(x) {
                let weight = g.measure(x)? / hbar;
                total += fiber_inner(&(vx * p1), p2).scale(weight);
            }
        }
    }
    Ok(total)
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hbar = {hbar} must be strictly positive and finite"
        )));
    }
    Ok(())
}

/// Conjugates connection and potential by a per-vertex unitary:
/// `Φ'_{x,y} = g(y) Φ_{x,y} g(x)*` and `V'(x) = g(x) V(x) g(x)*`. The
/// results pass the unitarity and Hermiticity validators again.
pub fn gauge_transform(
    g: &WeightedGraph,
    phi: &Connection,
    v: &Potential,
    gauge: &GaugeTransform,
) -> Result<(Connection, Potential)> {
    let nu = phi.rank();
    if gauge.rank() != nu || v.rank() != nu {
        return Err(Error::InvalidArgument(
            "gauge, connection, and potential ranks must agree".into(),
        ));
    }
    let mut conn_entries = Vec::with_capacity(g.edges().len());
    for e in g.edges() {
        let a = phi.transport(e.u, e.v)?;
        let gu = gauge.matrix(e.u);
        let gv = gauge.matrix(e.v);
        conn_entries.push((e.u, e.v, gv.as_ref() * a.as_ref() * gu.adjoint()));
    }
    let phi2 = Connection::from_edges(g, nu, conn_entries)?;

    let mut pot_entries = Vec::new();
    for x in v.support() {
        let gx = gauge.matrix(x);
        let vx = v.entry(x).expect("support entry");
        pot_entries.push((x, gx.as_ref() * vx * gx.adjoint()));
    }
    let v2 = Potential::from_entries(v.vertex_count(), nu, pot_entries)?;
    Ok((phi2, v2))
}
