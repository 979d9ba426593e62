//! The jump process of a weighted graph, stochastic parallel transport,
//! path-ordered exponentials, and the Monte Carlo estimator for the
//! semigroup kernel.
//!
//! The process holds at `x` for an exponential time with rate
//! `deg(x)/m(x)` and then jumps to `y` with probability proportional to
//! `b(x,y)` — the minimal right-continuous process of the graph
//! Dirichlet form. The kernel of `exp(-tH)` is estimated through
//!
//! ```text
//! exp(-tH)(x,y) = m(y)⁻¹ E^x[ 1{X_t = y} · A_t · U_t* ],
//! ```
//!
//! where `U_t` is the parallel transport along the path and `A_t` the
//! path-ordered exponential of the transported potential. Paths are
//! piecewise constant, so `A_t` is a finite product of Hermitian matrix
//! exponentials, one per sojourn.
//!
//! Every path is a pure function of `(seed, path index)`: path `i` draws
//! from an independent ChaCha stream with nonce `i`. Together with
//! order-independent accumulators this makes runs over any partition of
//! the index range merge to bit-identical estimates.

mod stats;

pub use stats::{ComplexFixedSum, FixedPointSum};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bundle::{Connection, Potential};
use crate::error::{Error, Result};
use crate::graph::{GraphProvider, VertexId};
use crate::linalg::{self, CMatrix};
use crate::tol;

/// One sampled trajectory on `[0, horizon]`.
///
/// `times[0] = 0` is the start, `times[k]` for `k ≥ 1` the `k`-th jump
/// time; `vertices[k]` is the position after the `k`-th jump. A path
/// with `exploded = true` hit the jump cap before the horizon and is
/// undefined beyond its last jump time.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    start: VertexId,
    horizon: f64,
    times: Vec<f64>,
    vertices: Vec<VertexId>,
    exploded: bool,
}

impl PathSample {
    /// Assembles a path from raw parts, checking the shape invariants:
    /// equal lengths, `times[0] = 0`, strictly increasing jump times
    /// within the horizon.
    pub fn from_parts(
        horizon: f64,
        times: Vec<f64>,
        vertices: Vec<VertexId>,
        exploded: bool,
    ) -> Result<Self> {
        if times.len() != vertices.len() || times.is_empty() {
            return Err(Error::InvalidArgument(
                "path needs equally many times and vertices, at least one each".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidArgument("path must start at time 0".into()));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} must be nonnegative and finite"
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(
                    "jump times must be strictly increasing".into(),
                ));
            }
        }
        if *times.last().unwrap() > horizon {
            return Err(Error::InvalidArgument(
                "jump times must not exceed the horizon".into(),
            ));
        }
        Ok(Self {
            start: vertices[0],
            horizon,
            times,
            vertices,
            exploded,
        })
    }

    pub fn start(&self) -> VertexId {
        self.start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Jump times, `times[0] = 0` included.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Visited vertices, start included.
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn exploded(&self) -> bool {
        self.exploded
    }

    /// `N(t)`: the number of jumps up to the horizon.
    pub fn jump_count(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Position at the horizon; meaningless for exploded paths.
    pub fn final_vertex(&self) -> VertexId {
        *self.vertices.last().unwrap()
    }

    /// Sojourn times per visited vertex; the last one runs to the
    /// horizon, so this is only defined for non-exploded paths.
    pub fn sojourns(&self) -> Result<Vec<f64>> {
        if self.exploded {
            return Err(Error::ExplodedPath);
        }
        let mut out = Vec::with_capacity(self.times.len());
        for w in self.times.windows(2) {
            out.push(w[1] - w[0]);
        }
        out.push(self.horizon - self.times.last().unwrap());
        Ok(out)
    }
}

/// Deterministic stream for one path index: ChaCha seeded by `seed`
/// with the index as the stream nonce, so any subset of indices replays
/// identically regardless of scheduling.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    loop {
        let u: f64 = rng.gen();
        let d = -(1.0 - u).ln() / rate;
        if d > 0.0 {
            return d;
        }
    }
}

fn draw_neighbor<R: Rng + ?Sized>(
    rng: &mut R,
    neighbors: &[(VertexId, f64)],
    degree: f64,
) -> VertexId {
    let target = rng.gen::<f64>() * degree;
    let mut acc = 0.0;
    for &(y, b) in neighbors {
        acc += b;
        if target < acc {
            return y;
        }
    }
    neighbors.last().expect("nonempty neighbor list").0
}

/// Samples one trajectory started at `start` over `[0, horizon]`.
///
/// Holding times are exponential with rate `deg(x)/m(x)`; the next
/// vertex is drawn proportionally to `b(x, ·)` in the provider's
/// neighbor order. A vertex of degree zero absorbs the path. If the
/// trajectory would need more than `max_jumps` jumps to reach the
/// horizon it is flagged `exploded` (never an error). Identical
/// `(seed, start, horizon)` yield identical paths.
pub fn sample_path<P, R>(
    provider: &P,
    start: VertexId,
    horizon: f64,
    rng: &mut R,
    max_jumps: usize,
) -> Result<PathSample>
where
    P: GraphProvider + ?Sized,
    R: Rng + ?Sized,
{
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} must be nonnegative and finite"
        )));
    }
    if max_jumps == 0 {
        return Err(Error::InvalidArgument(
            "max_jumps must be at least 1".into(),
        ));
    }
    provider.measure(start)?; // vertex must exist even for a zero horizon

    let mut times = vec![0.0];
    let mut vertices = vec![start];
    let mut exploded = false;

    if horizon > 0.0 {
        let mut now = 0.0;
        let mut current = start;
        loop {
            let neighbors = provider.neighbors(current)?;
            let degree: f64 = neighbors.iter().map(|&(_, b)| b).sum();
            if degree == 0.0 {
                break; // absorbing vertex holds forever
            }
            let measure = provider.measure(current)?;
            let rate = degree / measure;
            if !rate.is_finite() {
                return Err(Error::RateOverflow {
                    vertex: current,
                    degree,
                    measure,
                });
            }
            let wait = draw_exponential(rng, rate);
            if now + wait > horizon {
                break; // holds through the horizon
            }
            if vertices.len() - 1 == max_jumps {
                exploded = true;
                break;
            }
            now += wait;
            current = draw_neighbor(rng, &neighbors, degree);
            times.push(now);
            vertices.push(current);
        }
    }

    Ok(PathSample {
        start,
        horizon,
        times,
        vertices,
        exploded,
    })
}

/// The parallel transport `U = Φ_{x_{N-1},x_N} ⋯ Φ_{x_0,x_1}` along a
/// path; the identity when the path never jumps. Unitary within
/// [`tol::UNITARY`], which is enforced.
pub fn parallel_transport(path: &PathSample, phi: &Connection) -> Result<CMatrix> {
    if path.exploded() {
        return Err(Error::ExplodedPath);
    }
    let mut u = linalg::identity(phi.rank());
    for k in 0..path.jump_count() {
        u = phi.transport(path.vertices[k], path.vertices[k + 1])?.as_ref() * u;
    }
    let defect = linalg::unitary_defect(&u);
    if defect > tol::UNITARY {
        return Err(Error::Numeric(format!(
            "parallel transport drifted from unitarity (defect {defect:.3e})"
        )));
    }
    Ok(u)
}

/// The path-ordered exponential
/// `A = Π_k exp(-Δ_k · U_k* (V(x_k)/ℏ) U_k)` (earliest sojourn
/// leftmost), where `Δ_k` is the sojourn at `x_k` and `U_k` the
/// transport accumulated on arrival at `x_k`. Each factor exponentiates
/// a Hermitian matrix, so the product solves the time-ordered series of
/// the transported potential exactly on piecewise-constant paths. The
/// identity for a zero potential.
pub fn path_ordered_exponential(
    path: &PathSample,
    phi: &Connection,
    v: &Potential,
    hbar: f64,
) -> Result<CMatrix> {
    if path.exploded() {
        return Err(Error::ExplodedPath);
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hbar = {hbar} must be strictly positive and finite"
        )));
    }
    let nu = phi.rank();
    if v.rank() != nu {
        return Err(Error::InvalidArgument(format!(
            "potential rank {} does not match connection rank {nu}",
            v.rank()
        )));
    }
    let sojourns = path.sojourns()?;
    let mut transport_so_far = linalg::identity(nu);
    let mut a = linalg::identity(nu);
    for (k, &x) in path.vertices.iter().enumerate() {
        if x.idx() >= v.vertex_count() {
            return Err(Error::UnknownVertex(x));
        }
        if let Some(vx) = v.entry(x) {
            let w = transport_so_far.adjoint() * vx * &transport_so_far;
            a *= linalg::exp_hermitian(&w, -sojourns[k] / hbar)?;
        }
        if k + 1 < path.vertices.len() {
            transport_so_far =
                phi.transport(path.vertices[k], path.vertices[k + 1])?.as_ref() * transport_so_far;
        }
    }
    Ok(a)
}

/// A mergeable Monte Carlo estimate of one kernel block
/// `exp(-tH)(x,y)`.
///
/// Internally: exact sums of per-path matrices `1{X_t=y} A_t U_t*`, sums
/// of squared entry moduli, and path counts. Merging pools the sums, so
/// `merge` is associative, commutative, and bit-exactly consistent with
/// a single run over the union of the index ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimate {
    source: VertexId,
    target: VertexId,
    t: f64,
    hbar: f64,
    nu: usize,
    target_measure: f64,
    seed: u64,
    sums: Vec<ComplexFixedSum>,
    sq_sums: Vec<FixedPointSum>,
    paths_total: u64,
    paths_hit: u64,
    paths_exploded: u64,
}

impl KernelEstimate {
    /// An estimate over zero paths (the merge identity).
    pub fn empty(
        source: VertexId,
        target: VertexId,
        t: f64,
        hbar: f64,
        nu: usize,
        target_measure: f64,
        seed: u64,
    ) -> Self {
        Self {
            source,
            target,
            t,
            hbar,
            nu,
            target_measure,
            seed,
            sums: vec![ComplexFixedSum::zero(); nu * nu],
            sq_sums: vec![FixedPointSum::zero(); nu * nu],
            paths_total: 0,
            paths_hit: 0,
            paths_exploded: 0,
        }
    }

    fn record_hit(&mut self, z: &CMatrix) -> Result<()> {
        self.paths_total += 1;
        self.paths_hit += 1;
        for i in 0..self.nu {
            for j in 0..self.nu {
                let e = z[(i, j)];
                self.sums[i * self.nu + j].add(e)?;
                self.sq_sums[i * self.nu + j].add(e.norm_sqr())?;
            }
        }
        Ok(())
    }

    fn record_miss(&mut self, exploded: bool) {
        self.paths_total += 1;
        if exploded {
            self.paths_exploded += 1;
        }
    }

    pub fn source(&self) -> VertexId {
        self.source
    }

    pub fn target(&self) -> VertexId {
        self.target
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn rank(&self) -> usize {
        self.nu
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths_total(&self) -> u64 {
        self.paths_total
    }

    pub fn paths_hit(&self) -> u64 {
        self.paths_hit
    }

    pub fn paths_exploded(&self) -> u64 {
        self.paths_exploded
    }

    /// The estimated kernel block: pooled sum over `paths_total · m(y)`.
    /// Zero when no paths have been recorded.
    pub fn mean(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.nu, self.nu);
        if self.paths_total == 0 {
            return out;
        }
        let scale = 1.0 / (self.paths_total as f64 * self.target_measure);
        for i in 0..self.nu {
            for j in 0..self.nu {
                out[(i, j)] = self.sums[i * self.nu + j].value().scale(scale);
            }
        }
        out
    }

    /// Entrywise standard error of the mean (combined real and
    /// imaginary scatter). Zero with fewer than two paths.
    pub fn std_error(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nu, self.nu);
        let n = self.paths_total as f64;
        if self.paths_total < 2 {
            return out;
        }
        for i in 0..self.nu {
            for j in 0..self.nu {
                let sum = self.sums[i * self.nu + j].value();
                let sq = self.sq_sums[i * self.nu + j].value();
                let var = ((sq - sum.norm_sqr() / n) / (n - 1.0)).max(0.0);
                out[(i, j)] = (var / n).sqrt() / self.target_measure;
            }
        }
        out
    }

    /// Pools two estimates of the same block. The caller guarantees the
    /// underlying path-index ranges are disjoint; the targets must
    /// match exactly.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.source != other.source
            || self.target != other.target
            || self.t != other.t
            || self.hbar != other.hbar
            || self.nu != other.nu
            || self.target_measure != other.target_measure
            || self.seed != other.seed
        {
            return Err(Error::MergeMismatch(format!(
                "({}, {}, t={}, hbar={}, rank={}, seed={}) vs ({}, {}, t={}, hbar={}, rank={}, seed={})",
                self.source, self.target, self.t, self.hbar, self.nu, self.seed,
                other.source, other.target, other.t, other.hbar, other.nu, other.seed,
            )));
        }
        let mut merged = self.clone();
        for (a, b) in merged.sums.iter_mut().zip(&other.sums) {
            a.merge(b)?;
        }
        for (a, b) in merged.sq_sums.iter_mut().zip(&other.sq_sums) {
            a.merge(b)?;
        }
        merged.paths_total += other.paths_total;
        merged.paths_hit += other.paths_hit;
        merged.paths_exploded += other.paths_exploded;
        Ok(merged)
    }
}

/// Estimates `exp(-tH)(x,y)` from `paths` trajectories started at `x`,
/// using path indices `0..paths` under `seed`.
#[allow(clippy::too_many_arguments)]
pub fn fk_kernel_estimate<P: GraphProvider + ?Sized>(
    provider: &P,
    phi: &Connection,
    v: &Potential,
    hbar: f64,
    x: VertexId,
    y: VertexId,
    t: f64,
    paths: u64,
    seed: u64,
    max_jumps: usize,
) -> Result<KernelEstimate> {
    fk_kernel_estimate_range(provider, phi, v, hbar, x, y, t, 0..paths, seed, max_jumps)
}

/// Same as [`fk_kernel_estimate`] over an explicit path-index range, so
/// a run can be split across workers or sessions and merged later.
/// Exploded paths contribute zero and are counted, never fatal.
#[allow(clippy::too_many_arguments)]
pub fn fk_kernel_estimate_range<P: GraphProvider + ?Sized>(
    provider: &P,
    phi: &Connection,
    v: &Potential,
    hbar: f64,
    x: VertexId,
    y: VertexId,
    t: f64,
    indices: std::ops::Range<u64>,
    seed: u64,
    max_jumps: usize,
) -> Result<KernelEstimate> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time t = {t} must be strictly positive and finite"
        )));
    }
    let nu = phi.rank();
    if v.rank() != nu {
        return Err(Error::InvalidArgument(format!(
            "potential rank {} does not match connection rank {nu}",
            v.rank()
        )));
    }
    provider.measure(x)?;
    let target_measure = provider.measure(y)?;
    let empty = || KernelEstimate::empty(x, y, t, hbar, nu, target_measure, seed);

    indices
        .into_par_iter()
        .try_fold(empty, |mut acc, index| {
            accumulate_path(
                &mut acc, provider, phi, v, hbar, x, y, t, seed, index, max_jumps,
            )?;
            Ok(acc)
        })
        .try_reduce(empty, |a, b| a.merge(&b))
}

#[allow(clippy::too_many_arguments)]
fn accumulate_path<P: GraphProvider + ?Sized>(
    acc: &mut KernelEstimate,
    provider: &P,
    phi: &Connection,
    v: &Potential,
    hbar: f64,
    x: VertexId,
    y: VertexId,
    t: f64,
    seed: u64,
    index: u64,
    max_jumps: usize,
) -> Result<()> {
    let mut rng = path_rng(seed, index);
    let path = sample_path(provider, x, t, &mut rng, max_jumps)?;
    if path.exploded() || path.final_vertex() != y {
        acc.record_miss(path.exploded());
        return Ok(());
    }
    let transport = parallel_transport(&path, phi)?;
    let ordered_exp = path_ordered_exponential(&path, phi, v, hbar)?;
    acc.record_hit(&(ordered_exp * transport.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::instances;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_vertex() -> WeightedGraph {
        WeightedGraph::build(vec![1.0, 1.0], &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn absorbing_vertex_never_jumps() {
        let g = WeightedGraph::build(vec![1.0, 1.0, 1.0], &[(0, 1, 1.0)]).unwrap();
        let mut rng = path_rng(1, 0);
        let path = sample_path(&g, VertexId(2), 5.0, &mut rng, 100).unwrap();
        assert_eq!(path.jump_count(), 0);
        assert!(!path.exploded());
        assert_eq!(path.final_vertex(), VertexId(2));
        assert_eq!(path.sojourns().unwrap(), vec![5.0]);
    }

    #[test]
    fn zero_horizon_path_is_a_point() {
        let g = two_vertex();
        let mut rng = path_rng(1, 0);
        let path = sample_path(&g, VertexId(0), 0.0, &mut rng, 100).unwrap();
        assert_eq!(path.jump_count(), 0);
        assert_eq!(path.times(), &[0.0]);
    }

    #[test]
    fn holding_time_law_matches_exponential() {
        // two vertices, b = 1, m ≡ 1: rate 1, so P(N(1) = 0) = e^{-1}
        let g = two_vertex();
        let total = 100_000u64;
        let mut stay = 0u64;
        for i in 0..total {
            let mut rng = path_rng(7, i);
            let path = sample_path(&g, VertexId(0), 1.0, &mut rng, 1_000).unwrap();
            if path.jump_count() == 0 {
                stay += 1;
            }
        }
        let p = (-1.0f64).exp();
        let freq = stay as f64 / total as f64;
        let se = (p * (1.0 - p) / total as f64).sqrt();
        assert!(
            (freq - p).abs() <= 4.0 * se,
            "empirical {freq} vs e^-1 {p} (4se = {})",
            4.0 * se
        );
    }

    #[test]
    fn sampled_paths_respect_invariants() {
        let p = instances::n6_mixed();
        for i in 0..500 {
            let mut rng = path_rng(13, i);
            let path = sample_path(&p.graph, VertexId(0), 2.0, &mut rng, 10_000).unwrap();
            assert!(!path.exploded());
            for w in path.times().windows(2) {
                assert!(w[1] > w[0]);
            }
            assert!(*path.times().last().unwrap() <= 2.0);
            for pair in path.vertices().windows(2) {
                assert!(p.graph.weight(pair[0], pair[1]).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn identical_seeds_replay_identical_paths() {
        let p = instances::n6_mixed();
        for i in [0u64, 5, 77] {
            let a = sample_path(&p.graph, VertexId(1), 1.5, &mut path_rng(3, i), 1_000).unwrap();
            let b = sample_path(&p.graph, VertexId(1), 1.5, &mut path_rng(3, i), 1_000).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn jump_cap_flags_explosion_without_error() {
        // rate 100: essentially always more than 2 jumps by t = 1
        let g = WeightedGraph::build(vec![0.01, 0.01], &[(0, 1, 1.0)]).unwrap();
        let mut rng = path_rng(5, 0);
        let path = sample_path(&g, VertexId(0), 1.0, &mut rng, 2).unwrap();
        assert!(path.exploded());
        assert_eq!(path.jump_count(), 2);
        assert!(matches!(path.sojourns(), Err(Error::ExplodedPath)));
        assert!(matches!(
            parallel_transport(&path, &Connection::trivial(1)),
            Err(Error::ExplodedPath)
        ));
    }

    #[test]
    fn rate_overflow_is_reported() {
        let g = WeightedGraph::build(vec![1e-300, 1e-300], &[(0, 1, 1e100)]).unwrap();
        let mut rng = path_rng(1, 0);
        assert!(matches!(
            sample_path(&g, VertexId(0), 1.0, &mut rng, 10),
            Err(Error::RateOverflow { .. })
        ));
    }

    #[test]
    fn transport_of_still_path_is_identity() {
        let path = PathSample::from_parts(1.0, vec![0.0], vec![VertexId(0)], false).unwrap();
        let u = parallel_transport(&path, &Connection::trivial(3)).unwrap();
        assert!(linalg::max_abs(&(u - linalg::identity(3))) < 1e-15);
    }

    #[test]
    fn back_and_forth_transport_cancels() {
        let g = two_vertex();
        let theta = 0.8;
        let phi = Connection::from_edges(
            &g,
            1,
            [(VertexId(0), VertexId(1), CMatrix::from_element(1, 1, Complex64::from_polar(1.0, theta)))],
        )
        .unwrap();
        let path = PathSample::from_parts(
            1.0,
            vec![0.0, 0.3, 0.7],
            vec![VertexId(0), VertexId(1), VertexId(0)],
            false,
        )
        .unwrap();
        let u = parallel_transport(&path, &phi).unwrap();
        assert!((u[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn triangle_loop_accumulates_flux() {
        let theta = 1.3;
        let p = instances::triangle_flux(theta);
        let path = PathSample::from_parts(
            1.0,
            vec![0.0, 0.1, 0.2, 0.3],
            vec![VertexId(0), VertexId(1), VertexId(2), VertexId(0)],
            false,
        )
        .unwrap();
        let u = parallel_transport(&path, &p.connection).unwrap();
        let expected = Complex64::from_polar(1.0, theta);
        assert!((u[(0, 0)] - expected).norm() < 1e-13);
    }

    #[test]
    fn ordered_exponential_identity_for_zero_potential() {
        let p = instances::n6_mixed();
        let v0 = Potential::zero(6, 2);
        for i in 0..50 {
            let mut rng = path_rng(21, i);
            let path = sample_path(&p.graph, VertexId(0), 1.0, &mut rng, 10_000).unwrap();
            let a = path_ordered_exponential(&path, &p.connection, &v0, 1.0).unwrap();
            // exact identity: zero potential contributes no factors at all
            assert_eq!(a, linalg::identity(2));
        }
    }

    #[test]
    fn ordered_exponential_single_sojourn_scalar() {
        let g = WeightedGraph::build(vec![1.0], &[]).unwrap();
        let vval = 1.7;
        let v = Potential::from_entries(1, 1, [(VertexId(0), CMatrix::from_element(1, 1, c(vval, 0.0)))])
            .unwrap();
        let mut rng = path_rng(2, 0);
        let t = 0.9;
        let path = sample_path(&g, VertexId(0), t, &mut rng, 10).unwrap();
        let a = path_ordered_exponential(&path, &Connection::trivial(1), &v, 1.0).unwrap();
        assert!((a[(0, 0)].re - (-t * vval).exp()).abs() < 1e-14);
    }

    #[test]
    fn ordered_exponential_commutative_case_reduces_to_plain_exponential() {
        // rank 1 factors commute: A = exp(-(1/ℏ) Σ_k Δ_k V(x_k))
        let p = instances::triangle_flux(0.4);
        let v = Potential::from_entries(
            3,
            1,
            [
                (VertexId(0), CMatrix::from_element(1, 1, c(0.5, 0.0))),
                (VertexId(1), CMatrix::from_element(1, 1, c(-1.1, 0.0))),
                (VertexId(2), CMatrix::from_element(1, 1, c(2.0, 0.0))),
            ],
        )
        .unwrap();
        let vals = [0.5, -1.1, 2.0];
        let hbar = 0.7;
        for i in 0..40 {
            let mut rng = path_rng(31, i);
            let path = sample_path(&p.graph, VertexId(0), 0.8, &mut rng, 10_000).unwrap();
            let a = path_ordered_exponential(&path, &p.connection, &v, hbar).unwrap();
            let exponent: f64 = path
                .sojourns()
                .unwrap()
                .iter()
                .zip(path.vertices())
                .map(|(dt, x)| dt * vals[x.idx()])
                .sum();
            let expected = (-exponent / hbar).exp();
            assert!((a[(0, 0)].re - expected).abs() < 1e-12);
            assert!(a[(0, 0)].im.abs() < 1e-14);
        }
    }

    #[test]
    fn splitting_a_sojourn_leaves_the_exponential_unchanged() {
        // same vertex visited over [0, Δ) vs [0, a) ∪ [a, Δ): identical A
        let p = instances::n6_mixed();
        let path = PathSample::from_parts(
            1.0,
            vec![0.0, 0.4],
            vec![VertexId(0), VertexId(1)],
            false,
        )
        .unwrap();
        let a_whole = path_ordered_exponential(&path, &p.connection, &p.potential, 1.0).unwrap();

        // manual split of the first sojourn at 0.15
        let v0 = p.potential.entry(VertexId(0)).unwrap();
        let v1 = p.potential.entry(VertexId(1)).unwrap();
        let u01 = p
            .connection
            .transport(VertexId(0), VertexId(1))
            .unwrap()
            .into_owned();
        let f0a = linalg::exp_hermitian(v0, -0.15).unwrap();
        let f0b = linalg::exp_hermitian(v0, -(0.4 - 0.15)).unwrap();
        let w1 = u01.adjoint() * v1 * &u01;
        let f1 = linalg::exp_hermitian(&w1, -(1.0 - 0.4)).unwrap();
        let a_split = f0a * f0b * f1;
        assert!(linalg::max_abs(&(a_whole - a_split)) < tol::TIGHT);
    }

    #[test]
    fn transported_potential_norm_bound() {
        let p = instances::n6_mixed();
        let (_, vminus) = crate::bundle::kato_decompose(&p.potential).unwrap();
        let worst_negative: f64 = p
            .graph
            .vertices()
            .map(|x| {
                vminus
                    .entry(x)
                    .map(|m| linalg::operator_norm(m))
                    .unwrap_or(0.0)
            })
            .fold(0.0, f64::max);
        let t = 1.0;
        for i in 0..200 {
            let mut rng = path_rng(41, i);
            let path = sample_path(&p.graph, VertexId(2), t, &mut rng, 10_000).unwrap();
            let a = path_ordered_exponential(&path, &p.connection, &p.potential, 1.0).unwrap();
            let bound = (t * worst_negative).exp();
            assert!(linalg::operator_norm(&a) <= bound * (1.0 + 1e-10));
        }
        // nonnegative potential: contraction
        let (vplus, _) = crate::bundle::kato_decompose(&p.potential).unwrap();
        for i in 0..200 {
            let mut rng = path_rng(43, i);
            let path = sample_path(&p.graph, VertexId(2), t, &mut rng, 10_000).unwrap();
            let a = path_ordered_exponential(&path, &p.connection, &vplus, 1.0).unwrap();
            assert!(linalg::operator_norm(&a) <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn fk_two_vertex_matches_closed_form() {
        let g = two_vertex();
        let phi = Connection::trivial(1);
        let v = Potential::zero(2, 1);
        let est = fk_kernel_estimate(
            &g,
            &phi,
            &v,
            1.0,
            VertexId(0),
            VertexId(0),
            1.0,
            200_000,
            2024,
            1_000_000,
        )
        .unwrap();
        let exact = (1.0 + (-2.0f64).exp()) / 2.0;
        let mean = est.mean()[(0, 0)].re;
        let se = est.std_error()[(0, 0)];
        assert!(
            (mean - exact).abs() <= 4.0 * se,
            "estimate {mean} vs exact {exact}, 4se = {}",
            4.0 * se
        );
        assert_eq!(est.paths_exploded(), 0);
        assert!(est.paths_hit() > 0);
    }

    #[test]
    fn fk_short_time_distant_targets_vanish() {
        // distance-2 pair needs two jumps; at t = 1e-3 that is ~1e-6 rare
        let g = WeightedGraph::build(vec![1.0, 1.0, 1.0], &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let est = fk_kernel_estimate(
            &g,
            &Connection::trivial(1),
            &Potential::zero(3, 1),
            1.0,
            VertexId(0),
            VertexId(2),
            1e-3,
            50_000,
            11,
            1_000_000,
        )
        .unwrap();
        let mean = est.mean()[(0, 0)].norm();
        let se = est.std_error()[(0, 0)];
        assert!(mean <= 4.0 * se + 1e-15, "mean {mean}, se {se}");
    }

    #[test]
    fn fk_rank2_instance_matches_exact_kernel() {
        let p = instances::n6_mixed();
        let op = crate::operator::assemble(&p.graph, &p.connection, Some(&p.potential), 1.0).unwrap();
        let (x, y) = (VertexId(0), VertexId(3));
        let t = 0.5;
        let exact = op.kernel(t).unwrap().block(x, y).unwrap();
        let est = fk_kernel_estimate(
            &p.graph,
            &p.connection,
            &p.potential,
            1.0,
            x,
            y,
            t,
            50_000,
            97,
            1_000_000,
        )
        .unwrap();
        let mean = est.mean();
        let se = est.std_error();
        for i in 0..2 {
            for j in 0..2 {
                let diff = (mean[(i, j)] - exact[(i, j)]).norm();
                assert!(
                    diff <= 4.0 * se[(i, j)],
                    "entry ({i},{j}): diff {diff}, 4se {}",
                    4.0 * se[(i, j)]
                );
            }
        }
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let g = two_vertex();
        let args = (VertexId(0), VertexId(1), 0.8, 42u64);
        let run = |range: std::ops::Range<u64>| {
            fk_kernel_estimate_range(
                &g,
                &Connection::trivial(1),
                &Potential::zero(2, 1),
                1.0,
                args.0,
                args.1,
                args.2,
                range,
                args.3,
                1_000_000,
            )
            .unwrap()
        };
        let a = run(0..500);
        let b = run(500..1_000);
        let empty = KernelEstimate::empty(args.0, args.1, args.2, 1.0, 1, 1.0, args.3);
        assert_eq!(a.merge(&empty).unwrap(), a);
        assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
    }

    #[test]
    fn merged_halves_equal_full_run_bit_for_bit() {
        let p = instances::n6_mixed();
        let run = |range: std::ops::Range<u64>| {
            fk_kernel_estimate_range(
                &p.graph,
                &p.connection,
                &p.potential,
                1.0,
                VertexId(0),
                VertexId(1),
                0.5,
                range,
                7,
                1_000_000,
            )
            .unwrap()
        };
        let full = run(0..20_000);
        let first = run(0..10_000);
        let second = run(10_000..20_000);
        let merged = first.merge(&second).unwrap();
        assert_eq!(full, merged);
        assert_eq!(full.mean(), merged.mean());
        assert_eq!(full.std_error(), merged.std_error());
    }

    #[test]
    fn merge_rejects_mismatched_targets() {
        let a = KernelEstimate::empty(VertexId(0), VertexId(1), 1.0, 1.0, 1, 1.0, 5);
        let b = KernelEstimate::empty(VertexId(0), VertexId(2), 1.0, 1.0, 1, 1.0, 5);
        assert!(matches!(a.merge(&b), Err(Error::MergeMismatch(_))));
        let c = KernelEstimate::empty(VertexId(0), VertexId(1), 2.0, 1.0, 1, 1.0, 5);
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn std_error_shrinks_like_inverse_root_paths() {
        let p = instances::n6_mixed();
        let run = |paths: u64| {
            fk_kernel_estimate(
                &p.graph,
                &p.connection,
                &p.potential,
                1.0,
                VertexId(0),
                VertexId(0),
                0.5,
                paths,
                3,
                1_000_000,
            )
            .unwrap()
        };
        let small = run(8_000);
        let large = run(32_000);
        let agg = |e: &KernelEstimate| {
            let se = e.std_error();
            se.iter().map(|s| s * s).sum::<f64>().sqrt()
        };
        let ratio = agg(&small) / agg(&large);
        assert!(
            (2.0 / 1.5..=2.0 * 1.5).contains(&ratio),
            "se ratio {ratio} not within 1.5x of 2"
        );
    }

    #[test]
    fn estimates_are_deterministic() {
        let p = instances::n6_mixed();
        let run = || {
            fk_kernel_estimate(
                &p.graph,
                &p.connection,
                &p.potential,
                1.0,
                VertexId(2),
                VertexId(4),
                0.5,
                5_000,
                123,
                1_000_000,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sampling_works_on_an_unmaterialized_graph() {
        let line = instances::HalfLine::unit();
        let mut rng = path_rng(17, 0);
        let path = sample_path(&line, VertexId(0), 3.0, &mut rng, 100_000).unwrap();
        assert!(!path.exploded());
        for pair in path.vertices().windows(2) {
            let diff = pair[0].0.abs_diff(pair[1].0);
            assert_eq!(diff, 1);
        }
    }
}
