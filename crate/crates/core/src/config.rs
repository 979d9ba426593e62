//! Problem instances on disk.
//!
//! A problem is one TOML file:
//!
//! ```toml
//! hbar = 1.0            # optional, defaults to 1
//!
//! [bundle]
//! rank = 2              # optional, defaults to 1
//!
//! [[graph.vertices]]
//! id = "a"
//! m = 1.0
//!
//! [[graph.edges]]
//! u = "a"
//! v = "b"
//! b = 1.0
//!
//! [[connection]]        # optional; unlisted edges carry the identity
//! u = "a"
//! v = "b"
//! matrix = [[[0.0, 1.0]]]              # rank×rank, entries as [re, im]
//!
//! [[potential]]         # optional; unlisted vertices carry zero
//! vertex = "a"
//! matrix = [[[2.0, 0.0]]]
//!
//! [[kato.w]]            # optional; defaults to w ≡ 1 everywhere
//! vertex = "a"
//! value = [1.0, 0.0]
//! ```
//!
//! Vertices are named by strings in files; loading maps them to dense
//! indices in listing order and keeps the dictionary for reports. A
//! connection entry gives `Φ_{u,v}` for the listed orientation (either
//! orientation is accepted; the reverse is the adjoint). Parse failures
//! (malformed TOML, wrong shapes of tables) are usage errors; data that
//! parses but breaks an invariant comes back as a full
//! [`ValidationReport`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{Connection, Potential};
use crate::graph::{GraphData, VertexId, WeightedGraph};
use crate::linalg::{self, CMatrix};
use crate::tol;
use crate::validate::{ValidationReport, Violation};

/// Dictionary between file-level vertex names and dense indices.
#[derive(Debug, Clone, Default)]
pub struct VertexNames {
    names: Vec<String>,
    index: HashMap<String, VertexId>,
}

impl VertexNames {
    pub fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), VertexId(i as u32)))
            .collect();
        Self { names, index }
    }

    /// Numeric names `"0", "1", …` for instances built in code.
    pub fn numeric(n: usize) -> Self {
        Self::from_names((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, x: VertexId) -> Option<&str> {
        self.names.get(x.idx()).map(String::as_str)
    }

    pub fn resolve(&self, name: &str) -> Option<VertexId> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A fully validated problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: WeightedGraph,
    pub connection: Connection,
    pub potential: Potential,
    pub hbar: f64,
    pub names: VertexNames,
    /// Scalar weight for the Kato functional; defaults to 1 everywhere.
    pub kato_weight: Vec<Complex64>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid problem data:\n{0}")]
    Invalid(ValidationReport),
}

// ---- raw serde shapes ------------------------------------------------

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    hbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bundle: Option<RawBundle>,
    graph: RawGraph,
    #[serde(skip_serializing_if = "Option::is_none")]
    connection: Option<Vec<RawConnectionEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    potential: Option<Vec<RawPotentialEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kato: Option<RawKato>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawBundle {
    rank: usize,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    vertices: Vec<RawVertex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<RawEdge>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawVertex {
    id: String,
    m: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    u: String,
    v: String,
    b: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConnectionEntry {
    u: String,
    v: String,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPotentialEntry {
    vertex: String,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawKato {
    w: Vec<RawKatoEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawKatoEntry {
    vertex: String,
    value: [f64; 2],
}

// ---- loading ---------------------------------------------------------

pub fn load_problem(path: &Path) -> Result<Problem, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem(&text)
}

pub fn parse_problem(text: &str) -> Result<Problem, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut report = ValidationReport::new();

    let rank = raw.bundle.as_ref().map_or(1, |b| b.rank);
    if rank == 0 {
        report.push(Violation::InvalidRank(0));
    }
    let hbar = raw.hbar.unwrap_or(1.0);
    if !(hbar.is_finite() && hbar > 0.0) {
        report.push(Violation::InvalidScalar {
            name: "hbar".into(),
            value: hbar,
        });
    }

    // vertex dictionary
    let mut names = Vec::new();
    let mut index: HashMap<String, VertexId> = HashMap::new();
    for v in &raw.graph.vertices {
        if index.contains_key(&v.id) {
            report.push(Violation::DuplicateVertexName(v.id.clone()));
            continue;
        }
        index.insert(v.id.clone(), VertexId(names.len() as u32));
        names.push(v.id.clone());
    }
    let names = VertexNames::from_names(names);

    // graph records; edges with unknown endpoints are reported here and
    // withheld from structural validation
    let mut data = GraphData::new();
    for v in &raw.graph.vertices {
        if names.resolve(&v.id).map(|id| id.idx() == data.vertices.len()) == Some(true) {
            data.add_vertex(v.m);
        }
    }
    for e in raw.graph.edges.as_deref().unwrap_or_default() {
        match (names.resolve(&e.u), names.resolve(&e.v)) {
            (Some(u), Some(v)) => data.add_edge(u, v, e.b),
            _ => {
                let missing = if names.resolve(&e.u).is_none() { &e.u } else { &e.v };
                report.push(Violation::UnknownVertexName {
                    name: missing.clone(),
                    context: format!("edge ({}, {})", e.u, e.v),
                });
            }
        }
    }
    report.extend(crate::graph::validate_graph(&data));

    // connection entries
    let mut conn_entries = Vec::new();
    let mut seen_pairs = std::collections::BTreeSet::new();
    for entry in raw.connection.as_deref().unwrap_or_default() {
        let (Some(u), Some(v)) = (names.resolve(&entry.u), names.resolve(&entry.v)) else {
            let missing = if names.resolve(&entry.u).is_none() {
                &entry.u
            } else {
                &entry.v
            };
            report.push(Violation::UnknownVertexName {
                name: missing.clone(),
                context: format!("connection entry ({}, {})", entry.u, entry.v),
            });
            continue;
        };
        let Some(mat) = parse_matrix(&entry.matrix, rank) else {
            report.push(Violation::BadMatrixShape {
                context: format!("connection entry ({}, {})", entry.u, entry.v),
                rank,
            });
            continue;
        };
        if !seen_pairs.insert((u.min(v), u.max(v))) {
            report.push(Violation::DuplicateConnectionEntry {
                u: entry.u.clone(),
                v: entry.v.clone(),
            });
            continue;
        }
        let is_edge = data
            .edges
            .iter()
            .any(|e| (e.u, e.v) == (u, v) || (e.u, e.v) == (v, u));
        if !is_edge {
            report.push(Violation::ConnectionOnNonEdge {
                u: entry.u.clone(),
                v: entry.v.clone(),
            });
            continue;
        }
        let defect = linalg::unitary_defect(&mat);
        if defect > tol::UNITARY {
            report.push(Violation::NotUnitary {
                u: entry.u.clone(),
                v: entry.v.clone(),
                defect,
            });
            continue;
        }
        conn_entries.push((u, v, mat));
    }

    // potential entries
    let mut pot_entries = Vec::new();
    let mut seen_vertices = std::collections::BTreeSet::new();
    for entry in raw.potential.as_deref().unwrap_or_default() {
        let Some(x) = names.resolve(&entry.vertex) else {
            report.push(Violation::UnknownVertexName {
                name: entry.vertex.clone(),
                context: "potential entry".into(),
            });
            continue;
        };
        let Some(mat) = parse_matrix(&entry.matrix, rank) else {
            report.push(Violation::BadMatrixShape {
                context: format!("potential entry at {}", entry.vertex),
                rank,
            });
            continue;
        };
        if !seen_vertices.insert(x) {
            report.push(Violation::DuplicatePotentialEntry {
                vertex: entry.vertex.clone(),
            });
            continue;
        }
        let defect = linalg::hermitian_defect(&mat);
        if defect > tol::HERMITIAN {
            report.push(Violation::NotHermitian {
                vertex: entry.vertex.clone(),
                defect,
            });
            continue;
        }
        pot_entries.push((x, mat));
    }

    // kato weight: defaults to 1 everywhere; a [kato] section replaces it
    // wholesale (unlisted vertices get 0)
    let mut kato_weight = vec![Complex64::new(1.0, 0.0); names.len()];
    if let Some(kato) = &raw.kato {
        kato_weight = vec![Complex64::new(0.0, 0.0); names.len()];
        for entry in &kato.w {
            match names.resolve(&entry.vertex) {
                Some(x) => kato_weight[x.idx()] = Complex64::new(entry.value[0], entry.value[1]),
                None => report.push(Violation::UnknownVertexName {
                    name: entry.vertex.clone(),
                    context: "kato weight entry".into(),
                }),
            }
        }
    }

    if !report.is_empty() {
        return Err(ConfigError::Invalid(report));
    }

    // Every check above passed, so the constructors cannot reject.
    let graph = WeightedGraph::from_data(&data)
        .map_err(|e| ConfigError::Parse(format!("internal: {e}")))?;
    let connection = Connection::from_edges(&graph, rank, conn_entries)
        .map_err(|e| ConfigError::Parse(format!("internal: {e}")))?;
    let potential = Potential::from_entries(graph.vertex_count(), rank, pot_entries)
        .map_err(|e| ConfigError::Parse(format!("internal: {e}")))?;

    Ok(Problem {
        graph,
        connection,
        potential,
        hbar,
        names,
        kato_weight,
    })
}

fn parse_matrix(rows: &[Vec<[f64; 2]>], rank: usize) -> Option<CMatrix> {
    if rows.len() != rank || rows.iter().any(|r| r.len() != rank) {
        return None;
    }
    let mut m = CMatrix::zeros(rank, rank);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Some(m)
}

// ---- writing ---------------------------------------------------------

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Serializes a problem back to the TOML format accepted by
/// [`parse_problem`]. Identity connection entries and zero potential
/// entries are omitted.
pub fn problem_to_toml(p: &Problem) -> String {
    let rank = p.connection.rank();
    let vertices = p
        .graph
        .vertices()
        .map(|x| RawVertex {
            id: p.names.name(x).unwrap_or_default().to_string(),
            m: p.graph.measure(x).expect("valid vertex"),
        })
        .collect();
    let edges: Vec<RawEdge> = p
        .graph
        .edges()
        .iter()
        .map(|e| RawEdge {
            u: p.names.name(e.u).unwrap_or_default().to_string(),
            v: p.names.name(e.v).unwrap_or_default().to_string(),
            b: e.b,
        })
        .collect();
    let mut connection = Vec::new();
    for e in p.graph.edges() {
        let mat = p.connection.transport(e.u, e.v).expect("edge transport");
        if linalg::max_abs(&(mat.as_ref() - linalg::identity(rank))) == 0.0 {
            continue;
        }
        connection.push(RawConnectionEntry {
            u: p.names.name(e.u).unwrap_or_default().to_string(),
            v: p.names.name(e.v).unwrap_or_default().to_string(),
            matrix: matrix_to_rows(&mat),
        });
    }
    let potential: Vec<RawPotentialEntry> = p
        .potential
        .support()
        .map(|x| RawPotentialEntry {
            vertex: p.names.name(x).unwrap_or_default().to_string(),
            matrix: matrix_to_rows(p.potential.entry(x).expect("support entry")),
        })
        .collect();
    let all_ones = p
        .kato_weight
        .iter()
        .all(|w| *w == Complex64::new(1.0, 0.0));
    let kato = (!all_ones).then(|| RawKato {
        w: p.kato_weight
            .iter()
            .enumerate()
            .map(|(i, w)| RawKatoEntry {
                vertex: p.names.name(VertexId(i as u32)).unwrap_or_default().to_string(),
                value: [w.re, w.im],
            })
            .collect(),
    });

    let raw = RawConfig {
        hbar: (p.hbar != 1.0).then_some(p.hbar),
        bundle: (rank != 1).then_some(RawBundle { rank }),
        graph: RawGraph {
            vertices,
            edges: (!edges.is_empty()).then_some(edges),
        },
        connection: (!connection.is_empty()).then_some(connection),
        potential: (!potential.is_empty()).then_some(potential),
        kato,
    };
    let mut out = String::new();
    let _ = writeln!(out, "# problem instance, written by covsemi");
    out.push_str(&toml::to_string_pretty(&raw).expect("serializable config"));
    out
}
