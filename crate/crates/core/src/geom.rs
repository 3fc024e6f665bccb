//! Geometric and graph primitives shared by every estimator.
//!
//! Vectors are plain `f64` slices of length [`SpaceDim::get`]; the
//! optimization code stores them in flat buffers with a fixed stride, so the
//! helpers here operate on slices rather than owned vector types.

use std::ops::Range;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Owned position or velocity vector.
pub type Point = DVector<f64>;

/// Ambient dimension: 2 for planar (or depth-aided) problems, 3 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct SpaceDim(usize);

impl SpaceDim {
    pub const PLANAR: SpaceDim = SpaceDim(2);
    pub const SPATIAL: SpaceDim = SpaceDim(3);

    pub fn new(d: usize) -> Result<Self> {
        match d {
            2 | 3 => Ok(SpaceDim(d)),
            _ => Err(Error::Parameter(format!(
                "space dimension must be 2 or 3, got {d}"
            ))),
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// First canonical axis, the tie-break direction for projecting zero vectors.
    pub fn first_axis(self) -> Point {
        let mut e = Point::zeros(self.0);
        e[0] = 1.0;
        e
    }
}

impl TryFrom<usize> for SpaceDim {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        SpaceDim::new(d)
    }
}

impl From<SpaceDim> for usize {
    fn from(d: SpaceDim) -> usize {
        d.0
    }
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Orientation of a vehicle on an edge of the incidence matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncidenceSign {
    Plus,
    Minus,
}

impl IncidenceSign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            IncidenceSign::Plus => 1.0,
            IncidenceSign::Minus => -1.0,
        }
    }
}

/// One range link between a vehicle and an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorLink {
    pub vehicle: usize,
    pub anchor: usize,
}

/// The measurement and communication graph among vehicles, plus the
/// vehicle-to-anchor range links.
///
/// Vehicles are numbered `0..n` and anchors `0..m` in a separate id space.
/// Edges are stored as `(lo, hi)` with `lo < hi`; the lower endpoint carries
/// the `+1` incidence sign. Anchor links are stored vehicle-major, anchors
/// ascending, and indexed by their position in that list.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n: usize,
    m: usize,
    edges: Vec<(usize, usize)>,
    links: Vec<AnchorLink>,
    link_offsets: Vec<usize>,
    incident: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Builds a topology from vehicle pairs and per-vehicle anchor lists.
    ///
    /// Rejects self-loops, duplicate edges, out-of-range ids and any vehicle
    /// with neither an edge nor an anchor link.
    pub fn new(
        n: usize,
        m: usize,
        edges: &[(usize, usize)],
        anchor_links: &[Vec<usize>],
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology("no vehicles".into()));
        }
        if anchor_links.len() != n {
            return Err(Error::Topology(format!(
                "anchor link lists for {} vehicles, expected {n}",
                anchor_links.len()
            )));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Topology(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::Topology(format!("self-loop at vehicle {a}")));
            }
            let e = (a.min(b), a.max(b));
            if normalized.contains(&e) {
                return Err(Error::Topology(format!("duplicate edge {e:?}")));
            }
            normalized.push(e);
        }

        let mut links = Vec::new();
        let mut link_offsets = Vec::with_capacity(n + 1);
        for (i, anchors) in anchor_links.iter().enumerate() {
            link_offsets.push(links.len());
            let mut sorted = anchors.clone();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::Topology(format!(
                        "duplicate anchor link ({i}, {})",
                        w[0]
                    )));
                }
            }
            for k in sorted {
                if k >= m {
                    return Err(Error::Topology(format!("anchor {k} out of range")));
                }
                links.push(AnchorLink {
                    vehicle: i,
                    anchor: k,
                });
            }
        }
        link_offsets.push(links.len());

        let mut incident = vec![Vec::new(); n];
        for (e, &(lo, hi)) in normalized.iter().enumerate() {
            incident[lo].push(e);
            incident[hi].push(e);
        }
        let other = |e: usize, i: usize| {
            let (lo, hi) = normalized[e];
            if lo == i {
                hi
            } else {
                lo
            }
        };
        for (i, list) in incident.iter_mut().enumerate() {
            list.sort_by_key(|&e| other(e, i));
        }
        let neighbors: Vec<Vec<usize>> = incident
            .iter()
            .enumerate()
            .map(|(i, list)| list.iter().map(|&e| other(e, i)).collect())
            .collect();

        for i in 0..n {
            if incident[i].is_empty() && link_offsets[i] == link_offsets[i + 1] {
                return Err(Error::Topology(format!(
                    "vehicle {i} has no edges and no anchor links"
                )));
            }
        }

        Ok(NetworkTopology {
            n,
            m,
            edges: normalized,
            links,
            link_offsets,
            incident,
            neighbors,
        })
    }

    /// Chain `0 - 1 - ... - (n-1)` with the given anchor lists.
    pub fn chain(n: usize, m: usize, anchor_links: &[Vec<usize>]) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, m, &edges, anchor_links)
    }

    pub fn vehicle_count(&self) -> usize {
        self.n
    }

    pub fn anchor_count(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> Result<(usize, usize)> {
        self.edges.get(e).copied().ok_or(Error::Lookup {
            kind: "edge",
            id: e,
        })
    }

    /// All anchor links in canonical (vehicle-major) order.
    pub fn links(&self) -> &[AnchorLink] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Indices into [`links`](Self::links) that belong to vehicle `i`.
    pub fn link_range(&self, i: usize) -> Range<usize> {
        self.link_offsets[i]..self.link_offsets[i + 1]
    }

    /// Anchors vehicle `i` ranges against.
    pub fn anchors_of(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.links[self.link_range(i)].iter().map(|l| l.anchor)
    }

    pub fn anchor_degree(&self, i: usize) -> usize {
        self.link_offsets[i + 1] - self.link_offsets[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.incident[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incident.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.incident.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_anchor_degree(&self) -> usize {
        (0..self.n)
            .map(|i| self.anchor_degree(i))
            .max()
            .unwrap_or(0)
    }

    /// Edge ids incident to `i`, ordered by neighbor id.
    pub fn incident_edges(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn neighbors(&self, vehicle: usize) -> Result<&[usize]> {
        self.neighbors
            .get(vehicle)
            .map(Vec::as_slice)
            .ok_or(Error::Lookup {
                kind: "vehicle",
                id: vehicle,
            })
    }

    /// `+1` for the lower-numbered endpoint of `edge`, `-1` for the higher.
    pub fn incidence_sign(&self, edge: usize, vehicle: usize) -> Result<IncidenceSign> {
        let (lo, hi) = self.edge(edge)?;
        if vehicle == lo {
            Ok(IncidenceSign::Plus)
        } else if vehicle == hi {
            Ok(IncidenceSign::Minus)
        } else {
            Err(Error::contract(format!(
                "vehicle {vehicle} is not an endpoint of edge {edge} ({lo}, {hi})"
            )))
        }
    }
}
