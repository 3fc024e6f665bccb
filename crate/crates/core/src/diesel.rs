//! Distributed self-localization by projected gradient on the windowed problem.
//!
//! Each vehicle owns its position `p_i`, a copy of the direction variable of
//! every incident edge and the direction variables of its anchor links. In a
//! round, every node broadcasts `p_i`, then updates all of its variables
//! from its own state, the neighbors' broadcast positions and its own
//! measurements. One synchronous round over all nodes is exactly one step
//! `P_𝒵(z − ∇F(z)/L)` of centralized projected gradient, which majorizes
//! the quadratic cost and therefore never increases it.
//!
//! Message transport is an in-process mailbox per node, keyed by round. A
//! wire implementation only needs to deliver [`BroadcastMsg`] values with the
//! same inbox contract.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{IncidenceSign, NetworkTopology, Point, SpaceDim};
use crate::problem::{
    cost_stacked, cumulative_velocities, project_block, project_in_place, window_deltas,
    IterationBudget, MeasurementSample, MeasurementWindow, SolverParams, StackedVariable,
    WindowDeltas,
};

/// Position broadcast from one node to its neighbors.
///
/// Wire schema: `sender` (vehicle id), `position` (`d` little-endian `f64`
/// on a binary transport, a JSON array otherwise) and `round`, the index of
/// the round in which receivers consume it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastMsg {
    pub sender: usize,
    pub position: Vec<f64>,
    pub round: usize,
}

/// Read access to the measurements a node holds locally.
///
/// Edge data is oriented from the lower-numbered endpoint to the higher one,
/// matching the incidence sign convention.
pub trait LocalMeasurements {
    fn edge_range(&self, edge: usize, tau: usize) -> f64;
    fn edge_delta(&self, edge: usize, tau: usize) -> &[f64];
    fn anchor_range(&self, link: usize, tau: usize) -> f64;
    fn anchor_alpha(&self, link: usize, tau: usize) -> &[f64];
}

#[derive(Debug, Clone)]
struct LocalSeries {
    id: usize,
    ranges: Vec<f64>,
    data: Vec<f64>,
}

/// The slice of a window that physically lives on one vehicle: ranges it
/// measured and the data terms built from its own and its neighbors'
/// velocity logs.
#[derive(Debug, Clone)]
pub struct NodeMeasurements {
    vehicle: usize,
    dim: usize,
    edges: Vec<LocalSeries>,
    links: Vec<LocalSeries>,
}

impl NodeMeasurements {
    pub fn extract(
        topology: &NetworkTopology,
        window: &MeasurementWindow,
        deltas: &WindowDeltas,
        vehicle: usize,
    ) -> Self {
        let len = window.len();
        let edges = topology
            .incident_edges(vehicle)
            .iter()
            .map(|&e| LocalSeries {
                id: e,
                ranges: (0..len).map(|tau| window.range(e, tau)).collect(),
                data: (0..len)
                    .flat_map(|tau| deltas.dv(e, tau).to_vec())
                    .collect(),
            })
            .collect();
        let links = topology
            .link_range(vehicle)
            .map(|l| LocalSeries {
                id: l,
                ranges: (0..len).map(|tau| window.anchor_range(l, tau)).collect(),
                data: (0..len)
                    .flat_map(|tau| deltas.alpha(l, tau).to_vec())
                    .collect(),
            })
            .collect();
        NodeMeasurements {
            vehicle,
            dim: deltas.dim(),
            edges,
            links,
        }
    }

    pub fn vehicle(&self) -> usize {
        self.vehicle
    }

    fn edge(&self, edge: usize) -> &LocalSeries {
        self.edges
            .iter()
            .find(|s| s.id == edge)
            .unwrap_or_else(|| panic!("edge {edge} is not local to vehicle {}", self.vehicle))
    }

    fn link(&self, link: usize) -> &LocalSeries {
        self.links
            .iter()
            .find(|s| s.id == link)
            .unwrap_or_else(|| panic!("link {link} is not local to vehicle {}", self.vehicle))
    }
}

impl LocalMeasurements for NodeMeasurements {
    fn edge_range(&self, edge: usize, tau: usize) -> f64 {
        self.edge(edge).ranges[tau]
    }

    fn edge_delta(&self, edge: usize, tau: usize) -> &[f64] {
        &self.edge(edge).data[tau * self.dim..(tau + 1) * self.dim]
    }

    fn anchor_range(&self, link: usize, tau: usize) -> f64 {
        self.link(link).ranges[tau]
    }

    fn anchor_alpha(&self, link: usize, tau: usize) -> &[f64] {
        &self.link(link).data[tau * self.dim..(tau + 1) * self.dim]
    }
}

/// A node's copy of one incident edge variable `y_e(τ)`, `τ = 0..W`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCopy {
    pub edge: usize,
    pub neighbor: usize,
    pub sign: IncidenceSign,
    pub y: Vec<f64>,
}

/// A node's anchor-link variable `w_ik(τ)`, `τ = 0..W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkCopy {
    pub link: usize,
    pub anchor: usize,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub vehicle: usize,
    pub dim: usize,
    pub window_len: usize,
    pub position: Vec<f64>,
    pub edges: Vec<EdgeCopy>,
    pub links: Vec<LinkCopy>,
    /// Neighbor positions from the most recent broadcast, sorted by id.
    pub neighbor_positions: Vec<(usize, Vec<f64>)>,
    pub beta: f64,
    pub lipschitz: f64,
    /// Round whose broadcasts this node consumes next.
    pub round: usize,
}

impl NodeState {
    /// Scatters node `vehicle`'s blocks out of a stacked variable.
    pub fn from_stacked(
        topology: &NetworkTopology,
        z: &StackedVariable,
        params: &SolverParams,
        vehicle: usize,
    ) -> Result<Self> {
        let len = z.len();
        z.check_shape(topology, len)?;
        let dim = z.dim();
        let edges = topology
            .incident_edges(vehicle)
            .iter()
            .map(|&e| {
                let (lo, hi) = topology.edge(e)?;
                Ok(EdgeCopy {
                    edge: e,
                    neighbor: if lo == vehicle { hi } else { lo },
                    sign: topology.incidence_sign(e, vehicle)?,
                    y: (0..len)
                        .flat_map(|tau| z.y_block(e, tau).to_vec())
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let links = topology
            .link_range(vehicle)
            .map(|l| LinkCopy {
                link: l,
                anchor: topology.links()[l].anchor,
                w: (0..len)
                    .flat_map(|tau| z.w_block(l, tau).to_vec())
                    .collect(),
            })
            .collect();
        let neighbor_positions = topology
            .neighbors(vehicle)?
            .iter()
            .map(|&j| (j, z.p_block(j).to_vec()))
            .collect();
        Ok(NodeState {
            vehicle,
            dim,
            window_len: len,
            position: z.p_block(vehicle).to_vec(),
            edges,
            links,
            neighbor_positions,
            beta: params.beta[vehicle],
            lipschitz: params.lipschitz,
            round: 0,
        })
    }

    pub fn broadcast(&self) -> BroadcastMsg {
        BroadcastMsg {
            sender: self.vehicle,
            position: self.position.clone(),
            round: self.round,
        }
    }
}

fn sync_fault(state: &NodeState, detail: String) -> Error {
    Error::Sync {
        node: state.vehicle,
        round: state.round,
        detail,
    }
}

/// One synchronous round at a single node.
///
/// `inbox` must hold exactly one message from each neighbor for the node's
/// current round. Returns the updated state and the broadcast carrying the
/// new position for the next round.
pub fn node_round<M: LocalMeasurements + ?Sized>(
    state: &NodeState,
    inbox: &[BroadcastMsg],
    local: &M,
    tie_break: &[f64],
) -> Result<(NodeState, BroadcastMsg)> {
    let d = state.dim;
    let len = state.window_len;
    let mut neighbor_positions = state.neighbor_positions.clone();
    let mut seen = vec![false; neighbor_positions.len()];
    for msg in inbox {
        if msg.round != state.round {
            return Err(sync_fault(
                state,
                format!("message from {} carries round {}", msg.sender, msg.round),
            ));
        }
        let slot = neighbor_positions
            .iter()
            .position(|(j, _)| *j == msg.sender)
            .ok_or_else(|| {
                sync_fault(state, format!("message from non-neighbor {}", msg.sender))
            })?;
        if seen[slot] {
            return Err(sync_fault(
                state,
                format!("duplicate message from {}", msg.sender),
            ));
        }
        if msg.position.len() != d {
            return Err(sync_fault(
                state,
                format!("malformed position from {}", msg.sender),
            ));
        }
        seen[slot] = true;
        neighbor_positions[slot].1.clone_from(&msg.position);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(sync_fault(
            state,
            format!("no message from neighbor {}", neighbor_positions[missing].0),
        ));
    }
    let neighbor_p = |j: usize| -> &[f64] {
        &neighbor_positions
            .iter()
            .find(|(id, _)| *id == j)
            .expect("neighbor cache covers every incident edge")
            .1
    };

    let l = state.lipschitz;
    let inv_l = 1.0 / l;
    let keep = (l - 1.0) / l;
    let p = &state.position;

    // p_i⁺ = β_i p_i + (1/L)[Σ_j Σ_τ (p_j + s·(y_e(τ) − Δv_e(τ))) + Σ_k Σ_τ (α_ik(τ) + w_ik(τ))]
    let mut acc = vec![0.0; d];
    for ec in &state.edges {
        let pj = neighbor_p(ec.neighbor);
        let s = ec.sign.value();
        for tau in 0..len {
            let dv = local.edge_delta(ec.edge, tau);
            let y = &ec.y[tau * d..(tau + 1) * d];
            for c in 0..d {
                acc[c] += pj[c] + s * (y[c] - dv[c]);
            }
        }
    }
    for lc in &state.links {
        for tau in 0..len {
            let alpha = local.anchor_alpha(lc.link, tau);
            let w = &lc.w[tau * d..(tau + 1) * d];
            for c in 0..d {
                acc[c] += alpha[c] + w[c];
            }
        }
    }
    let position: Vec<f64> = (0..d).map(|c| state.beta * p[c] + inv_l * acc[c]).collect();

    // y_e⁺(τ) = P((L−1)/L · y_e(τ) + (1/L)(p_lo − p_hi + Δv_e(τ))); identical at both endpoints.
    let mut edges = state.edges.clone();
    for ec in &mut edges {
        let pj = neighbor_p(ec.neighbor);
        let (plo, phi): (&[f64], &[f64]) = match ec.sign {
            IncidenceSign::Plus => (p, pj),
            IncidenceSign::Minus => (pj, p),
        };
        for tau in 0..len {
            let dv = local.edge_delta(ec.edge, tau);
            let y = &mut ec.y[tau * d..(tau + 1) * d];
            for c in 0..d {
                y[c] = keep * y[c] + inv_l * (plo[c] - phi[c] + dv[c]);
            }
            project_block(y, local.edge_range(ec.edge, tau), tie_break);
        }
    }

    // w_ik⁺(τ) = P((L−1)/L · w_ik(τ) + (1/L)(p_i − α_ik(τ)))
    let mut links = state.links.clone();
    for lc in &mut links {
        for tau in 0..len {
            let alpha = local.anchor_alpha(lc.link, tau);
            let w = &mut lc.w[tau * d..(tau + 1) * d];
            for c in 0..d {
                w[c] = keep * w[c] + inv_l * (p[c] - alpha[c]);
            }
            project_block(w, local.anchor_range(lc.link, tau), tie_break);
        }
    }

    let next = NodeState {
        position,
        edges,
        links,
        neighbor_positions,
        round: state.round + 1,
        ..state.clone()
    };
    let msg = next.broadcast();
    Ok((next, msg))
}

/// How the round engine schedules node updates within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

/// Synchronous in-process network: nodes, their local data and per-node
/// mailboxes. The barrier between rounds is the end of [`round`](Self::round).
pub struct SyncNetwork {
    topology: NetworkTopology,
    nodes: Vec<NodeState>,
    locals: Vec<NodeMeasurements>,
    mailboxes: Vec<Vec<BroadcastMsg>>,
    tie_break: Vec<f64>,
    execution: Execution,
}

impl SyncNetwork {
    pub fn new(
        topology: &NetworkTopology,
        window: &MeasurementWindow,
        deltas: &WindowDeltas,
        z: &StackedVariable,
        params: &SolverParams,
    ) -> Result<Self> {
        let n = topology.vehicle_count();
        let nodes = (0..n)
            .map(|i| NodeState::from_stacked(topology, z, params, i))
            .collect::<Result<Vec<_>>>()?;
        let locals = (0..n)
            .map(|i| NodeMeasurements::extract(topology, window, deltas, i))
            .collect();
        let mut net = SyncNetwork {
            topology: topology.clone(),
            nodes,
            locals,
            mailboxes: vec![Vec::new(); n],
            tie_break: params.tie_break.as_slice().to_vec(),
            execution: Execution::Sequential,
        };
        let initial: Vec<BroadcastMsg> = net.nodes.iter().map(NodeState::broadcast).collect();
        net.deliver(initial);
        Ok(net)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn deliver(&mut self, outgoing: Vec<BroadcastMsg>) {
        for msg in outgoing {
            for &j in self
                .topology
                .neighbors(msg.sender)
                .expect("sender is a vehicle")
            {
                self.mailboxes[j].push(msg.clone());
            }
        }
        for mb in &mut self.mailboxes {
            mb.sort_by_key(|m| m.sender);
        }
    }

    /// Runs one round at every node and delivers the resulting broadcasts.
    pub fn round(&mut self) -> Result<()> {
        let inboxes = std::mem::replace(&mut self.mailboxes, vec![Vec::new(); self.nodes.len()]);
        let tie = &self.tie_break;
        let step =
            |(node, (inbox, local)): (&NodeState, (&Vec<BroadcastMsg>, &NodeMeasurements))| {
                node_round(node, inbox, local, tie)
            };
        let results: Vec<Result<(NodeState, BroadcastMsg)>> = match self.execution {
            Execution::Sequential => self
                .nodes
                .iter()
                .zip(inboxes.iter().zip(&self.locals))
                .map(step)
                .collect(),
            Execution::Parallel => self
                .nodes
                .par_iter()
                .zip(inboxes.par_iter().zip(self.locals.par_iter()))
                .map(step)
                .collect(),
        };
        let mut outgoing = Vec::with_capacity(results.len());
        for (slot, r) in results.into_iter().enumerate() {
            let (state, msg) = r?;
            self.nodes[slot] = state;
            outgoing.push(msg);
        }
        self.deliver(outgoing);
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    /// Reassembles the network-wide variable. Edge variables are read from
    /// the lower-numbered endpoint's copy.
    pub fn gather(&self, template: &StackedVariable) -> StackedVariable {
        let mut z = template.clone();
        let d = z.dim();
        for node in &self.nodes {
            z.p_block_mut(node.vehicle).copy_from_slice(&node.position);
            for ec in node
                .edges
                .iter()
                .filter(|ec| ec.sign == IncidenceSign::Plus)
            {
                for tau in 0..node.window_len {
                    z.y_block_mut(ec.edge, tau)
                        .copy_from_slice(&ec.y[tau * d..(tau + 1) * d]);
                }
            }
            for lc in &node.links {
                for tau in 0..node.window_len {
                    z.w_block_mut(lc.link, tau)
                        .copy_from_slice(&lc.w[tau * d..(tau + 1) * d]);
                }
            }
        }
        z
    }

    /// True when both endpoint copies of every edge variable are bitwise equal.
    pub fn edge_copies_consistent(&self) -> bool {
        self.nodes.iter().all(|node| {
            node.edges.iter().all(|ec| {
                self.nodes[ec.neighbor]
                    .edges
                    .iter()
                    .find(|other| other.edge == ec.edge)
                    .is_some_and(|other| {
                        other
                            .y
                            .iter()
                            .zip(&ec.y)
                            .all(|(a, b)| a.to_bits() == b.to_bits())
                    })
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_cost: f64,
    /// Cost before the first round followed by the cost after every round.
    pub cost_trace: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Solves one window with synchronous distributed rounds.
///
/// Stops when `‖z⁺ − z‖ ≤ rel_tol·(1 + ‖z‖)` or after `max_iters` rounds.
/// `init` is projected onto the constraint set first.
pub fn run_window(
    topology: &NetworkTopology,
    window: &MeasurementWindow,
    init: &StackedVariable,
    params: &SolverParams,
) -> Result<(StackedVariable, SolveReport)> {
    run_window_with(topology, window, init, params, Execution::Sequential)
}

pub fn run_window_with(
    topology: &NetworkTopology,
    window: &MeasurementWindow,
    init: &StackedVariable,
    params: &SolverParams,
    execution: Execution,
) -> Result<(StackedVariable, SolveReport)> {
    params.validate(topology, window.len())?;
    init.check_shape(topology, window.len())?;
    if init.dim() != window.dim().get() {
        return Err(Error::contract(
            "initial point and window differ in dimension",
        ));
    }
    let deltas = window_deltas(topology, window);
    let mut z = init.clone();
    project_in_place(&mut z, window, params.tie_break.as_slice());
    if !z.is_finite() {
        return Err(Error::Numerical {
            iteration: 0,
            detail: "initial point is not finite".into(),
        });
    }
    let mut net =
        SyncNetwork::new(topology, window, &deltas, &z, params)?.with_execution(execution);
    let mut cost_trace = vec![cost_stacked(topology, &z, &deltas)?];
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations = 0;
    while iterations < params.max_iters {
        net.round()?;
        iterations += 1;
        let next = net.gather(&z);
        if !next.is_finite() {
            return Err(Error::Numerical {
                iteration: iterations,
                detail: "non-finite iterate".into(),
            });
        }
        cost_trace.push(cost_stacked(topology, &next, &deltas)?);
        let change = next.distance(&z);
        let scale = 1.0 + z.norm();
        z = next;
        if change <= params.rel_tol * scale {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }
    let final_cost = *cost_trace.last().expect("trace has the initial cost");
    Ok((
        z,
        SolveReport {
            iterations,
            final_cost,
            cost_trace,
            stop_reason,
        },
    ))
}

/// Estimates for every vehicle at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickEstimate {
    pub tick: usize,
    pub positions: Vec<Point>,
    pub report: SolveReport,
    /// Ticks found missing from the stream just before this one.
    pub skipped: Vec<usize>,
}

/// Sliding-window tracker.
///
/// Keeps the last `T₀ + 1` samples. Until that many have arrived the window
/// simply grows from the first tick. When the window slides, positions are
/// advanced by the oldest sample's velocity and the direction variables are
/// shifted; the newest sample's variables start from the current position
/// differences.
#[derive(Debug, Clone)]
pub struct Tracker {
    topology: NetworkTopology,
    dim: SpaceDim,
    dt: f64,
    window_len: usize,
    budget: IterationBudget,
    buffer: VecDeque<MeasurementSample>,
    estimate: Option<StackedVariable>,
    start_positions: Vec<f64>,
    last_tick: Option<usize>,
    last_positions: Vec<f64>,
}

impl Tracker {
    /// `horizon` is `T₀`; the window holds `T₀ + 1` samples.
    pub fn new(
        topology: &NetworkTopology,
        dim: SpaceDim,
        dt: f64,
        horizon: usize,
        budget: IterationBudget,
        initial_positions: &[Point],
    ) -> Result<Self> {
        if initial_positions.len() != topology.vehicle_count()
            || initial_positions.iter().any(|p| p.len() != dim.get())
        {
            return Err(Error::contract("initial guess does not match the topology"));
        }
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::Parameter(format!(
                "sampling interval {dt} must be positive"
            )));
        }
        let start: Vec<f64> = initial_positions
            .iter()
            .flat_map(|p| p.iter().copied())
            .collect();
        Ok(Tracker {
            topology: topology.clone(),
            dim,
            dt,
            window_len: horizon + 1,
            budget,
            buffer: VecDeque::with_capacity(horizon + 1),
            estimate: None,
            last_positions: start.clone(),
            start_positions: start,
            last_tick: None,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Warm-start point for the window ending at `sample`, and the window itself.
    pub fn prepare(
        &mut self,
        sample: MeasurementSample,
    ) -> Result<(MeasurementWindow, StackedVariable, Vec<usize>)> {
        let d = self.dim.get();
        let mut skipped = Vec::new();
        if let Some(last) = self.last_tick {
            if sample.tick <= last {
                return Err(Error::contract(format!(
                    "tick {} does not follow tick {last}",
                    sample.tick
                )));
            }
            if sample.tick > last + 1 {
                // Velocities for the gap are unknown: restart the window at the
                // last emitted estimate.
                skipped.extend(last + 1..sample.tick);
                self.buffer.clear();
                self.estimate = None;
                self.start_positions = self.last_positions.clone();
            }
        }

        let mut shift = 0;
        if self.buffer.len() == self.window_len {
            let oldest = self.buffer.pop_front().expect("full buffer");
            for (i, v) in oldest.rel_velocities.iter().enumerate() {
                for c in 0..d {
                    self.start_positions[i * d + c] += self.dt * v[c];
                }
            }
            shift = 1;
        }
        self.buffer.push_back(sample);
        let samples: Vec<MeasurementSample> = self.buffer.iter().cloned().collect();
        let window = MeasurementWindow::from_samples(&self.topology, self.dim, self.dt, &samples)?;
        let deltas = window_deltas(&self.topology, &window);
        let mut init =
            StackedVariable::residual_free(&self.topology, &deltas, &self.start_positions)?;
        if let Some(prev) = &self.estimate {
            let carried = prev.len() - shift;
            for e in 0..self.topology.edge_count() {
                for tau in 0..carried.min(window.len()) {
                    init.y_block_mut(e, tau)
                        .copy_from_slice(prev.y_block(e, tau + shift));
                }
            }
            for l in 0..self.topology.link_count() {
                for tau in 0..carried.min(window.len()) {
                    init.w_block_mut(l, tau)
                        .copy_from_slice(prev.w_block(l, tau + shift));
                }
            }
        }
        Ok((window, init, skipped))
    }

    /// Consumes one sample and returns position estimates at its tick.
    pub fn push(&mut self, sample: MeasurementSample) -> Result<TickEstimate> {
        self.push_from(sample, None)
    }

    /// Like [`push`](Self::push), but solves from `init` instead of the warm start.
    pub fn push_from(
        &mut self,
        sample: MeasurementSample,
        init: Option<StackedVariable>,
    ) -> Result<TickEstimate> {
        let tick = sample.tick;
        let (window, warm, skipped) = self.prepare(sample)?;
        let init = init.unwrap_or(warm);
        let params =
            SolverParams::with_budget(&self.topology, window.len(), self.dim, self.budget)?;
        let (z, report) = run_window(&self.topology, &window, &init, &params)?;

        let d = self.dim.get();
        let cv = cumulative_velocities(&window);
        let newest = window.len() - 1;
        let positions: Vec<Point> = (0..self.topology.vehicle_count())
            .map(|i| Point::from_column_slice(z.p_block(i)) + cv.at(newest, i) * self.dt)
            .collect();
        self.start_positions.copy_from_slice(&z.p);
        self.last_positions = positions.iter().flat_map(|p| p.iter().copied()).collect();
        debug_assert_eq!(self.last_positions.len(), self.topology.vehicle_count() * d);
        self.estimate = Some(z);
        self.last_tick = Some(tick);
        Ok(TickEstimate {
            tick,
            positions,
            report,
            skipped,
        })
    }

    pub fn current_window(&self) -> Option<&StackedVariable> {
        self.estimate.as_ref()
    }
}

/// Runs a tracker over a whole stream, stopping at its end.
pub fn track(
    stream: impl IntoIterator<Item = MeasurementSample>,
    topology: &NetworkTopology,
    dim: SpaceDim,
    dt: f64,
    horizon: usize,
    budget: IterationBudget,
    initial_positions: &[Point],
) -> Result<Vec<TickEstimate>> {
    let mut tracker = Tracker::new(topology, dim, dt, horizon, budget, initial_positions)?;
    stream.into_iter().map(|s| tracker.push(s)).collect()
}
