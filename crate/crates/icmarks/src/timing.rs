//! Timing measurement: arrival-time propagation over the net graph and
//! slack/TNS/WNS at the declared endpoints.
//!
//! The delay model is linear in net HPWL with a single driver per net (the
//! first pin). Nets flagged `endpoint` capture arrival times at their sinks
//! and do not propagate further, which is what makes the remaining graph a
//! DAG for well-formed designs.

use crate::design::{Design, Placement};
use crate::metrics::net_hpwl;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("combinational cycle through cells {0:?}")]
    CombinationalCycle(Vec<usize>),
}

#[derive(Debug, Clone)]
pub enum EndpointRats {
    /// Same required arrival time at every endpoint.
    Uniform(f64),
    /// One RAT per endpoint, in endpoint enumeration order
    /// (ascending net id, then sink order within the net).
    PerEndpoint(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct DelayModel {
    pub unit_delay_per_length: f64,
    pub endpoint_rats: EndpointRats,
}

#[derive(Debug, Clone)]
pub struct TimingResult {
    /// Slack per endpoint, in endpoint enumeration order.
    pub slacks: Vec<f64>,
    pub tns: f64,
    pub wns: f64,
}

impl TimingResult {
    fn from_slacks(slacks: Vec<f64>) -> Self {
        let tns = slacks.iter().map(|s| s.min(0.0)).sum();
        let wns = slacks.iter().copied().fold(f64::INFINITY, f64::min);
        TimingResult { slacks, tns, wns }
    }
}

/// Longest-path arrival times per cell, then slack = RAT - AT per endpoint.
pub fn timing_analyze(
    design: &Design,
    placement: &Placement,
    model: &DelayModel,
) -> Result<TimingResult, TimingError> {
    let n = design.cells.len();
    // Propagation edges: driver cell -> sink cell with the net delay, for
    // non-endpoint nets only.
    let mut fanout: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    let mut delays = vec![0.0; design.nets.len()];
    for net in &design.nets {
        delays[net.id] = model.unit_delay_per_length * net_hpwl(design, placement, net.id) as f64;
        if net.endpoint || net.pins.len() < 2 {
            continue;
        }
        let driver = net.driver().cell;
        for sink in net.sinks() {
            if sink.cell == driver {
                continue;
            }
            fanout[driver].push((sink.cell, delays[net.id]));
            indegree[sink.cell] += 1;
        }
    }

    // Kahn topological order with lowest-id-first tie-breaking.
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&c| indegree[c] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut at = vec![0.0f64; n];
    let mut visited = 0;
    while let Some(std::cmp::Reverse(c)) = ready.pop() {
        visited += 1;
        for &(sink, delay) in &fanout[c] {
            if at[c] + delay > at[sink] {
                at[sink] = at[c] + delay;
            }
            indegree[sink] -= 1;
            if indegree[sink] == 0 {
                ready.push(std::cmp::Reverse(sink));
            }
        }
    }
    if visited < n {
        let cycle: Vec<usize> = (0..n).filter(|&c| indegree[c] > 0).collect();
        return Err(TimingError::CombinationalCycle(cycle));
    }

    // Endpoint arrival = driver AT + net delay, one entry per endpoint sink.
    let mut slacks = Vec::new();
    let mut idx = 0usize;
    for net in &design.nets {
        if !net.endpoint {
            continue;
        }
        let driver = net.driver().cell;
        for _sink in net.sinks() {
            let arrival = at[driver] + delays[net.id];
            let rat = match &model.endpoint_rats {
                EndpointRats::Uniform(r) => *r,
                EndpointRats::PerEndpoint(v) => v.get(idx).copied().unwrap_or(f64::INFINITY),
            };
            slacks.push(rat - arrival);
            idx += 1;
        }
    }
    Ok(TimingResult::from_slacks(slacks))
}

/// Endpoint count, in the same enumeration order as `timing_analyze`.
pub fn endpoint_count(design: &Design) -> usize {
    design.nets.iter().filter(|n| n.endpoint).map(|n| n.sinks().len()).sum()
}

/// Per-net slack: worst slack among timing paths through each net
/// (required time at the sink side minus arrival at the driver side).
/// Nets with no downstream endpoint report +infinity.
pub fn net_slacks(
    design: &Design,
    placement: &Placement,
    model: &DelayModel,
) -> Result<Vec<f64>, TimingError> {
    let n = design.cells.len();
    let mut fanout: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    let mut delays = vec![0.0; design.nets.len()];
    for net in &design.nets {
        delays[net.id] = model.unit_delay_per_length * net_hpwl(design, placement, net.id) as f64;
        if net.endpoint || net.pins.len() < 2 {
            continue;
        }
        let driver = net.driver().cell;
        for sink in net.sinks() {
            if sink.cell == driver {
                continue;
            }
            fanout[driver].push((sink.cell, delays[net.id]));
            indegree[sink.cell] += 1;
        }
    }
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
        (0..n).filter(|&c| indegree[c] == 0).map(std::cmp::Reverse).collect();
    let mut order = Vec::with_capacity(n);
    let mut at = vec![0.0f64; n];
    while let Some(std::cmp::Reverse(c)) = ready.pop() {
        order.push(c);
        for &(sink, delay) in &fanout[c] {
            if at[c] + delay > at[sink] {
                at[sink] = at[c] + delay;
            }
            indegree[sink] -= 1;
            if indegree[sink] == 0 {
                ready.push(std::cmp::Reverse(sink));
            }
        }
    }
    if order.len() < n {
        let cycle: Vec<usize> = (0..n).filter(|&c| indegree[c] > 0).collect();
        return Err(TimingError::CombinationalCycle(cycle));
    }

    // Backward required times per cell.
    let mut rat = vec![f64::INFINITY; n];
    let mut ep_idx = 0usize;
    let mut endpoint_rat_of = vec![f64::INFINITY; design.nets.len()];
    for net in &design.nets {
        if !net.endpoint {
            continue;
        }
        let mut worst = f64::INFINITY;
        for _ in net.sinks() {
            let r = match &model.endpoint_rats {
                EndpointRats::Uniform(v) => *v,
                EndpointRats::PerEndpoint(v) => v.get(ep_idx).copied().unwrap_or(f64::INFINITY),
            };
            worst = worst.min(r);
            ep_idx += 1;
        }
        endpoint_rat_of[net.id] = worst;
        let driver = net.driver().cell;
        let req = worst - delays[net.id];
        if req < rat[driver] {
            rat[driver] = req;
        }
    }
    for &c in order.iter().rev() {
        for &(sink, delay) in &fanout[c] {
            let req = rat[sink] - delay;
            if req < rat[c] {
                rat[c] = req;
            }
        }
    }

    let mut slacks = vec![f64::INFINITY; design.nets.len()];
    for net in &design.nets {
        if net.pins.len() < 2 {
            continue;
        }
        let driver = net.driver().cell;
        let through = if net.endpoint {
            endpoint_rat_of[net.id] - (at[driver] + delays[net.id])
        } else {
            let mut worst = f64::INFINITY;
            for sink in net.sinks() {
                worst = worst.min(rat[sink.cell] - (at[driver] + delays[net.id]));
            }
            worst
        };
        slacks[net.id] = through;
    }
    Ok(slacks)
}

/// A uniform delay model whose RAT leaves `margin_frac` headroom over the
/// critical arrival time of the given placement. Used when a design has no
/// externally supplied constraints.
pub fn default_delay_model(
    design: &Design,
    placement: &Placement,
    margin_frac: f64,
) -> Result<DelayModel, TimingError> {
    // With RAT = 0, slack = -AT, so the critical arrival is -min(slack).
    let zero_rat = DelayModel { unit_delay_per_length: 1.0, endpoint_rats: EndpointRats::Uniform(0.0) };
    let r = timing_analyze(design, placement, &zero_rat)?;
    let max_at = r.slacks.iter().fold(0.0f64, |m, s| m.max(-s));
    Ok(DelayModel {
        unit_delay_per_length: 1.0,
        endpoint_rats: EndpointRats::Uniform(max_at * (1.0 + margin_frac)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Cell, CellKind, Net, Pin, Row, Stage};
    use crate::geom::Rect;

    fn chain_design() -> Design {
        // c0 ->net0-> c1 ->net1(endpoint)-> c2, HPWLs 5 and 3
        let movable = |id| Cell {
            id,
            width: 1,
            height: 2,
            kind: CellKind::Movable,
            region_id: None,
            fixed_pos: None,
        };
        Design {
            name: "chain".into(),
            die: Rect::new(0, 0, 20, 4),
            rows: vec![Row { id: 0, x_lo: 0, x_hi: 20, y: 0 }, Row { id: 1, x_lo: 0, x_hi: 20, y: 2 }],
            cells: vec![movable(0), movable(1), movable(2)],
            nets: vec![
                Net { id: 0, pins: vec![Pin { cell: 0, dx: 0, dy: 0 }, Pin { cell: 1, dx: 0, dy: 0 }], endpoint: false },
                Net { id: 1, pins: vec![Pin { cell: 1, dx: 0, dy: 0 }, Pin { cell: 2, dx: 0, dy: 0 }], endpoint: true },
            ],
            fence_regions: vec![],
            row_height: 2,
        }
    }

    #[test]
    fn unconstrained_endpoints_have_zero_tns() {
        let d = chain_design();
        let p = Placement::new(vec![0, 5, 8], vec![0, 0, 0], Stage::Detailed);
        let model = DelayModel { unit_delay_per_length: 1.0, endpoint_rats: EndpointRats::Uniform(1e12) };
        let r = timing_analyze(&d, &p, &model).unwrap();
        assert_eq!(r.tns, 0.0);
        assert!(r.wns > 0.0);
    }

    #[test]
    fn two_net_path_hand_trace() {
        let d = chain_design();
        // net0 HPWL 5 (x: 0 to 5), net1 HPWL 3 (x: 5 to 8)
        let p = Placement::new(vec![0, 5, 8], vec![0, 0, 0], Stage::Detailed);
        let model = DelayModel { unit_delay_per_length: 1.0, endpoint_rats: EndpointRats::Uniform(7.0) };
        let r = timing_analyze(&d, &p, &model).unwrap();
        // AT at endpoint = 5 + 3 = 8, slack = 7 - 8 = -1
        assert_eq!(r.slacks, vec![-1.0]);
        assert_eq!(r.tns, -1.0);
        assert_eq!(r.wns, -1.0);
    }

    #[test]
    fn tns_sums_only_negative_slacks() {
        let d = {
            let mut d = chain_design();
            // make both nets endpoints from c0 directly
            d.nets[0].endpoint = true;
            d.nets[1].pins[0].cell = 0;
            d
        };
        let p = Placement::new(vec![0, 9, 4], vec![0, 0, 0], Stage::Detailed);
        // arrivals: net0 -> 9, net1 -> 4; RATs 7 -> slacks {-2, +3}
        let model = DelayModel { unit_delay_per_length: 1.0, endpoint_rats: EndpointRats::Uniform(7.0) };
        let r = timing_analyze(&d, &p, &model).unwrap();
        assert_eq!(r.slacks, vec![-2.0, 3.0]);
        assert_eq!(r.tns, -2.0);
        assert_eq!(r.wns, -2.0);
    }

    #[test]
    fn cycle_is_reported() {
        let mut d = chain_design();
        // close the loop c2 -> c0 with a non-endpoint net
        d.nets[1].endpoint = false;
        d.nets.push(Net {
            id: 2,
            pins: vec![Pin { cell: 2, dx: 0, dy: 0 }, Pin { cell: 0, dx: 0, dy: 0 }],
            endpoint: false,
        });
        let p = Placement::new(vec![0, 5, 8], vec![0, 0, 0], Stage::Detailed);
        let model = DelayModel { unit_delay_per_length: 1.0, endpoint_rats: EndpointRats::Uniform(7.0) };
        assert!(matches!(timing_analyze(&d, &p, &model), Err(TimingError::CombinationalCycle(_))));
    }
}
