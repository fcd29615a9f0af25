//! Greedy marginal-cost proxy for the relaxation-based benchmark. Each job
//! goes wherever it raises the instantaneous cost least: any existing VM of
//! its VNF at a reachable node on a feasible layer, or a fresh VM. Deadlines
//! are mixed freely and a request's jobs may spread over several layers.

use crate::allocation::DelayPlan;
use crate::engine::{HostedJob, JobPlacement, PlacementRecord, PlacementState, RangeKey};
use crate::error::{Error, Result};
use crate::model::{NodeId, Request, VmId};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Candidate {
    Existing(VmId),
    Fresh { layer: usize, node: NodeId },
}

pub fn relax_sota_place<'a>(
    state: &'a mut PlacementState,
    request: &Request,
    plan: &DelayPlan,
) -> Result<&'a PlacementRecord> {
    let mu_bar = state.model().params.mu_bar;
    let mut jobs = Vec::with_capacity(plan.vnfs.len());
    for (vnf, budget) in plan.iter() {
        let theta = state.model().catalog.theta(vnf);
        let mut best: Option<(f64, Candidate)> = None;
        let better = |cost: f64, best: &Option<(f64, Candidate)>| best.as_ref().is_none_or(|(c, _)| cost < *c);

        for layer in 0..=plan.star_layer {
            let spec = state.model().topology.layer(layer).clone();
            let nodes = state.model().topology.reachable(request.leaf, layer).to_vec();
            for node in nodes {
                for id in state.bucket(node, vnf, RangeKey::UNRANGED) {
                    let vm = state.vm(id).expect("indexed vm");
                    let speed = vm.speed_with(request.load, budget);
                    if speed > mu_bar || !vm.admits(mu_bar, request.load, budget) {
                        continue;
                    }
                    let cost = spec.kappa_p * (speed - vm.speed);
                    // Ascending ids within ascending nodes; a later equal cost loses.
                    let wins = match best {
                        Some((c, Candidate::Existing(b))) => cost < c || (cost == c && id < b),
                        Some((c, Candidate::Fresh { .. })) => cost <= c,
                        None => true,
                    };
                    if wins {
                        best = Some((cost, Candidate::Existing(id)));
                    }
                }
            }
            let Some(node) = state.choose_node(request.leaf, layer) else { continue };
            let cost = spec.kappa_f + spec.kappa_p * (theta * request.load + 1.0 / budget);
            if better(cost, &best) {
                best = Some((cost, Candidate::Fresh { layer, node }));
            }
        }

        let hosted = HostedJob { request: request.id, delay_budget: budget, load: request.load };
        let vm = match best.ok_or(Error::InfeasibleRequest(request.id))?.1 {
            Candidate::Existing(id) => {
                state.add_to_vm(id, hosted);
                id
            }
            Candidate::Fresh { layer, node } => state.open_vm(node, layer, vnf, RangeKey::UNRANGED, hosted),
        };
        jobs.push(JobPlacement { vnf, vm, delay_budget: budget });
    }
    state.insert_record(request, plan.star_layer, jobs);
    let record = state.record(request.id).expect("just inserted");
    let e2e = state.end_to_end(record);
    if e2e > record.target_delay * (1.0 + 1e-9) {
        return Err(Error::InfeasibleRequest(request.id));
    }
    Ok(state.record(request.id).expect("just inserted"))
}
