//! Feasibility, highest feasible layer and the fair per-job delay split.

use crate::error::{Error, Result};
use crate::model::{Catalog, Request, RequestId, ServiceSpec, SystemParams, Topology, VnfId, VnfSpec};

/// Per-request delay budgets, in chain order.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayPlan {
    pub request_id: RequestId,
    pub star_layer: usize,
    pub vnfs: Vec<VnfId>,
    pub budgets: Vec<f64>,
    pub solo_latencies: Vec<f64>,
}

impl DelayPlan {
    pub fn budget(&self, vnf: VnfId) -> Option<f64> {
        self.vnfs.iter().position(|v| *v == vnf).map(|i| self.budgets[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (VnfId, f64)> + '_ {
        self.vnfs.iter().copied().zip(self.budgets.iter().copied())
    }
}

/// Latency of a job running alone on a full-speed VM.
pub fn solo_latency(vnf: &VnfSpec, load: f64, params: &SystemParams) -> Result<f64> {
    let demand = vnf.theta * load;
    if demand >= params.mu_bar {
        return Err(Error::InfeasibleJob { demand, mu_bar: params.mu_bar });
    }
    Ok(1.0 / (params.mu_bar - demand))
}

fn solo_sum(request: &Request, service: &ServiceSpec, catalog: &Catalog, params: &SystemParams) -> Result<Vec<f64>> {
    service
        .vnfs
        .iter()
        .map(|v| solo_latency(catalog.vnf(*v), request.load, params))
        .collect()
}

/// Highest layer where the whole chain still meets its target at full speed.
pub fn star_layer(
    request: &Request,
    service: &ServiceSpec,
    catalog: &Catalog,
    topology: &Topology,
    params: &SystemParams,
) -> Result<usize> {
    let total: f64 = solo_sum(request, service, catalog, params)?.iter().sum();
    star_layer_for(total, service.target_delay, topology).ok_or(Error::InfeasibleRequest(request.id))
}

/// Binary search over layers; feasibility is monotone since `d` increases.
pub(crate) fn star_layer_for(solo_total: f64, target: f64, topology: &Topology) -> Option<usize> {
    let layers = topology.layers();
    let fits = |l: usize| solo_total <= target - layers[l].d;
    if layers.is_empty() || !fits(0) {
        return None;
    }
    let (mut lo, mut hi) = (0usize, layers.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Some(lo)
}

/// Splits `D^s - d_star` across the chain proportionally to solo latencies.
pub fn fair_allocation(
    request: &Request,
    service: &ServiceSpec,
    star: usize,
    catalog: &Catalog,
    topology: &Topology,
    params: &SystemParams,
) -> Result<DelayPlan> {
    let solo = solo_sum(request, service, catalog, params)?;
    let total: f64 = solo.iter().sum();
    let budget = service.target_delay - topology.layer(star).d;
    let budgets = solo.iter().map(|m| m / total * budget).collect();
    Ok(DelayPlan {
        request_id: request.id,
        star_layer: star,
        vnfs: service.vnfs.clone(),
        budgets,
        solo_latencies: solo,
    })
}

/// `star_layer` followed by `fair_allocation`.
pub fn plan_request(
    request: &Request,
    service: &ServiceSpec,
    catalog: &Catalog,
    topology: &Topology,
    params: &SystemParams,
) -> Result<DelayPlan> {
    let star = star_layer(request, service, catalog, topology, params)?;
    fair_allocation(request, service, star, catalog, topology, params)
}
