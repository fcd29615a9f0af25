//! Exhaustive optimum for tiny instances: every layer choice, and per
//! (layer, vnf) group every set partition into VMs at the cheapest feasible speed.

use std::collections::HashMap;

use serde::Serialize;

use crate::allocation::plan_request;
use crate::error::{Error, Result};
use crate::model::{LayerSpec, Request, RequestId, SystemModel, VnfId};

pub const DEFAULT_MAX_JOBS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleJob {
    pub request: RequestId,
    pub vnf: VnfId,
    pub theta: f64,
    pub load: f64,
    pub delay_budget: f64,
    /// Highest layer the job may use; every layer from 0 up to it is a candidate.
    pub max_layer: usize,
}

#[derive(Clone, Debug)]
pub struct OracleInstance {
    pub jobs: Vec<OracleJob>,
    pub layers: Vec<LayerSpec>,
    pub mu_bar: f64,
    /// Keep all jobs of one request on one layer.
    pub per_request_layers: bool,
    pub max_jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleBlock {
    pub layer: usize,
    pub vnf: VnfId,
    /// Indices into the instance's job list.
    pub jobs: Vec<usize>,
    pub speed: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSolution {
    pub cost: f64,
    pub blocks: Vec<OracleBlock>,
}

impl OracleInstance {
    pub fn new(jobs: Vec<OracleJob>, layers: Vec<LayerSpec>, mu_bar: f64) -> Self {
        Self { jobs, layers, mu_bar, per_request_layers: true, max_jobs: DEFAULT_MAX_JOBS }
    }

    /// Builds the instance for a set of simultaneously active requests.
    pub fn from_requests(model: &SystemModel, requests: &[Request]) -> Result<Self> {
        let mut jobs = Vec::new();
        for r in requests {
            let service = model.catalog.service(r.service);
            let plan = plan_request(r, service, &model.catalog, &model.topology, &model.params)?;
            for (vnf, budget) in plan.iter() {
                jobs.push(OracleJob {
                    request: r.id,
                    vnf,
                    theta: model.catalog.theta(vnf),
                    load: r.load,
                    delay_budget: budget,
                    max_layer: plan.star_layer,
                });
            }
        }
        Ok(Self::new(jobs, model.topology.layers().to_vec(), model.params.mu_bar))
    }

    fn block_cost(&self, layer: usize, members: &[usize]) -> Option<(f64, f64)> {
        let theta = self.jobs[members[0]].theta;
        let load: f64 = members.iter().map(|&i| self.jobs[i].load).sum();
        let min_d = members.iter().map(|&i| self.jobs[i].delay_budget).fold(f64::INFINITY, f64::min);
        let speed = theta * load + 1.0 / min_d;
        if speed > self.mu_bar {
            return None;
        }
        let l = &self.layers[layer];
        Some((speed, l.kappa_f + l.kappa_p * speed))
    }
}

/// Calls `visit` once per set partition of `items` (restricted growth order).
pub fn for_each_partition(items: &[usize], mut visit: impl FnMut(&[Vec<usize>])) {
    fn rec(items: &[usize], k: usize, blocks: &mut Vec<Vec<usize>>, visit: &mut dyn FnMut(&[Vec<usize>])) {
        if k == items.len() {
            visit(blocks);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(items[k]);
            rec(items, k + 1, blocks, visit);
            blocks[b].pop();
        }
        blocks.push(vec![items[k]]);
        rec(items, k + 1, blocks, visit);
        blocks.pop();
    }
    rec(items, 0, &mut Vec::new(), &mut visit);
}

type GroupBest = Option<(f64, Vec<(Vec<usize>, f64, f64)>)>;

fn best_group(inst: &OracleInstance, layer: usize, members: &[usize]) -> GroupBest {
    let mut best: GroupBest = None;
    for_each_partition(members, |blocks| {
        let mut total = 0.0;
        let mut detail = Vec::with_capacity(blocks.len());
        for b in blocks {
            match inst.block_cost(layer, b) {
                Some((speed, cost)) => {
                    total += cost;
                    detail.push((b.clone(), speed, cost));
                }
                None => return,
            }
        }
        if best.as_ref().is_none_or(|(c, _)| total < *c) {
            best = Some((total, detail));
        }
    });
    best
}

/// Minimum instantaneous cost over every feasible assignment.
pub fn oracle_optimal_cost(inst: &OracleInstance) -> Result<OracleSolution> {
    let n = inst.jobs.len();
    if n > inst.max_jobs || n > 63 {
        return Err(Error::InstanceTooLarge { jobs: n, limit: inst.max_jobs.min(63) });
    }
    if n == 0 {
        return Ok(OracleSolution { cost: 0.0, blocks: Vec::new() });
    }
    // Units that move between layers together: whole requests or single jobs.
    let mut units: Vec<Vec<usize>> = Vec::new();
    if inst.per_request_layers {
        let mut by_req: Vec<(RequestId, Vec<usize>)> = Vec::new();
        for (i, j) in inst.jobs.iter().enumerate() {
            match by_req.iter_mut().find(|(r, _)| *r == j.request) {
                Some((_, v)) => v.push(i),
                None => by_req.push((j.request, vec![i])),
            }
        }
        units = by_req.into_iter().map(|(_, v)| v).collect();
    } else {
        units.extend((0..n).map(|i| vec![i]));
    }
    let max_layer: Vec<usize> = units
        .iter()
        .map(|u| u.iter().map(|&i| inst.jobs[i].max_layer).min().unwrap_or(0).min(inst.layers.len() - 1))
        .collect();

    let mut memo: HashMap<(usize, u64), GroupBest> = HashMap::new();
    let mut choice = vec![0usize; units.len()];
    let mut best: Option<(f64, Vec<OracleBlock>)> = None;
    loop {
        let mut groups: Vec<((usize, VnfId), u64)> = Vec::new();
        for (u, &layer) in units.iter().zip(&choice) {
            for &i in u {
                let key = (layer, inst.jobs[i].vnf);
                match groups.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, m)) => *m |= 1 << i,
                    None => groups.push((key, 1 << i)),
                }
            }
        }
        groups.sort_by_key(|(k, _)| *k);
        let mut total = 0.0;
        let mut blocks = Vec::new();
        let mut feasible = true;
        for ((layer, vnf), mask) in &groups {
            let entry = memo.entry((*layer, *mask)).or_insert_with(|| {
                let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                best_group(inst, *layer, &members)
            });
            match entry {
                Some((cost, detail)) => {
                    total += *cost;
                    blocks.extend(detail.iter().map(|(jobs, speed, cost)| OracleBlock {
                        layer: *layer,
                        vnf: *vnf,
                        jobs: jobs.clone(),
                        speed: *speed,
                        cost: *cost,
                    }));
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible && best.as_ref().is_none_or(|(c, _)| total < *c) {
            best = Some((total, blocks));
        }
        // Next layer assignment, odometer style.
        let mut k = 0;
        loop {
            if k == choice.len() {
                return best.map(|(cost, blocks)| OracleSolution { cost, blocks }).ok_or(Error::Infeasible);
            }
            if choice[k] < max_layer[k] {
                choice[k] += 1;
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}
