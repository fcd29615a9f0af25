//! Range-pure best-fit packing engine (c-REShare): layer and node choice per
//! request, best-fit VM assignment per job and exact speed management.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::allocation::DelayPlan;
use crate::error::{Error, Result};
use crate::model::{NodeId, Request, RequestId, ServiceId, SystemModel, VmId, VnfId};
use crate::ranges::RangeScheme;

const REL_TOL: f64 = 1e-9;

/// Which packing class a VM belongs to: epsilon level and range index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RangeKey {
    pub level: u32,
    pub index: u32,
}

impl RangeKey {
    /// Key shared by all VMs of strategies that ignore latency ranges.
    pub const UNRANGED: RangeKey = RangeKey { level: u32::MAX, index: u32::MAX };

    pub fn is_unranged(&self) -> bool {
        *self == Self::UNRANGED
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HostedJob {
    pub request: RequestId,
    pub delay_budget: f64,
    pub load: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vm {
    pub id: VmId,
    pub node: NodeId,
    pub layer: usize,
    pub vnf: VnfId,
    pub theta: f64,
    pub range_key: RangeKey,
    pub jobs: Vec<HostedJob>,
    pub speed: f64,
    /// Sum of hosted request loads.
    pub load: f64,
    min_budget: f64,
    max_budget: f64,
}

impl Vm {
    pub fn min_budget(&self) -> f64 {
        self.min_budget
    }

    pub fn max_budget(&self) -> f64 {
        self.max_budget
    }

    /// Processing latency every hosted job sees.
    pub fn latency(&self) -> f64 {
        1.0 / (self.speed - self.theta * self.load)
    }

    /// Full-speed viability test for adding a job.
    pub fn admits(&self, mu_bar: f64, load: f64, budget: f64) -> bool {
        let rem = mu_bar - self.theta * (self.load + load);
        rem > 0.0 && 1.0 / rem <= budget && 1.0 / rem <= self.min_budget
    }

    /// Speed the VM would need after adding a job.
    pub fn speed_with(&self, load: f64, budget: f64) -> f64 {
        self.theta * (self.load + load) + 1.0 / self.min_budget.min(budget)
    }

    fn refresh(&mut self) {
        self.load = self.jobs.iter().map(|j| j.load).sum();
        self.min_budget = self.jobs.iter().map(|j| j.delay_budget).fold(f64::INFINITY, f64::min);
        self.max_budget = self.jobs.iter().map(|j| j.delay_budget).fold(0.0, f64::max);
        self.speed = self.theta * self.load + 1.0 / self.min_budget;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JobPlacement {
    pub vnf: VnfId,
    pub vm: VmId,
    pub delay_budget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementRecord {
    pub request: RequestId,
    pub service: ServiceId,
    pub load: f64,
    pub star_layer: usize,
    pub target_delay: f64,
    pub jobs: Vec<JobPlacement>,
}

type BucketKey = (NodeId, VnfId, RangeKey);

/// Copy of the fields the best-fit scan reads, kept contiguous per bucket so
/// the scan never leaves the bucket's own array.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Slot {
    id: VmId,
    load: f64,
    min_budget: f64,
}

impl Slot {
    fn of(vm: &Vm) -> Self {
        Slot { id: vm.id, load: vm.load, min_budget: vm.min_budget }
    }
}

/// All live VMs of one strategy plus lookup indices.
#[derive(Clone, Debug)]
pub struct PlacementState {
    model: Arc<SystemModel>,
    vms: BTreeMap<VmId, Vm>,
    buckets: BTreeMap<BucketKey, Vec<Slot>>,
    node_load: BTreeMap<NodeId, (f64, usize)>,
    requests: BTreeMap<RequestId, PlacementRecord>,
    next_vm: u64,
    phi: f64,
    work: u64,
}

impl PlacementState {
    pub fn new(model: Arc<SystemModel>) -> Self {
        Self {
            model,
            vms: BTreeMap::new(),
            buckets: BTreeMap::new(),
            node_load: BTreeMap::new(),
            requests: BTreeMap::new(),
            next_vm: 0,
            phi: 0.0,
            work: 0,
        }
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn vms(&self) -> impl Iterator<Item = &Vm> {
        self.vms.values()
    }

    pub fn vm(&self, id: VmId) -> Option<&Vm> {
        self.vms.get(&id)
    }

    pub fn vm_count(&self) -> usize {
        self.vms.len()
    }

    pub fn record(&self, id: RequestId) -> Option<&PlacementRecord> {
        self.requests.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &PlacementRecord> {
        self.requests.values()
    }

    pub fn active_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn node_load(&self, node: NodeId) -> f64 {
        self.node_load.get(&node).map_or(0.0, |(l, _)| *l)
    }

    /// VM ids of one bucket, ascending.
    pub fn bucket(&self, node: NodeId, vnf: VnfId, key: RangeKey) -> impl Iterator<Item = VmId> + '_ {
        self.buckets.get(&(node, vnf, key)).into_iter().flatten().map(|s| s.id)
    }

    /// Instantaneous cost rate, maintained incrementally.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Instantaneous cost rate recomputed from every VM.
    pub fn phi_recomputed(&self) -> f64 {
        self.vms.values().map(|vm| self.vm_cost(vm)).sum()
    }

    /// Number of elementary steps (VM viability checks, node comparisons) taken so far.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn vm_cost(&self, vm: &Vm) -> f64 {
        let layer = self.model.topology.layer(vm.layer);
        layer.kappa_f + layer.kappa_p * vm.speed
    }

    /// Reachable node at `layer` with the lowest aggregate load; ties to the lowest id.
    pub fn choose_node(&mut self, leaf: NodeId, layer: usize) -> Option<NodeId> {
        let model = Arc::clone(&self.model);
        let mut best: Option<(f64, NodeId)> = None;
        for &node in model.topology.reachable(leaf, layer) {
            self.work += 1;
            let load = self.node_load(node);
            if best.is_none_or(|(l, _)| load < l) {
                best = Some((load, node));
            }
        }
        best.map(|(_, n)| n)
    }

    /// Places every job of `request` on one node at its highest feasible layer.
    pub fn place_request(
        &mut self,
        request: &Request,
        plan: &DelayPlan,
        scheme: &RangeScheme,
        level: u32,
    ) -> Result<&PlacementRecord> {
        let node = self
            .choose_node(request.leaf, plan.star_layer)
            .ok_or(Error::InfeasibleRequest(request.id))?;
        let mut jobs = Vec::with_capacity(plan.vnfs.len());
        for (vnf, budget) in plan.iter() {
            let key = RangeKey { level, index: scheme.clamped_index(budget) };
            let hosted = HostedJob { request: request.id, delay_budget: budget, load: request.load };
            let vm = self.assign_job(hosted, vnf, node, plan.star_layer, key);
            jobs.push(JobPlacement { vnf, vm, delay_budget: budget });
        }
        Ok(self.insert_record(request, plan.star_layer, jobs))
    }

    /// Best-fit assignment within one (node, vnf, range) bucket, or a new VM.
    pub fn assign_job(&mut self, job: HostedJob, vnf: VnfId, node: NodeId, layer: usize, key: RangeKey) -> VmId {
        let mu_bar = self.model.params.mu_bar;
        let theta = self.model.catalog.theta(vnf);
        let mut best: Option<(f64, VmId)> = None;
        if let Some(slots) = self.buckets.get(&(node, vnf, key)) {
            self.work += slots.len() as u64;
            for s in slots {
                // same test as Vm::admits
                let rem = mu_bar - theta * (s.load + job.load);
                let ok = rem > 0.0 && 1.0 / rem <= job.delay_budget && 1.0 / rem <= s.min_budget;
                if ok && best.is_none_or(|(l, _)| s.load > l) {
                    best = Some((s.load, s.id));
                }
            }
        }
        match best {
            Some((_, id)) => {
                self.add_to_vm(id, job);
                id
            }
            None => self.open_vm(node, layer, vnf, key, job),
        }
    }

    pub(crate) fn open_vm(&mut self, node: NodeId, layer: usize, vnf: VnfId, key: RangeKey, job: HostedJob) -> VmId {
        let id = VmId(self.next_vm);
        self.next_vm += 1;
        let theta = self.model.catalog.theta(vnf);
        let mut vm = Vm {
            id,
            node,
            layer,
            vnf,
            theta,
            range_key: key,
            jobs: vec![job],
            speed: 0.0,
            load: 0.0,
            min_budget: 0.0,
            max_budget: 0.0,
        };
        vm.refresh();
        self.phi += self.vm_cost(&vm);
        let entry = self.node_load.entry(node).or_insert((0.0, 0));
        entry.0 += theta * job.load;
        entry.1 += 1;
        self.buckets.entry((node, vnf, key)).or_default().push(Slot::of(&vm));
        self.vms.insert(id, vm);
        id
    }

    pub(crate) fn add_to_vm(&mut self, id: VmId, job: HostedJob) {
        let mut vm = self.vms.remove(&id).expect("vm exists");
        let before = self.vm_cost(&vm);
        vm.jobs.push(job);
        vm.load += job.load;
        vm.min_budget = vm.min_budget.min(job.delay_budget);
        vm.max_budget = vm.max_budget.max(job.delay_budget);
        vm.speed = vm.theta * vm.load + 1.0 / vm.min_budget;
        self.phi += self.vm_cost(&vm) - before;
        let entry = self.node_load.entry(vm.node).or_insert((0.0, 0));
        entry.0 += vm.theta * job.load;
        entry.1 += 1;
        self.sync_slot(&vm);
        self.vms.insert(id, vm);
    }

    fn sync_slot(&mut self, vm: &Vm) {
        if let Some(slots) = self.buckets.get_mut(&(vm.node, vm.vnf, vm.range_key)) {
            if let Some(s) = slots.iter_mut().find(|s| s.id == vm.id) {
                *s = Slot::of(vm);
            }
        }
    }

    pub(crate) fn insert_record(&mut self, request: &Request, star_layer: usize, jobs: Vec<JobPlacement>) -> &PlacementRecord {
        let target_delay = self.model.catalog.service(request.service).target_delay;
        let record = PlacementRecord {
            request: request.id,
            service: request.service,
            load: request.load,
            star_layer,
            target_delay,
            jobs,
        };
        self.requests.insert(request.id, record);
        &self.requests[&request.id]
    }

    /// Removes every job of a request; empty VMs are destroyed. Returns the
    /// drop in instantaneous cost.
    pub fn remove_request(&mut self, id: RequestId) -> Result<f64> {
        let record = self.requests.remove(&id).ok_or(Error::UnknownRequest(id))?;
        let before = self.phi;
        for jp in &record.jobs {
            let mut vm = self.vms.remove(&jp.vm).expect("placed vm exists");
            let old_cost = self.vm_cost(&vm);
            let pos = vm.jobs.iter().position(|j| j.request == id).expect("job hosted on vm");
            let job = vm.jobs.remove(pos);
            if let Some((l, n)) = self.node_load.get_mut(&vm.node) {
                *l -= vm.theta * job.load;
                *n -= 1;
                if *n == 0 {
                    self.node_load.remove(&vm.node);
                }
            }
            if vm.jobs.is_empty() {
                self.phi -= old_cost;
                let key = (vm.node, vm.vnf, vm.range_key);
                if let Some(slots) = self.buckets.get_mut(&key) {
                    slots.retain(|s| s.id != vm.id);
                    if slots.is_empty() {
                        self.buckets.remove(&key);
                    }
                }
            } else {
                vm.refresh();
                self.phi += self.vm_cost(&vm) - old_cost;
                self.sync_slot(&vm);
                self.vms.insert(vm.id, vm);
            }
        }
        if self.vms.is_empty() {
            self.phi = 0.0;
        }
        Ok(before - self.phi)
    }

    /// End-to-end latency of a placed request: highest forwarding latency used
    /// plus the processing latency of every job.
    pub fn end_to_end(&self, record: &PlacementRecord) -> f64 {
        let topo = &self.model.topology;
        let mut d: f64 = 0.0;
        let mut proc = 0.0;
        for jp in &record.jobs {
            let vm = &self.vms[&jp.vm];
            d = d.max(topo.layer(vm.layer).d);
            proc += vm.latency();
        }
        d + proc
    }

    /// Checks every structural and latency invariant; the first breach is returned.
    pub fn check_invariants(&self) -> Result<()> {
        let mu_bar = self.model.params.mu_bar;
        let fail = |msg: String| Err(Error::Invariant(msg));
        let mut seen_jobs = 0usize;
        for vm in self.vms.values() {
            if vm.jobs.is_empty() {
                return fail(format!("vm {} is empty but alive", vm.id));
            }
            if vm.speed > mu_bar * (1.0 + REL_TOL) {
                return fail(format!("vm {} speed {} exceeds mu_bar {mu_bar}", vm.id, vm.speed));
            }
            let load: f64 = vm.jobs.iter().map(|j| j.load).sum();
            if (load - vm.load).abs() > REL_TOL * load.max(1.0) {
                return fail(format!("vm {} load {} != hosted sum {load}", vm.id, vm.load));
            }
            if !(vm.theta * vm.load < vm.speed) {
                return fail(format!("vm {} unstable", vm.id));
            }
            let min_d = vm.jobs.iter().map(|j| j.delay_budget).fold(f64::INFINITY, f64::min);
            let exact = vm.theta * load + 1.0 / min_d;
            if (exact - vm.speed).abs() > REL_TOL * exact {
                return fail(format!("vm {} speed {} != exact {exact}", vm.id, vm.speed));
            }
            let latency = vm.latency();
            for job in &vm.jobs {
                if latency > job.delay_budget * (1.0 + REL_TOL) {
                    return fail(format!(
                        "vm {} latency {latency} exceeds budget {} of request {}",
                        vm.id, job.delay_budget, job.request
                    ));
                }
                let Some(rec) = self.requests.get(&job.request) else {
                    return fail(format!("vm {} hosts unknown request {}", vm.id, job.request));
                };
                if !rec.jobs.iter().any(|jp| jp.vm == vm.id && jp.vnf == vm.vnf) {
                    return fail(format!("request {} does not point at vm {}", job.request, vm.id));
                }
                if !vm.range_key.is_unranged() {
                    // Range purity is enforced by construction; the key must match the record's layer too.
                    if rec.star_layer != vm.layer {
                        return fail(format!("vm {} layer differs from request {} layer", vm.id, job.request));
                    }
                }
            }
            seen_jobs += vm.jobs.len();
            match self.buckets.get(&(vm.node, vm.vnf, vm.range_key)).and_then(|b| b.iter().find(|s| s.id == vm.id)) {
                None => return fail(format!("vm {} missing from its bucket", vm.id)),
                Some(s) if *s != Slot::of(vm) => return fail(format!("vm {} bucket entry is stale", vm.id)),
                Some(_) => {}
            }
        }
        let indexed: usize = self.buckets.values().map(|b| b.len()).sum();
        if indexed != self.vms.len() {
            return fail(format!("bucket index holds {indexed} vms, state has {}", self.vms.len()));
        }
        let mut placed = 0usize;
        for rec in self.requests.values() {
            placed += rec.jobs.len();
            let e2e = self.end_to_end(rec);
            if e2e > rec.target_delay * (1.0 + REL_TOL) {
                return fail(format!(
                    "request {} end-to-end latency {e2e} exceeds target {}",
                    rec.request, rec.target_delay
                ));
            }
        }
        if placed != seen_jobs {
            return fail(format!("{placed} jobs recorded, {seen_jobs} hosted"));
        }
        let recomputed = self.phi_recomputed();
        if (recomputed - self.phi).abs() > REL_TOL * recomputed.max(1.0) {
            return fail(format!("incremental cost {} != recomputed {recomputed}", self.phi));
        }
        Ok(())
    }

    /// Per-bucket VM-count bound of best-fit packing under arrivals only.
    /// `scheme_of` maps an epsilon level to its range scheme.
    pub fn vm_bound_violations(&self, scheme_of: impl Fn(u32) -> RangeScheme) -> Vec<String> {
        let mut out = Vec::new();
        for ((node, vnf, key), slots) in &self.buckets {
            if key.is_unranged() {
                continue;
            }
            let scheme = scheme_of(key.level);
            let theta = self.model.catalog.theta(*vnf);
            let load: f64 = slots.iter().map(|s| s.load).sum();
            let bound = 2.0 * theta * load / scheme.capacity(key.index) + 1.0;
            if slots.len() as f64 > bound * (1.0 + REL_TOL) {
                out.push(format!(
                    "node {node} vnf {vnf} level {} range {}: {} vms > bound {bound}",
                    key.level,
                    key.index,
                    slots.len()
                ));
            }
        }
        out
    }

    /// Bucket keys currently in use.
    pub fn bucket_keys(&self) -> impl Iterator<Item = &(NodeId, VnfId, RangeKey)> {
        self.buckets.keys()
    }
}
