#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reshare::allocation::plan_request;
use reshare::engine::PlacementState;
use reshare::model::{
    Catalog, LayerSpec, NodeId, Reachability, Request, RequestId, ServiceId, ServiceSpec, SystemModel,
    SystemParams, Topology, VmId, VnfId, VnfSpec,
};
use reshare::scenario::{ScenarioFile, VerifyMode};
use reshare::sim::Simulation;
use reshare::workload::{EventKind, Lifetime};
use reshare::{Scenario, StrategyKind};

pub const SHIPPED: [&str; 4] = ["vehicular", "smart-factory", "materna-style", "tiny-oracle"];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

pub fn load(name: &str) -> Scenario {
    Scenario::load(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The same scenario with every request living forever.
pub fn arrival_only(sc: &Scenario) -> Scenario {
    let mut file: ScenarioFile = sc.file.clone();
    for p in &mut file.workload.phases {
        p.lifetime = Lifetime::Unbounded;
    }
    Scenario::from_file(file, ".").unwrap()
}

pub fn layer(index: usize, first_node: u32, nodes: u32, d: f64, kappa_f: f64) -> LayerSpec {
    LayerSpec {
        index,
        node_ids: (first_node..first_node + nodes).map(NodeId).collect(),
        d,
        kappa_f,
        kappa_p: kappa_f / 100.0,
    }
}

/// Outcome of replaying one workload while checking end-to-end latency.
#[derive(Debug, Default)]
pub struct FeasibilityReport {
    pub checks: u64,
    pub violations: Vec<String>,
}

fn vms_of(sim: &Simulation, id: RequestId) -> Vec<VmId> {
    sim.state().record(id).map(|r| r.jobs.iter().map(|j| j.vm).collect()).unwrap_or_default()
}

/// Replays `scenario` under `strategy`, re-checking after every event each
/// request whose VMs the event touched. A request's latency depends only on
/// the VMs hosting its jobs, so the others cannot have changed.
pub fn replay_checking_latency(sc: &Scenario, seed: u64, strategy: StrategyKind) -> FeasibilityReport {
    let w = sc.workload(seed).unwrap();
    let mut sim =
        Simulation::new(Arc::clone(&sc.model), strategy, sc.epsilon_star(), VerifyMode::Off, sc.horizon()).unwrap();
    let mut report = FeasibilityReport::default();
    let mut residents = Vec::new();
    for ev in &w.events {
        if ev.time > sc.horizon() {
            break;
        }
        let touched = match ev.kind {
            EventKind::Arrival => {
                sim.arrive(w.request(ev.request)).unwrap();
                vms_of(&sim, ev.request)
            }
            EventKind::Departure => {
                let vms = vms_of(&sim, ev.request);
                sim.depart(ev.request, ev.time).unwrap();
                vms
            }
        };
        residents.clear();
        for id in touched {
            if let Some(vm) = sim.state().vm(id) {
                residents.extend(vm.jobs.iter().map(|j| j.request));
            }
        }
        residents.sort_unstable();
        residents.dedup();
        for r in &residents {
            let rec = sim.state().record(*r).expect("resident request has a record");
            let e2e = sim.state().end_to_end(rec);
            report.checks += 1;
            if e2e > rec.target_delay * (1.0 + 1e-9) {
                report.violations.push(format!(
                    "{} seed {seed} {strategy} t={}: request {r} latency {e2e} > target {}",
                    sc.name(),
                    ev.time,
                    rec.target_delay
                ));
            }
        }
    }
    report
}

/// A small random system plus a batch of simultaneously active requests.
pub struct TinyInstance {
    pub model: Arc<SystemModel>,
    pub requests: Vec<Request>,
}

/// Draws an instance with at most `max_jobs` jobs and at most two layers.
/// Budgets land both inside the range scheme and above it.
pub fn tiny_instance(rng: &mut ChaCha8Rng, max_jobs: usize) -> TinyInstance {
    loop {
        let two_layers = rng.gen_bool(0.7);
        let leaves = rng.gen_range(1..=2u32);
        let mut layers = vec![layer(0, 0, leaves, 0.0, 7.5)];
        let d1 = rng.gen_range(0.01..0.1);
        if two_layers {
            layers.push(layer(1, leaves, 1, d1, 2.5));
        }
        let lambda_min = rng.gen_range(1.0..10.0);
        let thetas = [1.0, 2.0, 4.0];
        let vnfs: Vec<VnfSpec> = (0..rng.gen_range(1..=3))
            .map(|i| VnfSpec { vnf_id: format!("v{i}"), theta: thetas[rng.gen_range(0..thetas.len())] })
            .collect();
        let services: Vec<ServiceSpec> = (0..rng.gen_range(1..=3))
            .map(|i| {
                let len = rng.gen_range(1..=2usize.min(vnfs.len()));
                let mut chain: Vec<VnfId> = (0..vnfs.len() as u32).map(VnfId).collect();
                for k in 0..len {
                    let pick = rng.gen_range(k..chain.len());
                    chain.swap(k, pick);
                }
                chain.truncate(len);
                let slack = rng.gen_range(0.02..0.25);
                let target = if two_layers && rng.gen_bool(0.5) { d1 + slack } else { slack };
                ServiceSpec { service_id: format!("s{i}"), vnfs: chain, target_delay: target }
            })
            .collect();
        let topology = Topology::new(layers, Reachability::Full);
        let model = Arc::new(SystemModel {
            topology,
            catalog: Catalog { vnfs, services },
            params: SystemParams { mu_bar: 100.0, lambda_min },
        });
        let mut requests = Vec::new();
        let mut jobs = 0;
        let wanted = rng.gen_range(1..=max_jobs);
        let mut failed = false;
        while jobs < wanted {
            let service = ServiceId(rng.gen_range(0..model.catalog.services.len() as u32));
            let spec = model.catalog.service(service);
            if jobs + spec.vnfs.len() > max_jobs {
                break;
            }
            let max_theta = spec.vnfs.iter().map(|v| model.catalog.theta(*v)).fold(0.0, f64::max);
            let high = (2.0 * lambda_min).min(60.0 / max_theta);
            if high <= lambda_min {
                failed = true;
                break;
            }
            let r = Request {
                id: RequestId(requests.len() as u64),
                service,
                arrival: requests.len() as f64,
                duration: None,
                load: rng.gen_range(lambda_min..high),
                leaf: NodeId(rng.gen_range(0..leaves)),
            };
            if plan_request(&r, spec, &model.catalog, &model.topology, &model.params).is_err() {
                failed = true;
                break;
            }
            jobs += spec.vnfs.len();
            requests.push(r);
        }
        if !failed && !requests.is_empty() {
            return TinyInstance { model, requests };
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Places every request of `inst` with the range-pure engine at a fixed epsilon.
pub fn place_all(inst: &TinyInstance, epsilon: f64) -> PlacementState {
    let m = &inst.model;
    let scheme = reshare::ranges::RangeScheme::new(epsilon, m.params.mu_bar, m.params.lambda_min).unwrap();
    let mut st = PlacementState::new(Arc::clone(m));
    for r in &inst.requests {
        let plan = plan_request(r, m.catalog.service(r.service), &m.catalog, &m.topology, &m.params).unwrap();
        st.place_request(r, &plan, &scheme, 1).unwrap();
    }
    st
}
