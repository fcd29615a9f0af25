//! Event loop: drives one strategy through a workload, integrates cost over
//! time and records the metrics stream.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::adaptive::{Decision, EpsilonController};
use crate::allocation::{plan_request, DelayPlan};
use crate::baselines::relax_sota_place;
use crate::engine::{PlacementState, Vm};
use crate::error::{Error, Result};
use crate::model::{Request, RequestId, SystemModel};
use crate::ranges::RangeScheme;
use crate::scenario::{Scenario, VerifyMode};
use crate::shadow::ShadowLedger;
use crate::workload::{EventKind, Workload};

const LOAD_SCALE: f64 = 1e9;
const SAMPLE_EVERY: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrategyKind {
    /// Adaptive epsilon, starting from the scenario's epsilon*.
    Reshare,
    /// Fixed epsilon.
    CReshare(f64),
    /// Greedy marginal-cost proxy of the relaxation benchmark.
    RelaxSota,
    /// Only the shadow assignment at the given epsilon; its full-VM cost is the reported cost.
    ShadowOnly(Option<f64>),
    Oracle,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Reshare => write!(f, "reshare"),
            Self::CReshare(e) => write!(f, "c-reshare:{e}"),
            Self::RelaxSota => write!(f, "relax-sota"),
            Self::ShadowOnly(None) => write!(f, "shadow-only"),
            Self::ShadowOnly(Some(e)) => write!(f, "shadow-only:{e}"),
            Self::Oracle => write!(f, "oracle"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let eps = |a: &str| -> Result<f64> {
            match a.parse::<f64>() {
                Ok(e) if e > 0.0 && e.is_finite() => Ok(e),
                _ => Err(Error::Usage(format!("epsilon must be a positive number, got {a:?}"))),
            }
        };
        match (name, arg) {
            ("reshare", None) => Ok(Self::Reshare),
            ("c-reshare", Some(a)) => Ok(Self::CReshare(eps(a)?)),
            ("c-reshare", None) => Err(Error::Usage("c-reshare needs an epsilon, e.g. c-reshare:0.5".into())),
            ("relax-sota", None) => Ok(Self::RelaxSota),
            ("shadow-only", None) => Ok(Self::ShadowOnly(None)),
            ("shadow-only", Some(a)) => Ok(Self::ShadowOnly(Some(eps(a)?))),
            ("oracle", None) => Ok(Self::Oracle),
            _ => Err(Error::Usage(format!("unknown strategy {s:?}"))),
        }
    }
}

impl StrategyKind {
    /// Name used for output subdirectories.
    pub fn slug(&self) -> String {
        match self {
            Self::CReshare(e) => format!("c-reshare-{e}"),
            Self::ShadowOnly(Some(e)) => format!("shadow-only-{e}"),
            other => other.to_string(),
        }
    }

    fn uses_engine(&self) -> bool {
        matches!(self, Self::Reshare | Self::CReshare(_) | Self::RelaxSota)
    }
}

/// Capacity margin beyond what the loosest-deadline job on the VM needs.
pub fn pod_of_vm(vm: &Vm) -> Result<f64> {
    if vm.jobs.is_empty() {
        return Err(Error::EmptyVm(vm.id));
    }
    Ok((vm.speed - vm.theta * vm.load) - 1.0 / vm.max_budget())
}

/// Total PoD margin over total allocated speed; 0 without VMs.
pub fn pod_fraction(state: &PlacementState) -> f64 {
    let (mut pod, mut speed) = (0.0, 0.0);
    for vm in state.vms() {
        pod += pod_of_vm(vm).unwrap_or(0.0);
        speed += vm.speed;
    }
    if speed > 0.0 {
        pod / speed
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub time: f64,
    pub active_requests: usize,
    pub system_load: f64,
    pub phi: f64,
    pub cumulative_cost: f64,
    pub shadow_phi: f64,
    pub vm_count: usize,
    pub pod_fraction: f64,
    pub epsilon: f64,
    pub transition: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub time: f64,
    pub direction: Decision,
    pub from_epsilon: f64,
    pub to_epsilon: f64,
    pub from_level: u32,
    pub to_level: u32,
    pub system_load: f64,
    /// Shadow cost of the interval that just closed.
    pub shadow_cost: f64,
    /// Instantaneous cost of every engine VM at the transition.
    pub engine_cost: f64,
    /// Sum of archived shadow costs up to the closed level.
    pub archived_sum: f64,
    /// True while no request has left yet.
    pub arrival_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub strategy: String,
    pub label: String,
    pub seed: u64,
    pub horizon: f64,
    pub events: u64,
    pub arrivals: u64,
    pub departures: u64,
    pub cumulative_cost: f64,
    pub reference_shadow_cumulative: f64,
    pub final_phi: f64,
    pub final_epsilon: f64,
    pub peak_load: f64,
    pub peak_load_time: f64,
    pub pod_at_peak: f64,
    pub max_pod_fraction: f64,
    pub peak_vm_count: usize,
    pub work: u64,
    pub z: Option<f64>,
    pub transitions: Vec<Transition>,
    pub bound_violations: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub strategy: Option<StrategyKind>,
    pub seed: Option<u64>,
    pub verify: Option<VerifyMode>,
    pub epsilon_star: Option<f64>,
    /// Skip building the per-event metrics rows.
    pub no_metrics: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRecord>,
    pub summary: Summary,
}

impl RunOutput {
    pub fn metrics_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.metrics.is_empty() {
            w.write_record([
                "time",
                "active_requests",
                "system_load",
                "phi",
                "cumulative_cost",
                "shadow_phi",
                "vm_count",
                "pod_fraction",
                "epsilon",
                "transition",
            ])?;
        }
        for row in &self.metrics {
            w.serialize(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn summary_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.summary)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `metrics.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.csv"), self.metrics_csv()?)?;
        fs::write(dir.join("summary.json"), self.summary_json()?)?;
        Ok(())
    }
}

/// One strategy's live state, advanced event by event.
pub struct Simulation {
    model: Arc<SystemModel>,
    strategy: StrategyKind,
    epsilon_star: f64,
    verify: VerifyMode,
    horizon: f64,
    state: PlacementState,
    controller: Option<EpsilonController>,
    ledger: Option<ShadowLedger>,
    reference: ShadowLedger,
    schemes: Vec<RangeScheme>,
    base_epsilon: f64,
    level: u32,
    clock: f64,
    cumulative: f64,
    reference_cumulative: f64,
    load_units: u64,
    active: BTreeMap<RequestId, Request>,
    departed: bool,
    events: u64,
    arrivals: u64,
    departures: u64,
    transitions: Vec<Transition>,
    violations: Vec<String>,
    peak_load: f64,
    peak_load_time: f64,
    pod_at_peak: f64,
    max_pod: f64,
    peak_vms: usize,
    last_transition: &'static str,
}

impl Simulation {
    pub fn new(
        model: Arc<SystemModel>,
        strategy: StrategyKind,
        epsilon_star: f64,
        verify: VerifyMode,
        horizon: f64,
    ) -> Result<Self> {
        let p = model.params;
        let base_epsilon = match strategy {
            StrategyKind::CReshare(e) | StrategyKind::ShadowOnly(Some(e)) => e,
            StrategyKind::Oracle => {
                return Err(Error::Usage("the oracle is not an online strategy; use the oracle subcommand".into()))
            }
            _ => epsilon_star,
        };
        let first = RangeScheme::new(base_epsilon, p.mu_bar, p.lambda_min)?;
        let reference = ShadowLedger::new(Arc::clone(&model), 1, RangeScheme::new(epsilon_star, p.mu_bar, p.lambda_min)?);
        let controller = (strategy == StrategyKind::Reshare).then(|| EpsilonController::for_model(&model, epsilon_star));
        let ledger = matches!(strategy, StrategyKind::Reshare | StrategyKind::ShadowOnly(_))
            .then(|| ShadowLedger::new(Arc::clone(&model), 1, first));
        Ok(Self {
            state: PlacementState::new(Arc::clone(&model)),
            model,
            strategy,
            epsilon_star,
            verify,
            horizon,
            controller,
            ledger,
            reference,
            schemes: vec![first, first],
            base_epsilon,
            level: 1,
            clock: 0.0,
            cumulative: 0.0,
            reference_cumulative: 0.0,
            load_units: 0,
            active: BTreeMap::new(),
            departed: false,
            events: 0,
            arrivals: 0,
            departures: 0,
            transitions: Vec::new(),
            violations: Vec::new(),
            peak_load: 0.0,
            peak_load_time: 0.0,
            pod_at_peak: 0.0,
            max_pod: 0.0,
            peak_vms: 0,
            last_transition: "",
        })
    }

    pub fn state(&self) -> &PlacementState {
        &self.state
    }

    pub fn controller(&self) -> Option<&EpsilonController> {
        self.controller.as_ref()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn is_active(&self, id: RequestId) -> bool {
        self.active.contains_key(&id)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cumulative
    }

    pub fn system_load(&self) -> f64 {
        self.load_units as f64 / LOAD_SCALE
    }

    pub fn epsilon(&self) -> f64 {
        self.base_epsilon / 2f64.powi(self.level as i32 - 1)
    }

    /// Instantaneous cost of the strategy.
    pub fn phi(&self) -> f64 {
        match self.strategy {
            StrategyKind::ShadowOnly(_) => self.ledger.as_ref().map_or(0.0, |l| l.full_cost()),
            _ => self.state.phi(),
        }
    }

    pub fn vm_count(&self) -> usize {
        match self.strategy {
            StrategyKind::ShadowOnly(_) => self.ledger.as_ref().map_or(0, |l| l.full_vms() as usize),
            _ => self.state.vm_count(),
        }
    }

    pub fn pod_fraction(&self) -> f64 {
        pod_fraction(&self.state)
    }

    fn scheme(&mut self, level: u32) -> Result<RangeScheme> {
        while self.schemes.len() <= level as usize {
            let eps = self.base_epsilon / 2f64.powi(self.schemes.len() as i32 - 1);
            let p = self.model.params;
            self.schemes.push(RangeScheme::new(eps, p.mu_bar, p.lambda_min)?);
        }
        Ok(self.schemes[level as usize])
    }

    /// Integrates cost up to `time` (clamped to the horizon).
    pub fn advance_to(&mut self, time: f64) {
        let t = time.min(self.horizon);
        if t > self.clock {
            self.cumulative += self.phi() * (t - self.clock);
            self.reference_cumulative += self.reference.full_cost() * (t - self.clock);
            self.clock = t;
        }
    }

    pub fn arrive(&mut self, request: &Request) -> Result<()> {
        if self.active.contains_key(&request.id) {
            return Err(Error::Usage(format!("request {} is already active", request.id)));
        }
        if request.service.0 as usize >= self.model.catalog.services.len() {
            return Err(Error::Usage(format!("request {}: unknown service {}", request.id, request.service)));
        }
        if !self.model.topology.is_leaf(request.leaf) {
            return Err(Error::Usage(format!("request {}: node {} is not a leaf", request.id, request.leaf)));
        }
        self.advance_to(request.arrival);
        self.last_transition = "";
        let m = Arc::clone(&self.model);
        let service = m.catalog.service(request.service);
        let plan = plan_request(request, service, &m.catalog, &m.topology, &m.params)?;
        if self.verify != VerifyMode::Off {
            check_plan(&plan, service.target_delay, m.topology.layer(plan.star_layer).d)?;
        }
        match self.strategy {
            StrategyKind::Reshare | StrategyKind::CReshare(_) => {
                let level = self.level;
                let scheme = self.scheme(level)?;
                self.state.place_request(request, &plan, &scheme, level)?;
            }
            StrategyKind::RelaxSota => {
                relax_sota_place(&mut self.state, request, &plan)?;
            }
            StrategyKind::ShadowOnly(_) | StrategyKind::Oracle => {}
        }
        if let Some(l) = self.ledger.as_mut() {
            l.add(&plan, request.load);
        }
        self.reference.add(&plan, request.load);
        self.load_units += (request.load * LOAD_SCALE).round() as u64;
        self.active.insert(request.id, request.clone());
        self.arrivals += 1;
        self.after_event(request.arrival)
    }

    pub fn depart(&mut self, id: RequestId, time: f64) -> Result<()> {
        self.advance_to(time);
        self.last_transition = "";
        let request = self.active.remove(&id).ok_or(Error::UnknownRequest(id))?;
        if self.strategy.uses_engine() {
            self.state.remove_request(id)?;
        }
        if let Some(l) = self.ledger.as_mut() {
            if l.contains(id) {
                l.remove(id)?;
            }
        }
        self.reference.remove(id)?;
        self.load_units -= (request.load * LOAD_SCALE).round() as u64;
        self.departed = true;
        self.departures += 1;
        self.after_event(time)
    }

    fn after_event(&mut self, time: f64) -> Result<()> {
        self.events += 1;
        self.controller_step(time)?;
        let check_now = match self.verify {
            VerifyMode::Full => true,
            VerifyMode::Sampled => self.events.is_multiple_of(SAMPLE_EVERY),
            VerifyMode::Off => false,
        };
        if check_now && self.strategy.uses_engine() {
            self.state.check_invariants()?;
            if !self.departed && self.strategy != StrategyKind::RelaxSota {
                let schemes = self.schemes.clone();
                let base = self.base_epsilon;
                let p = self.model.params;
                let v = self.state.vm_bound_violations(|level| {
                    schemes.get(level as usize).copied().unwrap_or_else(|| {
                        RangeScheme::new(base / 2f64.powi(level as i32 - 1), p.mu_bar, p.lambda_min).expect("valid level")
                    })
                });
                self.violations.extend(v.into_iter().map(|s| format!("t={time}: {s}")));
            }
            if let Some(ledger) = &self.ledger {
                for rec in self.state.records() {
                    if let Some(layer) = ledger.layer_of(rec.request) {
                        if layer > rec.star_layer {
                            return Err(Error::Invariant(format!("shadow holds request {} above its layer", rec.request)));
                        }
                    }
                }
            }
        }
        let load = self.system_load();
        if load > self.peak_load {
            self.peak_load = load;
            self.peak_load_time = time;
            self.pod_at_peak = self.pod_fraction();
        }
        if self.strategy.uses_engine() {
            self.max_pod = self.max_pod.max(self.pod_fraction());
        }
        self.peak_vms = self.peak_vms.max(self.vm_count());
        Ok(())
    }

    fn controller_step(&mut self, time: f64) -> Result<()> {
        let Some(ctl) = self.controller.as_mut() else { return Ok(()) };
        let ledger = self.ledger.as_mut().expect("adaptive runs keep a ledger");
        let y = ledger.full_cost();
        let load = self.load_units as f64 / LOAD_SCALE;
        let from_level = ctl.level();
        let from_eps = ctl.epsilon();
        let decision = ctl.on_event(y, load);
        if decision == Decision::Keep {
            return Ok(());
        }
        let to_level = ctl.level();
        let to_eps = ctl.epsilon();
        let archived_sum = ctl.archived_sum(from_level);
        let scheme = self.scheme(to_level)?;
        let ledger = self.ledger.as_mut().expect("adaptive runs keep a ledger");
        ledger.reset(to_level, scheme);
        self.level = to_level;
        self.last_transition = match decision {
            Decision::DecreaseEps => "decrease",
            _ => "increase",
        };
        self.transitions.push(Transition {
            time,
            direction: decision,
            from_epsilon: from_eps,
            to_epsilon: to_eps,
            from_level,
            to_level,
            system_load: load,
            shadow_cost: y,
            engine_cost: self.state.phi(),
            archived_sum,
            arrival_only: !self.departed,
        });
        Ok(())
    }

    pub fn record(&self) -> MetricsRecord {
        MetricsRecord {
            time: self.clock,
            active_requests: self.active.len(),
            system_load: self.system_load(),
            phi: self.phi(),
            cumulative_cost: self.cumulative,
            shadow_phi: self.reference.full_cost(),
            vm_count: self.vm_count(),
            pod_fraction: self.pod_fraction(),
            epsilon: self.epsilon(),
            transition: self.last_transition,
        }
    }

    pub fn summary(&self, scenario: &str, seed: u64) -> Summary {
        let label = match self.strategy {
            StrategyKind::RelaxSota => "relax-sota (greedy marginal-cost proxy)".to_string(),
            other => other.to_string(),
        };
        Summary {
            scenario: scenario.to_string(),
            strategy: self.strategy.to_string(),
            label,
            seed,
            horizon: self.horizon,
            events: self.events,
            arrivals: self.arrivals,
            departures: self.departures,
            cumulative_cost: self.cumulative,
            reference_shadow_cumulative: self.reference_cumulative,
            final_phi: self.phi(),
            final_epsilon: self.epsilon(),
            peak_load: self.peak_load,
            peak_load_time: self.peak_load_time,
            pod_at_peak: self.pod_at_peak,
            max_pod_fraction: self.max_pod,
            peak_vm_count: self.peak_vms,
            work: self.state.work(),
            z: self.controller.as_ref().map(|c| c.z()),
            transitions: self.transitions.clone(),
            bound_violations: self.violations.clone(),
        }
    }

    pub fn epsilon_star(&self) -> f64 {
        self.epsilon_star
    }
}

fn check_plan(plan: &DelayPlan, target: f64, d: f64) -> Result<()> {
    let sum: f64 = plan.budgets.iter().sum();
    let expect = target - d;
    if (sum - expect).abs() > 1e-9 * expect.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Invariant(format!(
            "request {}: budgets sum to {sum}, expected {expect}",
            plan.request_id
        )));
    }
    Ok(())
}

/// Runs one strategy over a pre-built workload.
pub fn run_workload(
    scenario: &Scenario,
    workload: &Workload,
    strategy: StrategyKind,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutput> {
    let eps_star = opts.epsilon_star.unwrap_or(scenario.epsilon_star());
    let verify = opts.verify.unwrap_or(scenario.file.output.verify);
    let horizon = scenario.horizon();
    let mut sim = Simulation::new(Arc::clone(&scenario.model), strategy, eps_star, verify, horizon)?;
    let mut metrics = Vec::new();
    for ev in &workload.events {
        if ev.time > horizon {
            break;
        }
        match ev.kind {
            EventKind::Arrival => sim.arrive(workload.request(ev.request))?,
            EventKind::Departure => sim.depart(ev.request, ev.time)?,
        }
        if !opts.no_metrics {
            metrics.push(sim.record());
        }
    }
    sim.advance_to(horizon);
    sim.last_transition = "";
    if !opts.no_metrics {
        metrics.push(sim.record());
    }
    if verify != VerifyMode::Off && sim.strategy.uses_engine() {
        sim.state.check_invariants()?;
    }
    Ok(RunOutput { metrics, summary: sim.summary(scenario.name(), seed) })
}

/// Generates the scenario's workload and runs one strategy over it.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let strategy = match opts.strategy {
        Some(s) => s,
        None => scenario.file.strategy.kind.parse()?,
    };
    let seed = opts.seed.unwrap_or(scenario.seed());
    let workload = scenario.workload(seed)?;
    run_workload(scenario, &workload, strategy, seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{HostedJob, RangeKey};
    use crate::model::{NodeId, VmId, VnfId};

    fn vm(jobs: &[(f64, f64)], theta: f64) -> Vm {
        let mut st = PlacementState::new(Arc::new(SystemModel {
            topology: crate::model::tests::three_layer(),
            catalog: crate::model::Catalog {
                vnfs: vec![crate::model::VnfSpec { vnf_id: "v".into(), theta }],
                services: vec![],
            },
            params: crate::model::SystemParams { mu_bar: 100.0, lambda_min: 1.0 },
        }));
        let key = RangeKey { level: 1, index: 0 };
        let h = |i: usize, (load, d): (f64, f64)| HostedJob { request: RequestId(i as u64), delay_budget: d, load };
        let id = st.open_vm(NodeId(0), 0, VnfId(0), key, h(0, jobs[0]));
        for (i, j) in jobs.iter().enumerate().skip(1) {
            st.add_to_vm(id, h(i, *j));
        }
        st.vm(id).unwrap().clone()
    }

    #[test]
    fn pod_examples() {
        assert!(pod_of_vm(&vm(&[(10.0, 0.1)], 1.0)).unwrap().abs() < 1e-12);
        let mixed = vm(&[(10.0, 0.05), (20.0, 0.1)], 1.0);
        assert!((mixed.speed - 50.0).abs() < 1e-9);
        assert!((pod_of_vm(&mixed).unwrap() - 10.0).abs() < 1e-9);
        assert!(pod_of_vm(&vm(&[(10.0, 0.1), (5.0, 0.1), (7.0, 0.1)], 2.0)).unwrap().abs() < 1e-9);
        let mut empty = mixed.clone();
        empty.jobs.clear();
        empty.id = VmId(9);
        assert!(matches!(pod_of_vm(&empty), Err(Error::EmptyVm(VmId(9)))));
    }

    #[test]
    fn strategy_selectors() {
        assert_eq!("reshare".parse::<StrategyKind>().unwrap(), StrategyKind::Reshare);
        assert_eq!("c-reshare:0.25".parse::<StrategyKind>().unwrap(), StrategyKind::CReshare(0.25));
        assert_eq!("shadow-only".parse::<StrategyKind>().unwrap(), StrategyKind::ShadowOnly(None));
        assert_eq!("relax-sota".parse::<StrategyKind>().unwrap(), StrategyKind::RelaxSota);
        assert!("c-reshare:0".parse::<StrategyKind>().is_err());
        assert!("c-reshare".parse::<StrategyKind>().is_err());
        assert!("greedy".parse::<StrategyKind>().is_err());
        assert_eq!(StrategyKind::CReshare(0.5).slug(), "c-reshare-0.5");
    }
}
