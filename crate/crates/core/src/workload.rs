//! Synthetic request streams from phase plans, and CSV trace ingestion.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeId, Request, RequestId, ServiceId, SystemModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    /// Evenly spaced arrivals, `1/rate` apart, starting at the phase start.
    #[default]
    Periodic,
    Poisson,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lifetime {
    #[default]
    Unbounded,
    Fixed {
        duration: f64,
    },
    Exponential {
        mean: f64,
    },
    /// The phase's requests leave in arrival order, `rate` per second from `start`.
    Drain {
        start: f64,
        rate: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadDist {
    Uniform { low: f64, high: f64 },
    Fixed { value: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafPolicy {
    #[default]
    RoundRobin,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixEntry {
    pub service: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start: f64,
    pub end: f64,
    /// Requests per second.
    pub arrival_rate: f64,
    #[serde(default)]
    pub process: Process,
    /// Exact number of arrivals; defaults to `rate * (end - start)` for periodic phases.
    #[serde(default)]
    pub count: Option<u64>,
    #[serde(default)]
    pub lifetime: Lifetime,
    pub service_mix: Vec<MixEntry>,
    /// Defaults to uniform in `[lambda_min, 2 lambda_min]`.
    #[serde(default)]
    pub load: Option<LoadDist>,
    #[serde(default)]
    pub leaves: LeafPolicy,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<Phase>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Departure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub request: RequestId,
}

/// Requests indexed by id, plus the ordered event list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Workload {
    pub requests: Vec<Request>,
    pub events: Vec<Event>,
}

impl Workload {
    pub fn request(&self, id: RequestId) -> &Request {
        &self.requests[id.0 as usize]
    }

    pub fn arrivals(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Arrival).count()
    }

    pub fn departures(&self) -> usize {
        self.events.len() - self.arrivals()
    }

    /// Orders requests by arrival, assigns ids and builds the event list.
    pub fn from_requests(mut requests: Vec<Request>) -> Self {
        requests.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
        let mut events = Vec::with_capacity(requests.len() * 2);
        for (i, r) in requests.iter_mut().enumerate() {
            r.id = RequestId(i as u64);
            events.push(Event { time: r.arrival, kind: EventKind::Arrival, request: r.id });
            if let Some(t) = r.departure() {
                events.push(Event { time: t, kind: EventKind::Departure, request: r.id });
            }
        }
        events.sort_by(event_order);
        Self { requests, events }
    }
}

/// Total order: time, then arrivals before departures, then request id.
pub fn event_order(a: &Event, b: &Event) -> Ordering {
    a.time
        .total_cmp(&b.time)
        .then(a.kind.cmp(&b.kind))
        .then(a.request.cmp(&b.request))
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidPlan(msg.into())
}

impl PhasePlan {
    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        let mut last_end = f64::NEG_INFINITY;
        for (i, p) in self.phases.iter().enumerate() {
            let at = |m: &str| invalid(format!("phase {i}: {m}"));
            if !(p.start.is_finite() && p.end.is_finite() && p.end >= p.start) {
                return Err(at("end must not precede start"));
            }
            if p.start < last_end {
                return Err(at("phases overlap or are out of order"));
            }
            last_end = p.end;
            if !(p.arrival_rate >= 0.0) {
                return Err(at("arrival rate must be >= 0"));
            }
            if p.process == Process::Poisson && p.count.is_some() && p.arrival_rate == 0.0 {
                return Err(at("poisson phase with a count needs a positive rate"));
            }
            match p.lifetime {
                Lifetime::Fixed { duration } if !(duration > 0.0) => return Err(at("duration must be > 0")),
                Lifetime::Exponential { mean } if !(mean > 0.0) => return Err(at("mean lifetime must be > 0")),
                Lifetime::Drain { start, rate } if !(rate > 0.0) || start < p.start => {
                    return Err(at("drain needs a positive rate and must start after the phase"))
                }
                _ => {}
            }
            if p.service_mix.is_empty() || p.service_mix.iter().any(|m| !(m.weight >= 0.0)) {
                return Err(at("service mix must be non-empty with non-negative weights"));
            }
            if p.service_mix.iter().map(|m| m.weight).sum::<f64>() <= 0.0 {
                return Err(at("service mix weights sum to zero"));
            }
            for m in &p.service_mix {
                if model.catalog.service_by_name(&m.service).is_none() {
                    return Err(at(&format!("unknown service {}", m.service)));
                }
            }
            let lambda_min = model.params.lambda_min;
            match p.load {
                Some(LoadDist::Uniform { low, high }) if low < lambda_min || high < low => {
                    return Err(at("load range must satisfy lambda_min <= low <= high"))
                }
                Some(LoadDist::Fixed { value }) if value < lambda_min => {
                    return Err(at("fixed load below lambda_min"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Expands a phase plan into requests and events; deterministic in `seed`.
pub fn generate_events(plan: &PhasePlan, model: &SystemModel, seed: u64) -> Result<Workload> {
    plan.validate(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = model.topology.leaves();
    let lambda_min = model.params.lambda_min;
    let mut rr = 0usize;
    let mut requests = Vec::new();
    for p in &plan.phases {
        let times: Vec<f64> = match p.process {
            Process::Periodic => {
                let n = p.count.unwrap_or(((p.end - p.start) * p.arrival_rate).round() as u64);
                (0..n).map(|k| p.start + k as f64 / p.arrival_rate).collect()
            }
            Process::Poisson => {
                let mut out = Vec::new();
                let mut t = p.start;
                loop {
                    if p.arrival_rate <= 0.0 {
                        break;
                    }
                    t += -(1.0 - rng.gen::<f64>()).ln() / p.arrival_rate;
                    let done = match p.count {
                        Some(n) => out.len() as u64 >= n,
                        None => t >= p.end,
                    };
                    if done {
                        break;
                    }
                    out.push(t);
                }
                out
            }
        };
        let total_weight: f64 = p.service_mix.iter().map(|m| m.weight).sum();
        let load = p.load.unwrap_or(LoadDist::Uniform { low: lambda_min, high: 2.0 * lambda_min });
        for (k, &arrival) in times.iter().enumerate() {
            let mut pick = rng.gen::<f64>() * total_weight;
            let mut name = &p.service_mix[p.service_mix.len() - 1].service;
            for m in &p.service_mix {
                if pick < m.weight {
                    name = &m.service;
                    break;
                }
                pick -= m.weight;
            }
            let service = model.catalog.service_by_name(name).expect("validated");
            let lambda = match load {
                LoadDist::Uniform { low, high } if high > low => rng.gen_range(low..high),
                LoadDist::Uniform { low, .. } => low,
                LoadDist::Fixed { value } => value,
            };
            let leaf = match p.leaves {
                LeafPolicy::RoundRobin => {
                    rr += 1;
                    leaves[(rr - 1) % leaves.len()]
                }
                LeafPolicy::Uniform => leaves[rng.gen_range(0..leaves.len())],
            };
            let duration = match p.lifetime {
                Lifetime::Unbounded => None,
                Lifetime::Fixed { duration } => Some(duration),
                Lifetime::Exponential { mean } => Some(-(1.0 - rng.gen::<f64>()).ln() * mean),
                Lifetime::Drain { start, rate } => Some((start + k as f64 / rate - arrival).max(f64::MIN_POSITIVE)),
            };
            requests.push(Request {
                id: RequestId(0),
                service,
                arrival,
                duration,
                load: lambda,
                leaf,
            });
        }
    }
    Ok(Workload::from_requests(requests))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub arrival: String,
    pub duration: String,
    pub load: String,
    pub service: String,
    pub leaf: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            arrival: "arrival".into(),
            duration: "duration".into(),
            load: "load".into(),
            service: "service".into(),
            leaf: "leaf".into(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
    #[serde(default = "one")]
    pub time_scale: f64,
    #[serde(default = "one")]
    pub load_scale: f64,
}

impl TraceSpec {
    pub fn new(path: impl AsRef<Path>) -> Self {
        Self { path: path.as_ref().to_path_buf(), columns: ColumnMap::default(), time_scale: 1.0, load_scale: 1.0 }
    }
}

/// Reads a CSV trace (header row required) into requests and events.
/// An empty or `inf` duration means the request never leaves.
pub fn ingest_trace(spec: &TraceSpec, model: &SystemModel) -> Result<Workload> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(&spec.path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { row: 1, message: format!("missing column {name}") })
    };
    let c = &spec.columns;
    let (ia, id, il, is, ilf) = (col(&c.arrival)?, col(&c.duration)?, col(&c.load)?, col(&c.service)?, col(&c.leaf)?);
    let mut requests = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { row, message };
        let num = |i: usize, what: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("{what} {raw:?} is not a finite number")))
        };
        let arrival = num(ia, "arrival")? * spec.time_scale;
        let raw_duration = rec.get(id).unwrap_or("");
        let duration = if raw_duration.is_empty() || raw_duration.eq_ignore_ascii_case("inf") {
            None
        } else {
            let d = num(id, "duration")?;
            if !(d > 0.0) {
                return Err(err(format!("duration {d} must be positive")));
            }
            Some(d * spec.time_scale)
        };
        let load = num(il, "load")? * spec.load_scale;
        if load < model.params.lambda_min {
            return Err(Error::LoadBelowMinimum { row, load, lambda_min: model.params.lambda_min });
        }
        let name = rec.get(is).unwrap_or("");
        let service: ServiceId =
            model.catalog.service_by_name(name).ok_or_else(|| err(format!("unknown service {name:?}")))?;
        let raw_leaf = rec.get(ilf).unwrap_or("");
        let leaf = raw_leaf
            .parse::<u32>()
            .ok()
            .map(NodeId)
            .filter(|n| model.topology.is_leaf(*n))
            .ok_or_else(|| err(format!("leaf {raw_leaf:?} is not a leaf node id")))?;
        requests.push(Request { id: RequestId(0), service, arrival, duration, load, leaf });
    }
    Ok(Workload::from_requests(requests))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::three_layer;
    use crate::model::{Catalog, ServiceSpec, SystemParams, VnfId, VnfSpec};
    use std::io::Write;

    fn model() -> SystemModel {
        SystemModel {
            topology: three_layer(),
            catalog: Catalog {
                vnfs: vec![VnfSpec { vnf_id: "v".into(), theta: 1.0 }],
                services: ["a", "b"]
                    .iter()
                    .map(|s| ServiceSpec { service_id: s.to_string(), vnfs: vec![VnfId(0)], target_delay: 20.0 })
                    .collect(),
            },
            params: SystemParams { mu_bar: 100.0, lambda_min: 2.0 },
        }
    }

    fn mix() -> Vec<MixEntry> {
        vec![MixEntry { service: "a".into(), weight: 1.0 }, MixEntry { service: "b".into(), weight: 2.0 }]
    }

    fn vehicular() -> PhasePlan {
        let base = Phase {
            start: 0.0,
            end: 15.0,
            arrival_rate: 1.0,
            process: Process::Periodic,
            count: None,
            lifetime: Lifetime::Unbounded,
            service_mix: mix(),
            load: None,
            leaves: LeafPolicy::RoundRobin,
        };
        let surge = Phase {
            start: 800.0,
            end: 1000.0,
            arrival_rate: 5.0,
            lifetime: Lifetime::Drain { start: 1000.0, rate: 5.0 },
            ..base.clone()
        };
        PhasePlan { phases: vec![base, surge] }
    }

    #[test]
    fn vehicular_counts() {
        let w = generate_events(&vehicular(), &model(), 7).unwrap();
        assert_eq!(w.arrivals(), 1015);
        assert_eq!(w.departures(), 1000);
        assert!(w.events.iter().all(|e| e.time >= 0.0 && e.time < 1200.0));
        let first_dep = w.events.iter().find(|e| e.kind == EventKind::Departure).unwrap();
        assert_eq!(first_dep.time, 1000.0);
        assert!(w.requests.iter().all(|r| r.load >= 2.0 && r.load < 4.0));
        for pair in w.events.windows(2) {
            assert_ne!(event_order(&pair[0], &pair[1]), Ordering::Greater);
        }
    }

    #[test]
    fn empty_plan_and_determinism() {
        let w = generate_events(&PhasePlan::default(), &model(), 1).unwrap();
        assert!(w.events.is_empty());
        let a = generate_events(&vehicular(), &model(), 3).unwrap();
        let b = generate_events(&vehicular(), &model(), 3).unwrap();
        assert_eq!(a, b);
        let c = generate_events(&vehicular(), &model(), 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_and_exponential() {
        let mut plan = vehicular();
        plan.phases[0].process = Process::Poisson;
        plan.phases[0].arrival_rate = 10.0;
        plan.phases[0].lifetime = Lifetime::Exponential { mean: 5.0 };
        let w = generate_events(&plan, &model(), 9).unwrap();
        let n = w.requests.iter().filter(|r| r.arrival < 15.0).count();
        assert!((100..200).contains(&n), "{n}");
        assert_eq!(w.arrivals() - 1000, n);
        assert_eq!(w.departures(), 1000 + n);
    }

    #[test]
    fn bad_plans() {
        let mut plan = vehicular();
        plan.phases[1].start = 10.0;
        assert!(matches!(generate_events(&plan, &model(), 0), Err(Error::InvalidPlan(_))));
        let mut plan = vehicular();
        plan.phases[0].load = Some(LoadDist::Fixed { value: 1.0 });
        assert!(generate_events(&plan, &model(), 0).is_err());
        let mut plan = vehicular();
        plan.phases[0].service_mix[0].service = "zzz".into();
        assert!(generate_events(&plan, &model(), 0).is_err());
    }

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn trace_roundtrip() {
        let f = write_csv("arrival,duration,load,service,leaf\r\n0,10,2,a,0\n5,3,3,b,1\n2,4,2.5,a,3\n");
        let w = ingest_trace(&TraceSpec::new(f.path()), &model()).unwrap();
        assert_eq!(w.arrivals(), 3);
        assert_eq!(w.departures(), 3);
        assert_eq!(w.requests[1].arrival, 2.0);
        let mut spec = TraceSpec::new(f.path());
        spec.time_scale = 0.5;
        let half = ingest_trace(&spec, &model()).unwrap();
        for (a, b) in w.events.iter().zip(&half.events) {
            assert_eq!(a.time * 0.5, b.time);
        }
    }

    #[test]
    fn trace_errors() {
        let f = write_csv("arrival,duration,load,service,leaf\n0,10,2,a,0\n1,-4,2,a,0\n");
        assert!(matches!(ingest_trace(&TraceSpec::new(f.path()), &model()), Err(Error::Parse { row: 3, .. })));
        let f = write_csv("arrival,duration,load,service,leaf\n0,10,1,a,0\n");
        assert!(matches!(
            ingest_trace(&TraceSpec::new(f.path()), &model()),
            Err(Error::LoadBelowMinimum { row: 2, .. })
        ));
        let f = write_csv("arrival,load,service,leaf\n0,2,a,0\n");
        assert!(matches!(ingest_trace(&TraceSpec::new(f.path()), &model()), Err(Error::Parse { row: 1, .. })));
        let f = write_csv("arrival,duration,load,service,leaf\n0,,2,a,5\n");
        assert!(ingest_trace(&TraceSpec::new(f.path()), &model()).is_err());
        let f = write_csv("arrival,duration,load,service,leaf\n0,,2,a,2\n");
        let w = ingest_trace(&TraceSpec::new(f.path()), &model()).unwrap();
        assert_eq!(w.departures(), 0);
    }
}
