//! Scenario files: one JSON document with `topology`, `params`, `vnfs`,
//! `services`, `workload`, `strategy` and `output` sections.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Catalog, LayerSpec, Reachability, ServiceSpec, SystemModel, SystemParams, Topology, VnfId, VnfSpec,
};
use crate::workload::{generate_events, ingest_trace, PhasePlan, Phase, TraceSpec, Workload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologySection {
    #[serde(default)]
    pub reachability: Reachability,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceSection {
    pub service_id: String,
    pub vnf_ids: Vec<String>,
    pub target_delay: f64,
}

fn default_horizon() -> f64 {
    1200.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSection {
    #[serde(default)]
    pub seed: u64,
    /// End of the simulated window (s); cost is integrated up to here.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
}

fn default_kind() -> String {
    "reshare".into()
}

fn default_eps() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_eps")]
    pub epsilon_star: f64,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self { kind: default_kind(), epsilon_star: default_eps() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    #[default]
    Full,
    Sampled,
    Off,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifyMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub topology: TopologySection,
    pub params: SystemParams,
    pub vnfs: Vec<VnfSpec>,
    pub services: Vec<ServiceSection>,
    pub workload: WorkloadSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A parsed, validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub model: Arc<SystemModel>,
    base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Parses a JSON document; relative trace paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Scenario(vec![format!("json: {e}")]))?;
        Self::from_file(file, base_dir)
    }

    pub fn from_file(file: ScenarioFile, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut problems = Vec::new();
        let mut services = Vec::new();
        let catalog_vnfs = file.vnfs.clone();
        for (i, s) in file.services.iter().enumerate() {
            let mut vnfs = Vec::new();
            for name in &s.vnf_ids {
                match catalog_vnfs.iter().position(|v| &v.vnf_id == name) {
                    Some(k) => vnfs.push(VnfId(k as u32)),
                    None => problems.push(format!("services[{i}] ({}): unknown vnf {name}", s.service_id)),
                }
            }
            services.push(ServiceSpec { service_id: s.service_id.clone(), vnfs, target_delay: s.target_delay });
        }
        let topology = Topology::new(file.topology.layers.clone(), file.topology.reachability);
        let model = SystemModel {
            topology,
            catalog: Catalog { vnfs: catalog_vnfs, services },
            params: file.params,
        };
        problems.extend(model.validate().iter().map(|v| v.to_string()));
        let w = &file.workload;
        if w.trace.is_some() && !w.phases.is_empty() {
            problems.push("workload: give either phases or trace, not both".into());
        }
        if !(w.horizon > 0.0) {
            problems.push("workload: horizon must be positive".into());
        }
        if !(file.strategy.epsilon_star > 0.0) {
            problems.push("strategy: epsilon_star must be positive".into());
        }
        if problems.is_empty() {
            if let Err(e) = (PhasePlan { phases: w.phases.clone() }).validate(&model) {
                problems.push(format!("workload: {e}"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Scenario(problems));
        }
        Ok(Self { file, model: Arc::new(model), base_dir: base_dir.into() })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn horizon(&self) -> f64 {
        self.file.workload.horizon
    }

    pub fn seed(&self) -> u64 {
        self.file.workload.seed
    }

    pub fn epsilon_star(&self) -> f64 {
        self.file.strategy.epsilon_star
    }

    /// Builds the event stream for `seed`.
    pub fn workload(&self, seed: u64) -> Result<Workload> {
        match &self.file.workload.trace {
            Some(trace) => {
                let mut spec = trace.clone();
                if spec.path.is_relative() {
                    spec.path = self.base_dir.join(&spec.path);
                }
                ingest_trace(&spec, &self.model)
            }
            None => generate_events(&PhasePlan { phases: self.file.workload.phases.clone() }, &self.model, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TINY: &str = r#"{
      "name": "tiny",
      "topology": {"layers": [
        {"index": 0, "node_ids": [0, 1], "d": 0.0, "kappa_f": 7.5, "kappa_p": 0.075},
        {"index": 1, "node_ids": [2], "d": 15.0, "kappa_f": 2.5, "kappa_p": 0.025}
      ]},
      "params": {"mu_bar": 100.0, "lambda_min": 2.0},
      "vnfs": [{"vnf_id": "a", "theta": 1.0}, {"vnf_id": "b", "theta": 5.0}],
      "services": [{"service_id": "s", "vnf_ids": ["a", "b"], "target_delay": 20.0}],
      "workload": {"seed": 3, "phases": [
        {"start": 0, "end": 10, "arrival_rate": 1, "service_mix": [{"service": "s", "weight": 1}]}
      ]}
    }"#;

    #[test]
    fn parses_and_generates() {
        let sc = Scenario::parse(TINY, ".").unwrap();
        assert_eq!(sc.horizon(), 1200.0);
        assert_eq!(sc.file.strategy.kind, "reshare");
        assert_eq!(sc.model.catalog.services[0].vnfs, vec![VnfId(0), VnfId(1)]);
        assert_eq!(sc.workload(sc.seed()).unwrap().arrivals(), 10);
    }

    #[test]
    fn reports_every_problem() {
        let broken = TINY.replace("\"d\": 15.0", "\"d\": 0.0").replace("\"theta\": 5.0", "\"theta\": 0.0");
        let Err(Error::Scenario(problems)) = Scenario::parse(&broken, ".") else { panic!() };
        assert!(problems.iter().any(|p| p.contains("latency not strictly increasing")));
        assert!(problems.iter().any(|p| p.contains("theta must be positive")));
        let Err(Error::Scenario(problems)) = Scenario::parse("{ \"name\": 3 ", ".") else { panic!() };
        assert!(problems[0].contains("line 1"));
    }
}
