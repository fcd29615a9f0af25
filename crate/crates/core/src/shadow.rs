//! Fractional shadow assignment over top jobs. The cost of its full VMs
//! lower-bounds the optimum and drives the adaptive controller.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::allocation::DelayPlan;
use crate::error::{Error, Result};
use crate::model::{node_cost_full, RequestId, SystemModel, VnfId};
use crate::ranges::{Placement, RangeScheme};

/// Fixed-point scale for bucket loads, so removals restore buckets exactly.
const LOAD_SCALE: f64 = 1e9;

/// Range slot of a top job.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShadowRange {
    Index(u32),
    /// Budgets looser than the last range: relaxed delay is unbounded.
    Overflow,
}

pub type ShadowKey = (usize, VnfId, ShadowRange);

#[derive(Clone, Copy, Debug, Default)]
struct Bucket {
    load: u64,
    full: u64,
}

#[derive(Clone, Debug)]
pub struct ShadowLedger {
    model: Arc<SystemModel>,
    level: u32,
    scheme: RangeScheme,
    buckets: BTreeMap<ShadowKey, Bucket>,
    full_per_layer: Vec<u64>,
    layer_cost: Vec<f64>,
    log: BTreeMap<RequestId, Vec<(ShadowKey, u64)>>,
}

impl ShadowLedger {
    pub fn new(model: Arc<SystemModel>, level: u32, scheme: RangeScheme) -> Self {
        let layer_cost: Vec<f64> = model
            .topology
            .layers()
            .iter()
            .map(|l| node_cost_full(l, &model.params))
            .collect();
        Self {
            full_per_layer: vec![0; layer_cost.len()],
            layer_cost,
            model,
            level,
            scheme,
            buckets: BTreeMap::new(),
            log: BTreeMap::new(),
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn scheme(&self) -> &RangeScheme {
        &self.scheme
    }

    pub fn contains(&self, id: RequestId) -> bool {
        self.log.contains_key(&id)
    }

    /// Range slot a budget maps to.
    pub fn slot(&self, budget: f64) -> ShadowRange {
        match self.scheme.classify(budget) {
            Placement::In(j) => ShadowRange::Index(j),
            Placement::Below => ShadowRange::Index(0),
            Placement::Above => ShadowRange::Overflow,
        }
    }

    /// Relaxed delay of a top job in `slot`.
    pub fn relaxed_delay(&self, slot: ShadowRange) -> f64 {
        match slot {
            ShadowRange::Index(j) => self.scheme.top_delay(j).expect("slot inside scheme"),
            ShadowRange::Overflow => f64::INFINITY,
        }
    }

    /// Load a full shadow VM of `vnf` carries in `slot`.
    pub fn capacity(&self, vnf: VnfId, slot: ShadowRange) -> f64 {
        let theta = self.model.catalog.theta(vnf);
        match slot {
            ShadowRange::Index(j) => self.scheme.capacity(j + 1) / theta,
            ShadowRange::Overflow => self.model.params.mu_bar / theta,
        }
    }

    fn full_count(&self, key: &ShadowKey, load: u64) -> u64 {
        let cap = self.capacity(key.1, key.2);
        ((load as f64 / LOAD_SCALE) / cap).floor() as u64
    }

    fn apply(&mut self, key: ShadowKey, delta: u64, add: bool) {
        let mut bucket = self.buckets.get(&key).copied().unwrap_or_default();
        bucket.load = if add { bucket.load + delta } else { bucket.load - delta };
        let full = self.full_count(&key, bucket.load);
        let layer = &mut self.full_per_layer[key.0];
        *layer = *layer - bucket.full + full;
        bucket.full = full;
        if bucket.load == 0 {
            self.buckets.remove(&key);
        } else {
            self.buckets.insert(key, bucket);
        }
    }

    /// Adds every job of a planned request at its highest feasible layer.
    pub fn add(&mut self, plan: &DelayPlan, load: f64) -> f64 {
        let units = (load * LOAD_SCALE).round() as u64;
        let mut entries = Vec::with_capacity(plan.vnfs.len());
        for (vnf, budget) in plan.iter() {
            let key = (plan.star_layer, vnf, self.slot(budget));
            self.apply(key, units, true);
            entries.push((key, units));
        }
        self.log.insert(plan.request_id, entries);
        self.full_cost()
    }

    pub fn remove(&mut self, id: RequestId) -> Result<f64> {
        let entries = self.log.remove(&id).ok_or(Error::UnknownRequest(id))?;
        for (key, units) in entries {
            self.apply(key, units, false);
        }
        Ok(self.full_cost())
    }

    /// Cost of the full shadow VMs, each priced at full speed.
    pub fn full_cost(&self) -> f64 {
        self.full_per_layer
            .iter()
            .zip(&self.layer_cost)
            .map(|(n, c)| *n as f64 * c)
            .sum()
    }

    pub fn full_vms(&self) -> u64 {
        self.full_per_layer.iter().sum()
    }

    /// Layer the shadow holds a request's jobs at.
    pub fn layer_of(&self, id: RequestId) -> Option<usize> {
        self.log.get(&id).and_then(|e| e.first()).map(|(k, _)| k.0)
    }

    /// Fractional load of one bucket.
    pub fn bucket_load(&self, key: &ShadowKey) -> f64 {
        self.buckets.get(key).map_or(0.0, |b| b.load as f64 / LOAD_SCALE)
    }

    /// Starts an empty ledger at a new level; returns the cost being archived.
    pub fn reset(&mut self, level: u32, scheme: RangeScheme) -> f64 {
        let archived = self.full_cost();
        *self = Self::new(Arc::clone(&self.model), level, scheme);
        archived
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::layer;
    use crate::model::{Catalog, Reachability, SystemParams, Topology, VnfSpec};

    fn model(theta: f64, kappa_f: f64, kappa_p: f64) -> Arc<SystemModel> {
        let mut l = layer(0, &[0], 0.0, kappa_f);
        l.kappa_p = kappa_p;
        Arc::new(SystemModel {
            topology: Topology::new(vec![l], Reachability::Full),
            catalog: Catalog { vnfs: vec![VnfSpec { vnf_id: "v".into(), theta }], services: vec![] },
            params: SystemParams { mu_bar: 100.0, lambda_min: 1.0 },
        })
    }

    fn plan(id: u64, budget: f64) -> DelayPlan {
        DelayPlan {
            request_id: RequestId(id),
            star_layer: 0,
            vnfs: vec![VnfId(0)],
            budgets: vec![budget],
            solo_latencies: vec![budget],
        }
    }

    fn ledger() -> ShadowLedger {
        ShadowLedger::new(model(1.0, 1.0, 0.01), 1, RangeScheme::new(1.0, 100.0, 1.0).unwrap())
    }

    // L_3 at eps=1: top delay 1/84, cap lambda_min*2^4 = 16.
    const D3: f64 = 0.0115;

    #[test]
    fn capacity_matches_top_delay() {
        let l = ledger();
        let slot = l.slot(D3);
        assert_eq!(slot, ShadowRange::Index(3));
        assert_eq!(l.capacity(VnfId(0), slot), 16.0);
        let theta_cap = 100.0 - 1.0 / l.relaxed_delay(slot);
        assert!((theta_cap - 16.0).abs() < 1e-9);
        assert_eq!(l.slot(1.0), ShadowRange::Overflow);
        assert_eq!(l.capacity(VnfId(0), ShadowRange::Overflow), 100.0);
    }

    #[test]
    fn full_vm_counts() {
        let mut l = ledger();
        assert_eq!(l.full_cost(), 0.0);
        assert_eq!(l.add(&plan(0, D3), 10.0), 0.0);
        l.add(&plan(1, D3), 90.0);
        assert_eq!(l.full_vms(), 6);
        assert!((l.full_cost() - 12.0).abs() < 1e-12);
        assert!((l.bucket_load(&(0, VnfId(0), ShadowRange::Index(3))) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn add_remove_is_reversible() {
        let mut l = ledger();
        l.add(&plan(0, D3), 37.123456789);
        let before = l.full_cost();
        l.add(&plan(1, D3), 12.3);
        l.remove(RequestId(1)).unwrap();
        assert_eq!(l.full_cost(), before);
        l.remove(RequestId(0)).unwrap();
        assert_eq!(l.full_cost(), 0.0);
        assert!(l.buckets.is_empty());
        assert!(matches!(l.remove(RequestId(0)), Err(Error::UnknownRequest(_))));
    }

    #[test]
    fn theta_shrinks_capacity() {
        let l = ShadowLedger::new(model(4.0, 1.0, 0.01), 1, RangeScheme::new(1.0, 100.0, 1.0).unwrap());
        assert_eq!(l.capacity(VnfId(0), ShadowRange::Index(3)), 4.0);
    }

    #[test]
    fn reset_archives_and_empties() {
        let mut l = ledger();
        l.add(&plan(0, D3), 40.0);
        let cost = l.full_cost();
        let archived = l.reset(2, RangeScheme::new(0.5, 100.0, 1.0).unwrap());
        assert_eq!(archived, cost);
        assert_eq!(l.full_cost(), 0.0);
        assert_eq!(l.level(), 2);
        assert!(!l.contains(RequestId(0)));
        l.add(&plan(0, D3), 40.0);
        l.reset(1, RangeScheme::new(1.0, 100.0, 1.0).unwrap());
        assert_eq!(l.full_cost(), 0.0);
    }

    #[test]
    fn monotone_under_arrivals() {
        let mut l = ledger();
        let mut last = 0.0;
        for i in 0..200 {
            let d = 0.0102 + (i % 7) as f64 * 0.0003;
            let c = l.add(&plan(i, d), 1.0 + (i % 5) as f64);
            assert!(c >= last);
            last = c;
        }
    }
}
