//! The REShare controller: halves epsilon when the shadow cost of the current
//! interval outgrows its thresholds, and steps back when the load falls.

use serde::Serialize;

use crate::model::{node_cost_full, SystemModel};

/// `[(2n+2)(1+eps*) + 1] ln(mu_bar/lambda_min) |V| sum_i kappa^l`, with `n`
/// the largest node count of any layer and the sum over every node.
pub fn compute_z(model: &SystemModel, epsilon_star: f64) -> f64 {
    let n = model.topology.max_nodes_per_layer() as f64;
    let kappa_sum: f64 = model
        .topology
        .layers()
        .iter()
        .map(|l| l.node_ids.len() as f64 * node_cost_full(l, &model.params))
        .sum();
    let vnfs = model.catalog.vnfs.len() as f64;
    z_formula(n, epsilon_star, model.params.mu_bar / model.params.lambda_min, vnfs, kappa_sum)
}

pub fn z_formula(n: f64, epsilon_star: f64, ratio: f64, vnfs: f64, kappa_sum: f64) -> f64 {
    ((2.0 * n + 2.0) * (1.0 + epsilon_star) + 1.0) * ratio.ln() * vnfs * kappa_sum
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep,
    DecreaseEps,
    IncreaseEps,
}

#[derive(Clone, Debug)]
pub struct EpsilonController {
    epsilon_star: f64,
    z: f64,
    level: u32,
    interval: u32,
    /// `thresholds[p]` is `T_p`; index 0 unused.
    thresholds: Vec<f64>,
    /// `archived[p]` is the last shadow cost recorded for level `p`; index 0 unused.
    archived: Vec<f64>,
}

impl EpsilonController {
    pub fn new(epsilon_star: f64, z: f64) -> Self {
        Self { epsilon_star, z, level: 1, interval: 1, thresholds: vec![0.0, 0.0], archived: vec![0.0, 0.0] }
    }

    pub fn for_model(model: &SystemModel, epsilon_star: f64) -> Self {
        Self::new(epsilon_star, compute_z(model, epsilon_star))
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn interval(&self) -> u32 {
        self.interval
    }

    pub fn epsilon_star(&self) -> f64 {
        self.epsilon_star
    }

    /// `eps* / 2^(p-1)`.
    pub fn epsilon_at(&self, level: u32) -> f64 {
        self.epsilon_star / 2f64.powi(level as i32 - 1)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon_at(self.level)
    }

    pub fn load_threshold(&self, level: u32) -> f64 {
        self.thresholds.get(level as usize).copied().unwrap_or(0.0)
    }

    pub fn archived(&self, level: u32) -> f64 {
        self.archived.get(level as usize).copied().unwrap_or(0.0)
    }

    /// Archived shadow costs of levels `1..=level`.
    pub fn archived_sum(&self, level: u32) -> f64 {
        (1..=level).map(|p| self.archived(p)).sum()
    }

    /// `(C, S)` for the current level.
    pub fn thresholds(&self) -> (f64, f64) {
        let eps = self.epsilon();
        let c = self.z / (eps * eps.ln_1p());
        let s = (1..self.level)
            .map(|p| (2.0 + 3.0 * self.epsilon_at(p)) * self.archived(p))
            .sum::<f64>()
            / eps;
        (c, s)
    }

    fn set(v: &mut Vec<f64>, level: u32, value: f64) {
        let i = level as usize;
        if v.len() <= i {
            v.resize(i + 1, 0.0);
        }
        v[i] = value;
    }

    /// Reacts to one event. `shadow_cost` is the current interval's shadow
    /// cost after the event, `system_load` the total active load.
    pub fn on_event(&mut self, shadow_cost: f64, system_load: f64) -> Decision {
        let (c, s) = self.thresholds();
        if shadow_cost >= c.max(s) {
            Self::set(&mut self.archived, self.level, shadow_cost);
            Self::set(&mut self.thresholds, self.level + 1, system_load);
            self.level += 1;
            self.interval += 1;
            Decision::DecreaseEps
        } else if system_load < self.load_threshold(self.level) {
            Self::set(&mut self.archived, self.level, shadow_cost);
            self.level -= 1;
            self.interval += 1;
            Decision::IncreaseEps
        } else {
            Decision::Keep
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_example() {
        let z = z_formula(2.0, 1.0, 100.0, 3.0, 10.0);
        assert!((z - 13.0 * 100f64.ln() * 30.0).abs() < 1e-9);
        assert!((z - 1796.0).abs() < 0.1);
        assert!((z_formula(2.0, 0.0, 100.0, 3.0, 10.0) / (7.0 * 100f64.ln() * 30.0) - 1.0).abs() < 1e-12);
        assert!((z_formula(2.0, 1.0, 100.0, 3.0, 20.0) - 2.0 * z).abs() < 1e-9);
    }

    #[test]
    fn thresholds_examples() {
        let ctl = EpsilonController::new(1.0, 1796.0);
        let (c, s) = ctl.thresholds();
        assert!((c - 1796.0 / 2f64.ln()).abs() < 1e-9);
        assert!((c - 2591.0).abs() < 0.2);
        assert_eq!(s, 0.0);

        let mut ctl = EpsilonController::new(1.0, 1.0);
        assert_eq!(ctl.on_event(3000.0, 10.0), Decision::DecreaseEps);
        assert_eq!(ctl.epsilon(), 0.5);
        let (c2, s2) = ctl.thresholds();
        assert!((s2 - 30000.0).abs() < 1e-9);
        assert!(c2 > 2.0 * (1.0 / 2f64.ln()));
    }

    #[test]
    fn decrease_then_revert() {
        let mut ctl = EpsilonController::new(1.0, 1.0);
        assert_eq!(ctl.on_event(0.5, 5.0), Decision::Keep);
        assert_eq!(ctl.on_event(2.0, 42.0), Decision::DecreaseEps);
        assert_eq!(ctl.level(), 2);
        assert_eq!(ctl.load_threshold(2), 42.0);
        assert_eq!(ctl.archived(1), 2.0);
        assert_eq!(ctl.on_event(0.0, 42.0), Decision::Keep);
        assert_eq!(ctl.on_event(0.0, 41.0), Decision::IncreaseEps);
        assert_eq!(ctl.level(), 1);
        assert_eq!(ctl.epsilon(), 1.0);
        assert_eq!(ctl.interval(), 3);
        // Level 1 has T_1 = 0, so it never reverts further.
        assert_eq!(ctl.on_event(0.0, 0.0), Decision::Keep);
        assert_eq!(ctl.load_threshold(2), 42.0);
    }

    #[test]
    fn thresholds_are_non_decreasing_on_a_ramp() {
        let mut ctl = EpsilonController::new(1.0, 0.5);
        let mut y = 0.0;
        for step in 0..2000 {
            y += 1.0;
            if ctl.on_event(y, step as f64) == Decision::DecreaseEps {
                y = 0.0;
            }
        }
        assert!(ctl.level() > 2);
        for p in 2..ctl.level() {
            assert!(ctl.load_threshold(p + 1) >= ctl.load_threshold(p));
            assert!(ctl.epsilon_at(p) <= ctl.epsilon_star());
        }
    }
}
