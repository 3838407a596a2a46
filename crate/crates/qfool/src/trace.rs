//! Full record of a single attack run: per-iteration state, the best-so-far
//! distance curve, query accounting, and the effective configuration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ResolvedConfig;
use crate::point::{Label, Point};

/// One entry of the best-so-far curve: after `query` oracle calls the best
/// confirmed adversarial point had mean squared perturbation `mse`.
/// Stored as change points, so `mse` is strictly decreasing down the list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub query: u64,
    pub mse: f64,
}

/// State captured at the end of one boundary-walk iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    /// Anchor `P_i` the gradient was estimated at.
    pub start_point: Vec<f64>,
    /// Final direction estimate `ξ_i` of the iteration (unit norm).
    pub direction: Vec<f64>,
    /// Candidate `x_adv^(i)` the iteration settled on.
    pub candidate: Vec<f64>,
    /// `‖x_adv^(i) - x₀‖₂`.
    pub perturbation_norm: f64,
    /// Estimation probes accumulated at this anchor (`n^(i)`).
    pub estimation_queries: u64,
    /// Every query spent during the iteration, searches included.
    pub total_queries: u64,
    /// Inner-loop growth passes executed.
    pub passes: u32,
}

/// Complete, serializable record of one attack run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    /// "nontargeted", "targeted", "boundary", or "gaussian".
    pub attack: String,
    pub success: bool,
    pub original: Point,
    pub original_label: Label,
    /// Best adversarial point found; `None` only for unsuccessful runs that
    /// never produced one.
    pub final_point: Option<Point>,
    pub final_label: Option<Label>,
    /// `(1/d)·‖v‖₂²` of the final perturbation. Zero when unsuccessful
    /// (infinity would not survive a JSON round-trip); check `success`
    /// before comparing distances.
    pub final_mse: f64,
    /// `‖v‖₂` of the final perturbation; zero when unsuccessful.
    pub final_l2: f64,
    pub target_label: Option<Label>,
    /// Cosine between the final perturbation and the final gradient
    /// estimate; converged targeted walks drive this toward 1.
    pub parallelism_cosine: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    pub curve: Vec<CurvePoint>,
    pub total_queries: u64,
    pub phase_queries: BTreeMap<String, u64>,
    /// First query count at which the best-so-far perturbation norm reached
    /// τ, when a perturbation threshold was configured and reached.
    pub queries_to_threshold: Option<u64>,
    pub config: ResolvedConfig,
    pub wall_time_ms: f64,
}

impl AttackTrace {
    /// JSON with wall time zeroed: equal strings ⇔ bit-identical runs.
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.wall_time_ms = 0.0;
        serde_json::to_string(&clone).expect("trace serializes")
    }

    /// Best-so-far MSE after `query` oracle calls, per the recorded curve.
    pub fn mse_at(&self, query: u64) -> Option<f64> {
        let mut best = None;
        for cp in &self.curve {
            if cp.query <= query {
                best = Some(cp.mse);
            } else {
                break;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AttackConfig;
    use crate::point::{Domain, Shape};

    fn dummy_trace() -> AttackTrace {
        let domain = Domain::unit(Shape::flat(2));
        let config = AttackConfig::default().resolve(&domain).unwrap();
        AttackTrace {
            attack: "nontargeted".into(),
            success: true,
            original: Point::flat(vec![0.5, 0.5]),
            original_label: Label(0),
            final_point: Some(Point::flat(vec![0.9, 0.5])),
            final_label: Some(Label(1)),
            final_mse: 0.08,
            final_l2: 0.4,
            target_label: None,
            parallelism_cosine: None,
            iterations: vec![],
            curve: vec![
                CurvePoint { query: 3, mse: 0.5 },
                CurvePoint { query: 10, mse: 0.08 },
            ],
            total_queries: 12,
            phase_queries: BTreeMap::new(),
            queries_to_threshold: None,
            config,
            wall_time_ms: 1.25,
        }
    }

    #[test]
    fn deterministic_json_ignores_wall_time() {
        let a = dummy_trace();
        let mut b = dummy_trace();
        b.wall_time_ms = 99.0;
        assert_eq!(a.deterministic_json(), b.deterministic_json());
    }

    #[test]
    fn curve_lookup_steps_between_change_points() {
        let t = dummy_trace();
        assert_eq!(t.mse_at(2), None);
        assert_eq!(t.mse_at(3), Some(0.5));
        assert_eq!(t.mse_at(9), Some(0.5));
        assert_eq!(t.mse_at(10), Some(0.08));
        assert_eq!(t.mse_at(1000), Some(0.08));
    }

    #[test]
    fn trace_round_trips_through_json() {
        let t = dummy_trace();
        let json = serde_json::to_string(&t).unwrap();
        let back: AttackTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }
}
