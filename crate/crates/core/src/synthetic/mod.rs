//! Canonical panels, controlled perturbations, random scenarios, the
//! brute-force oracle and differential runs against it.

mod fuzz;
mod oracle;
mod panels;
mod perturb;
mod random;

pub use fuzz::{check_case, fuzz_case, record_differences, FuzzCase};
pub use oracle::{oracle_metrics, oracle_record};
pub use panels::{
    canonical_panel, canonical_panels, export_panels, generate_panel, parse_panel_table, realized_topology, PanelSpec,
    Shape, ShapeKind, Topology, PANEL_CLASS, PANEL_IDS, PANEL_TABLE,
};
pub use perturb::{perturb, PerturbationKind, PerturbationSpec};
pub use random::{random_confidence, random_overlap_graph, random_scenario, ScenarioParams};

use crate::harness::EvalConfig;
use crate::mask::DEFAULT_IGNORE;

/// Evaluation settings matching the panels: two classes, background 0.
pub fn panel_config() -> EvalConfig {
    let mut cfg = EvalConfig::new(2);
    cfg.background_id = Some(0);
    cfg.ignore_id = DEFAULT_IGNORE;
    cfg
}
