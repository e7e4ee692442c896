//! Data-level (quality-weighted) and decision-level (stacked) fusion.

mod coverage;
mod data_level;
mod decision;
mod run;
mod scenario;

pub use coverage::{coverage_percent, mask_coverage, union_mask};
pub use data_level::{fuse_data_level, fuse_weighted, quality_weight};
pub use decision::{
    train_decision_fusion, train_decision_fusion_cached, Combiner, DecisionFusionModel,
    DecisionVector, Stacking, StackingSet,
};
pub use run::{
    run_data_level, run_scenario, run_scenario_with, run_scenarios, DataLevelReport,
    PairedComparison, ProductResult, RunConfig, ScenarioReport,
};
pub use scenario::{canonical_scenarios, parse_scenario_ids, FusionScenario};
