//! Configuration, presets, the comparison report and the validation suites.

mod compare;
mod config;
mod output;
mod presets;
mod validate;

pub use compare::{
    analyze, log_log_slope, rate_point, run_compare, Analysis, Comparison, ComparisonReport, LemmaCheck, MomentSummary,
    RatePoint, SweepPoint, Tolerances,
};
pub use config::{
    load_config, ChoiceLaw, EtaSpec, Experiment, ExperimentConfig, FrozenParameters, Law, PerLinkEta,
    SecondMomentConfig, SecondMomentKind, SimulationConfig, StrategyToggles, UniformLaw, WoSpec, DEFAULT_FUSION_POOL,
};
pub use output::{curves_csv, emit_csv, emit_report, tail_means_csv, to_json, CSV_HEADER};
pub use presets::{preset, PRESETS};
pub use validate::{
    closed_form_suite, full_operator_check, fusion_suite, moment_suite, ordering_suite, random_model, run_validation,
    ValidationReport,
};
