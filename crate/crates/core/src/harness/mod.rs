//! Scenario configuration, end-to-end comparison runs and export.
//!
//! Three schemes are compared on one simulated plant: a Luenberger observer,
//! GPEBO with a DREM gradient estimator, and GPEBO with the cubic
//! noise-robust estimator.

mod export;
mod run;
mod scenario;
mod sweep;

pub use export::{
    export_all, export_csv, export_metrics, export_svg, format_value, render_svg, FigureId,
};
pub use run::{
    cubic_regressions, prepare, run_scenario, ExperimentResult, Metrics, Prepared, Provenance,
    SchemeMetrics, SchemeResult, SCHEME_NAMES, TAIL_FRACTION,
};
pub use scenario::{
    BaselineSection, CubicSection, DremSection, GpeboSection, GridSection, LuenbergerSection,
    OutputSection, PlantSection, Scenario, DEFAULT_OUTPUT_DIR,
};
pub use sweep::{defect_rms, defect_sweep, SweepReport, RATIO_BAND};
