//! Two-timescale orchestration: campaign generation, window assimilation,
//! parameter tracking and forecasting.

mod campaign;
mod forecast;
mod report;
mod snapshot;
mod synth;
mod window;

pub use campaign::{generate_campaign, CampaignConfig};
pub use forecast::{
    forecast_stiffness, predict_parameters, predict_response, write_track_csv, EnsembleSummary, ParameterForecast,
    ResponseConfig, ResponseForecast,
};
pub use report::{campaign_truth, HeldOutError, ParameterAccuracy, RejectedWindow, TwinReport};
pub use snapshot::{assimilate_window, TwinSnapshot, WindowRecord, WindowStatus, SNAPSHOT_VERSION};
pub use synth::{synthesize_window, SynthesisConfig};
pub use window::{MeasurementWindow, Provenance};

#[cfg(test)]
mod tests;
