//! Training, prediction and the per-packet and per-flow metric suite.

mod metrics;
mod model;
mod train;

pub use metrics::{
    decide, evaluate, evaluate_masked, predict_flow, report_from_predictions, Confusion,
    FlowPrediction, Metrics, MetricsReport, METRICS_CSV_HEADER,
};
pub use model::{EncodedFlow, Model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    encode_samples, measure, train, train_feature_dropout, write_history_csv, EpochRecord,
    TrainConfig, Trainer, TrainingSample,
};
