//! Stacked LSTM with a scalar logit head: forward pass, backpropagation
//! through time, Adam, and a binary parameter container.

mod adam;
mod backward;
mod forward;
mod gradcheck;
mod io;
mod loss;
mod params;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use backward::{
    backprop, backward_inputs, backward_params, objective_seeds, InputGradients, Objective,
    ObjectiveTag, ParamGradients,
};
pub use forward::{confidence, forward, logits, sigmoid, step, ForwardTrace, LstmState, PROB_EPS};
pub use gradcheck::{grad_check, random_problem, rel_error, GradCheckConfig, GradCheckReport, REL_ERR_FLOOR};
pub use io::{
    deserialize_model, deserialize_model_prefix, expect_input_width, serialize_model,
    PARAMS_MAGIC, PARAMS_VERSION,
};
pub use loss::{loss, loss_logit_grads};
pub use params::{
    init_params, ModelParams, TrainingMeta, GATE_CELL, GATE_FORGET, GATE_INPUT, GATE_OUTPUT,
};
