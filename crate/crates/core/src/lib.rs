pub mod citest;
pub mod dataset;
pub mod discovery;
pub mod effects;
pub mod explain;
pub mod graph;
pub mod pipeline;
pub mod predictor;
pub mod scm_oracle;
