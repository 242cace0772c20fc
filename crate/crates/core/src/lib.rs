pub mod config;
pub mod dissemination;
pub mod engine;
pub mod kinematics;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod sensor;
