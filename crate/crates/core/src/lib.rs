pub mod model;
pub mod snapshot;
pub mod instrument;
pub mod exec;
pub mod query;
pub mod overshoot;
pub mod report;
pub mod scene;
pub mod sim;
pub mod api;
pub mod cli;
pub mod server;
