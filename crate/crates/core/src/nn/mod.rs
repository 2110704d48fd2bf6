//! Minimal neural-network toolkit: autodiff graph, parameter layouts, Adam, LSTM cell.

pub mod adam;
pub mod graph;
pub mod lstm;
pub mod params;

pub use adam::Adam;
pub use graph::{Graph, Var};
pub use lstm::LstmCell;
pub use params::{Init, Layout, ParamRef};
