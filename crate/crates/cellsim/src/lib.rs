//! Simulated robot cell.
//!
//! The cell executes primitive operations (linear/joint moves, gripper
//! actuation, camera capture, state queries) on a tool-pose-level model. It is
//! exposed over TCP with one JSON object per line; see [`protocol`].

pub mod client;
pub mod config;
pub mod demo;
pub mod primitives;
pub mod protocol;
pub mod server;
pub mod sim;

pub use client::{CellClient, CellPort, ClientError};
pub use config::{load_scene, CellConfig, LoadError, PlacedObject};
pub use primitives::{Primitive, PrimitiveRegistry};
pub use protocol::{CellError, Request, Response, PROTOCOL_VERSION};
pub use server::{serve, ServerHandle};
pub use sim::{CellCore, CellSim, CellState, Gripper, ObjectState};
