//! HTTP front for the assistant: sessions, turns, notification polling and
//! an agent registry that also accepts agents living behind an endpoint.

mod remote;
mod server;
mod wire;

pub use remote::{agent_router, Health, RegistrationError, RemoteAgent, PROBE_TEXT};
pub use server::{router, serve, shutdown_signal, AgentStatus, Gateway, GatewayError, SessionView};
pub use wire::{Mode, WireRequest, WireResponse};
