//! Deterministic desk-scale simulation of a QoS-assuring PaaS control plane:
//! component repository, resource market, center manager, load balancer,
//! data proxy layer, stream monitoring, and threshold-driven autoscaling,
//! all hosted by a discrete-event simulator.

pub mod balancer;
pub mod control;
pub mod market;
pub mod model;
pub mod monitor;
pub mod platform;
pub mod proxy;
pub mod repository;
pub mod scaler;
pub mod sim;
