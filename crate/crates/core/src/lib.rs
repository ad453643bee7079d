//! Coordinated multicast beamforming for multicell networks.
//!
//! Semidefinite relaxations solved by a built-in interior-point method, the
//! decentralized QoS power minimization driven by interference-temperature
//! subgradients, max-min SINR bisection, fixed-direction baselines, and a
//! Monte Carlo harness.

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// cell/user indices address several arrays and the channel set at once
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod channel;
pub mod coordination;
pub mod harness;
pub mod mms;
pub mod numerics;
pub mod qos;
pub mod sdp;
pub mod serde_complex;

pub use channel::{BeamformerSet, ChannelSet, NetworkConfig};
pub use coordination::{run_decentralized_qos, QosOptions, QosRunResult, RunStatus};
pub use harness::{run_experiment, Algorithm, ExperimentRecord, ExperimentSpec, FigureId};
pub use mms::{mms_bisection, MmsOptions, MmsRunResult, PowerBudget};
pub use numerics::{ComplexMatrix, ComplexVector};
pub use qos::{solve_centralized_sdr, ItVector, SolveStatus};
pub use sdp::{solve_sdp, SdpProblem, SdpSolution, SdpStatus};
