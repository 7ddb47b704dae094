//! Coverage analysis of downlink 3-D dense cellular networks.
//!
//! Access points (APs) and user equipments (UEs) are homogeneous Poisson
//! point processes in `R^3`. Every UE attaches to its nearest AP, and an AP
//! transmits only when at least one UE is attached to it. Links are LOS or
//! NLOS with distance-dependent probability, two-slope path loss, Rayleigh
//! fading on NLOS links and normalized Gamma (Nakagami) fading on LOS links.
//!
//! Two independent engines evaluate the network:
//!
//! * [`analytic`] evaluates the closed forms (AP activity probability, n-th
//!   nearest distance law, link LOS probability), the Laplace transform of
//!   the aggregate interference and the upper/lower coverage bounds by
//!   adaptive quadrature.
//! * [`montecarlo`] simulates network realizations drawn by [`geometry`]
//!   and estimates the same quantities empirically.
//!
//! Both use the propagation laws in [`channel`].

pub mod analytic;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;

pub use analytic::{CoverageBounds, DensityConfig};
pub use channel::{ChannelParams, LinkState, LosModel};
pub use error::{Error, Result};
pub use geometry::{NetworkRealization, Point3, PppRealization, SimGeometry};
pub use montecarlo::CoverageEstimate;
pub use quadrature::QuadratureSettings;
