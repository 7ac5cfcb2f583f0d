//! Elastic two-particle collisions and the Nelson stochastic-mechanics picture
//! built on them.
//!
//! * [`collision`]: the elastic collision operator, its 1D reduction and the
//!   symmetric/osmotic energy ledger.
//! * [`eigenframe`]: eigenvector decomposition of a collision, the Minkowski
//!   frame identity and its statistical form, time-dilation evaluators.
//! * [`heatbath`]: Monte Carlo driver for a main particle in a bath of
//!   incident particles.
//! * [`nelson`]: analytic wavefunction catalog, forward/backward diffusions
//!   and numerical checks of the osmotic, continuity and Madelung relations.

pub mod collision;
pub mod eigenframe;
pub mod error;
pub mod heatbath;
pub mod nelson;
pub mod rng;
pub mod stats;
pub mod vec3;

pub use collision::{
    collide, collide_1d, collide_full, collide_with, collision_matrix, nelson_energy_ledger, total_energy,
    total_momentum, CollisionEvent, EnergyLedger, Exchange, MassPair, Projector, Side,
};
pub use eigenframe::{decompose, EigenFrame, MinkowskiReport};
pub use error::{Error, Result};
pub use vec3::{Mat3, Vec3};
