//! Numerical machinery for self-joinings of Schottky subgroups of products
//! of `SO°(n,1)`: exact hyperboloid-model geometry per factor, free-group
//! combinatorics with ping-pong certification, orbit enumeration with Cartan
//! projections, and the estimators built on top of the orbit data (critical
//! exponents, limit cone and growth indicator, boundary samples, box-counting
//! dimensions, truncated Patterson-Sullivan measures).
//!
//! The crate is organised bottom-up:
//!
//! * [`hyperbolic`] — one hyperbolic factor `H^n` in the hyperboloid model.
//! * [`group`] — reduced words in a free group and Schottky representations.
//! * [`joining`] — the self-joining, Cartan vectors, and orbit enumeration.
//! * [`exponents`] — counting-slope estimates of critical exponents.
//! * [`cone`] — limit-cone statistics, growth indicator, tangent forms.
//! * [`boundary`] — limit-set and directional-limit-set samples, shadows.
//! * [`dimension`] — box-counting dimension and local measure scaling.
//! * [`psmeasure`] — truncated Patterson-Sullivan measures and their checks.
//! * [`reference`] — slow independent reference implementations (oracles)
//!   used by tests and by the randomized geometry-check experiment.
//!
//! All estimators consume immutable orbit data and are deterministic for a
//! fixed configuration, independent of worker count.

pub mod boundary;
pub mod cone;
pub mod dimension;
pub mod exponents;
pub mod fit;
pub mod group;
pub mod hyperbolic;
pub mod joining;
pub mod psmeasure;
pub mod reference;

pub use boundary::{CapProduct, DirectionalFamily, ProductBoundaryPoint};
pub use cone::LinearForm;
pub use dimension::DimensionEstimate;
pub use exponents::ExponentEstimate;
pub use group::{SchottkyRep, Word};
pub use hyperbolic::{BoundaryDir, Cap, HPoint, Isometry};
pub use joining::{Orbit, OrbitOptions, SelfJoining};
pub use psmeasure::EmpiricalMeasure;
