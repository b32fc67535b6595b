//! Refined absorption at desk scale: explicit gadgets, refiners and omni-absorbers for
//! uniform hypergraphs, brute-force oracles for their defining properties, and a
//! reserve-then-absorb pipeline producing verified clique decompositions.

pub mod divisibility;
pub mod exactdecomp;
pub mod gadgets;
pub mod hypercore;
pub mod pipeline;
pub mod refinery;
pub mod rmh;
pub mod rng;

pub use divisibility::{is_divisible, modulus_m, DivisibilityReport};
pub use exactdecomp::{find_decomposition, verify_decomposition, Decomposition, SearchOutcome};
pub use hypercore::{Iid, IidPool, MultiHypergraph, Vertex};
pub use refinery::{OmniAbsorber, Refiner};
