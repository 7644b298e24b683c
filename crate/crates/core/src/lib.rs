//! Experimental toolkit around a divisibility criterion for detecting
//! isogeny classes through point counts: if two abelian varieties are
//! isogenous, every prime l divides their reduction counts at the same
//! places. The crate computes those counts for elliptic curves over Q,
//! scans for places where divisibility differs on one side only, and
//! backs the single-witness logic with finite symplectic group
//! computations and exact tame-character bounds.

pub mod criterion;
pub mod curves;
pub mod galois_sim;
pub mod modmath;
pub mod symplectic;
pub mod tame_inertia;
