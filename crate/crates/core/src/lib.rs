//! Airy-type solutions of Painleve II through tau-function Hankel determinants,
//! their bridge to cubic-ensemble orthogonal polynomials, pole maps, and the
//! one-cut / two-cut / trefoil phase diagram of the cubic model.

pub mod airy;
pub mod hankel;
pub mod taufun;
pub mod num;
pub mod quad;
pub mod cubicmodel;
pub mod exec;
pub mod zerofind;
pub mod quaddiff;
pub mod phase;
pub mod suite;
