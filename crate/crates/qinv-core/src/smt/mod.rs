//! SMT backend: constraint representation, solver sessions, and the
//! certificate encoding used by the safe synthesizer.

pub mod ir;
pub mod motzkin;
pub mod queries;
pub mod session;

pub use ir::{bool_constraint, linexp_atom, tcoeff_atom, Atom, Constraint, Rel, Sym};
pub use queries::Condition;
pub use session::{SatResult, Session, SessionError, SolverConfig};
