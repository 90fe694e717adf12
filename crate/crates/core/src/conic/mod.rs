//! Semidefinite programs over complex Hermitian matrix variables.
//!
//! Programs are written with trace-affine expressions in the complex
//! variables, embedded into real symmetric form and handed to a pluggable
//! interior-point backend. Rank-one extraction and eigen-ratio diagnostics
//! live in [`rank`].

mod backend;
mod embed;
mod program;
pub mod rank;

pub use backend::{silence_solver_panics, ClarabelBackend, ConicBackend, SolveReport, SolveStatus};
pub use embed::{decode_embedded, embed_hermitian};
pub use program::{Cmp, ConicProgram, LinExpr, MatVar, ScalarVar, Sense, Values};
pub use rank::{extract_rank_one, RankOne};
