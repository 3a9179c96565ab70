//! Polyhedral time-tiling toolkit for space-time stencil loops.
//!
//! The crate models stencil iteration spaces as integer polyhedra, extracts
//! uniform dependence distance vectors, derives legal skewed and time-tiled
//! schedules, generates the tiled loop nests as C-syntax source, and checks
//! every transformation against a brute-force execution-order oracle. A
//! roofline module covers the accompanying performance arithmetic.
//!
//! The pipeline in one breath: [`stencil::parse_stencil_spec`] describes the
//! problem, [`transform::time_tile`] skews and tiles it,
//! [`codegen::generate_loop_ast`] + [`codegen::emit_c`] print the loops, and
//! [`oracle::verify`] + [`oracle::interpret`] prove the transformation did
//! not change the computation.

pub mod cloog;
pub mod codegen;
pub mod error;
pub mod legality;
pub mod oracle;
pub mod perf;
pub mod polyhedron;
pub mod stencil;
pub mod transform;

pub use error::{Error, Result};
pub use polyhedron::{ceild, floord, AffineExpr, Constraint, ConstraintKind, Domain};
pub use stencil::{parse_stencil_spec, write_spec_text, DependenceVector, StencilSpec};
pub use transform::{Schedule, TileConfig, TransformedProgram};
