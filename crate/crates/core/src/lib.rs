//! Exact computations on marked metric graphs of groups with finite
//! stabilizers: the asymmetric Lipschitz metric via finite candidate sets,
//! finite-index covers and their isometric embeddings, forest collapses and
//! deck-action quotients, and discrete folding sequences.
//!
//! All metric quantities are exact rationals; floating point appears only
//! when rendering logarithms. Values are immutable after construction and
//! safe to share across threads.

pub mod corpus;
pub mod cover;
pub mod fingroup;
pub mod fold;
pub mod gog;
pub mod isometry;
pub mod lipschitz;
pub mod morphism;
pub mod path;
pub mod ratio;
pub mod sausage;
pub mod schema;
pub mod spine;

pub use fingroup::{double_cosets, make_group, Elem, FiniteGroup, GroupHom, GroupRef, Subgroup};
pub use gog::{EdgeId, GraphOfGroups, VertexId};
pub use morphism::GoGMap;
pub use path::{EdgePath, ReducedLoop};
pub use ratio::Rational;
