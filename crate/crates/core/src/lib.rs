//! Exact computation with noncommutative rational functions: evaluation on
//! matrix tuples, randomized rational identity testing, and extraction of
//! generators and relations of invariant skew subfields under finite group
//! actions.

pub mod error;
pub mod field;
pub mod group;
pub mod invariants;
mod fpmat;
pub mod expr;
pub mod kmat;
pub mod linrep;
pub mod matm;
pub mod poly;
pub mod relations;
pub mod reptheory;
pub mod scenarios;

pub use error::{Error, Result};
pub use expr::{evaluate, parse_expr, substitute, Expr, MatrixTuple};
pub use field::{FieldSpec, Scalar};
pub use group::{ActionSpec, FiniteGroup};
pub use invariants::{algorithm_general, algorithm_linear, reduce_generators, EntryTag, Presentation};
pub use kmat::KMat;
pub use linrep::{eq_m, eq_m_in, is_zero, is_zero_in, verify_witness, LinRep, NonzeroWitness, RitCtx, RitVerdict, RunConfig};
pub use matm::{substitute_matrix, MatM};
pub use relations::{block_relations, build_fx, freeness_check, fundamental_relations, relations_hold_on_generators, FreenessVerdict, RelationSet};
pub use reptheory::{decompose_irreducibles, degree_layer_module, GModule};
pub use scenarios::{jonquieres_data, run_scenario, Check, JonquieresData, ScenarioParams, ScenarioReport, SCENARIO_NAMES};
