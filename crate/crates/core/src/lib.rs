//! Sparse feature algebra, sparse logistic training and inverted-index
//! retrieval of pairwise-composed linear models.

pub mod corpus;
pub mod eval;
pub mod extract;
pub mod feature;
pub mod index;
pub mod model;
pub mod pipeline;
pub mod projection;
pub mod scalar;
pub mod synth;

pub type SparseVector = feature::SparseVector<f64>;
pub type Model = model::LinearModel<f64>;
pub type ProjectionTables = projection::ProjectionTables<f64>;
pub type SearchResult = index::SearchResult<f64>;
