//! Hypergraph string diagrams for causal models.
//!
//! The crate represents causal models as string diagrams over a signature
//! hypergraph — directed acyclic, left monogamous, with ordered interface
//! legs — and answers questions about them:
//!
//! * structural validity, normalization, and marginalization of models;
//! * d-separation, decided once diagrammatically (connectivity after
//!   marginalizing and cutting) and once classically (Bayes-ball on the
//!   underlying DAG), with the two provably agreeing where both apply;
//! * enumeration of the conditional independences a model implies;
//! * compatibility of concrete probability kernels with a model, for a
//!   finite-support backend and a Gaussian backend, via the equivalence of
//!   the local and global Markov properties.
//!
//! The CLI in `src/bin` exposes validation, d-separation queries,
//! independence listings, compatibility checks, and DOT export over a JSON
//! interchange format.

pub mod backend;
pub mod cli;
pub mod diagram;
pub mod dsep;
pub mod finstoch;
pub mod gauss;
pub mod hypergraph;
pub mod markov;
pub mod normalize;
pub mod unionfind;
