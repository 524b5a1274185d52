//! Chemistry side of the weak-label pre-training toolkit: SMILES parsing and
//! perception, rule-based descriptor labels, molecule rasterization and
//! one-hot text encoding.

pub mod descriptors;
pub mod element;
pub mod error;
pub mod imaging;
pub mod molgraph;
pub mod textenc;

pub use error::{ChemError, Result};
pub use molgraph::{prepare, Atom, Bond, BondOrder, Hybridization, MolGraph};
