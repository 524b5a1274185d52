//! Builders for the two model families. Both produce a [`Model`] whose last
//! segment is a dense head, so heads can be swapped for fine-tuning.
//!
//! [`Model`]: crate::tensornet::Model

mod chemception;
mod smiles2vec;

pub use chemception::{build_chemception, chemception_parameter_count, ChemceptionSpec};
pub use smiles2vec::{build_smiles2vec, smiles2vec_parameter_count, Smiles2VecSpec};

pub use crate::tensornet::HeadSpec;
use crate::tensornet::{ModelBuilder, Result, Scalar};

pub use crate::tensornet::HeadKind;

/// Meta key under which builders record their spec.
pub const SPEC_KEY: &str = "model_spec";

pub(crate) fn add_head<S: Scalar>(b: &mut ModelBuilder<S>, feature: usize, head: HeadSpec) -> Result<()> {
    let width = b.out_shape(feature).iter().product();
    let start = b.len();
    b.segment("head");
    for spec in crate::tensornet::head_layers(head, feature, width, start) {
        b.add(spec.name, spec.op, &spec.inputs, spec.init)?;
    }
    Ok(())
}
