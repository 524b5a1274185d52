//! Turns molecules into model inputs for one of the three modalities.

use rand::Rng;
use serde::{Deserialize, Serialize};
use weakchem_chem::imaging::{augmented_from_layout, layout_2d, rasterize, Grid, Layout2D, Scheme};
use weakchem_chem::textenc::{encode, OneHotSequence, Vocab};
use weakchem_chem::{ChemError, MolGraph};
use weakchem_core::{Scalar, Tensor};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    ImageStd,
    ImageEngd,
    Text,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::ImageStd => "image-std",
            Modality::ImageEngd => "image-engd",
            Modality::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        match s {
            "image-std" => Some(Modality::ImageStd),
            "image-engd" => Some(Modality::ImageEngd),
            "text" => Some(Modality::Text),
            _ => None,
        }
    }

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Modality::ImageStd => Some(Scheme::Std),
            Modality::ImageEngd => Some(Scheme::EngD),
            Modality::Text => None,
        }
    }
}

/// Encoder settings; stored in model metadata so fine-tuning encodes data the
/// same way pre-training did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub modality: Modality,
    pub grid: Grid,
    pub text_length: usize,
    /// Vocabulary in its text form; text modality only.
    #[serde(default)]
    pub vocab: Option<String>,
}

/// One encoded molecule. Images keep the layout for re-rotation and the
/// unrotated raster for evaluation.
#[derive(Debug, Clone)]
pub enum Encoded {
    Image {
        mol: MolGraph,
        layout: Layout2D,
        base: Vec<f32>,
    },
    Text(OneHotSequence),
}

#[derive(Debug, Clone)]
pub struct Featurizer {
    pub spec: FeatureSpec,
    vocab: Option<Vocab>,
}

impl Featurizer {
    pub fn new(spec: FeatureSpec) -> Result<Self> {
        let vocab = match (spec.modality, &spec.vocab) {
            (Modality::Text, Some(v)) => Some(Vocab::from_text(v)?),
            (Modality::Text, None) => {
                return Err(HarnessError::Config("text modality needs a vocabulary".into()));
            }
            _ => None,
        };
        Ok(Featurizer { spec, vocab })
    }

    pub fn vocab(&self) -> Option<&Vocab> {
        self.vocab.as_ref()
    }

    /// Per-sample input shape.
    pub fn sample_shape(&self) -> Vec<usize> {
        match self.spec.modality.scheme() {
            Some(s) => vec![self.spec.grid.size, self.spec.grid.size, s.channels()],
            None => vec![self.spec.text_length, self.vocab.as_ref().map_or(0, Vocab::len)],
        }
    }

    /// Encodes one molecule; `text` is the spelling used by the text modality.
    pub fn encode(&self, mol: &MolGraph, text: &str) -> std::result::Result<Encoded, ChemError> {
        match self.spec.modality.scheme() {
            Some(scheme) => {
                let layout = layout_2d(mol, &self.spec.grid)?;
                let img = rasterize(mol, &layout, scheme, &self.spec.grid)?;
                Ok(Encoded::Image {
                    mol: mol.clone(),
                    layout,
                    base: img.data,
                })
            }
            None => {
                let vocab = self.vocab.as_ref().expect("text featurizer has a vocabulary");
                Ok(Encoded::Text(encode(text, vocab, self.spec.text_length)?))
            }
        }
    }

    /// Stacks items into a batch. With `augment`, images are re-rendered at a
    /// random rotation.
    pub fn batch<S: Scalar, R: Rng>(&self, items: &[&Encoded], mut augment: Option<&mut R>) -> Result<Tensor<S>> {
        let shape = self.sample_shape();
        let per: usize = shape.iter().product();
        let mut data = Vec::with_capacity(per * items.len());
        for item in items {
            match item {
                Encoded::Image { mol, layout, base } => match augment.as_deref_mut() {
                    Some(rng) => {
                        let scheme = self.spec.modality.scheme().expect("image modality");
                        let img = augmented_from_layout(mol, layout, scheme, &self.spec.grid, rng)?;
                        data.extend(img.data.iter().map(|&v| S::of(v as f64)));
                    }
                    None => data.extend(base.iter().map(|&v| S::of(v as f64))),
                },
                Encoded::Text(seq) => {
                    let start = data.len();
                    data.resize(start + per, S::zero());
                    for (row, &k) in seq.indices.iter().enumerate() {
                        data[start + row * seq.vocab_size + k] = S::one();
                    }
                }
            }
        }
        let mut full = vec![items.len()];
        full.extend(shape);
        Ok(Tensor::from_vec(&full, data)?)
    }
}
