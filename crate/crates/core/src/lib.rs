//! Token-level hate-sense disambiguation for hate speech classification,
//! with per-target-group bias auditing.
//!
//! The pipeline: a small transformer [`encoder`] produces contextual token
//! representations; each token is assigned the class whose encoded name it is
//! most cosine-similar to ([`sense`]); the selected class representation is
//! added to the token before max-pooling and an MLP head. Two auxiliary
//! losses in [`objectives`] tie the token senses to the document label and
//! discourage mixing several hateful senses in one input. [`audit`] computes
//! per-group accuracy, the across-group average and dispersion, and the
//! word-overlap statistic used to characterize stylistically distant groups.

pub mod audit;
pub mod checkpoint;
pub mod classes;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod experiments;
pub mod gradcheck;
pub mod objectives;
pub mod params;
pub mod plot;
pub mod sense;
pub mod synth;
pub mod tensor;
pub mod text;
pub mod training;

pub use classes::ClassSet;
pub use corpus::{load_corpus, Example, GroupedCorpus, Split};
pub use error::{Error, Result};
pub use tensor::{Tape, Tensor, TensorError, Var};
