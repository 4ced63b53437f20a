//! Character-level neural transliteration between the Scots-based
//! orthography of the Book of the Dean of Lismore and Scottish Gaelic
//! orthography.

pub mod augment;
pub mod autograd;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod noising;
pub mod orthography;
pub mod seed;
pub mod tensor;
pub mod tokenizer;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/autograd.md")]
    mod autograd {}
    #[doc = include_str!("../../../book/src/tokenizer.md")]
    mod tokenizer {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/noising.md")]
    mod noising {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/bleu.md")]
    mod bleu {}
    #[doc = include_str!("../../../book/src/augment.md")]
    mod augment {}
    #[doc = include_str!("../../../book/src/orthography.md")]
    mod orthography {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
