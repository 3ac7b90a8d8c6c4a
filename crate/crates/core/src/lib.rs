//! Target-syntax representations, delayed-SGD training of toy scorers and
//! transducer-synchronized ensemble beam search.

pub mod decoder;
pub mod eval;
pub mod scorers;
pub mod subword;
pub mod tokens;
pub mod trainer;
pub mod transducer;
pub mod treebank;
pub mod wellformed;
