use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use synens::scorers::{NgramModel, SharedScorer};
use synens::subword::BpeModel;
use synens::tokens::{Classifier, Representation};
use synens::trainer::ToyScorer;
use synens::transducer::{build_pos_to_plain, build_syntax_to_plain, build_word_to_bpe, MappingTransducer};

use crate::io::read_text;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Repr {
    /// Plain (possibly subword) text
    Plain,
    /// Bracketed tree, one per line
    Tree,
    /// Rule sequence `A→B C ; ...`
    Derivation,
    /// Linearized derivation with `</R>` markers
    Linder,
    /// POS tag before each word
    Pos,
}

impl Repr {
    /// The flat token representation a model over this form produces.
    pub fn kind(self) -> Result<Representation> {
        Ok(match self {
            Repr::Plain => Representation::PlainText,
            Repr::Tree => Representation::LinearTree,
            Repr::Linder => Representation::LinearDerivation,
            Repr::Pos => Representation::PosText,
            Repr::Derivation => bail!("derivations are not a decodable token sequence"),
        })
    }
}

/// `KIND=PATH` on the command line.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub repr: Repr,
    pub path: PathBuf,
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, path) = s
            .split_once('=')
            .ok_or_else(|| format!("expected KIND=PATH, got `{s}`"))?;
        let repr = Repr::from_str(kind, true)?;
        Ok(ModelSpec {
            repr,
            path: PathBuf::from(path),
        })
    }
}

/// Loads an n-gram or toy-scorer file, telling them apart by header.
pub fn load_scorer(path: &Path) -> Result<SharedScorer> {
    let text = read_text(Some(path))?;
    let ctx = || format!("cannot load model {}", path.display());
    if text.starts_with("#ngram") {
        Ok(Arc::new(NgramModel::from_text(&text).with_context(ctx)?))
    } else if text.starts_with("#toyscorer") {
        Ok(Arc::new(ToyScorer::from_text(&text).with_context(ctx)?))
    } else {
        Err(anyhow!("{} is neither an n-gram nor a toy model file", path.display()))
    }
}

pub fn load_classifier(labels: Option<&Path>, marker: &str) -> Result<Classifier> {
    match labels {
        Some(p) => Ok(Classifier::new(Classifier::labels_from_text(&read_text(Some(p))?), marker)),
        None => Ok(Classifier::lexical(marker)),
    }
}

pub fn load_bpe(path: &Path) -> Result<BpeModel> {
    BpeModel::from_text(&read_text(Some(path))?)
        .with_context(|| format!("cannot load BPE codes {}", path.display()))
}

/// Transducer from an internal model's representation to the external one.
pub fn transducer_for(
    external: Repr,
    internal: Repr,
    classifier: &Classifier,
    codes: Option<&BpeModel>,
) -> Result<MappingTransducer> {
    use Repr::*;
    Ok(match (external, internal) {
        (Plain, Tree | Linder) => build_syntax_to_plain(classifier.clone()),
        (Plain, Pos) => build_pos_to_plain(classifier.clone()),
        (Tree | Linder, Plain) => build_syntax_to_plain(classifier.clone()).invert()?,
        (Plain, Plain) => match codes {
            Some(bpe) => build_word_to_bpe(bpe),
            None => bail!("plain-to-plain multirep decoding needs --codes for the word-to-subword mapping"),
        },
        (e, i) => bail!("no transducer from {i:?} to {e:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_spec_parses() {
        let m: ModelSpec = "linder=models/a.lm".parse().unwrap();
        assert_eq!(m.repr, Repr::Linder);
        assert_eq!(m.path, PathBuf::from("models/a.lm"));
        assert!("nonsense".parse::<ModelSpec>().is_err());
        assert!("bogus=x".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn transducer_selection() {
        let cls = Classifier::new(["NP"], "@@");
        assert!(transducer_for(Repr::Plain, Repr::Linder, &cls, None).is_ok());
        assert!(transducer_for(Repr::Linder, Repr::Plain, &cls, None).is_ok());
        assert!(transducer_for(Repr::Plain, Repr::Plain, &cls, None).is_err());
        assert!(transducer_for(Repr::Tree, Repr::Linder, &cls, None).is_err());
    }
}
