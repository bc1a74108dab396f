//! Dependency relations that encode propositions.
//!
//! The reference list uses Stanford-dependency labels. Parsers emitting
//! Universal Dependencies v2 use different names for several of them, so a
//! second list maps each entry onto its UD counterpart:
//!
//! | Stanford    | UD v2                              |
//! |-------------|------------------------------------|
//! | advcl       | advcl                              |
//! | advmod      | advmod                             |
//! | amod        | amod                               |
//! | appos       | appos                              |
//! | cc          | cc                                 |
//! | csubj       | csubj                              |
//! | csubjpass   | csubj:pass                         |
//! | det         | det (except a, an, the)            |
//! | neg         | advmod with lemma not/n't/never/no, or neg |
//! | npadvmod    | obl:npmod, nmod:npmod              |
//! | nsubj       | nsubj (except it, this)            |
//! | nsubjpass   | nsubj:pass                         |
//! | nummod      | nummod                             |
//! | poss        | nmod:poss                          |
//! | predet      | det:predet                         |
//! | preconj     | cc:preconj                         |
//! | prep        | case                               |
//! | quantmod    | advmod                             |
//! | tmod        | obl:tmod, nmod:tmod                |
//! | vmod        | acl                                |

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const DET_EXCEPTIONS: [&str; 3] = ["a", "an", "the"];
pub const NSUBJ_EXCEPTIONS: [&str; 2] = ["it", "this"];
pub const NEGATION_LEMMAS: [&str; 4] = ["not", "n't", "never", "no"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tagset {
    /// Stanford dependencies.
    Sd,
    /// Universal Dependencies v2.
    #[default]
    Ud,
}

impl FromStr for Tagset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "sd" | "stanford" => Ok(Tagset::Sd),
            "ud" | "universal" => Ok(Tagset::Ud),
            other => Err(Error::Config(format!("unknown tagset `{other}` (expected sd or ud)"))),
        }
    }
}

impl fmt::Display for Tagset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tagset::Sd => "sd",
            Tagset::Ud => "ud",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationRule {
    pub label: String,
    /// Dependent lemmas for which the arc is not a proposition.
    pub excluded_lemmas: BTreeSet<String>,
    /// When set, only these dependent lemmas qualify.
    pub required_lemmas: Option<BTreeSet<String>>,
}

impl RelationRule {
    pub fn plain(label: &str) -> Self {
        RelationRule {
            label: label.to_string(),
            excluded_lemmas: BTreeSet::new(),
            required_lemmas: None,
        }
    }

    fn except(label: &str, lemmas: &[&str]) -> Self {
        RelationRule {
            excluded_lemmas: lemmas.iter().map(|s| s.to_string()).collect(),
            ..RelationRule::plain(label)
        }
    }

    fn only(label: &str, lemmas: &[&str]) -> Self {
        RelationRule {
            required_lemmas: Some(lemmas.iter().map(|s| s.to_string()).collect()),
            ..RelationRule::plain(label)
        }
    }

    fn admits(&self, lemma: &str) -> bool {
        !self.excluded_lemmas.contains(lemma)
            && self.required_lemmas.as_ref().is_none_or(|r| r.contains(lemma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Proposition,
    /// The relation is listed but the dependent lemma is excepted.
    LexicalException,
    NotListed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Whitelist {
    rules: Vec<RelationRule>,
}

impl Whitelist {
    pub fn for_tagset(tagset: Tagset) -> Self {
        match tagset {
            Tagset::Sd => Whitelist::stanford(),
            Tagset::Ud => Whitelist::universal(),
        }
    }

    /// The twenty proposition-bearing Stanford relations.
    pub fn stanford() -> Self {
        let mut rules: Vec<RelationRule> = [
            "advcl", "advmod", "amod", "appos", "cc", "csubj", "csubjpass", "neg", "npadvmod", "nsubjpass",
            "nummod", "poss", "predet", "preconj", "prep", "quantmod", "tmod", "vmod",
        ]
        .into_iter()
        .map(RelationRule::plain)
        .collect();
        rules.push(RelationRule::except("det", &DET_EXCEPTIONS));
        rules.push(RelationRule::except("nsubj", &NSUBJ_EXCEPTIONS));
        Whitelist { rules }
    }

    pub fn universal() -> Self {
        let mut rules: Vec<RelationRule> = [
            "advcl", "advmod", "amod", "appos", "cc", "csubj", "csubj:pass", "neg", "obl:npmod", "nmod:npmod",
            "nsubj:pass", "nummod", "nmod:poss", "det:predet", "cc:preconj", "case", "obl:tmod", "nmod:tmod", "acl",
        ]
        .into_iter()
        .map(RelationRule::plain)
        .collect();
        rules.push(RelationRule::only("advmod", &NEGATION_LEMMAS));
        rules.push(RelationRule::except("det", &DET_EXCEPTIONS));
        rules.push(RelationRule::except("nsubj", &NSUBJ_EXCEPTIONS));
        Whitelist { rules }
    }

    pub fn add(&mut self, rule: RelationRule) {
        self.rules.push(rule);
    }

    pub fn rules(&self) -> &[RelationRule] {
        &self.rules
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.rules.iter().map(|r| r.label.as_str()).collect()
    }

    pub fn contains_label(&self, deprel: &str) -> bool {
        self.rules.iter().any(|r| r.label == deprel)
    }

    /// Classifies an arc by its (lowercased) relation and dependent lemma.
    pub fn decide(&self, deprel: &str, dependent_lemma: &str) -> Decision {
        let mut listed = false;
        for rule in self.rules.iter().filter(|r| r.label == deprel) {
            listed = true;
            if rule.admits(dependent_lemma) {
                return Decision::Proposition;
            }
        }
        if listed {
            Decision::LexicalException
        } else {
            Decision::NotListed
        }
    }
}
