//! Rule-based rewriting of binary questions into declarative statements.
//!
//! The first two words are swapped and the question mark dropped:
//! `("Is it winter?", yes)` becomes `It is winter.`. A "no" answer adds
//! `not` right after the fronted verb:
//!
//! | fronted verb                | negation                 |
//! |-----------------------------|--------------------------|
//! | is, are, was, were          | `<verb> not`             |
//! | can, has, have              | `<verb> not`             |
//! | does, do, did (do-support)  | `<aux> not` + bare verb  |
//!
//! Questions that do not open with one of these verbs are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{normalize_answer, NO, YES};
use crate::relations::{ImageId, PropId, Proposition};

/// Question-opening verbs the rules cover.
pub const FRONTED_VERBS: [&str; 10] = [
    "is", "are", "was", "were", "can", "has", "have", "does", "do", "did",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryQA {
    question: String,
    positive: bool,
}

fn unsupported(question: &str, reason: impl Into<String>) -> Error {
    Error::UnsupportedQuestion {
        question: question.to_owned(),
        reason: reason.into(),
    }
}

impl BinaryQA {
    pub fn new(question: &str, answer: &str) -> Result<Self> {
        let positive = match normalize_answer(answer).as_str() {
            YES => true,
            NO => false,
            other => {
                return Err(unsupported(
                    question,
                    format!("answer {other:?} is not yes/no"),
                ))
            }
        };
        let q = question.trim();
        let Some(body) = q.strip_suffix('?') else {
            return Err(unsupported(question, "does not end with '?'"));
        };
        let mut tokens = body.split_whitespace();
        let verb = tokens.next().unwrap_or_default().to_lowercase();
        if !FRONTED_VERBS.contains(&verb.as_str()) {
            return Err(unsupported(
                question,
                format!("does not open with a fronted verb ({verb:?})"),
            ));
        }
        if tokens.next().is_none() {
            return Err(unsupported(question, "no subject after the verb"));
        }
        Ok(Self {
            question: q.to_owned(),
            positive,
        })
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn is_yes(&self) -> bool {
        self.positive
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn qa_to_proposition(qa: &BinaryQA) -> String {
    let body = qa
        .question
        .strip_suffix('?')
        .expect("validated on construction");
    let tokens: Vec<&str> = body.split_whitespace().collect();
    let mut out = Vec::with_capacity(tokens.len() + 1);
    out.push(capitalize(tokens[1]));
    out.push(tokens[0].to_lowercase());
    if !qa.positive {
        out.push("not".to_owned());
    }
    out.extend(tokens[2..].iter().map(|t| (*t).to_owned()));
    let mut s = out.join(" ");
    s.push('.');
    s
}

/// One line of the `convert` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvertedProposition {
    pub id: PropId,
    pub proposition_text: String,
}

/// A proposition the rules could not handle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: PropId,
    pub image_id: ImageId,
    pub reason: String,
}

pub fn convert_all<'a>(
    props: impl IntoIterator<Item = &'a Proposition>,
) -> (Vec<ConvertedProposition>, Vec<Rejection>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for p in props {
        match BinaryQA::new(&p.question, &p.answer) {
            Ok(qa) => ok.push(ConvertedProposition {
                id: p.id.clone(),
                proposition_text: qa_to_proposition(&qa),
            }),
            Err(e) => bad.push(Rejection {
                id: p.id.clone(),
                image_id: p.image_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    (ok, bad)
}
