use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;
pub const PAD: u32 = 3;

const RESERVED: [&str; 4] = ["<bos>", "<eos>", "<unk>", "<pad>"];

/// Dense token ids; 0..4 are reserved for BOS, EOS, UNK and PAD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_freq` times; ids follow lexical order.
    pub fn build<'a, I, S>(texts: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for toks in texts {
            for t in toks {
                *counts.entry(t.as_ref()).or_default() += 1;
            }
        }
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            counts
                .into_iter()
                .filter(|(t, c)| *c >= min_freq && !RESERVED.contains(t))
                .map(|(t, _)| t.to_string()),
        );
        Self::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or("<unk>").to_string())
            .collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
