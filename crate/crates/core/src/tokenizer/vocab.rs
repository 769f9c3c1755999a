use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

pub const SPECIAL_TOKENS: [&str; 4] = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN];

/// Token <-> id maps with the four reserved specials at ids 0-3.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    pub fn with_specials() -> Self {
        let mut v = Self {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        for tok in SPECIAL_TOKENS {
            v.push(tok.to_string());
        }
        v
    }

    /// Builds a vocabulary from token counts: ids after the specials are
    /// assigned by descending frequency, ties broken lexicographically, and
    /// the total size is capped at `max_size`.
    pub fn from_counts<I>(counts: I, max_size: usize) -> Self
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut ranked: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, _)| !SPECIAL_TOKENS.contains(&t.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut v = Self::with_specials();
        for (token, _) in ranked {
            if v.len() >= max_size {
                break;
            }
            v.push(token);
        }
        v
    }

    /// Appends a token with the next id. Re-inserting an existing token is a
    /// no-op returning its current id.
    pub fn push(&mut self, token: String) -> u32 {
        if let Some(&id) = self.token_to_id.get(&token) {
            return id;
        }
        let id = self.id_to_token.len() as u32;
        self.token_to_id.insert(token.clone(), id);
        self.id_to_token.push(token);
        id
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id_of(token).unwrap_or(UNK_ID)
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, u32)> {
        self.id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
    }

    /// Rebuilds from an explicit (token, id) listing; ids must be dense from
    /// 0 with the specials in their reserved slots.
    pub fn from_entries(entries: Vec<(String, u32)>) -> Result<Self> {
        let mut ordered = vec![None; entries.len()];
        for (token, id) in entries {
            let slot = ordered.get_mut(id as usize).ok_or(Error::Checkpoint {
                message: format!("vocabulary id {id} out of range"),
            })?;
            if slot.is_some() {
                return Err(Error::Checkpoint {
                    message: format!("duplicate vocabulary id {id}"),
                });
            }
            *slot = Some(token);
        }
        let id_to_token: Vec<String> = ordered
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::Checkpoint {
                message: "vocabulary ids are not dense".to_string(),
            })?;
        for (i, tok) in SPECIAL_TOKENS.iter().enumerate() {
            if id_to_token.get(i).map(String::as_str) != Some(*tok) {
                return Err(Error::Checkpoint {
                    message: format!("special token {tok} missing from id {i}"),
                });
            }
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect::<HashMap<_, _>>();
        if token_to_id.len() != id_to_token.len() {
            return Err(Error::Checkpoint {
                message: "duplicate token in vocabulary".to_string(),
            });
        }
        Ok(Self {
            token_to_id,
            id_to_token,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_occupy_first_four_ids() {
        let v = Vocabulary::with_specials();
        assert_eq!(v.id_of(PAD_TOKEN), Some(PAD_ID));
        assert_eq!(v.id_of(UNK_TOKEN), Some(UNK_ID));
        assert_eq!(v.id_of(BOS_TOKEN), Some(BOS_ID));
        assert_eq!(v.id_of(EOS_TOKEN), Some(EOS_ID));
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn maps_are_mutual_inverses() {
        let mut v = Vocabulary::with_specials();
        v.push("книга".to_string());
        v.push("дом".to_string());
        for (token, id) in v.tokens() {
            assert_eq!(v.id_of(token), Some(id));
            assert_eq!(v.token_of(id), Some(token));
        }
    }

    #[test]
    fn from_counts_ranks_by_frequency_then_token() {
        let counts = vec![
            ("b".to_string(), 5u64),
            ("a".to_string(), 5),
            ("c".to_string(), 9),
        ];
        let v = Vocabulary::from_counts(counts, 100);
        assert_eq!(v.id_of("c"), Some(4));
        assert_eq!(v.id_of("a"), Some(5));
        assert_eq!(v.id_of("b"), Some(6));
    }

    #[test]
    fn from_counts_respects_cap() {
        let counts = (0..100).map(|i| (format!("t{i:03}"), 1u64));
        let v = Vocabulary::from_counts(counts, 10);
        assert_eq!(v.len(), 10);
    }

    #[test]
    fn absent_token_maps_to_unk() {
        let v = Vocabulary::from_counts(vec![("дом".to_string(), 1u64)], 10);
        assert_eq!(v.id_or_unk("никогда"), UNK_ID);
        assert_ne!(v.id_or_unk("дом"), UNK_ID);
    }
}
