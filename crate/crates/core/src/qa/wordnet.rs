//! Read-only synonym lookup over WordNet 3.x database files
//! (`index.{noun,verb,adj,adv}` and `data.{noun,verb,adj,adv}`).

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adjective,
    Adverb,
}

impl PartOfSpeech {
    pub const ALL: [PartOfSpeech; 4] = [
        PartOfSpeech::Noun,
        PartOfSpeech::Verb,
        PartOfSpeech::Adjective,
        PartOfSpeech::Adverb,
    ];

    fn file_suffix(&self) -> &'static str {
        match self {
            PartOfSpeech::Noun => "noun",
            PartOfSpeech::Verb => "verb",
            PartOfSpeech::Adjective => "adj",
            PartOfSpeech::Adverb => "adv",
        }
    }
}

/// Synset offsets are only unique within one part of speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetKey {
    pub pos: PartOfSpeech,
    pub offset: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("{file}: {message}")]
    Io { file: String, message: String },
    #[error("{file}:{line}: {message}")]
    Corrupt {
        file: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    index: HashMap<String, Vec<SynsetKey>>,
    synsets: HashMap<SynsetKey, Vec<String>>,
}

/// Lowercase, spaces to underscores: the lemma form used in the index.
pub fn normalize_lemma(word: &str) -> String {
    word.split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_lowercase()
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.starts_with("  ") && !l.trim().is_empty())
}

impl Lexicon {
    /// A lexicon with no entries; every word is only a synonym of itself.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load_wordnet(dir: &Path) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::default();
        for pos in PartOfSpeech::ALL {
            lexicon.load_data(&dir.join(format!("data.{}", pos.file_suffix())), pos)?;
        }
        for pos in PartOfSpeech::ALL {
            lexicon.load_index(&dir.join(format!("index.{}", pos.file_suffix())), pos)?;
        }
        Ok(lexicon)
    }

    fn read(path: &Path) -> Result<(String, String), LexiconError> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| LexiconError::Io {
            file: name.clone(),
            message: e.to_string(),
        })?;
        Ok((name, text))
    }

    fn load_data(&mut self, path: &Path, pos: PartOfSpeech) -> Result<(), LexiconError> {
        let (file, text) = Self::read(path)?;
        for (line, raw) in data_lines(&text) {
            let corrupt = |message: &str| LexiconError::Corrupt {
                file: file.clone(),
                line,
                message: message.to_string(),
            };
            let fields: Vec<&str> = raw.split(" | ").next().unwrap_or(raw).split_whitespace().collect();
            if fields.len() < 4 {
                return Err(corrupt("too few fields"));
            }
            let offset: u64 = fields[0].parse().map_err(|_| corrupt("bad synset offset"))?;
            let count = usize::from_str_radix(fields[3], 16).map_err(|_| corrupt("bad word count"))?;
            if fields.len() < 4 + 2 * count {
                return Err(corrupt("word list shorter than its count"));
            }
            let words = (0..count)
                .map(|i| {
                    let w = fields[4 + 2 * i];
                    // adjective position markers: reduced(a), galore(ip)
                    let w = match w.find('(') {
                        Some(p) if w.ends_with(')') => &w[..p],
                        _ => w,
                    };
                    w.to_lowercase()
                })
                .collect();
            self.synsets.insert(SynsetKey { pos, offset }, words);
        }
        Ok(())
    }

    fn load_index(&mut self, path: &Path, pos: PartOfSpeech) -> Result<(), LexiconError> {
        let (file, text) = Self::read(path)?;
        for (line, raw) in data_lines(&text) {
            let corrupt = |message: String| LexiconError::Corrupt {
                file: file.clone(),
                line,
                message,
            };
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let num = |i: usize| -> Result<usize, LexiconError> {
                fields
                    .get(i)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| corrupt(format!("field {} is not a count", i + 1)))
            };
            let synset_cnt = num(2)?;
            let p_cnt = num(3)?;
            let first_offset = 4 + p_cnt + 2;
            if fields.len() < first_offset + synset_cnt {
                return Err(corrupt("offset list shorter than its count".into()));
            }
            let lemma = fields[0].to_lowercase();
            let keys = self.index.entry(lemma).or_default();
            for f in &fields[first_offset..first_offset + synset_cnt] {
                let offset: u64 = f.parse().map_err(|_| corrupt(format!("bad offset `{f}`")))?;
                let key = SynsetKey { pos, offset };
                if !self.synsets.contains_key(&key) {
                    return Err(corrupt(format!("offset {offset} not found in data file")));
                }
                keys.push(key);
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn synsets_of(&self, word: &str) -> &[SynsetKey] {
        self.index
            .get(&normalize_lemma(word))
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn members(&self, key: &SynsetKey) -> &[String] {
        self.synsets.get(key).map(Vec::as_slice).unwrap_or_default()
    }

    /// Every lemma sharing a synset with `word` (any part of speech), plus
    /// the normalized word itself.
    pub fn synonyms(&self, word: &str) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self
            .synsets_of(word)
            .iter()
            .flat_map(|k| self.members(k).iter().cloned())
            .collect();
        out.insert(normalize_lemma(word));
        out
    }

    pub fn share_synset(&self, a: &str, b: &str) -> bool {
        let (a, b) = (self.synsets_of(a), self.synsets_of(b));
        a.iter().any(|k| b.contains(k))
    }
}
