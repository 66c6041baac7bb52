//! Description preprocessing: cleaning, lowercasing, stopword removal and
//! Porter stemming.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::DescriptionRecord;

pub const SHIPPED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Error, Debug)]
pub enum TextprepError {
    #[error("`{apk_id}`: no tokens left after preprocessing")]
    EmptyAfterPreprocessing { apk_id: String },
    #[error("stopword list has no `# version:` header")]
    MissingVersion,
    #[error("stopword list line {line}: `{entry}` is not a lowercase word")]
    InvalidStopword { line: usize, entry: String },
    #[error("reading stopword list: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    version: String,
    words: HashSet<String>,
}

impl StopwordList {
    /// One word per line; `#` starts a comment line, and a
    /// `# version: <tag>` line names the list.
    pub fn parse(text: &str) -> Result<Self, TextprepError> {
        let mut version = None;
        let mut words = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_owned());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if line.to_lowercase() != line || line.contains(char::is_whitespace) {
                return Err(TextprepError::InvalidStopword {
                    line: i + 1,
                    entry: line.to_owned(),
                });
            }
            words.insert(line.to_owned());
        }
        Ok(Self {
            version: version.filter(|v| !v.is_empty()).ok_or(TextprepError::MissingVersion)?,
            words,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextprepError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::parse(SHIPPED_STOPWORDS).expect("shipped stopword list is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessedText {
    pub apk_id: String,
    pub tokens: Vec<String>,
    pub joined: String,
}

/// Replace everything but letters, digits, apostrophes and hyphens with a
/// space, collapse runs of spaces and trim.
pub fn clean(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' || c == '-' {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn tokenize_lower(text: &str) -> Vec<String> {
    text.split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, list: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !list.contains(t)).collect()
}

struct Stemmer {
    b: Vec<u8>,
    k: usize,
    j: isize,
}

impl Stemmer {
    fn cons(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.cons(i - 1),
            _ => true,
        }
    }

    /// Number of consonant-vowel sequences in `b[0..=j]`.
    fn m(&self) -> usize {
        let j = self.j;
        let mut n = 0;
        let mut i: isize = 0;
        loop {
            if i > j {
                return n;
            }
            if !self.cons(i as usize) {
                break;
            }
            i += 1;
        }
        i += 1;
        loop {
            loop {
                if i > j {
                    return n;
                }
                if self.cons(i as usize) {
                    break;
                }
                i += 1;
            }
            i += 1;
            n += 1;
            loop {
                if i > j {
                    return n;
                }
                if !self.cons(i as usize) {
                    break;
                }
                i += 1;
            }
            i += 1;
        }
    }

    fn vowel_in_stem(&self) -> bool {
        (0..=self.j).any(|i| !self.cons(i as usize))
    }

    fn double_c(&self, j: usize) -> bool {
        j >= 1 && self.b[j] == self.b[j - 1] && self.cons(j)
    }

    fn cvc(&self, i: usize) -> bool {
        if i < 2 || !self.cons(i) || self.cons(i - 1) || !self.cons(i - 2) {
            return false;
        }
        !matches!(self.b[i], b'w' | b'x' | b'y')
    }

    fn ends(&mut self, s: &str) -> bool {
        let s = s.as_bytes();
        let len = s.len();
        if len > self.k + 1 || &self.b[self.k + 1 - len..=self.k] != s {
            return false;
        }
        self.j = self.k as isize - len as isize;
        true
    }

    fn set_to(&mut self, s: &str) {
        let start = (self.j + 1) as usize;
        self.b.truncate(start);
        self.b.extend_from_slice(s.as_bytes());
        self.k = self.b.len() - 1;
    }

    fn r(&mut self, s: &str) {
        if self.m() > 0 {
            self.set_to(s);
        }
    }

    fn truncate_to(&mut self, k: usize) {
        self.k = k;
        self.b.truncate(k + 1);
    }

    fn step1ab(&mut self) {
        if self.b[self.k] == b's' {
            if self.ends("sses") {
                self.truncate_to(self.k - 2);
            } else if self.ends("ies") {
                self.set_to("i");
            } else if self.b[self.k - 1] != b's' {
                self.truncate_to(self.k - 1);
            }
        }
        if self.ends("eed") {
            if self.m() > 0 {
                self.truncate_to(self.k - 1);
            }
        } else if (self.ends("ed") || self.ends("ing")) && self.vowel_in_stem() {
            self.truncate_to(self.j as usize);
            if self.ends("at") {
                self.set_to("ate");
            } else if self.ends("bl") {
                self.set_to("ble");
            } else if self.ends("iz") {
                self.set_to("ize");
            } else if self.double_c(self.k) {
                if !matches!(self.b[self.k], b'l' | b's' | b'z') {
                    self.truncate_to(self.k - 1);
                }
            } else if self.m() == 1 && self.cvc(self.k) {
                self.set_to_after_k("e");
            }
        }
    }

    fn set_to_after_k(&mut self, s: &str) {
        self.j = self.k as isize;
        self.set_to(s);
    }

    fn step1c(&mut self) {
        if self.ends("y") && self.vowel_in_stem() {
            self.b[self.k] = b'i';
        }
    }

    fn first_rule(&mut self, rules: &[(&str, &str)]) {
        for (suffix, repl) in rules {
            if self.ends(suffix) {
                self.r(repl);
                return;
            }
        }
    }

    fn step2(&mut self) {
        let rules: &[(&str, &str)] = match self.b[self.k - 1] {
            b'a' => &[("ational", "ate"), ("tional", "tion")],
            b'c' => &[("enci", "ence"), ("anci", "ance")],
            b'e' => &[("izer", "ize")],
            b'l' => &[
                ("bli", "ble"),
                ("alli", "al"),
                ("entli", "ent"),
                ("eli", "e"),
                ("ousli", "ous"),
            ],
            b'o' => &[("ization", "ize"), ("ation", "ate"), ("ator", "ate")],
            b's' => &[
                ("alism", "al"),
                ("iveness", "ive"),
                ("fulness", "ful"),
                ("ousness", "ous"),
            ],
            b't' => &[("aliti", "al"), ("iviti", "ive"), ("biliti", "ble")],
            b'g' => &[("logi", "log")],
            _ => &[],
        };
        self.first_rule(rules);
    }

    fn step3(&mut self) {
        let rules: &[(&str, &str)] = match self.b[self.k] {
            b'e' => &[("icate", "ic"), ("ative", ""), ("alize", "al")],
            b'i' => &[("iciti", "ic")],
            b'l' => &[("ical", "ic"), ("ful", "")],
            b's' => &[("ness", "")],
            _ => &[],
        };
        self.first_rule(rules);
    }

    fn step4(&mut self) {
        let found = match self.b[self.k - 1] {
            b'a' => self.ends("al"),
            b'c' => self.ends("ance") || self.ends("ence"),
            b'e' => self.ends("er"),
            b'i' => self.ends("ic"),
            b'l' => self.ends("able") || self.ends("ible"),
            b'n' => self.ends("ant") || self.ends("ement") || self.ends("ment") || self.ends("ent"),
            b'o' => {
                (self.ends("ion") && self.j >= 0 && matches!(self.b[self.j as usize], b's' | b't')) || self.ends("ou")
            }
            b's' => self.ends("ism"),
            b't' => self.ends("ate") || self.ends("iti"),
            b'u' => self.ends("ous"),
            b'v' => self.ends("ive"),
            b'z' => self.ends("ize"),
            _ => false,
        };
        if found && self.m() > 1 {
            self.truncate_to(self.j as usize);
        }
    }

    fn step5(&mut self) {
        self.j = self.k as isize;
        if self.b[self.k] == b'e' {
            let a = self.m();
            if a > 1 || (a == 1 && !self.cvc(self.k - 1)) {
                self.truncate_to(self.k - 1);
            }
        }
        if self.b[self.k] == b'l' && self.double_c(self.k) && self.m() > 1 {
            self.truncate_to(self.k - 1);
        }
    }
}

/// Porter stemmer in its reference-implementation form. Tokens that are
/// not purely `a-z`, and tokens of one or two letters, are returned as is.
pub fn porter_stem(token: &str) -> String {
    if token.len() <= 2 || !token.bytes().all(|c| c.is_ascii_lowercase()) {
        return token.to_owned();
    }
    let mut s = Stemmer {
        b: token.as_bytes().to_vec(),
        k: token.len() - 1,
        j: 0,
    };
    s.step1ab();
    if s.k > 0 {
        s.step1c();
        s.step2();
        s.step3();
        s.step4();
        s.step5();
    }
    String::from_utf8(s.b).expect("ascii in, ascii out")
}

pub fn preprocess_text(apk_id: &str, text: &str, list: &StopwordList) -> Result<PreprocessedText, TextprepError> {
    let tokens: Vec<String> = remove_stopwords(tokenize_lower(&clean(text)), list)
        .iter()
        .map(|t| porter_stem(t))
        .collect();
    if tokens.is_empty() {
        return Err(TextprepError::EmptyAfterPreprocessing {
            apk_id: apk_id.to_owned(),
        });
    }
    Ok(PreprocessedText {
        apk_id: apk_id.to_owned(),
        joined: tokens.join(" "),
        tokens,
    })
}

pub fn preprocess(record: &DescriptionRecord, list: &StopwordList) -> Result<PreprocessedText, TextprepError> {
    preprocess_text(&record.apk_id, &record.description, list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn clean_rules() {
        assert_eq!(clean("Sends SMS!!  (covertly)"), "Sends SMS covertly");
        assert_eq!(clean(""), "");
        assert_eq!(clean("a\t\nb"), "a b");
        assert_eq!(clean("  don't  auto-start. "), "don't auto-start");
    }

    #[test]
    fn tokenize() {
        assert_eq!(tokenize_lower("Sends SMS"), words(&["sends", "sms"]));
        assert!(tokenize_lower("").is_empty());
        assert_eq!(
            tokenize_lower("sends sms"),
            tokenize_lower(&tokenize_lower("sends sms").join(" "))
        );
    }

    #[test]
    fn stopwords() {
        let list = StopwordList::shipped();
        assert_eq!(list.len(), 175);
        assert!(!list.contains("app"));
        assert_eq!(
            remove_stopwords(words(&["the", "app", "sends", "the", "message"]), &list),
            words(&["app", "sends", "message"])
        );
        assert!(remove_stopwords(words(&["the", "is", "of"]), &list).is_empty());
        assert_eq!(
            remove_stopwords(words(&["sms", "camera"]), &list),
            words(&["sms", "camera"])
        );
    }

    #[test]
    fn stopword_file_validation() {
        assert!(matches!(
            StopwordList::parse("the\n"),
            Err(TextprepError::MissingVersion)
        ));
        assert!(matches!(
            StopwordList::parse("# version: x\nThe\n"),
            Err(TextprepError::InvalidStopword { line: 2, .. })
        ));
    }

    #[test]
    fn stems() {
        for (w, s) in [
            ("sending", "send"),
            ("sends", "send"),
            ("caresses", "caress"),
            ("sky", "sky"),
            ("sent", "sent"),
            ("agreed", "agre"),
            ("generalization", "gener"),
            ("hopping", "hop"),
            ("filing", "file"),
            ("falling", "fall"),
        ] {
            assert_eq!(porter_stem(w), s, "{w}");
        }
        assert_eq!(porter_stem("auto-start"), "auto-start");
        assert_eq!(porter_stem("sms2"), "sms2");
        assert_eq!(porter_stem("is"), "is");
    }

    #[test]
    fn pipeline() {
        let list = StopwordList::shipped();
        let p = preprocess_text("x", "The app is sending the messages.", &list).unwrap();
        assert_eq!(p.tokens, words(&["app", "send", "messag"]));
        assert_eq!(p.joined, "app send messag");
        assert!(matches!(
            preprocess_text("x", "The of is.", &list),
            Err(TextprepError::EmptyAfterPreprocessing { .. })
        ));
    }
}
