//! Word, sentence and syllable counting rules shared by the metrics.

/// Words: maximal runs of letters, digits and apostrophes that contain at
/// least one letter or digit.
pub fn words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let is_word_char = |c: char| c.is_alphanumeric() || c == '\'' || c == '\u{2019}';
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(&text[s..i]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out.retain(|w| w.chars().any(char::is_alphanumeric));
    out
}

/// Sentence terminators: `.`, `!` or `?` followed by whitespace or the end
/// of the text. A terminator only closes a sentence that contains a word.
pub fn sentence_count(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut seen_word = false;
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            seen_word = true;
        } else if matches!(c, '.' | '!' | '?')
            && chars.get(i + 1).is_none_or(|n| n.is_whitespace())
            && seen_word
        {
            count += 1;
            seen_word = false;
        }
    }
    count
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel groups, minus a terminal silent `e` (kept for consonant + "le"),
/// at least one.
pub fn syllables(word: &str) -> usize {
    let lower: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .collect();
    let mut groups: usize = 0;
    let mut in_group = false;
    for &c in &lower {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    let n = lower.len();
    if n >= 1 && lower[n - 1] == 'e' {
        let consonant_le = n >= 3
            && lower[n - 2] == 'l'
            && lower[n - 3].is_alphabetic()
            && !is_vowel(lower[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

/// Paragraphs separated by blank lines.
pub fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                out.push(current.trim().to_string());
            }
            current.clear();
        } else {
            current.push_str(line);
            current.push('\n');
        }
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

pub const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may",
    "me", "might", "more", "most", "must", "my", "no", "nor", "not", "now", "of", "off", "on",
    "once", "only", "or", "other", "our", "ours", "out", "over", "own", "same", "shall", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then",
    "there", "these", "they", "this", "those", "through", "thus", "to", "too", "under", "until",
    "up", "upon", "us", "very", "was", "we", "were", "what", "when", "where", "whether", "which",
    "while", "who", "whom", "why", "will", "with", "within", "would", "yet", "you", "your",
];

/// Lowercased words minus stop words.
pub fn content_words(text: &str) -> std::collections::BTreeSet<String> {
    words(text)
        .into_iter()
        .map(str::to_lowercase)
        .filter(|w| !STOP_WORDS.contains(&w.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syllable_rules() {
        for (w, n) in [
            ("cat", 1),
            ("the", 1),
            ("table", 2),
            ("people", 2),
            ("make", 1),
            ("free", 1),
            ("readability", 5),
            ("rhythm", 1),
            ("don't", 1),
            ("2024", 1),
            ("queue", 1),
            ("create", 1),
        ] {
            assert_eq!(syllables(w), n, "{w}");
        }
    }

    #[test]
    fn sentence_rules() {
        assert_eq!(sentence_count("The cat sat on the mat."), 1);
        assert_eq!(sentence_count("Pi is 3.14 today! Really?"), 2);
        assert_eq!(sentence_count("Wait... what?"), 2);
        assert_eq!(sentence_count("no terminator"), 0);
        assert_eq!(sentence_count(". . ."), 0);
    }

    #[test]
    fn word_rules() {
        assert_eq!(words("It's 3.14, ok?"), vec!["It's", "3", "14", "ok"]);
        assert!(words(" ' -- ").is_empty());
    }

    #[test]
    fn paragraph_split() {
        assert_eq!(paragraphs("a\nb\n\n  \nc\n"), vec!["a\nb", "c"]);
        assert!(paragraphs("\n\n").is_empty());
    }
}
