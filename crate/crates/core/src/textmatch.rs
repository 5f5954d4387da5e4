//! Word-boundary-aware substring matching shared by the classifier and the
//! area assigner.

/// Returns true when `pattern` occurs in `text` with non-alphanumeric
/// characters (or string ends) on both sides. Matching is case-insensitive;
/// the pattern may span several words ("fuel cell", "vehicle-to-vehicle").
pub(crate) fn contains_word_bounded(text: &str, pattern: &str) -> bool {
    let text = text.to_lowercase();
    let pattern = pattern.trim().to_lowercase();
    if pattern.is_empty() {
        return false;
    }
    let mut start = 0;
    while let Some(pos) = text[start..].find(&pattern) {
        let begin = start + pos;
        let end = begin + pattern.len();
        let left_ok = begin == 0
            || !text[..begin]
                .chars()
                .next_back()
                .is_some_and(char::is_alphanumeric);
        let right_ok = end == text.len()
            || !text[end..].chars().next().is_some_and(char::is_alphanumeric);
        if left_ok && right_ok {
            return true;
        }
        start = begin + pattern.chars().next().map_or(1, char::len_utf8);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_whole_words_only() {
        assert!(contains_word_bounded("a fuel cell system", "fuel cell"));
        assert!(contains_word_bounded("detect a hydrogen leak.", "leak"));
        assert!(!contains_word_bounded("the automotive system", "motor"));
        assert!(!contains_word_bounded("electromechanical parts", "mechanical"));
    }

    #[test]
    fn is_case_insensitive() {
        assert!(contains_word_bounded("Fuel Cell stack", "fuel cell"));
        assert!(contains_word_bounded("ADAS sensors", "adas"));
    }

    #[test]
    fn punctuation_counts_as_boundary() {
        assert!(contains_word_bounded("vehicle-to-vehicle link", "vehicle-to-vehicle"));
        assert!(contains_word_bounded("(leak)", "leak"));
        assert!(!contains_word_bounded("sand and gravel", "and gravel extra"));
    }

    #[test]
    fn empty_pattern_never_matches() {
        assert!(!contains_word_bounded("anything", ""));
        assert!(!contains_word_bounded("anything", "   "));
    }
}
