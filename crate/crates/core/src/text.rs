//! Tokenization shared by the clusterer and the characterizers.

/// Lowercases `text` and splits it on every character that is neither
/// alphabetic nor numeric. Empty pieces are dropped, order and duplicates kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits() {
        assert_eq!(tokenize("Hello World"), vec!["hello", "world"]);
    }

    #[test]
    fn keeps_duplicates() {
        assert_eq!(tokenize("a  a"), vec!["a", "a"]);
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert!(tokenize("!!!").is_empty());
    }

    #[test]
    fn punctuation_delimits() {
        assert_eq!(
            tokenize("breaking:vaccine,recall... (fake?)"),
            vec!["breaking", "vaccine", "recall", "fake"]
        );
    }
}
