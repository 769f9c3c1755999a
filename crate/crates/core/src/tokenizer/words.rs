/// Characters detached as standalone tokens by the word tokenizer.
pub const PUNCTUATION: [char; 12] = [
    '.', ',', '!', '?', ':', ';', '"', '«', '»', '(', ')', '-',
];

const CLOSING: [char; 8] = ['.', ',', '!', '?', ':', ';', ')', '»'];
const OPENING: [char; 2] = ['(', '«'];

/// Lowercases and collapses whitespace runs to single spaces. Applied to
/// every document at load time and to every text before tokenization.
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits on whitespace and detaches the punctuation set as standalone
/// tokens: `"сыграют в финале."` -> `["сыграют", "в", "финале", "."]`.
pub fn word_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if PUNCTUATION.contains(&c) {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            } else {
                word.push(c);
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Inverts tokenization spacing: no space before closing punctuation, none
/// after an opening quote or bracket. Straight double quotes alternate
/// between opening and closing.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut open_quote = false;
    let mut glue_next = false;
    for token in tokens {
        let is_straight_quote = token == "\"";
        let closes = token
            .chars()
            .next()
            .is_some_and(|c| CLOSING.contains(&c) && token.chars().count() == 1)
            || (is_straight_quote && open_quote);
        if !out.is_empty() && !closes && !glue_next {
            out.push(' ');
        }
        out.push_str(token);
        glue_next = token
            .chars()
            .next()
            .is_some_and(|c| OPENING.contains(&c) && token.chars().count() == 1)
            || (is_straight_quote && !open_quote);
        if is_straight_quote {
            open_quote = !open_quote;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_sentence_punctuation() {
        assert_eq!(
            word_tokenize("сыграют в финале."),
            vec!["сыграют", "в", "финале", "."]
        );
    }

    #[test]
    fn empty_text_gives_no_tokens() {
        assert_eq!(word_tokenize(""), Vec::<String>::new());
        assert_eq!(word_tokenize("   "), Vec::<String>::new());
    }

    #[test]
    fn comma_round_trip() {
        let tokens = word_tokenize("a, b");
        assert_eq!(tokens, vec!["a", ",", "b"]);
        assert_eq!(detokenize(&tokens), "a, b");
    }

    #[test]
    fn quotes_round_trip() {
        let text = "клуб \"спартак\" выиграл";
        assert_eq!(detokenize(&word_tokenize(text)), text);
    }

    #[test]
    fn guillemets_round_trip() {
        let text = "«правда» сообщает: марш отменён";
        assert_eq!(detokenize(&word_tokenize(text)), text);
    }

    #[test]
    fn embedded_punctuation_is_detached() {
        assert_eq!(word_tokenize("a,b"), vec!["a", ",", "b"]);
        assert_eq!(word_tokenize("(так)"), vec!["(", "так", ")"]);
    }

    #[test]
    fn normalize_lowercases_and_collapses_whitespace() {
        assert_eq!(normalize("  Мид\t РФ \n"), "мид рф");
        assert_eq!(normalize(""), "");
    }
}
