/// First sentence of a text, verbatim. A sentence ends at the first
/// `. ! ?` followed by whitespace or end of text. A period on a
/// single-letter word inside a run of initials ("и. о.", "дж. р.") is an
/// abbreviation, not a boundary. Texts without a boundary come back whole.
pub fn first_sentence(text: &str) -> String {
    let words: Vec<(usize, &str)> = split_with_offsets(text);
    for (i, &(start, word)) in words.iter().enumerate() {
        let Some(last) = word.chars().last() else { continue };
        if !matches!(last, '.' | '!' | '?') {
            continue;
        }
        if last == '.' && is_initial(word) {
            let prev_initial = i > 0 && is_initial(words[i - 1].1);
            let next_initial = words.get(i + 1).is_some_and(|&(_, w)| is_initial(w));
            if prev_initial || next_initial {
                continue;
            }
        }
        return text[..start + word.len()].to_string();
    }
    text.to_string()
}

fn split_with_offsets(text: &str) -> Vec<(usize, &str)> {
    let mut words = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                words.push((s, &text[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        words.push((s, &text[s..]));
    }
    words
}

/// A single letter followed by a period, like "о." or "r.".
fn is_initial(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(
        (chars.next(), chars.next(), chars.next()),
        (Some(c), Some('.'), None) if c.is_alphabetic()
    )
}

/// First-sentence baseline with full stops removed and the headline capped
/// at 25 words.
pub fn first_sentence_modified(text: &str) -> String {
    let sentence = first_sentence(text).replace('.', "");
    sentence
        .split_whitespace()
        .take(25)
        .collect::<Vec<_>>()
        .join(" ")
}
