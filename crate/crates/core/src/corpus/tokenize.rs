const CONTRACTION_SUFFIXES: [&str; 6] = ["'s", "'m", "'re", "'ve", "'ll", "'d"];

/// Lowercases `text`, splits on whitespace, separates punctuation and splits
/// English contractions (`don't` becomes `do n't`, `i'm` becomes `i 'm`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chunk = chunk.to_lowercase();
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let joins_word = |c: char| c == '\'' || c == '-' || c == '\u{2019}';
            if c.is_alphanumeric() {
                word.push(c);
            } else if joins_word(c)
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
            {
                word.push(if c == '\u{2019}' { '\'' } else { c });
            } else {
                flush_word(&mut word, &mut tokens);
                if c == '.' {
                    // Runs of periods stay together as an ellipsis.
                    let start = i;
                    while i + 1 < chars.len() && chars[i + 1] == '.' {
                        i += 1;
                    }
                    tokens.push(".".repeat(i - start + 1));
                } else {
                    tokens.push(c.to_string());
                }
            }
            i += 1;
        }
        flush_word(&mut word, &mut tokens);
    }
    tokens
}

fn flush_word(word: &mut String, tokens: &mut Vec<String>) {
    if word.is_empty() {
        return;
    }
    let w = std::mem::take(word);
    if w.len() > 3 && w.ends_with("n't") {
        let (stem, neg) = w.split_at(w.len() - 3);
        tokens.push(stem.to_string());
        tokens.push(neg.to_string());
        return;
    }
    for suffix in CONTRACTION_SUFFIXES {
        if w.len() > suffix.len() && w.ends_with(suffix) {
            let (stem, tail) = w.split_at(w.len() - suffix.len());
            tokens.push(stem.to_string());
            tokens.push(tail.to_string());
            return;
        }
    }
    tokens.push(w);
}
