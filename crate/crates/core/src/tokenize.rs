//! Word tokenizer shared by the rule engine and the feature hasher.
//!
//! Text is lowercased, ASCII punctuation other than `-`, `/`, `'` and `_`
//! is split off into single-character tokens, and the rest is split on
//! whitespace. `"No effusion; s/p CABG."` becomes
//! `["no", "effusion", ";", "s/p", "cabg", "."]`.

fn is_isolated(c: char) -> bool {
    c.is_ascii_punctuation() && !matches!(c, '-' | '/' | '\'' | '_')
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if is_isolated(c) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(c.to_string());
        } else {
            current.extend(c.to_lowercase());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokens that close a clause. Cue scope never crosses one.
pub fn is_clause_boundary(token: &str) -> bool {
    matches!(token, "." | ";" | ":" | "!" | "?")
}
