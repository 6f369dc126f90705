//! Whitespace + punctuation tokenizer.
//!
//! Splits on whitespace, then peels leading/trailing ASCII punctuation off
//! each chunk into separate tokens. A token counts as a word when it
//! contains at least one alphabetic character; punctuation and numeric
//! tokens are never perturbed. Original spacing is not preserved: output is
//! rejoined with single spaces.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub is_word: bool,
}

impl Token {
    fn new(text: &str) -> Self {
        Token { text: text.to_string(), is_word: text.chars().any(char::is_alphabetic) }
    }
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut core = chunk;
        let mut leading = Vec::new();
        while let Some(c) = core.chars().next() {
            if c.is_ascii_punctuation() && core.chars().count() > 1 {
                leading.push(c);
                core = &core[c.len_utf8()..];
            } else {
                break;
            }
        }
        let mut trailing = Vec::new();
        while let Some(c) = core.chars().last() {
            if c.is_ascii_punctuation() && core.chars().count() > 1 {
                trailing.push(c);
                core = &core[..core.len() - c.len_utf8()];
            } else {
                break;
            }
        }
        for c in leading {
            tokens.push(Token { text: c.to_string(), is_word: false });
        }
        tokens.push(Token::new(core));
        for c in trailing.into_iter().rev() {
            tokens.push(Token { text: c.to_string(), is_word: false });
        }
    }
    tokens
}

/// Join tokens back into a line; empty texts (dropped tokens) are skipped.
pub fn join(tokens: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for t in tokens {
        if t.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&t);
    }
    out
}
