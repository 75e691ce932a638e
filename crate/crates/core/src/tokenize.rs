//! Tokenizers shared by the language model, the text metrics and retrieval.

/// Code fence delimiter; always emitted as a single token.
pub const FENCE: &str = "```";

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Case-preserving tokenizer: runs of word characters form one token, every
/// other non-whitespace character is its own token, and a triple backtick is
/// kept together.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        if text[i..].starts_with(FENCE) {
            tokens.push(FENCE.to_string());
            chars.next();
            chars.next();
            continue;
        }
        if is_word_char(c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = chars.peek() {
                if !is_word_char(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            tokens.push(text[i..end].to_string());
        } else {
            tokens.push(c.to_string());
        }
    }
    tokens
}

/// Inverse of [`tokenize`] up to whitespace: tokens are space-joined and
/// fences are placed on their own lines.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        if tok == FENCE {
            if !out.is_empty() && !out.ends_with('\n') {
                out.push('\n');
            }
            out.push_str(FENCE);
            out.push('\n');
        } else {
            if !out.is_empty() && !out.ends_with('\n') {
                out.push(' ');
            }
            out.push_str(tok);
        }
    }
    out.trim_end().to_string()
}

/// Lowercased alphanumeric terms for lexical retrieval.
pub fn retrieval_terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}
