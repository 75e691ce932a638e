//! HTML body cleaning.
//!
//! Anchors and images become the literal `[HTML]` token, `<pre><code>` blocks
//! become fenced code, inline `<code>` becomes backtick-quoted text and every
//! other tag is dropped. Outside fences a literal `<` is written as `&lt;` so
//! that cleaned prose never contains markup.

use crate::tokenize::FENCE;

pub const HTML_TOKEN: &str = "[HTML]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cleaned {
    pub text: String,
    pub code_blocks: usize,
}

pub fn clean_html(html: &str) -> String {
    clean_html_detailed(html).text
}

enum Piece {
    Prose(String),
    Code(String),
}

struct Tag {
    name: String,
    closing: bool,
    end: usize,
}

/// Parses a tag starting at `start` (which must index a `<`). Returns `None`
/// if the bytes there do not form a tag, in which case the `<` is text.
fn parse_tag(html: &str, start: usize) -> Option<Tag> {
    let bytes = html.as_bytes();
    let mut i = start + 1;
    if html[i..].starts_with("!--") {
        let end = html[i..].find("-->").map(|p| i + p + 3)?;
        return Some(Tag {
            name: "!--".into(),
            closing: false,
            end,
        });
    }
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let name_start = i;
    if !bytes.get(i).is_some_and(|b| b.is_ascii_alphabetic() || *b == b'!') {
        return None;
    }
    while bytes.get(i).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'!') {
        i += 1;
    }
    let name = html[name_start..i].to_ascii_lowercase();
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => {
                return Some(Tag {
                    name,
                    closing,
                    end: i + 1,
                })
            }
            None if b == b'<' => return None,
            None => {}
        }
        i += 1;
    }
    None
}

/// Finds the closing tag `</name>` at or after `from`; returns (start, end).
fn find_close(html: &str, lower: &str, from: usize, name: &str) -> Option<(usize, usize)> {
    let needle = format!("</{name}");
    let mut search = from;
    while let Some(p) = lower[search..].find(&needle) {
        let start = search + p;
        if let Some(tag) = parse_tag(html, start) {
            if tag.closing && tag.name == name {
                return Some((start, tag.end));
            }
        }
        search = start + needle.len();
    }
    None
}

fn skip_ws(html: &str, mut i: usize) -> usize {
    while html.as_bytes().get(i).is_some_and(u8::is_ascii_whitespace) {
        i += 1;
    }
    i
}

fn unescape(s: &str) -> String {
    html_escape::decode_html_entities(s).into_owned()
}

fn prose(s: &str) -> String {
    unescape(s).replace('<', "&lt;")
}

/// Text content of a fragment with all tags removed.
fn strip_tags(fragment: &str) -> String {
    let mut out = String::new();
    let mut i = 0;
    let mut text_start = 0;
    let bytes = fragment.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'<' {
            if let Some(tag) = parse_tag(fragment, i) {
                out.push_str(&fragment[text_start..i]);
                i = tag.end;
                text_start = i;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&fragment[text_start..]);
    out
}

pub fn clean_html_detailed(html: &str) -> Cleaned {
    let lower = html.to_ascii_lowercase();
    let bytes = html.as_bytes();
    let mut pieces: Vec<Piece> = Vec::new();
    let mut i = 0;
    let mut text_start = 0;

    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let Some(tag) = parse_tag(html, i) else {
            i += 1;
            continue;
        };
        pieces.push(Piece::Prose(prose(&html[text_start..i])));
        let mut next = tag.end;
        match (tag.name.as_str(), tag.closing) {
            ("a", false) => {
                pieces.push(Piece::Prose(HTML_TOKEN.into()));
                if let Some((_, end)) = find_close(html, &lower, tag.end, "a") {
                    next = end;
                }
            }
            ("img", _) => pieces.push(Piece::Prose(HTML_TOKEN.into())),
            ("pre", false) => {
                let j = skip_ws(html, tag.end);
                let code_open = (bytes.get(j) == Some(&b'<'))
                    .then(|| parse_tag(html, j))
                    .flatten()
                    .filter(|t| t.name == "code" && !t.closing);
                if let Some(code_open) = code_open {
                    let (inner_end, after_code) =
                        find_close(html, &lower, code_open.end, "code").unwrap_or((html.len(), html.len()));
                    let inner = &html[code_open.end..inner_end];
                    pieces.push(Piece::Code(unescape(inner)));
                    next = after_code;
                    let k = skip_ws(html, next);
                    if let Some((start, end)) = find_close(html, &lower, k, "pre") {
                        if start == k {
                            next = end;
                        }
                    }
                }
            }
            ("code", false) => {
                let (inner_end, after) = find_close(html, &lower, tag.end, "code").unwrap_or((html.len(), html.len()));
                let inner = strip_tags(&html[tag.end..inner_end]);
                pieces.push(Piece::Prose(format!("`{}`", prose(&inner))));
                next = after;
            }
            _ => {}
        }
        i = next;
        text_start = next;
    }
    pieces.push(Piece::Prose(prose(&html[text_start..])));
    assemble(pieces)
}

fn collapse_newlines(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut run = 0;
    for c in s.chars() {
        if c == '\n' {
            run += 1;
            if run <= 2 {
                out.push(c);
            }
        } else {
            run = 0;
            out.push(c);
        }
    }
    out
}

fn assemble(pieces: Vec<Piece>) -> Cleaned {
    // merge adjacent prose so newline runs spanning tags collapse together
    let mut merged: Vec<Piece> = Vec::new();
    for p in pieces {
        match (merged.last_mut(), p) {
            (Some(Piece::Prose(acc)), Piece::Prose(s)) => acc.push_str(&s),
            (_, p) => merged.push(p),
        }
    }
    let mut out = String::new();
    let mut code_blocks = 0;
    for p in merged {
        match p {
            Piece::Prose(s) => out.push_str(&collapse_newlines(&s)),
            Piece::Code(code) => {
                code_blocks += 1;
                let trimmed_end = out.trim_end_matches([' ', '\t']).len();
                out.truncate(trimmed_end);
                if !out.is_empty() && !out.ends_with('\n') {
                    out.push('\n');
                }
                out.push_str(FENCE);
                out.push('\n');
                let code = code.strip_suffix('\n').unwrap_or(&code);
                if !code.is_empty() {
                    out.push_str(code);
                    out.push('\n');
                }
                out.push_str(FENCE);
                out.push('\n');
            }
        }
    }
    Cleaned {
        text: out.trim().to_string(),
        code_blocks,
    }
}

/// True when the raw HTML holds at least one `<pre><code>` block.
pub fn has_code_block(html: &str) -> bool {
    clean_html_detailed(html).code_blocks > 0
}
