//! Trial-id hyperlinking.
//!
//! A trial id is `NCT` plus exactly eight ASCII digits, not preceded by an
//! alphanumeric character or `/` and not followed by an alphanumeric
//! character. Ids inside an existing markdown link `[text](url)` are left
//! alone, which makes [`linkify_trial_ids`] idempotent.

use alloc::string::String;

pub const TRIAL_URL_PREFIX: &str = "https://app.dimensions.ai/details/clinical_trial/";

const MAX_LINK_TEXT: usize = 256;
const MAX_LINK_URL: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LinkScan {
    /// Byte length of the complete link.
    Complete(usize),
    Failed,
    /// Ran out of input while the link could still complete.
    Incomplete,
}

/// `s` starts with `[`.
fn scan_link(s: &str) -> LinkScan {
    let mut chars = s.char_indices().skip(1);
    let mut n = 0;
    loop {
        match chars.next() {
            None => return LinkScan::Incomplete,
            Some((_, ']')) => break,
            Some((_, '[')) => return LinkScan::Failed,
            Some(_) => {
                n += 1;
                if n > MAX_LINK_TEXT {
                    return LinkScan::Failed;
                }
            }
        }
    }
    match chars.next() {
        None => return LinkScan::Incomplete,
        Some((_, '(')) => {}
        Some(_) => return LinkScan::Failed,
    }
    let mut n = 0;
    loop {
        match chars.next() {
            None => return LinkScan::Incomplete,
            Some((i, ')')) => return LinkScan::Complete(i + 1),
            Some((_, c)) if c.is_whitespace() || matches!(c, '[' | ']' | '(') => {
                return LinkScan::Failed
            }
            Some(_) => {
                n += 1;
                if n > MAX_LINK_URL {
                    return LinkScan::Failed;
                }
            }
        }
    }
}

fn opens_id(prev: Option<char>) -> bool {
    prev.is_none_or(|p| !p.is_alphanumeric() && p != '/')
}

/// Byte length (always 11) of a trial id at the start of `s`, if any.
fn trial_id_at(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    if b.len() < 11 || &b[..3] != b"NCT" || !b[3..11].iter().all(u8::is_ascii_digit) {
        return None;
    }
    match s[11..].chars().next() {
        Some(c) if c.is_alphanumeric() => None,
        _ => Some(11),
    }
}

pub fn trial_link(id: &str) -> String {
    let mut out = String::with_capacity(2 * id.len() + TRIAL_URL_PREFIX.len() + 4);
    out.push('[');
    out.push_str(id);
    out.push_str("](");
    out.push_str(TRIAL_URL_PREFIX);
    out.push_str(id);
    out.push(')');
    out
}

/// Turns every bare trial id into a markdown link to its Dimensions page.
pub fn linkify_trial_ids(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev = None;
    let mut i = 0;
    while let Some(c) = text[i..].chars().next() {
        let rest = &text[i..];
        if c == '[' {
            if let LinkScan::Complete(n) = scan_link(rest) {
                out.push_str(&rest[..n]);
                prev = Some(')');
                i += n;
                continue;
            }
        }
        if c == 'N' && opens_id(prev) {
            if let Some(n) = trial_id_at(rest) {
                out.push_str(&trial_link(&rest[..n]));
                prev = Some('0');
                i += n;
                continue;
            }
        }
        out.push(c);
        prev = Some(c);
        i += c.len_utf8();
    }
    out
}

/// Incremental [`linkify_trial_ids`]: the concatenation of everything
/// returned by [`push`](Self::push) and [`finish`](Self::finish) equals
/// `linkify_trial_ids` of the concatenated input, however it was chunked.
///
/// Text is held back until a whitespace character that is not inside a
/// possibly still open markdown link.
#[derive(Debug, Default, Clone)]
pub struct StreamLinkifier {
    pending: String,
}

impl StreamLinkifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Byte offset just past the last whitespace char at which the link
    /// scanner is at top level.
    fn safe_split(&self) -> usize {
        let s = self.pending.as_str();
        let mut safe = 0;
        let mut i = 0;
        while let Some(c) = s[i..].chars().next() {
            if c == '[' {
                match scan_link(&s[i..]) {
                    LinkScan::Complete(n) => {
                        i += n;
                        continue;
                    }
                    LinkScan::Incomplete => break,
                    LinkScan::Failed => {}
                }
            }
            i += c.len_utf8();
            if c.is_whitespace() {
                safe = i;
            }
        }
        safe
    }

    pub fn push(&mut self, chunk: &str) -> String {
        self.pending.push_str(chunk);
        let p = self.safe_split();
        if p == 0 {
            return String::new();
        }
        let out = linkify_trial_ids(&self.pending[..p]);
        self.pending.drain(..p);
        out
    }

    pub fn finish(&mut self) -> String {
        let out = linkify_trial_ids(&self.pending);
        self.pending.clear();
        out
    }

    pub fn buffered(&self) -> &str {
        &self.pending
    }
}
