use super::Diagnostic;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokKind {
    /// Identifier, possibly dotted (`B1.out2`).
    Ident(String),
    /// Numeric literal with an optional unit suffix glued to it (`7.32m`).
    Number { value: f64, unit: Option<String> },
    Punct(char),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokKind,
    /// Byte offset of the first character.
    pub offset: usize,
    /// Length in bytes (at least 1, except for end of input).
    pub len: usize,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.kind {
            TokKind::Ident(s) => format!("`{s}`"),
            TokKind::Number { .. } => "number".to_string(),
            TokKind::Punct(c) => format!("`{c}`"),
            TokKind::Eof => "end of input".to_string(),
        }
    }
}

const PUNCT: &[char] = &['=', ';', ',', '(', ')', ':', '[', ']', '/'];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `src` into tokens. The final token is always [`TokKind::Eof`].
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if is_ident_start(c) {
            i += 1;
            loop {
                while i < bytes.len() && is_ident_char(bytes[i] as char) {
                    i += 1;
                }
                // dotted continuation: `name.out1`
                if i + 1 < bytes.len() && bytes[i] == b'.' && is_ident_start(bytes[i + 1] as char) {
                    i += 1;
                    continue;
                }
                break;
            }
            toks.push(Token {
                kind: TokKind::Ident(src[start..i].to_string()),
                offset: start,
                len: i - start,
            });
            continue;
        }
        let signed_number = (c == '-' || c == '+')
            && bytes
                .get(i + 1)
                .is_some_and(|b| b.is_ascii_digit() || *b == b'.');
        if c.is_ascii_digit() || c == '.' || signed_number {
            if signed_number {
                i += 1;
            }
            let mut digits = 0;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
                digits += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                    digits += 1;
                }
            }
            if digits == 0 {
                return Err(Diagnostic::at(src, start, i - start, "malformed number"));
            }
            // exponent only when followed by digits, so `2e` never swallows a unit
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal = &src[start..i];
            let value: f64 = literal
                .parse()
                .map_err(|_| Diagnostic::at(src, start, i - start, format!("malformed number `{literal}`")))?;
            let unit_start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            let unit = (i > unit_start).then(|| src[unit_start..i].to_string());
            if i < bytes.len() && (is_ident_char(bytes[i] as char) || bytes[i] == b'.') {
                let mut j = i;
                while j < bytes.len() && (is_ident_char(bytes[j] as char) || bytes[j] == b'.') {
                    j += 1;
                }
                return Err(Diagnostic::at(
                    src,
                    start,
                    j - start,
                    format!("malformed number `{}`", &src[start..j]),
                ));
            }
            toks.push(Token {
                kind: TokKind::Number { value, unit },
                offset: start,
                len: i - start,
            });
            continue;
        }
        if PUNCT.contains(&c) {
            toks.push(Token {
                kind: TokKind::Punct(c),
                offset: start,
                len: 1,
            });
            i += 1;
            continue;
        }
        return Err(Diagnostic::at(
            src,
            start,
            c.len_utf8(),
            format!("unexpected character `{c}`"),
        ));
    }
    toks.push(Token {
        kind: TokKind::Eof,
        offset: src.len(),
        len: 0,
    });
    Ok(toks)
}
