//! The `.net` network-description language.
//!
//! A program is a flat list of `;`-terminated statements. `#` starts a
//! comment that runs to the end of the line.
//!
//! ```text
//! source s1 squeezed amp=140 vx=-2.1dB vy=+18dB;
//! source v vacuum;
//! bs B1 from s1, v t=0.7071067811865476;
//! delay L1 from B1.out2 length=7.32m carrier_phase=1.5707963;
//! bs B2 from B1.out1, L1 t=0.7071067811865476;
//! det D1 from B2.out1;
//! det D2 from B2.out2;
//! measure PM diff(D1,D2) freqs=15MHz:25MHz:0.5MHz;
//! ```
//!
//! The grammar is documented in `docs/grammar.ebnf` at the repository root.
//! [`parse`] accepts statements in any order and returns a spec that passes
//! [`crate::model::validate`]; [`serialize`] writes the canonical text such
//! that `parse(serialize(spec)) == spec`.

mod lexer;
mod parser;
mod serialize;

use std::fmt;

use thiserror::Error;

pub use parser::{apply_override, parse, parse_quantity, parse_unchecked, Dimension};
pub use serialize::{serialize, SerializeError};

/// A positioned message about the source text. Lines and columns are 1-based;
/// the column counts characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    /// Width of the offending token in characters (at least 1 unless the
    /// text is empty).
    pub width: usize,
    pub message: String,
    /// The full source line containing the position.
    pub snippet: String,
}

impl Diagnostic {
    /// Builds a diagnostic for the byte range `offset..offset + len` of `src`.
    pub(crate) fn at(src: &str, offset: usize, len: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(src.len());
        let line_start = src[..offset].rfind('\n').map_or(0, |i| i + 1);
        let line_end = src[offset..].find('\n').map_or(src.len(), |i| offset + i);
        let line = src[..offset].matches('\n').count() + 1;
        let column = src[line_start..offset].chars().count() + 1;
        let end = (offset + len).min(line_end);
        let width = src[offset..end].chars().count().max(usize::from(!src.is_empty()));
        Diagnostic {
            line,
            column,
            width,
            message: message.into(),
            snippet: src[line_start..line_end].to_string(),
        }
    }

    /// Multi-line human-readable rendering with a caret under the token.
    pub fn render(&self, origin: &str) -> String {
        let pad = " ".repeat(self.column.saturating_sub(1));
        let carets = "^".repeat(self.width.max(1));
        format!(
            "{origin}:{}:{}: {}\n    {}\n    {pad}{carets}",
            self.line, self.column, self.message, self.snippet
        )
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Lexical, grammatical, unit or parameter-range problems.
    Syntax,
    /// The text is well formed but the network it describes is not.
    Validation,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} ({} diagnostic(s))", .diagnostics.first().map(ToString::to_string).unwrap_or_default(), .diagnostics.len())]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub diagnostics: Vec<Diagnostic>,
}
