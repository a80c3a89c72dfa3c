//! Lexical Java analysis.
//!
//! This is not a parser. A single pass splits the file into identifier,
//! literal and punctuation tokens while tracking comments, and a second pass
//! over the token stream recognises the handful of structures prompt
//! proposals need: package and import declarations, class headers, method
//! bodies (by brace matching) and field declarations.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::SourceFile;

/// Default cap on the bytes of a file that are analysed.
pub const DEFAULT_FACTS_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Code,
    Blank,
    LineComment,
    BlockComment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpan {
    pub name: String,
    pub signature_line: usize,
    /// The signature line, terminator excluded.
    pub signature: Range<usize>,
    /// From the opening `{` through the matching `}`.
    pub body: Range<usize>,
}

impl MethodSpan {
    /// Signature line through the end of the body.
    pub fn full(&self) -> Range<usize> {
        self.signature.start..self.body.end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JavaLiteFacts {
    pub package_name: Option<String>,
    pub imports: Vec<String>,
    pub class_names: Vec<String>,
    pub extends_names: Vec<String>,
    pub method_spans: Vec<MethodSpan>,
    pub identifiers: Vec<String>,
    pub string_literals: Vec<String>,
    pub field_declaration_lines: Vec<usize>,
    pub line_mask: Vec<LineKind>,
    /// Set when some method body ran to end of file without its closing brace.
    pub unbalanced_braces: bool,
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "true",
    "false",
    "null",
];

const NOT_A_METHOD: &[&str] = &[
    "if",
    "for",
    "while",
    "switch",
    "catch",
    "synchronized",
    "try",
    "else",
    "do",
    "return",
    "new",
    "throw",
    "super",
    "this",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokKind {
    Ident,
    Str,
    Char,
    Number,
    Punct(u8),
}

#[derive(Debug, Clone, Copy)]
struct Tok {
    kind: TokKind,
    start: usize,
    end: usize,
    line: usize,
}

#[derive(Default, Clone, Copy)]
struct LineFlags {
    code: bool,
    line_comment: bool,
    block_comment: bool,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b'$' || b >= 0x80
}

fn is_ident_continue(b: u8) -> bool {
    is_ident_start(b) || b.is_ascii_digit()
}

fn lex(text: &str, n_lines: usize) -> (Vec<Tok>, Vec<LineFlags>) {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut flags = vec![LineFlags::default(); n_lines.max(1)];
    let mut line = 0usize;
    let mut i = 0usize;

    // marks lines [from, to] with a flag, stopping at the known line count
    fn mark(flags: &mut [LineFlags], from: usize, to: usize, f: impl Fn(&mut LineFlags)) {
        for l in from..=to.min(flags.len() - 1) {
            f(&mut flags[l]);
        }
    }

    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b if b.is_ascii_whitespace() => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                mark(&mut flags, line, line, |f| f.line_comment = true);
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start_line = line;
                i += 2;
                loop {
                    if i >= bytes.len() {
                        break;
                    }
                    if bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/') {
                        i += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                mark(&mut flags, start_line, line, |f| f.block_comment = true);
            }
            b'"' if bytes[i..].starts_with(b"\"\"\"") => {
                let start = i;
                let start_line = line;
                i += 3;
                while i < bytes.len() && !bytes[i..].starts_with(b"\"\"\"") {
                    if bytes[i] == b'\\' {
                        i += 1;
                    } else if bytes[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i = (i + 3).min(bytes.len());
                mark(&mut flags, start_line, line, |f| f.code = true);
                toks.push(Tok {
                    kind: TokKind::Str,
                    start,
                    end: i,
                    line: start_line,
                });
            }
            b'"' | b'\'' => {
                let quote = b;
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i] != quote && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] != b'\n' {
                        i += 1;
                    }
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == quote {
                    i += 1;
                }
                let l = line.min(flags.len() - 1);
                flags[l].code = true;
                let kind = if quote == b'"' {
                    TokKind::Str
                } else {
                    TokKind::Char
                };
                toks.push(Tok {
                    kind,
                    start,
                    end: i,
                    line,
                });
            }
            b if is_ident_start(b) => {
                let start = i;
                while i < bytes.len() && is_ident_continue(bytes[i]) {
                    i += 1;
                }
                let l = line.min(flags.len() - 1);
                flags[l].code = true;
                toks.push(Tok {
                    kind: TokKind::Ident,
                    start,
                    end: i,
                    line,
                });
            }
            b if b.is_ascii_digit() => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                let l = line.min(flags.len() - 1);
                flags[l].code = true;
                toks.push(Tok {
                    kind: TokKind::Number,
                    start,
                    end: i,
                    line,
                });
            }
            _ => {
                let l = line.min(flags.len() - 1);
                flags[l].code = true;
                toks.push(Tok {
                    kind: TokKind::Punct(b),
                    start: i,
                    end: i + 1,
                    line,
                });
                i += 1;
            }
        }
    }
    (toks, flags)
}

struct Walker<'a> {
    text: &'a str,
    toks: Vec<Tok>,
}

impl<'a> Walker<'a> {
    fn s(&self, i: usize) -> &'a str {
        &self.text[self.toks[i].start..self.toks[i].end]
    }

    fn is_ident(&self, i: usize, word: &str) -> bool {
        i < self.toks.len() && self.toks[i].kind == TokKind::Ident && self.s(i) == word
    }

    fn is_punct(&self, i: usize, p: u8) -> bool {
        i < self.toks.len() && self.toks[i].kind == TokKind::Punct(p)
    }

    /// Reads `a.b.c` (optionally ending in `.*`) starting at `i`.
    fn dotted(&self, mut i: usize) -> (String, usize) {
        let mut name = String::new();
        while i < self.toks.len() {
            match self.toks[i].kind {
                TokKind::Ident => name.push_str(self.s(i)),
                TokKind::Punct(b'*') => name.push('*'),
                _ => break,
            }
            i += 1;
            if self.is_punct(i, b'.') {
                name.push('.');
                i += 1;
            } else {
                break;
            }
        }
        (name, i)
    }

    /// Index of the token closing the bracket opened at `open`.
    fn matching(&self, open: usize, o: u8, c: u8) -> Option<usize> {
        let mut depth = 0usize;
        for i in open..self.toks.len() {
            if self.is_punct(i, o) {
                depth += 1;
            } else if self.is_punct(i, c) {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
        }
        None
    }
}

/// Analyses a file, looking at no more than [`DEFAULT_FACTS_LIMIT`] bytes.
pub fn analyze_file(file: &SourceFile) -> JavaLiteFacts {
    analyze_file_with_limit(file, DEFAULT_FACTS_LIMIT)
}

/// Analyses the first `limit` bytes of a file. Lines past the limit are
/// masked [`LineKind::Blank`] and contribute no facts.
pub fn analyze_file_with_limit(file: &SourceFile, limit: usize) -> JavaLiteFacts {
    let mut cut = limit.min(file.content.len());
    while !file.content.is_char_boundary(cut) {
        cut -= 1;
    }
    let text = &file.content[..cut];
    let n_lines = file.line_count();
    let (toks, flags) = lex(text, n_lines);

    let mut facts = JavaLiteFacts {
        line_mask: (0..n_lines)
            .map(|l| {
                let f = flags.get(l).copied().unwrap_or_default();
                if file.line_spans[l].start >= cut {
                    LineKind::Blank
                } else if f.code {
                    LineKind::Code
                } else if f.block_comment {
                    LineKind::BlockComment
                } else if f.line_comment {
                    LineKind::LineComment
                } else {
                    LineKind::Blank
                }
            })
            .collect(),
        ..Default::default()
    };

    let w = Walker { text, toks };
    let keywords: HashSet<&str> = KEYWORDS.iter().copied().collect();
    let mut seen_ident = HashSet::new();
    let mut seen_str = HashSet::new();
    for (i, t) in w.toks.iter().enumerate() {
        match t.kind {
            TokKind::Ident => {
                let s = w.s(i);
                if !keywords.contains(s) && seen_ident.insert(s) {
                    facts.identifiers.push(s.to_string());
                }
            }
            TokKind::Str => {
                let s = w.s(i);
                if seen_str.insert(s) {
                    facts.string_literals.push(s.to_string());
                }
            }
            _ => {}
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Scope {
        Class,
        Method,
        Other,
    }
    let mut scopes: Vec<Scope> = Vec::new();
    let mut pending_class = false;
    let mut method_ends: Vec<usize> = Vec::new();
    let mut stmt_start: Option<usize> = None;
    let mut i = 0;
    while i < w.toks.len() {
        let t = w.toks[i];
        let depth = scopes.len();
        let prev_dot = i > 0 && w.is_punct(i - 1, b'.');

        if depth == 0 && w.is_ident(i, "package") {
            let (name, next) = w.dotted(i + 1);
            if !name.is_empty() {
                facts.package_name = Some(name);
            }
            i = next;
            continue;
        }
        if depth == 0 && w.is_ident(i, "import") {
            let mut j = i + 1;
            let is_static = w.is_ident(j, "static");
            if is_static {
                j += 1;
            }
            let (mut name, next) = w.dotted(j);
            if is_static && !name.ends_with('*') {
                if let Some(p) = name.rfind('.') {
                    name.truncate(p);
                }
            } else if is_static {
                name.truncate(name.len().saturating_sub(2));
            }
            if !name.is_empty() && !facts.imports.contains(&name) {
                facts.imports.push(name);
            }
            i = next;
            continue;
        }

        if t.kind == TokKind::Ident
            && !prev_dot
            && matches!(w.s(i), "class" | "interface" | "enum" | "record")
            && i + 1 < w.toks.len()
            && w.toks[i + 1].kind == TokKind::Ident
        {
            facts.class_names.push(w.s(i + 1).to_string());
            pending_class = true;
            // class header: parents are `extends` names outside type parameters
            let mut j = i + 2;
            let mut angle = 0i32;
            while j < w.toks.len() && !w.is_punct(j, b'{') && !w.is_punct(j, b';') {
                if w.is_punct(j, b'<') {
                    angle += 1;
                } else if w.is_punct(j, b'>') {
                    angle -= 1;
                } else if angle == 0 && w.is_ident(j, "extends") {
                    let mut k = j + 1;
                    loop {
                        let (name, next) = w.dotted(k);
                        if let Some(simple) = name.rsplit('.').next().filter(|s| !s.is_empty()) {
                            facts.extends_names.push(simple.to_string());
                        }
                        k = next;
                        if w.is_punct(k, b'<') {
                            k = w.matching_angle(k).map_or(k + 1, |m| m + 1);
                        }
                        if w.is_punct(k, b',') && !w.is_ident(k + 1, "implements") {
                            k += 1;
                        } else {
                            break;
                        }
                    }
                    j = k;
                    continue;
                }
                j += 1;
            }
            i += 2;
            continue;
        }

        // method: name ( ... ) [throws A, B] {
        if t.kind == TokKind::Ident
            && depth >= 1
            && !prev_dot
            && w.is_punct(i + 1, b'(')
            && !NOT_A_METHOD.contains(&w.s(i))
            && !(i > 0 && w.is_ident(i - 1, "new"))
            && scopes.last() == Some(&Scope::Class)
        {
            if let Some(close) = w.matching(i + 1, b'(', b')') {
                let mut j = close + 1;
                if w.is_ident(j, "throws") {
                    j += 1;
                    while j < w.toks.len() && !w.is_punct(j, b'{') && !w.is_punct(j, b';') {
                        j += 1;
                    }
                }
                if w.is_punct(j, b'{') {
                    let sig_line = t.line;
                    let signature = file.line_text_span(sig_line);
                    let body_start = w.toks[j].start;
                    let body_end = match w.matching(j, b'{', b'}') {
                        Some(m) => w.toks[m].end,
                        None => {
                            facts.unbalanced_braces = true;
                            text.len()
                        }
                    };
                    facts.method_spans.push(MethodSpan {
                        name: w.s(i).to_string(),
                        signature_line: sig_line,
                        signature: signature.start..signature.end.min(text.len()),
                        body: body_start..body_end,
                    });
                    method_ends.push(j);
                    stmt_start = None;
                    i = j;
                    continue;
                }
            }
        }

        match t.kind {
            TokKind::Punct(b'{') => {
                let scope = if method_ends.last() == Some(&i) {
                    method_ends.pop();
                    Scope::Method
                } else if pending_class {
                    pending_class = false;
                    Scope::Class
                } else {
                    Scope::Other
                };
                scopes.push(scope);
                stmt_start = None;
            }
            TokKind::Punct(b'}') => {
                scopes.pop();
                stmt_start = None;
            }
            TokKind::Punct(b';') => {
                if let Some(s) = stmt_start.take() {
                    if scopes.last() == Some(&Scope::Class) && is_field_statement(&w, s, i) {
                        for l in w.toks[s].line..=t.line {
                            if !facts.field_declaration_lines.contains(&l) {
                                facts.field_declaration_lines.push(l);
                            }
                        }
                    }
                }
            }
            _ => {
                if stmt_start.is_none() {
                    stmt_start = Some(i);
                }
            }
        }
        i += 1;
    }

    facts
}

impl<'a> Walker<'a> {
    fn matching_angle(&self, open: usize) -> Option<usize> {
        self.matching(open, b'<', b'>')
    }
}

/// A class-scope statement `[mods] Type name [= init];` is a field unless a
/// parenthesis shows up before the initializer (abstract or interface
/// method, enum constants).
fn is_field_statement(w: &Walker<'_>, start: usize, end: usize) -> bool {
    for k in start..end {
        if w.is_punct(k, b'=') {
            return true;
        }
        if w.is_punct(k, b'(') {
            return false;
        }
    }
    (start..end)
        .filter(|&k| w.toks[k].kind == TokKind::Ident)
        .count()
        >= 2
}
