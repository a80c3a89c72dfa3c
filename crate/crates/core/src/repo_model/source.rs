use std::ops::Range;

/// One `.java` file of a scanned repository.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub repo_id: String,
    /// Repository-relative path with `/` separators.
    pub rel_path: String,
    pub content: String,
    /// Byte range of every line, terminator included, so the spans tile
    /// `content` exactly.
    pub line_spans: Vec<Range<usize>>,
}

impl SourceFile {
    pub fn new(
        repo_id: impl Into<String>,
        rel_path: impl Into<String>,
        content: impl Into<String>,
    ) -> Self {
        let content = content.into();
        let line_spans = line_spans(&content);
        Self {
            repo_id: repo_id.into(),
            rel_path: rel_path.into(),
            content,
            line_spans,
        }
    }

    pub fn line_count(&self) -> usize {
        self.line_spans.len()
    }

    /// Text of line `idx` without its `\n` / `\r\n` terminator.
    pub fn line(&self, idx: usize) -> &str {
        let span = self.line_text_span(idx);
        &self.content[span]
    }

    /// Byte range of line `idx` without its terminator.
    pub fn line_text_span(&self, idx: usize) -> Range<usize> {
        let span = &self.line_spans[idx];
        let raw = &self.content[span.clone()];
        let text = raw
            .strip_suffix('\n')
            .map_or(raw, |r| r.strip_suffix('\r').unwrap_or(r));
        span.start..span.start + text.len()
    }

    /// Line index containing byte `offset`, if any.
    pub fn line_of(&self, offset: usize) -> Option<usize> {
        self.line_spans
            .binary_search_by(|s| {
                if s.end <= offset {
                    std::cmp::Ordering::Less
                } else if s.start > offset {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .ok()
    }

    /// Filename without directories.
    pub fn file_name(&self) -> &str {
        file_name(&self.rel_path)
    }

    /// Filename without the `.java` extension.
    pub fn stem(&self) -> &str {
        stem(&self.rel_path)
    }
}

pub(crate) fn line_spans(content: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, b) in content.bytes().enumerate() {
        if b == b'\n' {
            spans.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < content.len() {
        spans.push(start..content.len());
    }
    spans
}

pub(crate) fn file_name(rel_path: &str) -> &str {
    rel_path.rsplit('/').next().unwrap_or(rel_path)
}

pub(crate) fn stem(rel_path: &str) -> &str {
    let name = file_name(rel_path);
    name.strip_suffix(".java").unwrap_or(name)
}

pub(crate) fn parent_dir(rel_path: &str) -> &str {
    match rel_path.rfind('/') {
        Some(i) => &rel_path[..i],
        None => "",
    }
}
