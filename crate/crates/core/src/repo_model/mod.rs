//! Repository scanning, per-file Java facts and inter-file relations.

mod analyze;
mod index;
mod source;

pub use analyze::{
    analyze_file, analyze_file_with_limit, JavaLiteFacts, LineKind, MethodSpan, DEFAULT_FACTS_LIMIT,
};
pub use index::{name_tokens, scan_repo, scan_repo_with, IndexedFile, RepoIndex, ScanOptions};
pub use source::SourceFile;
