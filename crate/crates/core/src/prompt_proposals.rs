//! Prompt proposals: (prompt source × context type) rules that pull a
//! context string for a hole out of the repository.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hole_gen::TargetHole;
use crate::repo_model::{analyze_file, JavaLiteFacts, RepoIndex, SourceFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PromptSource {
    Current,
    ParentClass,
    Imports,
    Sibling,
    SimilarName,
}

impl PromptSource {
    pub const ALL: [PromptSource; 5] = [
        PromptSource::Current,
        PromptSource::ParentClass,
        PromptSource::Imports,
        PromptSource::Sibling,
        PromptSource::SimilarName,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptSource::Current => "current",
            PromptSource::ParentClass => "parent_class",
            PromptSource::Imports => "imports",
            PromptSource::Sibling => "sibling",
            PromptSource::SimilarName => "similar_name",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextType {
    PriorLines,
    PostLines,
    MethodNamesAndBodies,
    MethodNames,
    Identifiers,
    StringLiterals,
    FieldDeclarations,
}

impl ContextType {
    pub const ALL: [ContextType; 7] = [
        ContextType::PriorLines,
        ContextType::PostLines,
        ContextType::MethodNamesAndBodies,
        ContextType::MethodNames,
        ContextType::Identifiers,
        ContextType::StringLiterals,
        ContextType::FieldDeclarations,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextType::PriorLines => "prior_lines",
            ContextType::PostLines => "post_lines",
            ContextType::MethodNamesAndBodies => "method_names_and_bodies",
            ContextType::MethodNames => "method_names",
            ContextType::Identifiers => "identifiers",
            ContextType::StringLiterals => "string_literals",
            ContextType::FieldDeclarations => "field_declarations",
        }
    }
}

/// A (source, context type) rule, named `source/context_type`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptProposal {
    pub source: PromptSource,
    pub context_type: ContextType,
}

pub const PRIOR_NAME: &str = "current/prior_lines";
pub const POST_NAME: &str = "current/post_lines";

impl PromptProposal {
    /// `None` for the invalid combinations (prior/post lines of a
    /// non-current source).
    pub fn new(source: PromptSource, context_type: ContextType) -> Option<Self> {
        let file_position_only = matches!(
            context_type,
            ContextType::PriorLines | ContextType::PostLines
        );
        if file_position_only && source != PromptSource::Current {
            return None;
        }
        Some(Self {
            source,
            context_type,
        })
    }

    pub const PRIOR: PromptProposal = PromptProposal {
        source: PromptSource::Current,
        context_type: ContextType::PriorLines,
    };

    pub const POST: PromptProposal = PromptProposal {
        source: PromptSource::Current,
        context_type: ContextType::PostLines,
    };

    pub fn name(&self) -> String {
        format!("{}/{}", self.source.as_str(), self.context_type.as_str())
    }

    /// Every valid combination.
    pub fn all() -> Vec<PromptProposal> {
        PromptSource::ALL
            .iter()
            .flat_map(|&s| {
                ContextType::ALL
                    .iter()
                    .filter_map(move |&t| PromptProposal::new(s, t))
            })
            .collect()
    }
}

impl fmt::Display for PromptProposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.source.as_str(), self.context_type.as_str())
    }
}

impl FromStr for PromptProposal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PromptProposal::all()
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownProposals(vec![s.to_string()]))
    }
}

/// The default proposal order. This is a stand-in ranking, not a learned one.
pub fn default_ranking() -> Vec<PromptProposal> {
    use ContextType::*;
    use PromptSource::*;
    let mut out = vec![PromptProposal::POST, PromptProposal::PRIOR];
    for source in [Current, SimilarName, Imports, Sibling, ParentClass] {
        for ctx in [
            MethodNamesAndBodies,
            MethodNames,
            FieldDeclarations,
            StringLiterals,
            Identifiers,
        ] {
            out.extend(PromptProposal::new(source, ctx));
        }
    }
    out
}

/// Parses a ranking file: one proposal name per line, `#` comments.
pub fn parse_ranking(text: &str) -> Result<Vec<PromptProposal>> {
    let mut out = Vec::new();
    let mut unknown = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<PromptProposal>() {
            Ok(p) if out.contains(&p) => {
                return Err(Error::Config(format!(
                    "proposal `{line}` listed twice in ranking"
                )));
            }
            Ok(p) => out.push(p),
            Err(_) => unknown.push(line.to_string()),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownProposals(unknown));
    }
    Ok(out)
}

pub fn format_ranking(ranking: &[PromptProposal]) -> String {
    ranking.iter().map(|p| format!("{p}\n")).collect()
}

/// A prompt proposal context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ppc {
    pub proposal: PromptProposal,
    pub text: String,
    pub origin_paths: Vec<String>,
}

impl Ppc {
    pub fn name(&self) -> String {
        self.proposal.name()
    }
}

/// File start up to the first byte of the hole.
pub fn prior_ppc(hole: &TargetHole, file: &SourceFile) -> Ppc {
    let end = hole.offset_in(file);
    let text = file.content[..end].to_string();
    Ppc {
        proposal: PromptProposal::PRIOR,
        origin_paths: origin(&text, &file.rel_path),
        text,
    }
}

/// Everything from the line after the hole line to end of file.
pub fn post_ppc(hole: &TargetHole, file: &SourceFile) -> Ppc {
    let text = match file.line_spans.get(hole.line_idx + 1) {
        Some(span) => file.content[span.start..].to_string(),
        None => String::new(),
    };
    Ppc {
        proposal: PromptProposal::POST,
        origin_paths: origin(&text, &file.rel_path),
        text,
    }
}

fn origin(text: &str, path: &str) -> Vec<String> {
    if text.is_empty() {
        Vec::new()
    } else {
        vec![path.to_string()]
    }
}

/// Extracts one context type from a single file.
fn extract_from(content: &str, facts: &JavaLiteFacts, ctx: ContextType) -> String {
    match ctx {
        ContextType::PriorLines | ContextType::PostLines => String::new(),
        ContextType::MethodNamesAndBodies => facts
            .method_spans
            .iter()
            .map(|m| &content[m.full()])
            .collect::<Vec<_>>()
            .join("\n"),
        ContextType::MethodNames => facts
            .method_spans
            .iter()
            .map(|m| content[m.signature.clone()].trim())
            .collect::<Vec<_>>()
            .join("\n"),
        ContextType::Identifiers => facts.identifiers.join(" "),
        ContextType::StringLiterals => facts.string_literals.join("\n"),
        ContextType::FieldDeclarations => {
            let spans = super::repo_model::SourceFile::new("", "", content);
            facts
                .field_declaration_lines
                .iter()
                .filter(|&&l| l < spans.line_count())
                .map(|&l| spans.line(l).trim())
                .collect::<Vec<_>>()
                .join("\n")
        }
    }
}

/// Extracts prompt proposal contexts for one hole.
///
/// The current file is seen with the hole removed (its line cut at the hole
/// start), so no current-file context leaks the target.
pub struct PpcExtractor<'a> {
    index: &'a RepoIndex,
    hole: &'a TargetHole,
    file: &'a SourceFile,
    masked_content: String,
    masked_facts: JavaLiteFacts,
}

impl<'a> PpcExtractor<'a> {
    /// `None` when the hole's file is not in the index.
    pub fn new(index: &'a RepoIndex, hole: &'a TargetHole) -> Option<Self> {
        let file = &index.get(&hole.rel_path)?.source;
        let start = hole.offset_in(file);
        let end = file.line_text_span(hole.line_idx).end;
        let masked_content = format!("{}{}", &file.content[..start], &file.content[end..]);
        let masked_facts = analyze_file(&SourceFile::new(
            file.repo_id.clone(),
            file.rel_path.clone(),
            masked_content.clone(),
        ));
        Some(Self {
            index,
            hole,
            file,
            masked_content,
            masked_facts,
        })
    }

    pub fn extract(&self, proposal: PromptProposal) -> Ppc {
        let path = &self.file.rel_path;
        match proposal.source {
            PromptSource::Current => match proposal.context_type {
                ContextType::PriorLines => prior_ppc(self.hole, self.file),
                ContextType::PostLines => post_ppc(self.hole, self.file),
                ctx => {
                    let text = extract_from(&self.masked_content, &self.masked_facts, ctx);
                    Ppc {
                        proposal,
                        origin_paths: origin(&text, path),
                        text,
                    }
                }
            },
            source => {
                let files = match source {
                    PromptSource::Imports => self.index.resolve_imports(path),
                    PromptSource::Sibling => self.index.sibling_files(path),
                    PromptSource::SimilarName => self.index.similar_name_files(path),
                    PromptSource::ParentClass => self.index.parent_class_files(path),
                    PromptSource::Current => unreachable!(),
                };
                let mut parts = Vec::new();
                let mut origin_paths = Vec::new();
                for other in files {
                    let f = &self.index.files[&other];
                    let text = extract_from(&f.source.content, &f.facts, proposal.context_type);
                    if !text.is_empty() {
                        parts.push(format!("// file: {other}\n{text}"));
                        origin_paths.push(other);
                    }
                }
                Ppc {
                    proposal,
                    text: parts.join("\n"),
                    origin_paths,
                }
            }
        }
    }

    /// Every proposal of `ranking`, in order.
    pub fn extract_ranked(&self, ranking: &[PromptProposal]) -> Vec<Ppc> {
        ranking.iter().map(|&p| self.extract(p)).collect()
    }
}

/// Single-proposal convenience over [`PpcExtractor`]. Empty when the hole's
/// file is unknown to the index.
pub fn extract_ppc(proposal: PromptProposal, hole: &TargetHole, index: &RepoIndex) -> Ppc {
    match PpcExtractor::new(index, hole) {
        Some(x) => x.extract(proposal),
        None => Ppc {
            proposal,
            text: String::new(),
            origin_paths: Vec::new(),
        },
    }
}
