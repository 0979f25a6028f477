//! Heading-delimited chunking of Markdown bodies and anchor slugs.

use super::{DocChunk, DocumentFile, Span};
use crate::ids::ChunkId;

/// Smallest accepted `max_chars`; smaller requests are raised to this.
pub const MIN_CHUNK_CHARS: usize = 200;

struct Line<'a> {
    text: &'a str,
    /// Char offset of the line start within the body.
    start: usize,
    chars: usize,
    blank: bool,
    in_fence: bool,
    heading: Option<(usize, String)>,
}

/// Splits `file.body` into chunks whose spans partition the body.
///
/// Sections start at ATX headings (outside fenced code). A section longer
/// than `max_chars` characters is split at blank-line paragraph boundaries;
/// a single paragraph that is still too long falls back to line boundaries.
/// Lines are never split.
pub fn chunk_document(file: &DocumentFile, max_chars: usize) -> Vec<DocChunk> {
    let max_chars = max_chars.max(MIN_CHUNK_CHARS);
    if file.body.is_empty() {
        return Vec::new();
    }
    let lines = scan_lines(&file.body);

    // (first line index, heading path) per section
    let mut sections: Vec<(usize, Vec<String>)> = Vec::new();
    let mut stack: Vec<(usize, String)> = Vec::new();
    for (idx, line) in lines.iter().enumerate() {
        if let Some((level, title)) = &line.heading {
            while stack.last().is_some_and(|(l, _)| l >= level) {
                stack.pop();
            }
            stack.push((*level, title.clone()));
            sections.push((idx, stack.iter().map(|(_, t)| t.clone()).collect()));
        } else if idx == 0 {
            sections.push((0, Vec::new()));
        }
    }

    let mut chunks = Vec::new();
    for (n, (first, heading_path)) in sections.iter().enumerate() {
        let last = sections.get(n + 1).map_or(lines.len(), |(next, _)| *next);
        for (lo, hi) in split_section(&lines[*first..last], max_chars) {
            let lo = first + lo;
            let hi = first + hi;
            let start = lines[lo].start;
            let end = lines[hi - 1].start + lines[hi - 1].chars;
            let body: String = lines[lo..hi].iter().map(|l| l.text).collect();
            chunks.push(DocChunk {
                chunk_id: ChunkId(format!("{}::{}", file.path, chunks.len())),
                path: file.path.clone(),
                heading_path: heading_path.clone(),
                body,
                span: Span { start, end },
                revision: file.revision,
            });
        }
    }
    chunks
}

fn scan_lines(body: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut fence: Option<char> = None;
    for text in body.split_inclusive('\n') {
        let chars = text.chars().count();
        let trimmed = text.trim_start_matches(' ');
        let indent = text.len() - trimmed.len();
        let fence_marker = if indent <= 3 {
            ['`', '~']
                .into_iter()
                .find(|c| trimmed.starts_with(&c.to_string().repeat(3)))
        } else {
            None
        };
        let mut in_fence = fence.is_some();
        let mut heading = None;
        match (fence, fence_marker) {
            (None, Some(c)) => {
                fence = Some(c);
                in_fence = true;
            }
            (Some(open), Some(c)) if open == c => fence = None,
            (None, None) if indent <= 3 => heading = parse_heading(trimmed),
            _ => {}
        }
        out.push(Line {
            text,
            start: offset,
            chars,
            blank: text.trim().is_empty(),
            in_fence,
            heading,
        });
        offset += chars;
    }
    out
}

/// Parses an ATX heading line (leading indentation already stripped).
pub(crate) fn parse_heading(line: &str) -> Option<(usize, String)> {
    let line = line.trim_end_matches(['\n', '\r']);
    let level = line.chars().take_while(|c| *c == '#').count();
    if level == 0 || level > 6 {
        return None;
    }
    let rest = &line[level..];
    if !rest.is_empty() && !rest.starts_with([' ', '\t']) {
        return None;
    }
    let mut title = rest.trim();
    // optional closing sequence
    let without_closing = title.trim_end_matches('#');
    if without_closing.is_empty() {
        title = "";
    } else if without_closing.ends_with([' ', '\t']) {
        title = without_closing.trim_end();
    }
    Some((level, title.to_string()))
}

/// True for an ATX heading line (up to three spaces of indentation).
pub fn is_heading_line(line: &str) -> bool {
    let trimmed = line.trim_start_matches(' ');
    line.len() - trimmed.len() <= 3 && parse_heading(trimmed).is_some()
}

/// Returns half-open line ranges (relative to `lines`) for one section.
fn split_section(lines: &[Line<'_>], max_chars: usize) -> Vec<(usize, usize)> {
    let total: usize = lines.iter().map(|l| l.chars).sum();
    if total <= max_chars {
        return vec![(0, lines.len())];
    }
    // paragraphs: a run of lines up to and including trailing blank lines
    let mut paragraphs = Vec::new();
    let mut lo = 0;
    for i in 1..lines.len() {
        let prev = &lines[i - 1];
        if prev.blank && !prev.in_fence && !lines[i].blank {
            paragraphs.push((lo, i));
            lo = i;
        }
    }
    paragraphs.push((lo, lines.len()));

    let mut pieces = Vec::new();
    for (lo, hi) in paragraphs {
        let size: usize = lines[lo..hi].iter().map(|l| l.chars).sum();
        if size <= max_chars {
            pieces.push((lo, hi));
        } else {
            pieces.extend((lo..hi).map(|i| (i, i + 1)));
        }
    }

    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut current: Option<(usize, usize, usize)> = None;
    for (lo, hi) in pieces {
        let size: usize = lines[lo..hi].iter().map(|l| l.chars).sum();
        if let Some((_, chi, csize)) = current.as_mut() {
            if *csize + size <= max_chars {
                *chi = hi;
                *csize += size;
                continue;
            }
        }
        if let Some((clo, chi, _)) = current.take() {
            out.push((clo, chi));
        }
        current = Some((lo, hi, size));
    }
    if let Some((lo, hi, _)) = current {
        out.push((lo, hi));
    }
    out
}

/// Lowercased anchor slug: alphanumeric characters kept, every other run
/// collapsed to one hyphen, leading and trailing hyphens trimmed.
pub fn slugify(title: &str) -> String {
    let mut slug = String::with_capacity(title.len());
    let mut pending_hyphen = false;
    for c in title.chars() {
        if c.is_alphanumeric() {
            if pending_hyphen && !slug.is_empty() {
                slug.push('-');
            }
            pending_hyphen = false;
            slug.extend(c.to_lowercase());
        } else {
            pending_hyphen = true;
        }
    }
    slug
}

/// `path#slug` for the chunk's innermost heading, or the bare path for
/// preamble chunks.
pub fn anchor_link(chunk: &DocChunk) -> String {
    match chunk.heading_path.last().map(|t| slugify(t)) {
        Some(slug) if !slug.is_empty() => format!("{}#{}", chunk.path, slug),
        _ => chunk.path.clone(),
    }
}
