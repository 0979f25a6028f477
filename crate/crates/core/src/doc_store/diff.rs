//! Word-level diffing over whitespace-delimited words.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Equal,
    Insert,
    Delete,
}

/// A maximal run of words sharing one alignment kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSegment {
    pub kind: SegmentKind,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordDiff {
    pub added: usize,
    pub deleted: usize,
    pub segments: Vec<DiffSegment>,
}

impl WordDiff {
    /// Insertion and removal runs, in document order.
    pub fn spans(&self) -> impl Iterator<Item = &DiffSegment> {
        self.segments
            .iter()
            .filter(|s| s.kind != SegmentKind::Equal)
    }

    pub fn common(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Equal)
            .map(|s| s.words.len())
            .sum()
    }

    /// Renders the aligned text with insertions wrapped in `*bold*` and
    /// removals in `~strike~`.
    pub fn render_marked(&self) -> String {
        let mut parts = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let run = seg.words.join(" ");
            parts.push(match seg.kind {
                SegmentKind::Equal => run,
                SegmentKind::Insert => format!("*{run}*"),
                SegmentKind::Delete => format!("~{run}~"),
            });
        }
        parts.join(" ")
    }
}

/// Number of maximal non-whitespace runs.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

/// LCS alignment of the words of `old` against the words of `new`.
pub fn word_diff(old: &str, new: &str) -> WordDiff {
    let a: Vec<&str> = old.split_whitespace().collect();
    let b: Vec<&str> = new.split_whitespace().collect();

    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let a_mid = &a[prefix..a.len() - suffix];
    let b_mid = &b[prefix..b.len() - suffix];

    let mut ops = Vec::with_capacity(a.len().max(b.len()));
    ops.extend(a[..prefix].iter().map(|w| (SegmentKind::Equal, *w)));
    align_middle(a_mid, b_mid, &mut ops);
    ops.extend(
        a[a.len() - suffix..]
            .iter()
            .map(|w| (SegmentKind::Equal, *w)),
    );

    let mut segments: Vec<DiffSegment> = Vec::new();
    let (mut added, mut deleted) = (0, 0);
    for (kind, word) in ops {
        match kind {
            SegmentKind::Insert => added += 1,
            SegmentKind::Delete => deleted += 1,
            SegmentKind::Equal => {}
        }
        match segments.last_mut() {
            Some(last) if last.kind == kind => last.words.push(word.to_string()),
            _ => segments.push(DiffSegment {
                kind,
                words: vec![word.to_string()],
            }),
        }
    }
    WordDiff {
        added,
        deleted,
        segments,
    }
}

fn align_middle<'a>(a: &[&'a str], b: &[&'a str], out: &mut Vec<(SegmentKind, &'a str)>) {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        out.extend(a.iter().map(|w| (SegmentKind::Delete, *w)));
        out.extend(b.iter().map(|w| (SegmentKind::Insert, *w)));
        return;
    }
    // suffix table: lcs[i][j] = LCS length of a[i..] and b[j..]
    let width = m + 1;
    let mut lcs = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * width + j] = if a[i] == b[j] {
                lcs[(i + 1) * width + j + 1] + 1
            } else {
                lcs[(i + 1) * width + j].max(lcs[i * width + j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push((SegmentKind::Equal, a[i]));
            i += 1;
            j += 1;
        } else if lcs[(i + 1) * width + j] >= lcs[i * width + j + 1] {
            out.push((SegmentKind::Delete, a[i]));
            i += 1;
        } else {
            out.push((SegmentKind::Insert, b[j]));
            j += 1;
        }
    }
    out.extend(a[i..].iter().map(|w| (SegmentKind::Delete, *w)));
    out.extend(b[j..].iter().map(|w| (SegmentKind::Insert, *w)));
}
