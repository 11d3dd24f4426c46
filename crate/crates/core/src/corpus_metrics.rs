//! Text-side corpus metrics: ROUGE-1/2/L, n-gram abstractness, compression
//! ratio, inter-document similarity, and per-corpus aggregate stats.
//!
//! Tokenization is lowercase, split on Unicode whitespace, with leading and
//! trailing punctuation stripped from every token. All scores are reported
//! on a 0-100 scale; compression is an unbounded ratio.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercases, splits on whitespace, and trims non-alphanumeric characters
/// from token edges. Tokens that are all punctuation vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// One corpus sample: source documents plus a reference summary, tokenized.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDoc {
    pub id: String,
    pub sources: Vec<Vec<String>>,
    pub reference: Vec<String>,
    /// Comparison units for inter-document similarity: the sources
    /// themselves when there are at least two, otherwise 3-sentence windows
    /// of the single source.
    pub sim_units: Vec<Vec<String>>,
}

impl CorpusDoc {
    pub fn from_raw(id: impl Into<String>, raw_sources: &[String], raw_reference: &str) -> Result<Self> {
        let id = id.into();
        let reference = tokenize(raw_reference);
        if reference.is_empty() {
            return Err(Error::EmptyReference);
        }
        let mut sources = Vec::with_capacity(raw_sources.len());
        for (i, raw) in raw_sources.iter().enumerate() {
            let tokens = tokenize(raw);
            if tokens.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "source {i} of doc `{id}` has no tokens"
                )));
            }
            sources.push(tokens);
        }
        if sources.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "doc `{id}` has no sources"
            )));
        }
        let sim_units = if sources.len() >= 2 {
            sources.clone()
        } else {
            sentence_windows(&raw_sources[0], 3)
        };
        Ok(CorpusDoc {
            id,
            sources,
            reference,
            sim_units,
        })
    }
}

/// Splits raw text into sentences (at `.`, `!`, `?` runs), groups them into
/// windows of `per_window` sentences, and tokenizes each window.
pub fn sentence_windows(text: &str, per_window: usize) -> Vec<Vec<String>> {
    let sentences: Vec<&str> = text
        .split(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    sentences
        .chunks(per_window.max(1))
        .map(|chunk| tokenize(&chunk.join(" ")))
        .filter(|tokens| !tokens.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RougeVariant {
    N(u32),
    Lcs,
}

impl RougeVariant {
    pub fn label(self) -> String {
        match self {
            RougeVariant::N(n) => format!("R{n}"),
            RougeVariant::Lcs => "RL".to_string(),
        }
    }
}

/// Precision/recall/F1 on a 0-100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub variant: RougeVariant,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when either side had no n-grams (or tokens) to compare.
    pub degenerate: bool,
}

fn score(variant: RougeVariant, overlap: f64, cand_total: f64, ref_total: f64) -> RougeScore {
    let degenerate = cand_total == 0.0 || ref_total == 0.0;
    let precision = if cand_total > 0.0 {
        100.0 * overlap / cand_total
    } else {
        0.0
    };
    let recall = if ref_total > 0.0 {
        100.0 * overlap / ref_total
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    RougeScore {
        variant,
        precision,
        recall,
        f1,
        degenerate,
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n >= 1 && tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap: recall against the reference bag, precision
/// against the candidate bag. Degenerate inputs score 0 with a flag.
pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> RougeScore {
    let variant = RougeVariant::N(n as u32);
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refs.values().sum();
    let overlap: usize = cand
        .iter()
        .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    score(variant, overlap as f64, cand_total as f64, ref_total as f64)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Sequence-level LCS ROUGE over the whole token sequences.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> RougeScore {
    let lcs = lcs_len(candidate, reference);
    score(
        RougeVariant::Lcs,
        lcs as f64,
        candidate.len() as f64,
        reference.len() as f64,
    )
}

/// Percentage of summary n-gram occurrences absent from the union of source
/// n-grams.
pub fn abstractness(summary: &[String], sources: &[Vec<String>], n: usize) -> Result<f64> {
    if summary.len() < n {
        return Err(Error::TooShort {
            len: summary.len(),
            need: n,
        });
    }
    let source_grams: HashSet<&[String]> = sources
        .iter()
        .flat_map(|doc| doc.windows(n))
        .collect();
    let windows: Vec<&[String]> = summary.windows(n).collect();
    let novel = windows
        .iter()
        .filter(|gram| !source_grams.contains(**gram))
        .count();
    Ok(100.0 * novel as f64 / windows.len() as f64)
}

/// Total source tokens divided by reference tokens.
pub fn compression(sources: &[Vec<String>], reference: &[String]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let src_tokens: usize = sources.iter().map(Vec::len).sum();
    Ok(src_tokens as f64 / reference.len() as f64)
}

/// Mean pairwise ROUGE-2 F1 over all unordered unit pairs (F1 is symmetric,
/// so pair order does not matter).
pub fn inter_doc_similarity(units: &[Vec<String>]) -> Result<f64> {
    if units.len() < 2 {
        return Err(Error::NotEnoughUnits(units.len()));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..units.len() {
        for j in (i + 1)..units.len() {
            sum += rouge_n(&units[i], &units[j], 2).f1;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Corpus-level aggregate of the per-document metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub avg_src_tokens: f64,
    pub avg_sum_tokens: f64,
    pub inter_sim: f64,
    pub compression: f64,
    pub abstractness_3gram: f64,
    /// Documents where at least one metric could not be computed (short
    /// summaries, single-unit sources); they are excluded from that metric's
    /// mean only.
    pub n_excluded: usize,
}

impl CorpusStats {
    pub fn to_csv(&self, tag: &str) -> String {
        format!(
            "tag,n_docs,avg_src_tokens,avg_sum_tokens,inter_sim,compr,abstr,n_excluded\n{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{}\n",
            tag,
            self.n_docs,
            self.avg_src_tokens,
            self.avg_sum_tokens,
            self.inter_sim,
            self.compression,
            self.abstractness_3gram,
            self.n_excluded
        )
    }
}

/// Averages every metric over the documents where it is defined,
/// accumulating exact sums and dividing once.
pub fn corpus_stats(corpus: &[CorpusDoc]) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::InvalidParameter("corpus is empty".into()));
    }

    let mut src_sum = 0.0f64;
    let mut sum_sum = 0.0f64;
    let mut compr = MeanAcc::default();
    let mut abstr = MeanAcc::default();
    let mut inter = MeanAcc::default();
    let mut excluded: HashSet<&str> = HashSet::new();

    for doc in corpus {
        src_sum += doc.sources.iter().map(Vec::len).sum::<usize>() as f64;
        sum_sum += doc.reference.len() as f64;
        compr.push(compression(&doc.sources, &doc.reference)?);
        match abstractness(&doc.reference, &doc.sources, 3) {
            Ok(v) => abstr.push(v),
            Err(_) => {
                excluded.insert(&doc.id);
            }
        }
        match inter_doc_similarity(&doc.sim_units) {
            Ok(v) => inter.push(v),
            Err(_) => {
                excluded.insert(&doc.id);
            }
        }
    }

    let n = corpus.len() as f64;
    Ok(CorpusStats {
        n_docs: corpus.len(),
        avg_src_tokens: src_sum / n,
        avg_sum_tokens: sum_sum / n,
        inter_sim: inter.mean(),
        compression: compr.mean(),
        abstractness_3gram: abstr.mean(),
        n_excluded: excluded.len(),
    })
}

#[derive(Default)]
struct MeanAcc {
    sum: f64,
    count: usize,
}

impl MeanAcc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

#[derive(Deserialize)]
struct CorpusLine {
    id: String,
    sources: Vec<String>,
    reference: String,
}

/// Loads a corpus from JSONL lines `{"id", "sources": [...], "reference"}`.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusDoc>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| {
            Error::MalformedHeader(format!("{}: line {}: {e}", path.display(), lineno + 1))
        })?;
        if !seen.insert(parsed.id.clone()) {
            return Err(Error::DuplicateId(parsed.id));
        }
        docs.push(CorpusDoc::from_raw(parsed.id, &parsed.sources, &parsed.reference)?);
    }
    Ok(docs)
}
