//! Data model and file formats shared by every stage of the pipeline.
//!
//! Two tab-separated formats live here: the documents file (one judged
//! image per row, grouped by query) and the pairs file (side-by-side
//! verdict counts referencing documents). Both carry a header row and
//! encode absent optional values as `NA`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Three-grade relevance judgment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relevance {
    Bad,
    Good,
    Excellent,
}

impl Relevance {
    pub fn from_index(index: u8) -> Option<Relevance> {
        match index {
            0 => Some(Relevance::Bad),
            1 => Some(Relevance::Good),
            2 => Some(Relevance::Excellent),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Relevance::Bad => 0,
            Relevance::Good => 1,
            Relevance::Excellent => 2,
        }
    }
}

/// One (query, image) judgment unit.
///
/// `ia_label`, `wm_label`, and `wm_prob` are optional; operations that
/// need them fail loudly instead of imputing.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub query_id: String,
    pub doc_id: String,
    /// Lowercased bare host; may be empty when the source is unknown.
    pub domain: String,
    pub ir_label: Relevance,
    pub ia_label: Option<f64>,
    pub wm_label: Option<bool>,
    /// Content-classifier watermark probability in [0, 1].
    pub wm_prob: Option<f64>,
    pub features: Vec<f64>,
}

/// All documents of one query, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub documents: Vec<Document>,
}

/// Reference to a document inside a [`Dataset`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DocRef {
    pub group: usize,
    pub doc: usize,
}

/// An immutable collection of query groups with a fixed feature dimension.
#[derive(Clone, Debug)]
pub struct Dataset {
    groups: Vec<QueryGroup>,
    feature_dim: usize,
    group_of: HashMap<String, usize>,
}

impl Dataset {
    /// Builds a dataset from pre-grouped documents, validating the
    /// per-group invariants and the shared feature dimension.
    pub fn from_groups(groups: Vec<QueryGroup>, feature_dim: usize) -> Result<Dataset> {
        let mut group_of = HashMap::new();
        for (gi, group) in groups.iter().enumerate() {
            if group.documents.is_empty() {
                return Err(Error::invalid(format!(
                    "query group '{}' has no documents",
                    group.query_id
                )));
            }
            if group_of.insert(group.query_id.clone(), gi).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate query group '{}'",
                    group.query_id
                )));
            }
            let mut seen = HashMap::new();
            for doc in &group.documents {
                if doc.query_id != group.query_id {
                    return Err(Error::invalid(format!(
                        "document '{}' carries query '{}' inside group '{}'",
                        doc.doc_id, doc.query_id, group.query_id
                    )));
                }
                if doc.features.len() != feature_dim {
                    return Err(Error::invalid(format!(
                        "document '{}' has {} features, expected {}",
                        doc.doc_id,
                        doc.features.len(),
                        feature_dim
                    )));
                }
                if seen.insert(doc.doc_id.clone(), ()).is_some() {
                    return Err(Error::invalid(format!(
                        "duplicate doc_id '{}' in query '{}'",
                        doc.doc_id, group.query_id
                    )));
                }
            }
        }
        Ok(Dataset {
            groups,
            feature_dim,
            group_of,
        })
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn n_documents(&self) -> usize {
        self.groups.iter().map(|g| g.documents.len()).sum()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.groups.iter().flat_map(|g| g.documents.iter())
    }

    pub fn group_index(&self, query_id: &str) -> Option<usize> {
        self.group_of.get(query_id).copied()
    }

    pub fn document(&self, r: DocRef) -> &Document {
        &self.groups[r.group].documents[r.doc]
    }

    /// Locates a document by ids; linear within the group.
    pub fn find(&self, query_id: &str, doc_id: &str) -> Option<DocRef> {
        let group = self.group_index(query_id)?;
        let doc = self.groups[group]
            .documents
            .iter()
            .position(|d| d.doc_id == doc_id)?;
        Some(DocRef { group, doc })
    }
}

/// Win/equal/judgment counts backing a judged attractiveness score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JudgeCounts {
    n_win: u32,
    n_equal: u32,
    n_judgments: u32,
}

impl JudgeCounts {
    pub fn new(n_win: u32, n_equal: u32, n_judgments: u32) -> Result<JudgeCounts> {
        if n_judgments == 0 {
            return Err(Error::invalid("n_judgments must be positive"));
        }
        if n_win + n_equal > n_judgments {
            return Err(Error::invalid(format!(
                "n_win + n_equal = {} exceeds n_judgments = {}",
                n_win + n_equal,
                n_judgments
            )));
        }
        Ok(JudgeCounts {
            n_win,
            n_equal,
            n_judgments,
        })
    }

    pub fn n_win(&self) -> u32 {
        self.n_win
    }

    pub fn n_equal(&self) -> u32 {
        self.n_equal
    }

    pub fn n_judgments(&self) -> u32 {
        self.n_judgments
    }
}

/// Judged attractiveness score: (n_win + 0.5 * n_equal) / n_judgments.
pub fn compute_ia_score(counts: &JudgeCounts) -> f64 {
    (f64::from(counts.n_win) + 0.5 * f64::from(counts.n_equal)) / f64::from(counts.n_judgments)
}

/// Picks the five reference images at the 100/75/50/25/0 ranking
/// percentiles of the descending-sorted scores.
///
/// The element at percentile p sits at rank floor((1 - p) * (n - 1));
/// ties are broken by original index ascending. Returns original-list
/// indices ordered best to worst.
pub fn select_reference_images(scores: &[f64]) -> Result<[usize; 5]> {
    let n = scores.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "need at least 5 scores to pick reference images, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(&b)));
    let mut picked = [0usize; 5];
    for (slot, p) in [0.0f64, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
        let rank = (p * (n - 1) as f64).floor() as usize;
        picked[slot] = order[rank];
    }
    Ok(picked)
}

/// A side-by-side comparison of two documents of the same query.
///
/// `verdict_counts` indexes {0: left better, 1: left slightly better,
/// 2: equal, 3: right slightly better, 4: right better}.
#[derive(Clone, Debug, PartialEq)]
pub struct JudgedPair {
    pub query_id: String,
    pub left_id: String,
    pub right_id: String,
    pub left: DocRef,
    pub right: DocRef,
    pub verdict_counts: [u32; 5],
}

impl JudgedPair {
    pub fn total_verdicts(&self) -> u32 {
        self.verdict_counts.iter().sum()
    }
}

const DOC_FIXED_COLUMNS: [&str; 7] = ["query_id", "doc_id", "domain", "ir", "ia", "wm", "wm_prob"];
const PAIR_COLUMNS: [&str; 8] = [
    "query_id",
    "left_doc_id",
    "right_doc_id",
    "c0",
    "c1",
    "c2",
    "c3",
    "c4",
];

/// Lowercases a host and strips any scheme, path, query, or fragment.
pub fn normalize_domain(raw: &str) -> String {
    let s = raw.trim();
    let s = match s.find("://") {
        Some(i) => &s[i + 3..],
        None => s,
    };
    let end = s.find(['/', '?', '#']).unwrap_or(s.len());
    s[..end].to_ascii_lowercase()
}

fn parse_opt_unit(raw: &str, source: &str, line: usize, field: &str) -> Result<Option<f64>> {
    if raw == "NA" {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::parse(source, line, format!("field '{field}': bad number '{raw}'")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::parse(
            source,
            line,
            format!("field '{field}': {v} outside [0,1]"),
        ));
    }
    Ok(Some(v))
}

fn parse_doc_row(
    fields: &[&str],
    feature_dim: usize,
    source: &str,
    line: usize,
) -> Result<Document> {
    let expected = DOC_FIXED_COLUMNS.len() + feature_dim;
    if fields.len() != expected {
        return Err(Error::parse(
            source,
            line,
            format!("expected {expected} columns, got {}", fields.len()),
        ));
    }
    let ir_raw = fields[3];
    let ir = ir_raw
        .parse::<u8>()
        .ok()
        .and_then(Relevance::from_index)
        .ok_or_else(|| {
            Error::parse(
                source,
                line,
                format!("field 'ir': '{ir_raw}' is not a grade in {{0,1,2}}"),
            )
        })?;
    let ia = parse_opt_unit(fields[4], source, line, "ia")?;
    let wm = match fields[5] {
        "NA" => None,
        "0" => Some(false),
        "1" => Some(true),
        other => {
            return Err(Error::parse(
                source,
                line,
                format!("field 'wm': '{other}' is not 0, 1, or NA"),
            ))
        }
    };
    let wm_prob = parse_opt_unit(fields[6], source, line, "wm_prob")?;
    let mut features = Vec::with_capacity(feature_dim);
    for (i, raw) in fields[7..].iter().enumerate() {
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::parse(source, line, format!("field 'f{i}': bad number '{raw}'")))?;
        if !v.is_finite() {
            return Err(Error::parse(
                source,
                line,
                format!("field 'f{i}': non-finite value"),
            ));
        }
        features.push(v);
    }
    Ok(Document {
        query_id: fields[0].to_string(),
        doc_id: fields[1].to_string(),
        domain: normalize_domain(fields[2]),
        ir_label: ir,
        ia_label: ia,
        wm_label: wm,
        wm_prob,
        features,
    })
}

fn doc_header_dim(header: &str, source: &str) -> Result<usize> {
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < DOC_FIXED_COLUMNS.len() {
        return Err(Error::parse(source, 1, "documents header is too short"));
    }
    for (i, expect) in DOC_FIXED_COLUMNS.iter().enumerate() {
        if cols[i] != *expect {
            return Err(Error::parse(
                source,
                1,
                format!(
                    "header column {} is '{}', expected '{}'",
                    i + 1,
                    cols[i],
                    expect
                ),
            ));
        }
    }
    let feature_dim = cols.len() - DOC_FIXED_COLUMNS.len();
    for (i, col) in cols[DOC_FIXED_COLUMNS.len()..].iter().enumerate() {
        let expect = format!("f{i}");
        if *col != expect {
            return Err(Error::parse(
                source,
                1,
                format!("feature column '{col}' out of order, expected '{expect}'"),
            ));
        }
    }
    Ok(feature_dim)
}

/// Parses a documents TSV, grouping rows by query_id in file order.
pub fn parse_documents_str(content: &str, source: &str) -> Result<Dataset> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty documents file"))?;
    let feature_dim = doc_header_dim(header, source)?;

    let mut groups: Vec<QueryGroup> = Vec::new();
    let mut group_of: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let doc = parse_doc_row(&fields, feature_dim, source, line)?;
        let gi = match group_of.get(&doc.query_id) {
            Some(&gi) => gi,
            None => {
                groups.push(QueryGroup {
                    query_id: doc.query_id.clone(),
                    documents: Vec::new(),
                });
                group_of.insert(doc.query_id.clone(), groups.len() - 1);
                groups.len() - 1
            }
        };
        if groups[gi].documents.iter().any(|d| d.doc_id == doc.doc_id) {
            return Err(Error::parse(
                source,
                line,
                format!(
                    "duplicate doc_id '{}' in query '{}'",
                    doc.doc_id, doc.query_id
                ),
            ));
        }
        groups[gi].documents.push(doc);
    }
    if groups.is_empty() {
        return Err(Error::parse(source, 1, "documents file has no rows"));
    }
    Dataset::from_groups(groups, feature_dim)
}

pub fn parse_documents(path: &Path) -> Result<Dataset> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_documents_str(&content, &path.display().to_string())
}

/// Shortest decimal form that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => fmt_f64(v),
        None => "NA".to_string(),
    }
}

/// Canonical serialization; `parse_documents_str` of the output
/// reproduces the dataset exactly.
pub fn serialize_documents(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&DOC_FIXED_COLUMNS.join("\t"));
    for i in 0..dataset.feature_dim() {
        let _ = write!(out, "\tf{i}");
    }
    out.push('\n');
    for doc in dataset.documents() {
        let wm = match doc.wm_label {
            Some(true) => "1".to_string(),
            Some(false) => "0".to_string(),
            None => "NA".to_string(),
        };
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            doc.query_id,
            doc.doc_id,
            doc.domain,
            doc.ir_label.index(),
            fmt_opt(doc.ia_label),
            wm,
            fmt_opt(doc.wm_prob),
        );
        for f in &doc.features {
            let _ = write!(out, "\t{}", fmt_f64(*f));
        }
        out.push('\n');
    }
    out
}

/// Parses a pairs TSV, resolving both sides against `dataset`.
pub fn parse_pairs_str(content: &str, dataset: &Dataset, source: &str) -> Result<Vec<JudgedPair>> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty pairs file"))?;
    if header.split('\t').collect::<Vec<_>>() != PAIR_COLUMNS {
        return Err(Error::parse(
            source,
            1,
            format!("pairs header must be '{}'", PAIR_COLUMNS.join("\\t")),
        ));
    }

    // doc_id -> groups containing it, for the cross-query diagnostic.
    let mut homes: HashMap<&str, Vec<usize>> = HashMap::new();
    for (gi, group) in dataset.groups().iter().enumerate() {
        for doc in &group.documents {
            homes.entry(doc.doc_id.as_str()).or_default().push(gi);
        }
    }

    let resolve = |query_id: &str, doc_id: &str, line: usize| -> Result<DocRef> {
        if let Some(r) = dataset.find(query_id, doc_id) {
            return Ok(r);
        }
        match homes.get(doc_id) {
            Some(gis) => {
                let names: Vec<&str> = gis
                    .iter()
                    .map(|&gi| dataset.groups()[gi].query_id.as_str())
                    .collect();
                Err(Error::parse(
                    source,
                    line,
                    format!(
                        "doc_id '{doc_id}' belongs to query {:?}, not '{query_id}' (cross-query pair)",
                        names
                    ),
                ))
            }
            None => Err(Error::parse(
                source,
                line,
                format!("unknown doc_id '{doc_id}'"),
            )),
        }
    };

    let mut pairs = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != PAIR_COLUMNS.len() {
            return Err(Error::parse(
                source,
                line,
                format!(
                    "expected {} columns, got {}",
                    PAIR_COLUMNS.len(),
                    fields.len()
                ),
            ));
        }
        let query_id = fields[0];
        if dataset.group_index(query_id).is_none() {
            return Err(Error::parse(
                source,
                line,
                format!("unknown query_id '{query_id}'"),
            ));
        }
        let left = resolve(query_id, fields[1], line)?;
        let right = resolve(query_id, fields[2], line)?;
        let mut counts = [0u32; 5];
        for (i, raw_count) in fields[3..].iter().enumerate() {
            counts[i] = raw_count.parse().map_err(|_| {
                Error::parse(
                    source,
                    line,
                    format!("field 'c{i}': bad count '{raw_count}'"),
                )
            })?;
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::parse(source, line, "pair has zero total verdicts"));
        }
        pairs.push(JudgedPair {
            query_id: query_id.to_string(),
            left_id: fields[1].to_string(),
            right_id: fields[2].to_string(),
            left,
            right,
            verdict_counts: counts,
        });
    }
    Ok(pairs)
}

pub fn parse_pairs(path: &Path, dataset: &Dataset) -> Result<Vec<JudgedPair>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs_str(&content, dataset, &path.display().to_string())
}

pub fn serialize_pairs(pairs: &[JudgedPair]) -> String {
    let mut out = String::new();
    out.push_str(&PAIR_COLUMNS.join("\t"));
    out.push('\n');
    for p in pairs {
        let _ = write!(out, "{}\t{}\t{}", p.query_id, p.left_id, p.right_id);
        for c in &p.verdict_counts {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs_fixture() -> String {
        let header = "query_id\tdoc_id\tdomain\tir\tia\twm\twm_prob\tf0\tf1\tf2";
        let rows = [
            "q1\ta\texample.com\t2\t0.9\t0\t0.1\t1\t2\t3",
            "q1\tb\t\t1\tNA\t1\tNA\t0.5\t-1\t0.25",
        ];
        format!("{header}\n{}\n", rows.join("\n"))
    }

    #[test]
    fn parses_two_rows_one_query() {
        let ds = parse_documents_str(&docs_fixture(), "test").unwrap();
        assert_eq!(ds.groups().len(), 1);
        assert_eq!(ds.feature_dim(), 3);
        let g = &ds.groups()[0];
        assert_eq!(g.query_id, "q1");
        assert_eq!(g.documents.len(), 2);
        assert_eq!(g.documents[0].features, vec![1.0, 2.0, 3.0]);
        assert_eq!(g.documents[1].ia_label, None);
        assert_eq!(g.documents[1].wm_label, Some(true));
    }

    #[test]
    fn rejects_out_of_range_grade() {
        let content = docs_fixture().replace("q1\ta\texample.com\t2", "q1\ta\texample.com\t5");
        let err = parse_documents_str(&content, "test").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("test:2"), "{msg}");
        assert!(msg.contains("'ir'"), "{msg}");
    }

    #[test]
    fn groups_interleaved_queries_in_file_order() {
        let content = "query_id\tdoc_id\tdomain\tir\tia\twm\twm_prob\tf0\n\
                       q1\ta\t\t0\tNA\tNA\tNA\t1\n\
                       q2\tb\t\t1\tNA\tNA\tNA\t2\n\
                       q1\tc\t\t2\tNA\tNA\tNA\t3\n";
        let ds = parse_documents_str(content, "test").unwrap();
        assert_eq!(ds.groups().len(), 2);
        assert_eq!(ds.groups()[0].query_id, "q1");
        let ids: Vec<&str> = ds.groups()[0]
            .documents
            .iter()
            .map(|d| d.doc_id.as_str())
            .collect();
        assert_eq!(ids, ["a", "c"]);
        assert_eq!(ds.groups()[1].documents[0].doc_id, "b");
    }

    #[test]
    fn rejects_wrong_column_count() {
        let content = "query_id\tdoc_id\tdomain\tir\tia\twm\twm_prob\tf0\n\
                       q1\ta\t\t0\tNA\tNA\tNA\t1\t9\n";
        let err = parse_documents_str(content, "test").unwrap_err();
        assert!(err.to_string().contains("columns"));
    }

    #[test]
    fn ia_score_matches_formula() {
        let all_wins = JudgeCounts::new(5, 0, 5).unwrap();
        assert_eq!(compute_ia_score(&all_wins), 1.0);
        let all_losses = JudgeCounts::new(0, 0, 5).unwrap();
        assert_eq!(compute_ia_score(&all_losses), 0.0);
        let mixed = JudgeCounts::new(3, 1, 5).unwrap();
        assert!((compute_ia_score(&mixed) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn judge_counts_validation() {
        assert!(JudgeCounts::new(1, 0, 0).is_err());
        assert!(JudgeCounts::new(4, 2, 5).is_err());
        assert!(JudgeCounts::new(4, 1, 5).is_ok());
    }

    #[test]
    fn reference_selection_five_distinct() {
        let scores = [0.1, 0.9, 0.5, 0.7, 0.3];
        // descending: indices 1, 3, 2, 4, 0
        assert_eq!(select_reference_images(&scores).unwrap(), [1, 3, 2, 4, 0]);
    }

    #[test]
    fn reference_selection_thirty_distinct() {
        // scores strictly decreasing, so rank k is index k
        let scores: Vec<f64> = (0..30).map(|i| 100.0 - i as f64).collect();
        assert_eq!(
            select_reference_images(&scores).unwrap(),
            [0, 7, 14, 21, 29]
        );
    }

    #[test]
    fn reference_selection_tie_break() {
        let scores = [1.0; 5];
        assert_eq!(select_reference_images(&scores).unwrap(), [0, 1, 2, 3, 4]);
        let scores = [2.0; 8];
        // ranks floor(p*7) = {0, 1, 3, 5, 7}; identity order under ties
        assert_eq!(select_reference_images(&scores).unwrap(), [0, 1, 3, 5, 7]);
    }

    #[test]
    fn reference_selection_needs_five() {
        assert!(select_reference_images(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    fn pairs_dataset() -> Dataset {
        let content = "query_id\tdoc_id\tdomain\tir\tia\twm\twm_prob\tf0\n\
                       q1\ta\t\t0\tNA\tNA\tNA\t1\n\
                       q1\tb\t\t1\tNA\tNA\tNA\t2\n\
                       q2\tc\t\t2\tNA\tNA\tNA\t3\n\
                       q2\td\t\t0\tNA\tNA\tNA\t4\n";
        parse_documents_str(content, "test").unwrap()
    }

    #[test]
    fn parses_pairs_in_order() {
        let ds = pairs_dataset();
        let content = "query_id\tleft_doc_id\tright_doc_id\tc0\tc1\tc2\tc3\tc4\n\
                       q1\ta\tb\t0\t0\t5\t0\t0\n\
                       q2\tc\td\t1\t2\t0\t1\t1\n\
                       q1\tb\ta\t3\t0\t0\t0\t0\n";
        let pairs = parse_pairs_str(content, &ds, "test").unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].verdict_counts, [0, 0, 5, 0, 0]);
        assert_eq!(pairs[0].total_verdicts(), 5);
        assert_eq!(ds.document(pairs[0].left).doc_id, "a");
        assert_eq!(ds.document(pairs[2].left).doc_id, "b");
    }

    #[test]
    fn rejects_dangling_doc_id() {
        let ds = pairs_dataset();
        let content = "query_id\tleft_doc_id\tright_doc_id\tc0\tc1\tc2\tc3\tc4\n\
                       q1\ta\tzz\t1\t0\t0\t0\t0\n";
        let err = parse_pairs_str(content, &ds, "test").unwrap_err();
        assert!(err.to_string().contains("'zz'"));
    }

    #[test]
    fn rejects_cross_query_pair() {
        let ds = pairs_dataset();
        let content = "query_id\tleft_doc_id\tright_doc_id\tc0\tc1\tc2\tc3\tc4\n\
                       q1\ta\tc\t1\t0\t0\t0\t0\n";
        let err = parse_pairs_str(content, &ds, "test").unwrap_err();
        assert!(err.to_string().contains("cross-query"), "{err}");
    }

    #[test]
    fn rejects_zero_verdicts() {
        let ds = pairs_dataset();
        let content = "query_id\tleft_doc_id\tright_doc_id\tc0\tc1\tc2\tc3\tc4\n\
                       q1\ta\tb\t0\t0\t0\t0\t0\n";
        let err = parse_pairs_str(content, &ds, "test").unwrap_err();
        assert!(err.to_string().contains("zero total verdicts"));
    }

    #[test]
    fn documents_round_trip_bytes() {
        let ds = parse_documents_str(&docs_fixture(), "test").unwrap();
        let emitted = serialize_documents(&ds);
        assert_eq!(emitted, docs_fixture());
        let reparsed = parse_documents_str(&emitted, "test").unwrap();
        assert_eq!(serialize_documents(&reparsed), emitted);
    }

    #[test]
    fn pairs_round_trip_bytes() {
        let ds = pairs_dataset();
        let content = "query_id\tleft_doc_id\tright_doc_id\tc0\tc1\tc2\tc3\tc4\n\
                       q1\ta\tb\t0\t0\t5\t0\t0\n";
        let pairs = parse_pairs_str(content, &ds, "test").unwrap();
        assert_eq!(serialize_pairs(&pairs), content);
    }

    #[test]
    fn domain_normalization() {
        assert_eq!(
            normalize_domain("https://WWW.Example.COM/photo/1?x=2"),
            "www.example.com"
        );
        assert_eq!(normalize_domain("shutterstock.com"), "shutterstock.com");
        assert_eq!(normalize_domain(""), "");
    }
}
