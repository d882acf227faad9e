//! Domain-based watermark classifier and signal fusion.
//!
//! Domains hosting strictly more than `min_count` labeled images with a
//! watermark rate strictly above `min_rate` go on the known-watermark
//! list. Any image from a listed domain is treated as watermarked with
//! probability 1 regardless of its content-classifier score.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{fmt_f64, Dataset};
use crate::error::{Error, Result};

/// Per-domain image and watermark counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainStats {
    pub domain: String,
    pub n_images: u64,
    pub n_watermarked: u64,
}

impl DomainStats {
    pub fn rate(&self) -> f64 {
        self.n_watermarked as f64 / self.n_images as f64
    }
}

/// Thresholds a domain must clear to be listed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildParams {
    pub min_count: u64,
    pub min_rate: f64,
}

/// The known-watermark domain list with the stats that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainList {
    params: BuildParams,
    /// Sorted by domain; every entry clears both thresholds.
    entries: Vec<DomainStats>,
}

/// Counters reported alongside a freshly built list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildSummary {
    pub docs_counted: u64,
    pub docs_missing_label: u64,
    pub docs_missing_domain: u64,
    pub domains_seen: u64,
}

impl DomainList {
    pub fn new(params: BuildParams, mut entries: Vec<DomainStats>) -> Result<DomainList> {
        validate_params(&params)?;
        for e in &entries {
            if e.n_watermarked > e.n_images {
                return Err(Error::invalid(format!(
                    "domain '{}': {} watermarked of {} images",
                    e.domain, e.n_watermarked, e.n_images
                )));
            }
            if e.n_images <= params.min_count || e.rate() <= params.min_rate {
                return Err(Error::invalid(format!(
                    "domain '{}' does not clear the list thresholds",
                    e.domain
                )));
            }
        }
        entries.sort_by(|a, b| a.domain.cmp(&b.domain));
        if let Some(w) = entries.windows(2).find(|w| w[0].domain == w[1].domain) {
            return Err(Error::invalid(format!(
                "duplicate domain '{}'",
                w[0].domain
            )));
        }
        Ok(DomainList { params, entries })
    }

    pub fn params(&self) -> BuildParams {
        self.params
    }

    pub fn entries(&self) -> &[DomainStats] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.entries
            .binary_search_by(|e| e.domain.as_str().cmp(domain))
            .is_ok()
    }
}

fn validate_params(params: &BuildParams) -> Result<()> {
    if !(0.0..=1.0).contains(&params.min_rate) {
        return Err(Error::invalid(format!(
            "min_rate must be in [0,1], got {}",
            params.min_rate
        )));
    }
    Ok(())
}

/// Aggregates watermark labels per domain and keeps the domains with
/// n_images > min_count and watermark rate > min_rate. Documents without
/// a wm label or a domain are skipped and counted in the summary.
pub fn build_domain_list(
    dataset: &Dataset,
    min_count: u64,
    min_rate: f64,
) -> Result<(DomainList, BuildSummary)> {
    let params = BuildParams {
        min_count,
        min_rate,
    };
    validate_params(&params)?;

    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let mut summary = BuildSummary::default();
    for doc in dataset.documents() {
        if doc.domain.is_empty() {
            summary.docs_missing_domain += 1;
            continue;
        }
        let Some(wm) = doc.wm_label else {
            summary.docs_missing_label += 1;
            continue;
        };
        summary.docs_counted += 1;
        let slot = counts.entry(doc.domain.as_str()).or_insert((0, 0));
        slot.0 += 1;
        if wm {
            slot.1 += 1;
        }
    }
    if summary.docs_counted == 0 {
        return Err(Error::invalid(
            "no documents with both a domain and a wm label",
        ));
    }
    summary.domains_seen = counts.len() as u64;

    let entries: Vec<DomainStats> = counts
        .into_iter()
        .filter(|&(_, (n, w))| n > min_count && (w as f64 / n as f64) > min_rate)
        .map(|(domain, (n, w))| DomainStats {
            domain: domain.to_string(),
            n_images: n,
            n_watermarked: w,
        })
        .collect();
    let list = DomainList { params, entries };
    Ok((list, summary))
}

/// Final watermark probability for one image: 1 for a listed domain,
/// otherwise the content-classifier probability, otherwise 0.5.
pub fn fuse_probability(domain: &str, content_prob: Option<f64>, list: &DomainList) -> Result<f64> {
    if let Some(p) = content_prob {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "content probability {p} outside [0,1]"
            )));
        }
    }
    if !domain.is_empty() && list.contains(domain) {
        return Ok(1.0);
    }
    Ok(content_prob.unwrap_or(0.5))
}

const DOMAINS_MAGIC: &str = "rankweave-domains v1";

pub fn serialize_domain_list(list: &DomainList) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{DOMAINS_MAGIC}\tmin_count={}\tmin_rate={}",
        list.params.min_count,
        fmt_f64(list.params.min_rate)
    );
    for e in &list.entries {
        let _ = writeln!(out, "{}\t{}\t{}", e.domain, e.n_images, e.n_watermarked);
    }
    out
}

pub fn save_domain_list(list: &DomainList, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_domain_list(list)).map_err(|e| Error::io(path, e))
}

pub fn parse_domain_list(content: &str, source: &str) -> Result<DomainList> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty domain list file"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    if parts.len() != 3 || parts[0] != DOMAINS_MAGIC {
        return Err(Error::parse(
            source,
            1,
            format!("bad header, expected '{DOMAINS_MAGIC}\\tmin_count=..\\tmin_rate=..'"),
        ));
    }
    let min_count: u64 = parts[1]
        .strip_prefix("min_count=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(source, 1, "bad min_count"))?;
    let min_rate: f64 = parts[2]
        .strip_prefix("min_rate=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(source, 1, "bad min_rate"))?;

    let mut entries = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                source,
                line,
                format!("expected 3 columns, got {} (truncated file?)", fields.len()),
            ));
        }
        let n_images: u64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(source, line, "bad n_images"))?;
        let n_watermarked: u64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(source, line, "bad n_watermarked"))?;
        entries.push(DomainStats {
            domain: fields[0].to_string(),
            n_images,
            n_watermarked,
        });
    }
    DomainList::new(
        BuildParams {
            min_count,
            min_rate,
        },
        entries,
    )
}

pub fn load_domain_list(path: &Path) -> Result<DomainList> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_domain_list(&content, &path.display().to_string())
}
