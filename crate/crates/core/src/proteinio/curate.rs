//! Dataset curation filters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Complex, ProteinIoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    PdbMultichain,
    Swissprot,
    Afdb,
    PdbSinglechain,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::PdbMultichain => "pdb-multichain",
            SourceTag::Swissprot => "swissprot",
            SourceTag::Afdb => "afdb",
            SourceTag::PdbSinglechain => "pdb-singlechain",
        }
    }
}

impl FromStr for SourceTag {
    type Err = ProteinIoError;

    fn from_str(s: &str) -> Result<Self, ProteinIoError> {
        match s {
            "pdb-multichain" => Ok(SourceTag::PdbMultichain),
            "swissprot" => Ok(SourceTag::Swissprot),
            "afdb" => Ok(SourceTag::Afdb),
            "pdb-singlechain" => Ok(SourceTag::PdbSinglechain),
            other => Err(ProteinIoError::UnknownSource(other.to_string())),
        }
    }
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationPolicy {
    pub min_chain_len: usize,
    pub max_total_len: usize,
    pub swissprot_plddt: f64,
    pub afdb_plddt: f64,
    /// Multi-chain entries without a cluster id are dropped when set.
    pub require_cluster_id: bool,
}

impl Default for CurationPolicy {
    fn default() -> Self {
        Self { min_chain_len: 30, max_total_len: 2048, swissprot_plddt: 85.0, afdb_plddt: 95.0, require_cluster_id: true }
    }
}

impl CurationPolicy {
    pub fn validate(&self) -> Result<(), ProteinIoError> {
        if self.min_chain_len == 0 || self.max_total_len == 0 || !(self.swissprot_plddt > 0.0) || !(self.afdb_plddt > 0.0) {
            return Err(ProteinIoError::InvalidArgument("curation thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    PeptideChain,
    TotalLength,
    MissingClusterId,
    SwissprotPlddt,
    AfdbPlddt,
}

impl DropReason {
    pub fn label(self) -> &'static str {
        match self {
            DropReason::PeptideChain => "peptide-chain",
            DropReason::TotalLength => "total-length",
            DropReason::MissingClusterId => "missing-cluster-id",
            DropReason::SwissprotPlddt => "swissprot-plddt",
            DropReason::AfdbPlddt => "afdb-plddt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Kept,
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationItem {
    pub id: String,
    pub source: SourceTag,
    pub complex: Complex,
}

/// One line of the curation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationRecord {
    pub id: String,
    pub source: SourceTag,
    pub verdict: Verdict,
    pub reason: Option<DropReason>,
}

/// First rule the item violates, checked in a fixed order.
fn violation(item: &CurationItem, p: &CurationPolicy) -> Option<DropReason> {
    let c = &item.complex;
    let multichain = item.source == SourceTag::PdbMultichain;
    if multichain && c.chains.iter().any(|ch| ch.len() < p.min_chain_len) {
        return Some(DropReason::PeptideChain);
    }
    if c.len() > p.max_total_len {
        return Some(DropReason::TotalLength);
    }
    if multichain && p.require_cluster_id && c.metadata.cluster_id.as_deref().is_none_or(str::is_empty) {
        return Some(DropReason::MissingClusterId);
    }
    // A sample without confidence values cannot pass a confidence filter.
    let plddt = c.mean_plddt().unwrap_or(f64::NEG_INFINITY);
    match item.source {
        SourceTag::Swissprot if plddt <= p.swissprot_plddt => Some(DropReason::SwissprotPlddt),
        SourceTag::Afdb if plddt <= p.afdb_plddt => Some(DropReason::AfdbPlddt),
        _ => None,
    }
}

/// Applies the filters item by item. Records follow input order; the
/// verdict for an item depends on that item alone.
pub fn curate(items: &[CurationItem], policy: &CurationPolicy) -> (Vec<String>, Vec<CurationRecord>) {
    let mut kept = Vec::new();
    let mut records = Vec::with_capacity(items.len());
    for item in items {
        let reason = violation(item, policy);
        if reason.is_none() {
            kept.push(item.id.clone());
        }
        records.push(CurationRecord {
            id: item.id.clone(),
            source: item.source,
            verdict: if reason.is_some() { Verdict::Dropped } else { Verdict::Kept },
            reason,
        });
    }
    (kept, records)
}
