pub mod evaluate;
pub mod features;
pub mod fuse;
pub mod ingest;
pub mod predict;
pub mod serve;
pub mod synth;
pub mod train;

use anyhow::{bail, Result};
use crowdscene_core::dsp::FeatureKind;
use crowdscene_core::manifest::Split;

pub fn parse_kind(s: &str) -> Result<FeatureKind> {
    match FeatureKind::from_name(s) {
        Some(kind) => Ok(kind),
        None => bail!("unknown feature kind {s:?} (mel, cqt, gam, frames)"),
    }
}

/// `train`, `test`, or `all` (None).
pub fn parse_split_filter(s: &str) -> Result<Option<Split>> {
    match s {
        "all" => Ok(None),
        other => match Split::from_name(other) {
            Some(split) => Ok(Some(split)),
            None => bail!("unknown split {other:?} (train, test, all)"),
        },
    }
}
