//! Optional TOML config file. Values act as defaults; command-line flags
//! always win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub l2_lambda: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub addr: Option<String>,
    pub scheme: Option<String>,
    pub max_body_mb: Option<usize>,
    #[serde(default)]
    pub checkpoints: Vec<PathBuf>,
}

pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "[train]\nepochs = 3\nlr = 0.002\n\n[serve]\naddr = \"127.0.0.1:9000\"\ncheckpoints = [\"a.cstf\"]\n",
        )
        .unwrap();
        let cfg = load(&path).unwrap();
        assert_eq!(cfg.train.epochs, Some(3));
        assert_eq!(cfg.train.lr, Some(0.002));
        assert_eq!(cfg.serve.addr.as_deref(), Some("127.0.0.1:9000"));
        assert_eq!(cfg.serve.checkpoints.len(), 1);
        assert!(cfg.train.batch_size.is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[train]\nepoch = 3\n").unwrap();
        assert!(load(&path).is_err());
    }
}
