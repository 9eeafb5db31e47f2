use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::output::Format;
use crate::{Cli, Command, LoadedConfig};

#[derive(Debug, Clone, Serialize)]
pub struct ConfigRecord {
    pub source: String,
    pub sha256: String,
}

/// Everything needed to rerun a command, plus timing and output paths.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: Vec<String>,
    pub subcommand: &'static str,
    pub parameters: Command,
    pub config: Option<ConfigRecord>,
    pub seed: u64,
    pub grid: Option<usize>,
    pub threads: usize,
    pub format: Format,
    /// Map constants and the resolved scheme constants.
    pub constants: Option<Value>,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        argv: &[OsString],
        cli: &Cli,
        loaded: Option<&LoadedConfig>,
        seed: u64,
        threads: usize,
        constants: Option<Value>,
        wall_time_s: f64,
        outputs: &[PathBuf],
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            command: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            subcommand: cli.command.name(),
            parameters: cli.command.clone(),
            config: loaded.map(|l| ConfigRecord { source: l.source.clone(), sha256: sha256_hex(l.text.as_bytes()) }),
            seed,
            grid: cli.common.grid,
            threads,
            format: cli.common.out,
            constants,
            wall_time_s,
            outputs: outputs.to_vec(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
