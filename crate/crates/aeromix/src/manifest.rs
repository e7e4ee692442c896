//! Run manifest: everything needed to repeat a run and check its outputs.
//!
//! The manifest holds no timestamps, host details or thread counts, so
//! identical runs produce identical manifests.

use std::fmt::Write as _;

use crate::fsio::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    /// Resolved configuration as sorted `key=value` lines.
    pub effective_config: String,
    /// Named seeds used by the run.
    pub seeds: Vec<(String, u64)>,
    /// Output files relative to the output directory, with their contents'
    /// SHA-256.
    pub outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "aeromix-manifest 1").unwrap();
        writeln!(out, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "command = {}", self.command).unwrap();
        writeln!(
            out,
            "config_sha256 = {}",
            sha256_hex(self.effective_config.as_bytes())
        )
        .unwrap();
        for (name, seed) in &self.seeds {
            writeln!(out, "seed.{name} = {seed}").unwrap();
        }
        writeln!(out, "[config]").unwrap();
        out.push_str(&self.effective_config);
        writeln!(out, "[outputs]").unwrap();
        for (path, hash) in &self.outputs {
            writeln!(out, "{hash}  {path}").unwrap();
        }
        out
    }
}
