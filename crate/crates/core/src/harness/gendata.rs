use std::path::Path;

use crate::error::Result;
use crate::synth::{self, ManifestEntry, SynthSpec};

/// Writes the dataset of `spec` as PGM pairs plus `manifest.csv`.
pub fn gendata(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let samples = synth::generate(spec)?;
    synth::write_dataset(&samples, out_dir)
}
