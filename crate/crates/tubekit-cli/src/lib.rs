//! File formats, synthetic data, toy training and the end-to-end pipeline
//! behind the `tubekit` command-line tool.

pub mod config;
pub mod formats;
pub mod infer;
pub mod pipeline;
pub mod synth;
pub mod train;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, PipelineOptions, PipelineOutput};
pub use synth::{generate_synthetic, sample_specs, DatasetParams, SyntheticSpec, SyntheticVideo};

// Book chapters that exercise this crate run as doc-tests here; the library
// chapters are attached to the tubekit crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/synthetic-data.md")]
    mod synthetic_data {}
    #[doc = include_str!("../../../book/src/cli-and-formats.md")]
    mod cli_and_formats {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
}
