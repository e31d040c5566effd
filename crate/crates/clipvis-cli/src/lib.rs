//! File formats and subcommand implementations behind the `clipvis` binary:
//! run-length mask codecs, track/ground-truth/result interchange files,
//! scene and parameter inputs, graymap rendering, and the pipeline commands
//! that tie the core algorithms together.

pub mod annotations;
pub mod commands;
pub mod pgm;
pub mod report;
pub mod rle;
pub mod scenefile;
pub mod tensorfile;
pub mod textio;
pub mod trackfile;
