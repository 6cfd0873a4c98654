//! Stable process exit codes.

use sceneforge_core::Error;

pub const OK: i32 = 0;
pub const INTERNAL: i32 = 1;
/// Bad flags, bad config files, invalid arguments.
pub const USAGE: i32 = 2;
pub const EMPTY_CORPUS: i32 = 3;
/// `eval` found scenes without an enhanced file.
pub const MISSING_FILES: i32 = 4;
/// Some scenes failed to render or evaluate; the rest were written.
pub const SCENE_FAILURES: i32 = 5;
/// `render --verify` flagged scenes.
pub const VERIFY_FAILED: i32 = 6;
pub const IO: i32 = 7;
/// Manifest, catalog or signal content is unusable.
pub const DATA: i32 = 8;
pub const EXTERNAL: i32 = 9;

pub fn code_for(err: &Error) -> i32 {
    match err.root() {
        Error::InvalidArgument(_) | Error::Config(_) => USAGE,
        Error::EmptyCorpus(_) => EMPTY_CORPUS,
        Error::Io { .. } | Error::Wav { .. } => IO,
        Error::Json(_)
        | Error::Manifest(_)
        | Error::Resolution(_)
        | Error::UnsatisfiableScene(_)
        | Error::DegenerateSignal(_) => DATA,
        Error::External(_) => EXTERNAL,
        Error::Scene { .. } => INTERNAL,
    }
}
