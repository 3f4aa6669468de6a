pub mod annotate;
pub mod tools;
pub mod validate;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    avr_core::jsonl::read_jsonl(open(path)?)
        .map_err(|source| CliError::Jsonl { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
