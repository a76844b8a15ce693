//! File formats.

pub mod layers;
pub mod logs;
pub mod panel;
pub mod report;
pub mod sequences;

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

/// Column positions of `wanted` in the header, or an input error naming the
/// missing column.
pub(crate) fn columns<const N: usize>(
    path: &Path,
    rdr: &mut csv::Reader<std::fs::File>,
    wanted: [&str; N],
) -> Result<[usize; N]> {
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let mut out = [0; N];
    for (slot, name) in out.iter_mut().zip(wanted) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("{}: missing column {name:?}", path.display())))?;
    }
    Ok(out)
}

pub(crate) fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_row<I, T>(path: &Path, w: &mut csv::Writer<std::fs::File>, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::csv(path, e))
}
