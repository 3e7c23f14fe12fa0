//! Append-only JSON-lines files with torn-tail recovery.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Result, StoreError};

pub(crate) struct AppendLog {
    path: PathBuf,
    file: File,
    sync: bool,
}

impl AppendLog {
    /// Opens (creating if needed) `path` and decodes every record.
    ///
    /// An undecodable final line is treated as a torn write: the file is
    /// truncated to the end of the last good record and a warning is pushed.
    /// An undecodable line anywhere else is an error naming the line.
    pub(crate) fn open<T: DeserializeOwned>(
        path: &Path,
        sync: bool,
        warnings: &mut Vec<String>,
    ) -> Result<(Self, Vec<T>)> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut records = Vec::new();
        let mut good_end = 0usize;
        let mut pos = 0usize;
        let mut line_no = 0usize;
        let mut needs_newline = false;
        while pos < bytes.len() {
            line_no += 1;
            let (end, next) = match bytes[pos..].iter().position(|&b| b == b'\n') {
                Some(i) => (pos + i, pos + i + 1),
                None => (bytes.len(), bytes.len()),
            };
            let line = &bytes[pos..end];
            let is_last = next >= bytes.len();
            if line.iter().all(u8::is_ascii_whitespace) {
                pos = next;
                good_end = next;
                continue;
            }
            match serde_json::from_slice::<T>(line) {
                Ok(r) => {
                    records.push(r);
                    good_end = next;
                    needs_newline = end == bytes.len();
                }
                Err(e) if is_last => {
                    warnings.push(format!(
                        "{}: dropped torn record at line {line_no} ({e}); truncated to {good_end} bytes",
                        path.display()
                    ));
                    break;
                }
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        file: path.to_path_buf(),
                        line: line_no,
                        message: e.to_string(),
                    });
                }
            }
            pos = next;
        }
        if good_end < bytes.len() {
            file.set_len(good_end as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        if needs_newline {
            file.write_all(b"\n")?;
        }
        Ok((Self { path: path.to_path_buf(), file, sync }, records))
    }

    pub(crate) fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        if self.sync {
            self.file.sync_data()?;
        }
        Ok(())
    }

    pub(crate) fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct R {
        n: u32,
    }

    fn open(path: &Path) -> (AppendLog, Vec<R>, Vec<String>) {
        let mut w = Vec::new();
        let (log, recs) = AppendLog::open::<R>(path, false, &mut w).unwrap();
        (log, recs, w)
    }

    #[test]
    fn append_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        let (mut log, recs, _) = open(&p);
        assert!(recs.is_empty());
        for n in 0..3 {
            log.append(&R { n }).unwrap();
        }
        drop(log);
        let (_, recs, w) = open(&p);
        assert_eq!(recs, vec![R { n: 0 }, R { n: 1 }, R { n: 2 }]);
        assert!(w.is_empty());
    }

    #[test]
    fn torn_tail_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        std::fs::write(&p, "{\"n\":1}\n{\"n\":2}\n{\"n\":").unwrap();
        let (mut log, recs, w) = open(&p);
        assert_eq!(recs.len(), 2);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("line 3"));
        log.append(&R { n: 9 }).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "{\"n\":1}\n{\"n\":2}\n{\"n\":9}\n");
    }

    #[test]
    fn complete_tail_without_newline_kept() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        std::fs::write(&p, "{\"n\":1}").unwrap();
        let (mut log, recs, w) = open(&p);
        assert_eq!(recs, vec![R { n: 1 }]);
        assert!(w.is_empty());
        log.append(&R { n: 2 }).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "{\"n\":1}\n{\"n\":2}\n");
    }

    #[test]
    fn mid_file_corruption_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        std::fs::write(&p, "{\"n\":1}\ngarbage\n{\"n\":3}\n").unwrap();
        let mut w = Vec::new();
        match AppendLog::open::<R>(&p, false, &mut w) {
            Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("{:?}", other.map(|(_, r)| r)),
        }
    }
}
