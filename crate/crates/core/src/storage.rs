// Copyright 2026 The VAMS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Append-only entry storage.
//!
//! [`FileStore`] keeps a data file of `u32`-length-prefixed entries and an
//! index file of `u64` offsets. A crash can leave a torn tail in either file;
//! opening truncates both back to the last complete entry.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::Path;

pub trait EntryStore: Send + Sync {
    fn append(&mut self, entry: &[u8]) -> io::Result<u64>;
    fn len(&self) -> u64;
    fn get(&self, index: u64) -> io::Result<Option<Vec<u8>>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn read_all(&self) -> io::Result<Vec<Vec<u8>>> {
        (0..self.len())
            .map(|i| self.get(i).map(|e| e.expect("index below len")))
            .collect()
    }
}

#[derive(Default, Debug, Clone)]
pub struct MemoryStore {
    entries: Vec<Vec<u8>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EntryStore for MemoryStore {
    fn append(&mut self, entry: &[u8]) -> io::Result<u64> {
        self.entries.push(entry.to_vec());
        Ok(self.entries.len() as u64 - 1)
    }

    fn len(&self) -> u64 {
        self.entries.len() as u64
    }

    fn get(&self, index: u64) -> io::Result<Option<Vec<u8>>> {
        Ok(self.entries.get(index as usize).cloned())
    }
}

#[derive(Debug)]
pub struct FileStore {
    data: File,
    index: File,
    offsets: Vec<u64>,
    end: u64,
}

impl FileStore {
    /// Opens (or creates) `<dir>/<name>.log` and `<dir>/<name>.idx`.
    pub fn open(dir: &Path, name: &str) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let open = |ext: &str| {
            OpenOptions::new()
                .read(true)
                .write(true)
                .create(true)
                .truncate(false)
                .open(dir.join(format!("{name}.{ext}")))
        };
        let mut data = open("log")?;
        let mut index = open("idx")?;

        let mut raw = Vec::new();
        index.read_to_end(&mut raw)?;
        let mut offsets: Vec<u64> = raw
            .chunks_exact(8)
            .map(|c| u64::from_be_bytes(c.try_into().unwrap()))
            .collect();
        let data_len = data.metadata()?.len();

        // Drop index slots that point past the data actually on disk.
        let mut end = 0;
        let mut valid = 0;
        for &off in &offsets {
            if off != end || off + 4 > data_len {
                break;
            }
            let mut len = [0u8; 4];
            data.seek(SeekFrom::Start(off))?;
            data.read_exact(&mut len)?;
            let next = off + 4 + u32::from_be_bytes(len) as u64;
            if next > data_len {
                break;
            }
            end = next;
            valid += 1;
        }
        offsets.truncate(valid);

        // Recover complete entries written after the last index update.
        loop {
            if end + 4 > data_len {
                break;
            }
            let mut len = [0u8; 4];
            data.seek(SeekFrom::Start(end))?;
            data.read_exact(&mut len)?;
            let next = end + 4 + u32::from_be_bytes(len) as u64;
            if next > data_len {
                break;
            }
            offsets.push(end);
            end = next;
        }

        data.set_len(end)?;
        index.set_len(0)?;
        index.seek(SeekFrom::Start(0))?;
        let mut buf = Vec::with_capacity(offsets.len() * 8);
        for off in &offsets {
            buf.extend_from_slice(&off.to_be_bytes());
        }
        index.write_all(&buf)?;
        index.sync_data()?;
        data.sync_data()?;
        Ok(Self { data, index, offsets, end })
    }
}

impl EntryStore for FileStore {
    fn append(&mut self, entry: &[u8]) -> io::Result<u64> {
        let len = u32::try_from(entry.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "entry too large"))?;
        let mut buf = Vec::with_capacity(entry.len() + 4);
        buf.extend_from_slice(&len.to_be_bytes());
        buf.extend_from_slice(entry);
        self.data.seek(SeekFrom::Start(self.end))?;
        self.data.write_all(&buf)?;
        self.data.sync_data()?;
        self.index.seek(SeekFrom::End(0))?;
        self.index.write_all(&self.end.to_be_bytes())?;
        self.offsets.push(self.end);
        self.end += buf.len() as u64;
        Ok(self.offsets.len() as u64 - 1)
    }

    fn len(&self) -> u64 {
        self.offsets.len() as u64
    }

    fn get(&self, index: u64) -> io::Result<Option<Vec<u8>>> {
        let Some(&off) = self.offsets.get(index as usize) else {
            return Ok(None);
        };
        // Positional reads keep concurrent readers off the shared cursor.
        let mut len = [0u8; 4];
        self.data.read_exact_at(&mut len, off)?;
        let mut out = vec![0u8; u32::from_be_bytes(len) as usize];
        self.data.read_exact_at(&mut out, off + 4)?;
        Ok(Some(out))
    }
}
