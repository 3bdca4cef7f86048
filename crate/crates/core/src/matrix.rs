//! Sparse binary user-item interaction matrix.
//!
//! This is the universal currency of the pipeline: the original training
//! data and every pre-processed variant of it are values of
//! [`InteractionMatrix`]. The matrix is immutable after construction and safe
//! to share across parallel workers; edits produce new matrices.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("user {user} out of range (n_users = {n_users})")]
    UserOutOfRange { user: u32, n_users: u32 },
    #[error("item {item} out of range (n_items = {n_items})")]
    ItemOutOfRange { item: u32, n_items: u32 },
    #[error("density undefined for {n_users}x{n_items} matrix")]
    ZeroDimension { n_users: u32, n_items: u32 },
    #[error("malformed snapshot: {0}")]
    BadSnapshot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Binary implicit-feedback interactions between `n_users` users and
/// `n_items` items.
///
/// Both the row view (user to sorted items) and the column view (item to
/// sorted users) are materialized: the profiler iterates item rows of the
/// transposed matrix while the predictor and recommenders iterate user rows.
/// Entries are presence-only; there are no weights and no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    n_users: u32,
    n_items: u32,
    n_entries: u64,
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
}

impl InteractionMatrix {
    /// Build a matrix from (user, item) pairs. Duplicate pairs collapse to a
    /// single entry; out-of-range ids are errors.
    pub fn from_entries<I>(n_users: u32, n_items: u32, entries: I) -> Result<Self, MatrixError>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut rows = vec![Vec::new(); n_users as usize];
        for (user, item) in entries {
            if user >= n_users {
                return Err(MatrixError::UserOutOfRange { user, n_users });
            }
            if item >= n_items {
                return Err(MatrixError::ItemOutOfRange { item, n_items });
            }
            rows[user as usize].push(item);
        }
        Ok(Self::from_rows_unchecked(n_users, n_items, rows))
    }

    /// Build from per-user item lists that are already range-checked.
    /// Rows are sorted and deduplicated here.
    pub(crate) fn from_rows_unchecked(n_users: u32, n_items: u32, mut rows: Vec<Vec<u32>>) -> Self {
        debug_assert_eq!(rows.len(), n_users as usize);
        let mut cols = vec![Vec::new(); n_items as usize];
        let mut n_entries = 0u64;
        for (user, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            n_entries += row.len() as u64;
            for &item in row.iter() {
                cols[item as usize].push(user as u32);
            }
        }
        // Column lists inherit sortedness from the user iteration order.
        InteractionMatrix {
            n_users,
            n_items,
            n_entries,
            rows,
            cols,
        }
    }

    pub fn empty(n_users: u32, n_items: u32) -> Self {
        Self::from_rows_unchecked(n_users, n_items, vec![Vec::new(); n_users as usize])
    }

    pub fn n_users(&self) -> u32 {
        self.n_users
    }

    pub fn n_items(&self) -> u32 {
        self.n_items
    }

    pub fn n_entries(&self) -> u64 {
        self.n_entries
    }

    /// Sorted items of one user. Panics on an out-of-range user; use
    /// [`profile_size`](Self::profile_size) for the checked variant.
    pub fn profile(&self, user: u32) -> &[u32] {
        &self.rows[user as usize]
    }

    /// Sorted users of one item.
    pub fn item_users(&self, item: u32) -> &[u32] {
        &self.cols[item as usize]
    }

    pub fn contains(&self, user: u32, item: u32) -> bool {
        self.rows[user as usize].binary_search(&item).is_ok()
    }

    /// Number of interactions in `user`'s profile.
    pub fn profile_size(&self, user: u32) -> Result<usize, MatrixError> {
        if user >= self.n_users {
            return Err(MatrixError::UserOutOfRange {
                user,
                n_users: self.n_users,
            });
        }
        Ok(self.rows[user as usize].len())
    }

    /// Fraction of cells that are filled, `n_entries / (n_users * n_items)`.
    pub fn density(&self) -> Result<f64, MatrixError> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(MatrixError::ZeroDimension {
                n_users: self.n_users,
                n_items: self.n_items,
            });
        }
        Ok(self.n_entries as f64 / (self.n_users as f64 * self.n_items as f64))
    }

    /// All entries in row-major order (sorted by user, then item).
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&i| (u as u32, i)))
    }

    /// A new matrix with `additions` inserted and `removals` deleted.
    /// Additions that are already present and removals that are absent are
    /// no-ops; ids are range-checked.
    pub fn with_edits(
        &self,
        additions: &[(u32, u32)],
        removals: &[(u32, u32)],
    ) -> Result<Self, MatrixError> {
        let mut rows = self.rows.clone();
        for &(user, item) in additions {
            self.check_range(user, item)?;
            rows[user as usize].push(item);
        }
        for &(user, item) in removals {
            self.check_range(user, item)?;
            rows[user as usize].retain(|&i| i != item);
        }
        Ok(Self::from_rows_unchecked(self.n_users, self.n_items, rows))
    }

    fn check_range(&self, user: u32, item: u32) -> Result<(), MatrixError> {
        if user >= self.n_users {
            return Err(MatrixError::UserOutOfRange {
                user,
                n_users: self.n_users,
            });
        }
        if item >= self.n_items {
            return Err(MatrixError::ItemOutOfRange {
                item,
                n_items: self.n_items,
            });
        }
        Ok(())
    }

    /// Serialize to the binary snapshot format: a header of three
    /// little-endian u64 values (n_users, n_items, n_entries) followed by the
    /// entries as little-endian (u32 user, u32 item) pairs in row-major
    /// sorted order. The format is byte-stable: equal matrices serialize to
    /// equal bytes.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), MatrixError> {
        w.write_all(&(self.n_users as u64).to_le_bytes())?;
        w.write_all(&(self.n_items as u64).to_le_bytes())?;
        w.write_all(&self.n_entries.to_le_bytes())?;
        for (user, item) in self.entries() {
            w.write_all(&user.to_le_bytes())?;
            w.write_all(&item.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, MatrixError> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)
            .map_err(|e| MatrixError::BadSnapshot(format!("short header: {e}")))?;
        let n_users = u64::from_le_bytes(header[0..8].try_into().unwrap());
        let n_items = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let n_entries = u64::from_le_bytes(header[16..24].try_into().unwrap());
        if n_users > u32::MAX as u64 || n_items > u32::MAX as u64 {
            return Err(MatrixError::BadSnapshot(format!(
                "dimensions {n_users}x{n_items} exceed u32 range"
            )));
        }
        let mut buf = vec![0u8; (n_entries as usize) * 8];
        r.read_exact(&mut buf)
            .map_err(|e| MatrixError::BadSnapshot(format!("short body: {e}")))?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(MatrixError::BadSnapshot("trailing bytes".into()));
        }
        let entries = buf.chunks_exact(8).map(|c| {
            (
                u32::from_le_bytes(c[0..4].try_into().unwrap()),
                u32::from_le_bytes(c[4..8].try_into().unwrap()),
            )
        });
        let m = Self::from_entries(n_users as u32, n_items as u32, entries)?;
        if m.n_entries != n_entries {
            return Err(MatrixError::BadSnapshot(format!(
                "header says {} entries, body has {} distinct",
                n_entries, m.n_entries
            )));
        }
        Ok(m)
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(24 + self.n_entries as usize * 8);
        self.write_snapshot(&mut buf).expect("vec write");
        buf
    }

    pub fn write_snapshot_file<P: AsRef<Path>>(&self, path: P) -> Result<(), MatrixError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_snapshot(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot_file<P: AsRef<Path>>(path: P) -> Result<Self, MatrixError> {
        Self::read_snapshot(BufReader::new(File::open(path)?))
    }
}
