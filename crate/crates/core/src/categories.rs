//! Item-to-category mapping.
//!
//! Every item carries a non-empty set of category ids (news items a single
//! category, books several genres). Category ids are dense and paired with
//! display names.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CategoryError {
    #[error("item {0} has no category entry")]
    UnknownItem(u32),
    #[error("item {0} has an empty category set")]
    EmptyCategories(u32),
    #[error("category id {id} out of range ({n_categories} categories)")]
    UnknownCategory { id: u32, n_categories: u32 },
    #[error("malformed category file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Maps dense item ids to sorted, non-empty category id sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMap {
    item_categories: Vec<Vec<u32>>,
    names: Vec<String>,
}

impl CategoryMap {
    /// Build from explicit per-item category sets. `names[c]` is the display
    /// name of category `c`; every referenced category id must be in range
    /// and every listed item must have at least one category.
    pub fn from_entries<I>(names: Vec<String>, items: I) -> Result<Self, CategoryError>
    where
        I: IntoIterator<Item = (u32, Vec<u32>)>,
    {
        let n_categories = names.len() as u32;
        let mut item_categories: Vec<Vec<u32>> = Vec::new();
        for (item, mut cats) in items {
            if cats.is_empty() {
                return Err(CategoryError::EmptyCategories(item));
            }
            for &c in &cats {
                if c >= n_categories {
                    return Err(CategoryError::UnknownCategory {
                        id: c,
                        n_categories,
                    });
                }
            }
            cats.sort_unstable();
            cats.dedup();
            let idx = item as usize;
            if idx >= item_categories.len() {
                item_categories.resize(idx + 1, Vec::new());
            }
            // repeated lines for one item merge their sets
            if item_categories[idx].is_empty() {
                item_categories[idx] = cats;
            } else {
                item_categories[idx].extend(cats);
                item_categories[idx].sort_unstable();
                item_categories[idx].dedup();
            }
        }
        Ok(CategoryMap {
            item_categories,
            names,
        })
    }

    pub fn n_categories(&self) -> u32 {
        self.names.len() as u32
    }

    pub fn name(&self, category: u32) -> &str {
        &self.names[category as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    /// Sorted category ids of `item`; items without an entry are errors at
    /// query time.
    pub fn categories(&self, item: u32) -> Result<&[u32], CategoryError> {
        match self.item_categories.get(item as usize) {
            Some(cats) if !cats.is_empty() => Ok(cats),
            _ => Err(CategoryError::UnknownItem(item)),
        }
    }

    pub fn has_item(&self, item: u32) -> bool {
        matches!(self.item_categories.get(item as usize), Some(c) if !c.is_empty())
    }

    /// Normalized text form used by pipeline artifacts: first the category
    /// names as `c <id> <name>` lines, then `i <item> <id,id,...>` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), CategoryError> {
        for (id, name) in self.names.iter().enumerate() {
            writeln!(w, "c\t{id}\t{name}")?;
        }
        for (item, cats) in self.item_categories.iter().enumerate() {
            if cats.is_empty() {
                continue;
            }
            let joined: Vec<String> = cats.iter().map(|c| c.to_string()).collect();
            writeln!(w, "i\t{item}\t{}", joined.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv_file<P: AsRef<Path>>(path: P) -> Result<Self, CategoryError> {
        Self::read_tsv(BufReader::new(File::open(path)?))
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, CategoryError> {
        let mut names = Vec::new();
        let mut items = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let kind = fields.next().unwrap_or("");
            let (Some(id), Some(rest)) = (fields.next(), fields.next()) else {
                return Err(CategoryError::BadFile(format!("line {}: too few fields", lineno + 1)));
            };
            match kind {
                "c" => {
                    let id: usize = id
                        .parse()
                        .map_err(|_| CategoryError::BadFile(format!("line {}: bad id", lineno + 1)))?;
                    if id != names.len() {
                        return Err(CategoryError::BadFile(format!(
                            "line {}: category ids must be dense and in order",
                            lineno + 1
                        )));
                    }
                    names.push(rest.to_string());
                }
                "i" => {
                    let item: u32 = id
                        .parse()
                        .map_err(|_| CategoryError::BadFile(format!("line {}: bad item", lineno + 1)))?;
                    let cats = rest
                        .split(',')
                        .map(|c| c.parse::<u32>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| {
                            CategoryError::BadFile(format!("line {}: bad category id", lineno + 1))
                        })?;
                    items.push((item, cats));
                }
                other => {
                    return Err(CategoryError::BadFile(format!(
                        "line {}: unknown record kind {other:?}",
                        lineno + 1
                    )));
                }
            }
        }
        Self::from_entries(names, items)
    }
}
