use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u32,
    pub name: String,
}

/// Ordered class names; class ids are exactly `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    names: Vec<String>,
}

impl ClassCatalog {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Catalog("catalog has no classes".into()));
        }
        let mut seen = HashSet::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::Catalog(format!("class {i} has an empty name")));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::Catalog(format!("duplicate class name {n:?}")));
            }
        }
        if u32::try_from(names.len()).is_err() {
            return Err(Error::Catalog("too many classes".into()));
        }
        Ok(Self { names })
    }

    /// Accepts entries in any order as long as the ids form `0..K`.
    pub fn from_entries(entries: &[ClassEntry]) -> Result<Self> {
        let k = entries.len();
        let mut names: Vec<Option<String>> = vec![None; k];
        for e in entries {
            let slot = names
                .get_mut(e.id as usize)
                .ok_or_else(|| Error::Catalog(format!("class id {} outside 0..{k}", e.id)))?;
            if slot.is_some() {
                return Err(Error::Catalog(format!("duplicate class id {}", e.id)));
            }
            *slot = Some(e.name.clone());
        }
        Self::new(names.into_iter().map(|n| n.expect("every id filled")))
    }

    pub fn entries(&self) -> Vec<ClassEntry> {
        self.iter()
            .map(|(id, name)| ClassEntry {
                id,
                name: name.to_owned(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.names.len()
    }

    pub fn check(&self, id: u32) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownClass(id))
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> {
        0..self.names.len() as u32
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u32, n.as_str()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}
