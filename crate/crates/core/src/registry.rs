//! Name-keyed tables of interchangeable algorithm implementations.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Strategies of one kind, looked up by name.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Arc<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: BTreeMap::new() }
    }

    /// Adds or replaces the entry under `name`.
    pub fn register(&mut self, name: &str, item: Arc<T>) -> &mut Self {
        self.entries.insert(name.to_string(), item);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Op: Send + Sync {
        fn apply(&self, x: f64) -> f64;
    }
    struct Double;
    impl Op for Double {
        fn apply(&self, x: f64) -> f64 {
            2.0 * x
        }
    }

    #[test]
    fn lookup_and_unknown_name() {
        let mut r: Registry<dyn Op> = Registry::new("op");
        r.register("double", Arc::new(Double));
        assert_eq!(r.get("double").unwrap().apply(3.0), 6.0);
        let err = r.get("triple").err().unwrap().to_string();
        assert!(err.contains("triple") && err.contains("double"), "{err}");
        assert_eq!(r.names(), vec!["double".to_string()]);
    }
}
