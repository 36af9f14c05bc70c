//! Delay-keyed cache for stage-2/3 kernel solves.
//!
//! The trigger may re-fire with an unchanged estimate; re-solving would be
//! wasted work, so bundles are cached keyed by the candidate delay rounded
//! to 1e-9.

use std::collections::HashMap;
use std::sync::Arc;

/// Cache of values derived from a delay candidate.
#[derive(Debug, Default)]
pub struct KernelCache<T> {
    map: HashMap<i64, Arc<T>>,
}

/// Rounding used for the cache key.
pub fn delay_key(d: f64) -> i64 {
    (d * 1e9).round() as i64
}

impl<T> KernelCache<T> {
    pub fn new() -> Self {
        KernelCache {
            map: HashMap::new(),
        }
    }

    pub fn get(&self, d: f64) -> Option<Arc<T>> {
        self.map.get(&delay_key(d)).cloned()
    }

    /// Fetch the bundle for delay `d`, building it on a miss.
    pub fn get_or_try_insert<E>(
        &mut self,
        d: f64,
        build: impl FnOnce() -> Result<T, E>,
    ) -> Result<Arc<T>, E> {
        if let Some(v) = self.get(d) {
            return Ok(v);
        }
        let v = Arc::new(build()?);
        self.map.insert(delay_key(d), v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
