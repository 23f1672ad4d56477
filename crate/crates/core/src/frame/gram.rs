//! Memoised wavelet pairings.
//!
//! `⟨h_I^a, h_J^b⟩` depends only on the scale difference and on the centre
//! offset measured in units of `ℓ(I)`, so one table serves every grid and
//! every pair of grids.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::wavelet::SmoothFamily;
use crate::MAX_DIM;

const QUANT: f64 = 1099511627776.0; // 2^40

type Key = (i32, [i64; MAX_DIM]);

pub struct GramCache {
    family: Arc<SmoothFamily>,
    map: RwLock<HashMap<Key, Arc<Vec<f64>>>>,
}

impl GramCache {
    pub fn new(family: Arc<SmoothFamily>) -> Self {
        Self { family, map: RwLock::new(HashMap::new()) }
    }

    pub fn family(&self) -> &Arc<SmoothFamily> {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("gram cache").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pairing matrix (row `a` for `I`, column `b` for `J`) for cubes with
    /// `s_J - s_I = ds` and `(c_J - c_I)/ℓ(I) = offset`.
    pub fn get(&self, ds: i32, offset: &[f64]) -> Arc<Vec<f64>> {
        let mut q = [0i64; MAX_DIM];
        for (k, o) in offset.iter().enumerate() {
            q[k] = (o * QUANT).round() as i64;
        }
        let key = (ds, q);
        if let Some(v) = self.map.read().expect("gram cache").get(&key) {
            return v.clone();
        }
        let off: Vec<f64> = offset.iter().enumerate().map(|(k, _)| q[k] as f64 / QUANT).collect();
        let ratio = (-ds as f64).exp2();
        let v = Arc::new(self.family.pair_matrix(ratio, &off));
        self.map.write().expect("gram cache").entry(key).or_insert(v).clone()
    }
}
