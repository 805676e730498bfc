//! Slope limiters for the MUSCL reconstruction, selectable by name.
//!
//! Every limiter here is symmetric, `limit(a, b) == limit(b, a)`, and odd,
//! `limit(-a, -b) == -limit(a, b)`. Mass conservation of the specular wall
//! relies on both.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub trait SlopeLimiter: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    /// Limited slope from the backward difference `a` and forward difference `b`.
    fn limit(&self, a: f64, b: f64) -> f64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct VanLeer;

impl SlopeLimiter for VanLeer {
    fn name(&self) -> &'static str {
        "van_leer"
    }

    #[inline]
    fn limit(&self, a: f64, b: f64) -> f64 {
        let ab = a * b;
        if ab > 0.0 {
            2.0 * ab / (a + b)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Minmod;

impl SlopeLimiter for Minmod {
    fn name(&self) -> &'static str {
        "minmod"
    }

    #[inline]
    fn limit(&self, a: f64, b: f64) -> f64 {
        if a * b > 0.0 {
            a.signum() * a.abs().min(b.abs())
        } else {
            0.0
        }
    }
}

/// Monotonized central.
#[derive(Debug, Default, Clone, Copy)]
pub struct MonotonizedCentral;

impl SlopeLimiter for MonotonizedCentral {
    fn name(&self) -> &'static str {
        "mc"
    }

    #[inline]
    fn limit(&self, a: f64, b: f64) -> f64 {
        if a * b > 0.0 {
            let m = (2.0 * a.abs()).min(2.0 * b.abs()).min(0.5 * (a + b).abs());
            a.signum() * m
        } else {
            0.0
        }
    }
}

/// First-order upwind: no slope at all.
#[derive(Debug, Default, Clone, Copy)]
pub struct FirstOrder;

impl SlopeLimiter for FirstOrder {
    fn name(&self) -> &'static str {
        "first_order"
    }

    #[inline]
    fn limit(&self, _a: f64, _b: f64) -> f64 {
        0.0
    }
}

pub struct LimiterRegistry {
    entries: BTreeMap<&'static str, Arc<dyn SlopeLimiter>>,
}

impl Default for LimiterRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Arc::new(VanLeer));
        r.register(Arc::new(Minmod));
        r.register(Arc::new(MonotonizedCentral));
        r.register(Arc::new(FirstOrder));
        r
    }
}

impl LimiterRegistry {
    pub fn register(&mut self, limiter: Arc<dyn SlopeLimiter>) {
        self.entries.insert(limiter.name(), limiter);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SlopeLimiter>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: "slope limiter",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }
}
