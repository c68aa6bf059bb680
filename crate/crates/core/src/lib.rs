//! Online minimum-cost metric matching with recourse.
//!
//! The crate provides:
//! - finite metric spaces (line, general table, 2-HSTs) in [`metric`],
//! - an exact offline min-cost matching solver plus a brute-force oracle in [`matching`],
//! - the online algorithms: [`permutation`], [`batchperm`], the line-metric
//!   pair [`line`] (farthest-server and the recursive-cancel reference), and
//!   the fully dynamic tree algorithm in [`hst`],
//! - hard-instance generators and the adaptive star adversary in [`adversary`],
//! - an event-driven run harness with CSV/JSONL traces in [`harness`].

pub mod adversary;
pub mod batchperm;
pub mod harness;
pub mod hst;
pub mod line;
pub mod matching;
pub mod metric;
pub mod permutation;

use std::fmt;

/// Index of a point in the owning metric space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u32);

impl PointId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Scalar cost type shared by the solver and the online algorithms.
///
/// Line metrics use `i64` so every competitive-ratio comparison is exact;
/// general metrics and tree embeddings use `f64` with a relative tolerance
/// in comparisons.
pub trait Cost:
    Copy
    + PartialOrd
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    /// Sentinel larger than any cost arising from a valid instance.
    const INF: Self;

    fn to_f64(self) -> f64;

    /// Equality as used in oracle comparisons: exact for integers,
    /// 1e-9 relative for floats.
    fn approx_eq(self, other: Self) -> bool;

    fn approx_le(self, other: Self) -> bool {
        self <= other || self.approx_eq(other)
    }
}

impl Cost for i64 {
    const ZERO: i64 = 0;
    const INF: i64 = i64::MAX / 4;

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn approx_eq(self, other: i64) -> bool {
        self == other
    }
}

pub const REL_TOL: f64 = 1e-9;

impl Cost for f64 {
    const ZERO: f64 = 0.0;
    const INF: f64 = f64::INFINITY;

    fn to_f64(self) -> f64 {
        self
    }

    fn approx_eq(self, other: f64) -> bool {
        let scale = 1.0_f64.max(self.abs()).max(other.abs());
        (self - other).abs() <= REL_TOL * scale
    }
}
