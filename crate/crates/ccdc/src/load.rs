//! Exact rational communication loads.
//!
//! Every load in this crate is a reduced fraction of non-negative integers.
//! Floating point shows up only when pretty-printing; equality checks are
//! always exact.

use num_rational::Ratio;

/// A communication load: total broadcast bits normalized by `J*Q*T`.
pub type Load = Ratio<u64>;

/// Build a reduced load from a bit count and its normalizer.
pub fn load(numer: u64, denom: u64) -> Load {
    Load::new(numer, denom)
}

/// Zero load.
pub fn zero() -> Load {
    Load::from_integer(0)
}

/// Render `num/den` (or just `num` when integral).
pub fn display(l: Load) -> String {
    if l.is_integer() {
        l.to_integer().to_string()
    } else {
        format!("{}/{}", l.numer(), l.denom())
    }
}

/// Decimal approximation for tables; never used in comparisons.
pub fn approx(l: Load) -> f64 {
    *l.numer() as f64 / *l.denom() as f64
}
