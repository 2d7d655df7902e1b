//! Real-coefficient LTI building blocks.

mod discrete;
mod poly;
mod roots;
mod tf;

pub use discrete::{discretize_bilinear, Biquad, ChainFilter, DiscreteBiquadChain};
pub use poly::Polynomial;
pub use tf::{is_hurwitz, is_hurwitz_roots, is_hurwitz_routh, RationalTF};
