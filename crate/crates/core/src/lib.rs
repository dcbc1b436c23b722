//! Divergences of quantum states and channels, relative majorization of
//! dichotomies, and a randomized harness for checking divergence axioms.

pub mod channel_div;
pub mod channels;
pub mod classical;
pub mod error;
pub mod geometric;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod majorization;
pub mod random;
pub mod state;
pub mod value;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/classical.md")]
    mod classical {}
    #[doc = include_str!("../../../book/src/majorization.md")]
    mod majorization {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/channel-divergences.md")]
    mod channel_divergences {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
