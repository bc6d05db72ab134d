//! The four protocols: deterministic UMIS with identifiers, probabilistic
//! UMIS via growing bit-string identifiers, probabilistic local naming, and
//! deterministic UMIS over locally-named networks plus its fair composition
//! with the naming layer.

use thiserror::Error;

pub mod det;
pub mod local_umis;
pub mod naming;
pub mod prefix;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("identifier list must assign one unique identifier per process")]
    BadIdentifiers,
    #[error("naming constant k must be at least 2")]
    BadNamingConstant,
    #[error("process {process} shares an identifier with one of its ancestors")]
    NotLocallyNamed { process: usize },
}

/// Bits needed to write `x` in binary; at least 1.
pub(crate) fn significant_bits(x: u64) -> usize {
    (64 - x.leading_zeros()).max(1) as usize
}
