//! LDPC syndrome coding: sparse matrices, alist I/O, PEG construction and
//! sum-product decoding.

mod alist;
mod codeset;
mod decoder;
mod matrix;
pub mod peg;

pub use alist::{format_alist, load_alist, parse_alist, save_alist};
pub use codeset::{BlindCode, CodeSet, CodeSetSpec, DistributionLibrary, MANIFEST};
pub use decoder::{
    bsc_llr, DecodeOutcome, SoftDecoderState, SumProductDecoder, DEFAULT_MAX_ITERATIONS,
    DEFAULT_SATURATION,
};
pub use matrix::ParityCheckMatrix;
pub use peg::{peg_construct, DegreeDistribution, PegBuilder};

/// Decodes with a fresh [`SumProductDecoder`] limited to `max_iterations`.
pub fn spa_decode<T: crate::Real>(
    h: &ParityCheckMatrix,
    llr: &[T],
    target: &crate::BitFrame,
    max_iterations: usize,
) -> crate::Result<DecodeOutcome<T>> {
    SumProductDecoder::new(max_iterations).decode(h, llr, target)
}
