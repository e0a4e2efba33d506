//! Diffractional channel coding (DCC) over two-layer reconfigurable
//! intelligent surfaces.
//!
//! The propagation matrix between two parallel meta-atom layers acts as the
//! generator matrix of a complex-valued code. This crate builds those
//! matrices from geometry, encodes and decodes block and trellis codes,
//! searches geometries for large minimum distance and measures bit error
//! rates against classical Hamming and convolutional baselines.

pub mod baseline;
pub mod channel;
pub mod codec_block;
pub mod codec_trellis;
pub mod detect;
pub mod links;
pub mod diffraction;
pub mod geometry;
pub mod modem;
pub mod optimizer;
