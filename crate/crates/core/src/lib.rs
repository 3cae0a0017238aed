//! Möbius flows of Herglotz functions and numerical spectral averaging.

pub mod averaging;
pub mod classify;
pub mod contour;
pub mod error;
pub mod fixtures;
pub mod herglotz;
pub mod measure;
pub mod quad;
pub mod rankone;
pub mod report;
pub mod sl2;
pub mod suite;
pub mod winding;

pub use error::{Error, Result};
pub use num_complex::Complex64;
