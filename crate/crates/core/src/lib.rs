//! Numerical Teichmüller theory on the four-punctured sphere.
//!
//! Beltrami equations are solved on a periodic grid ([`beltrami`]), caps are
//! sewn onto bordered spheres ([`sewing`]), Schiffer variations are computed
//! from a vector field on an annulus ([`schiffer`]), and the fiber maps between
//! riggings and moduli are in [`fibration`]. [`experiment`] drives batch runs.

pub mod error;
pub mod grid;
pub mod sphere;
pub mod transforms;

pub use error::{Error, Result};
pub mod beltrami;
pub mod oqc;
pub mod series;
pub mod surfaces;
pub mod extension;
pub mod sewing;
pub mod schiffer;
pub mod fibration;
pub mod svg;
pub mod experiment;
