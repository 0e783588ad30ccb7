//! Link-level modeling for phase-quantized reconfigurable surfaces: codebook
//! design, received-power sweeps, switching-channel stationarity, power
//! consumption fits and an impedance model with mutual coupling.
//!
//! ```
//! use ris_forge::prelude::*;
//!
//! // Far transmitter: the plane-wave design is accurate here.
//! let scene = SceneGeometry::hardware_default().with_tx_at(&Angle::new(0.0, 270.0)?, 3.6)?;
//! let spec = BeamSpec::single(Angle::new(0.0, 270.0)?, Angle::new(30.0, 0.0)?);
//! let cw = quantize(&design_single_beam(&spec, &scene.array)?, 2)?;
//! let focused = received_power(&scene, &cw)?;
//! let plate = received_power(&scene, &Codeword::uniform(16, 16, 2, 0)?)?;
//! assert!(focused > plate);
//! # Ok::<(), ris_forge::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod coupling;
pub mod error;
pub mod field;
pub mod geometry;
pub mod power;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::codebook::{
        design_multi_beam, design_single_beam, pack, quantize, similarity, unpack, BeamSpec, Codeword,
        ContinuousCodeword,
    };
    pub use crate::field::{angle_spectrum, beam_metrics, beamwidth, received_power, AngleSpectrum, BeamMetrics};
    pub use crate::geometry::{Angle, ArrayConfig, Position, SceneGeometry};
    pub use crate::Error;
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/codebook.md")]
    mod codebook {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/power.md")]
    mod power {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
