//! Cook's membrane: the classical tapered quadrilateral, with clamp and
//! traction extents expressed as parametric spans so sampled geometry
//! variations re-tag boundary edges without moving nodes.

use super::CornerMap;
use crate::error::{Error, Result};
use alloc::format;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CookGeometry {
    /// Corner coordinates, parametric order (0,0), (1,0), (1,1), (0,1).
    pub corners: [[f64; 2]; 4],
    /// Clamped span on the left edge, in the edge's [0,1] parameter.
    pub clamp_span: [f64; 2],
    /// Traction span on the right edge, in the edge's [0,1] parameter.
    pub traction_span: [f64; 2],
}

impl CookGeometry {
    /// The classical 48 x (44,60) Cook taper, fully clamped left edge,
    /// traction over the whole right edge.
    pub fn standard() -> Self {
        CookGeometry {
            corners: [[0.0, 0.0], [48.0, 44.0], [48.0, 60.0], [0.0, 44.0]],
            clamp_span: [0.0, 1.0],
            traction_span: [0.0, 1.0],
        }
    }

    pub fn corner_map(&self) -> CornerMap {
        CornerMap { corners: self.corners }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, span) in [("clamp", self.clamp_span), ("traction", self.traction_span)] {
            if !(0.0..=1.0).contains(&span[0]) || !(0.0..=1.0).contains(&span[1]) || span[0] >= span[1]
            {
                return Err(Error::Invalid(format!(
                    "{name} span {span:?} must satisfy 0 <= a < b <= 1"
                )));
            }
        }
        Ok(())
    }

    /// Physical endpoints of the clamped segment on the left edge.
    pub fn clamp_segment(&self) -> ([f64; 2], [f64; 2]) {
        let m = self.corner_map();
        (m.map(0.0, self.clamp_span[0]), m.map(0.0, self.clamp_span[1]))
    }
}
