pub mod construction;
pub mod fixed_point;
pub mod grid;
pub mod labeling;
pub mod mapspec;
pub mod render;
pub mod scalar;
pub mod simplex;
pub mod sperner;

pub use construction::{roundtrip_check, ConstructionError, RoundTripOptions, RoundTripReport, VertexMap};
pub use fixed_point::{
    approx_fixed_point, refine_fixed_point, FixedPointError, FixedPointResult, FixedPointStatus, Modulus,
    RefineOptions,
};
pub use grid::{GridError, Location, SubdivisionGrid};
pub use labeling::{Labeling, LabelError};
pub use mapspec::{parse_map, MapError, MapSpec, SimplexMap};
pub use scalar::{Rational, Scalar};
pub use simplex::{make_point, BarycentricPoint, PointError};
pub use sperner::{find_fully_labeled, SpernerError, Strategy};
pub use render::{render_svg, RenderError, RenderOptions};
