//! Level-set geometry, closest-point projection and surrogate-boundary data.

mod levelset;
mod manufactured;
mod surrogate;

pub use levelset::{
    closest_point_projection, newton_projection, point_from, Ball, LevelSet, Point, UnionOfBalls,
};
pub use manufactured::{manufactured_poisson_2d, Manufactured};
pub use surrogate::{
    face_reference_points, precompute_surrogate_data, SurrogateFaceData, SurrogatePoint,
};
