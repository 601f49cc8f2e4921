//! 3-D geometry kernels on binary masks.

pub mod branches;
pub mod components;
pub mod edt;
pub mod thinning;

pub use branches::{extract_branches, Branch, SkeletonGraph, SkeletonNode};
pub use components::{connected_components, Connectivity, Labeling};
pub use edt::{edt, squared_edt, DistanceField};
pub use thinning::{is_simple_point, skeletonize};
