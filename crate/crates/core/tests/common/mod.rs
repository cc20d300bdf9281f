#![allow(dead_code)]

use algebroid::{chartfile, RiemannianAlgebroid};

/// Heisenberg-type chart with a varying bracket and a metric that couples
/// the kernel of the anchor to its complement, so the split moves with x.
pub const TILTED: &str = "\
[algebroid]
n = 2
r = 3
domain = -1, 1; -1, 1
b = 1, 0; 0, 1; 0, 0
C 1,2,3 = 1 + 0.5*x1

[metric]
g 1,1 = 1
g 1,2 = 0.2*sin(x2)
g 1,3 = 0.3*x1
g 2,2 = 1.5
g 2,3 = 0.1*cos(x1)
g 3,3 = 1 + 0.2*x2^2
";

/// Tangent bundle of the plane in a non-holonomic frame, `a2 = x1 d1 + d2`,
/// with a non-constant metric.
pub const WARPED_PLANE: &str = "\
[algebroid]
n = 2
r = 2
domain = -1, 1; -1, 1
b = 1, 0; x1, 1
C 1,2,1 = 1

[metric]
g 1,1 = exp(0.3*x2)
g 1,2 = 0.1*x1*x2
g 2,2 = 1 + 0.25*sin(x1)^2
";

pub fn tilted() -> RiemannianAlgebroid {
    chartfile::parse(TILTED).unwrap()
}

pub fn warped_plane() -> RiemannianAlgebroid {
    chartfile::parse(WARPED_PLANE).unwrap()
}
