//! Shared fixtures for the pipeline benchmarks.

use spatel::grid::{GridConfig, OccupancyMatrix};
use spatel::logic::{parse, SpatelFormula};

/// Fig. 2's 4x4 matrix.
pub fn fig2_occupancy() -> OccupancyMatrix {
    OccupancyMatrix::from_rows(&[
        vec![3, 4, 1, 1],
        vec![0, 0, 2, 3],
        vec![0, 0, 0, 0],
        vec![1, 1, 0, 0],
    ])
    .unwrap()
}

/// The alternating-checkerboard specification over a 4x4 grid.
pub fn checkerboard_formula() -> SpatelFormula {
    parse(
        "G[0,2) (F[0,4) (A[L] O (A[NW,SE] O (mu <= 0))) & F[0,4) (A[L] O (A[NE,SW] O (mu <= 0))))",
    )
    .unwrap()
}

/// A 2x2 meeting problem small enough to solve inside a benchmark
/// iteration.
pub fn tiny_grid() -> (GridConfig, OccupancyMatrix, SpatelFormula) {
    let cfg = GridConfig {
        depth: 1,
        side_length: 4.0,
        robot_count: 2,
        max_speed: 4.0,
        step: 1.0,
        allow_deep_grid: false,
    };
    let n0 = OccupancyMatrix::from_rows(&[vec![2, 0], vec![0, 0]]).unwrap();
    let phi = parse("F[0,3) (A[SE] O (mu >= 2))").unwrap();
    (cfg, n0, phi)
}
