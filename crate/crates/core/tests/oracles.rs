mod common;

use mimicry_core::grid::Grid;
use mimicry_core::potential::SoftCoulomb;

#[test]
fn split_step_matches_dense_exponential() {
    let grid = Grid::centered(8.0, 64).unwrap();
    let err = common::closed_oracle_error(grid, SoftCoulomb::argon(), 0.001, 100);
    assert!(err <= 1e-8, "state error {err:.3e}");
}

#[test]
fn split_step_error_is_third_order_per_step() {
    let grid = Grid::centered(8.0, 64).unwrap();
    let coarse = common::closed_oracle_error(grid, SoftCoulomb::argon(), 0.004, 25);
    let fine = common::closed_oracle_error(grid, SoftCoulomb::argon(), 0.002, 50);
    let ratio = coarse / fine;
    assert!((3.0..5.5).contains(&ratio), "ratio {ratio:.2}");
}

#[test]
fn open_stepper_matches_dense_liouvillian() {
    let grid = Grid::centered(8.0, 64).unwrap();
    let err = common::open_oracle_error(grid, SoftCoulomb::argon(), 0.005, 0.01, 0.001, 50);
    assert!(err <= 1e-7, "density matrix error {err:.3e}");
}
