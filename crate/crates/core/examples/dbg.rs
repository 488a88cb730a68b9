use std::time::Instant;
use twistbeam::decomposition::{decompose, InitialState, QuadSpec, Truncation};
use twistbeam::envelope::{solve_ermakov, StepControl};
use twistbeam::lgbasis::BasisConvention;
use twistbeam::oracle::{l2_distance, oracle_propagate, OracleConfig, OracleStep};
use twistbeam::propagation::{synthesize, GridSpec};

fn glaser_omega(z: f64) -> f64 { 2.0 * 16.0 / (16.0 + (z - 15.0) * (z - 15.0)) }

fn main() {
    let conv = BasisConvention::default();
    let sign = -1.0;
    // criterion 6 full-span validation
    let env = solve_ermakov(glaser_omega, 1.0, 0.0, (0.0, 30.0), StepControl::default(), sign).unwrap();
    let (_, bmax) = env.b_range();
    let spec = decompose(&InitialState::pure(0, 1), &conv, &Truncation::around(1), &QuadSpec::default()).unwrap();
    let rho_max = 7.4 * bmax;
    let n_rho = (rho_max / 8.8e-4).ceil() as usize;
    let cfg = OracleConfig {
        l_min: 1, l_max: 1, rho_max, n_rho,
        step: OracleStep::Fixed(2.0e-4),
        n_phi: 64, radial_stride: 16, boundary_limit: 1e-6, angular_order: 64,
    };
    println!("c6: rho_max {rho_max:.1}, n_rho {n_rho}, dz 2e-4");
    let t0 = Instant::now();
    let grids = oracle_propagate(&InitialState::pure(0, 1), &conv, glaser_omega, sign,
        (0.0, 30.0), &[15.0, 30.0], &cfg).unwrap();
    let elapsed = t0.elapsed();
    for g in &grids {
        let gs = GridSpec::with_grids(g.rho.clone(), g.phi.clone());
        let ana = synthesize(&spec, &conv, &env, g.z, &gs).unwrap();
        println!("  d(z={}) = {:.3e}", g.z, l2_distance(&ana.total, g).unwrap());
    }
    println!("c6 oracle time: {elapsed:?}");
}
