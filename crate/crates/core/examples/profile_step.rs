//! Scratch timing breakdown of the integrator pieces.
use qcselect_core::linalg::{self, CMatrix, C64};
use qcselect_core::operators::*;
use qcselect_core::quantum::*;
use std::time::Instant;

fn main() {
    let n = 60;
    let dim = FockDim::new(n).unwrap();
    let params = DuffingParams::reference();
    let dt = 2.0 * std::f64::consts::PI / 1000.0;

    let h = build_static_hamiltonian_shifted(dim, &params, 0.3, 0.1);
    let (ls, etas) = build_lindblads_shifted(dim, &params, 0.3, 0.1);

    // expm timing
    let a = h.matrix() * C64::new(0.0, 1.0);
    let t0 = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        let _ = linalg::expm(&(&a * C64::new(-dt, 0.0)));
    }
    println!("expm({n}): {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // gemm timing
    let rho = thermal_state(dim, 1.0);
    let mut out = CMatrix::zeros(n, n);
    let t0 = Instant::now();
    let reps = 2000;
    for _ in 0..reps {
        linalg::gemm_into(h.matrix(), rho.matrix(), &mut out);
    }
    println!("gemm_into({n}): {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);
    let t0 = Instant::now();
    for _ in 0..reps {
        linalg::gemm_adjoint_into(h.matrix(), rho.matrix(), &mut out);
    }
    println!("gemm_adjoint_into({n}): {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // full propagator apply
    let mut prop = RouchonPropagator::new(&h, ls, etas, dt).unwrap();
    let mut rho_m = thermal_state(dim, 1.0).matrix().clone();
    let t0 = Instant::now();
    let reps = 2000;
    for i in 0..reps {
        prop.apply(&mut rho_m, 0.01, i, None).unwrap();
    }
    println!("propagator.apply({n}): {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // recenter cost (displacement expm + 2 gemms + frame rebuild)
    let mut filter = QuantumFilter::new(&params, dim, dt, QuantumFilterOptions::default()).unwrap();
    let t0 = Instant::now();
    let reps = 30;
    for i in 0..reps {
        let s = if i % 2 == 0 { 0.3 } else { -0.3 };
        filter.recenter(s, 0.0).unwrap();
    }
    println!("recenter({n}): {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);
}
