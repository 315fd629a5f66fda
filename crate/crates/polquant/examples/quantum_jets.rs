//! Lift functions on the torus to their D-flat quantum jets, compare the
//! iterative solver with the closed-form torus oracle, and inspect the
//! double-weight components.
//!
//! ```sh
//! cargo run --release --example quantum_jets
//! ```

use polquant::fedosov::{quantum_jet, quantum_jet_torus_closed, HbarPoly};
use polquant::trig::TrigPoly;
use polquant::weyl::{Geometry, Truncation};

fn main() {
    let geom = Geometry::torus(1);
    let trunc = Truncation::new(4, 2);

    for (label, f) in [
        ("e^{2pi i y}", TrigPoly::unit_mode_1d(0, 1)),
        ("e^{2pi i x}", TrigPoly::unit_mode_1d(1, 0)),
        ("e^{2pi i (x+y)}", TrigPoly::unit_mode_1d(1, 1)),
    ] {
        let f = HbarPoly::from_trig(f);
        let jet = quantum_jet(&f, &geom, trunc).expect("solver converges");
        let oracle = quantum_jet_torus_closed(&f, &geom, trunc).expect("torus oracle");
        println!("f = {label}");
        println!("J_f (total weight <= {}):", trunc.max_total_weight);
        print!("{}", jet.jet);
        println!("D-flatness residual: {:.3e}", jet.residual_norm);
        println!("closed-form oracle delta: {:.3e}", jet.jet.distance(&oracle));
        // the (r, 0) double-weight components drive the quantizability test
        for r in 0..=2 {
            let comp = jet.jet.double_weight_component(r, 0);
            println!("  (r={r}, l=0) component max |coeff| = {:.4}", comp.max_coeff_norm());
        }
        println!();
    }
}
