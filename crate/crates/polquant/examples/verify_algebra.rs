//! Run the Weyl-algebra invariant suite: Hodge decompositions, vanishing
//! squares, star associativity, the flat Leibniz rule, the fibrewise module
//! identity and the commutator–action bridge.
//!
//! ```sh
//! cargo run --release --example verify_algebra
//! ```

use polquant::config::ConfigDocument;
use polquant::run::run_verify_algebra;

fn main() {
    let cfg = ConfigDocument::default();
    let summary = run_verify_algebra(&cfg).expect("suite runs");
    summary.print();
    assert!(summary.all_passed());
}
