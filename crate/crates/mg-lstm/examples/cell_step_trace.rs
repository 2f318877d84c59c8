//! Step a small cell by hand and look at the per-step trace: the input
//! network z, the gates, and the L1 drive split between the recurrent path
//! W_h h and the data path W_y y.
//!
//!     cargo run --release --example cell_step_trace

use mg_lstm::{step, CounterRng, LstmParams, LstmState};

fn main() {
    let n = 4;
    let mut rng = CounterRng::new(3);
    let params = LstmParams::init_uniform(n, 0.5, &mut rng);

    let mut state = LstmState::zeros(n);
    println!("step |  y_in   y_hat  |W_h h|_1  |W_y y|_1  gates (i o f) of cell 0");
    for t in 0..12 {
        let y = (0.37 * t as f64).sin() * 0.5;
        let (next, y_hat, trace) = step(&params, &state, y);
        let (rec, data) = trace.l1_contribution();
        println!(
            "{t:>4} | {y:>6.3}  {y_hat:>6.3}   {rec:>8.4}  {data:>8.4}   {:.3} {:.3} {:.3}",
            trace.gate_i[0], trace.gate_o[0], trace.gate_f[0]
        );
        state = next;
    }

    // From the zero state the recurrent drive is exactly zero; it builds up
    // as the state fills in.
    let (_, _, first) = step(&params, &LstmState::zeros(n), 0.25);
    assert_eq!(first.l1_contribution().0, 0.0);
    println!("\nzero state -> |W_h h|_1 = 0, as it must be");
}
