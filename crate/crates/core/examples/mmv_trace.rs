//! Step a hand-built two-neuron MMV network and print its state.
//!
//! Neuron 0 counts three input spikes before firing; neuron 1 is excited by
//! neuron 0 (one step later) and fires on every such spike. A second input
//! line inhibits neuron 0.
//!
//! ```text
//! cargo run --example mmv_trace
//! ```

use thermal_gesture::mmv::{MmvNetwork, Readout, Synapse, TernaryConnectivity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut conn = TernaryConnectivity::empty(2, 2);
    conn.set_input(0, 0, Synapse::Exc);
    conn.set_input(1, 0, Synapse::Inh);
    conn.set_recurrent(0, 1, Synapse::Exc);
    let net = MmvNetwork::new(conn, vec![3, 1], Readout::zeros(2, 2))?;

    // channel 0 spikes every step; channel 1 inhibits during steps 4..6
    let inputs: Vec<[u8; 2]> = (0..12)
        .map(|t| [1, u8::from((4..6).contains(&t))])
        .collect();

    let mut state = net.fresh_state();
    println!("step  in   counters   triggered      out");
    let mut totals = [0u32; 2];
    for (t, x) in inputs.iter().enumerate() {
        let out = net.step(&mut state, x)?.to_vec();
        for (c, &o) in totals.iter_mut().zip(&out) {
            *c += u32::from(o);
        }
        println!(
            "{t:>4}  {}{}   {:?}   {:?}   {:?}",
            x[0],
            x[1],
            state.counters(),
            state.triggered(),
            out
        );
    }
    println!("spike counts {totals:?}");
    Ok(())
}
