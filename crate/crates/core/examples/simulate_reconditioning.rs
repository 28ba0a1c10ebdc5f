//! Simulate the abbreviated aging + reconditioning chain for the reference
//! cell and report per-cycle capacities and the sub-cell lithium imbalance
//! around each voltage hold.
//!
//! Run with `cargo run --release --example simulate_reconditioning`.

use battkit::ecm::{EcmParameters, EcmState};
use battkit::protocol::{extract_cycle_capacities, run_protocol, IntegrationSettings, Protocol};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let params = EcmParameters::from_file(format!("{data}/params/cell72.params"))?;
    let protocol = Protocol::from_file(format!("{data}/protocols/age_recondition_last3.protocol"))?;
    let state = EcmState::new(params.z0, 0.0)?;
    let settings = IntegrationSettings::default();

    let t0 = std::time::Instant::now();
    let trace = run_protocol(&params, &state, &protocol, &settings)?;
    eprintln!(
        "simulated {} rows in {:.1} s (clip events: {})",
        trace.rows.len(),
        t0.elapsed().as_secs_f64(),
        trace.clip_count
    );

    println!("cycle  charge_Ah  discharge_Ah");
    for c in extract_cycle_capacities(&trace) {
        println!(
            "{:>5}  {:>9}  {:>12}",
            c.cycle_index,
            c.charge_ah.map_or("-".into(), |q| format!("{q:.4}")),
            c.discharge_ah.map_or("-".into(), |q| format!("{q:.4}")),
        );
    }

    // lithium imbalance at the hold boundaries
    for label in ["hold_hi", "hold_lo"] {
        let rows: Vec<_> = trace
            .rows
            .iter()
            .filter(|r| r.step_label.as_ref() == label)
            .collect();
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            let d0 = (first.n1_ah - first.n2_ah).abs();
            let d1 = (last.n1_ah - last.n2_ah).abs();
            println!(
                "{label}: |N1-N2| {d0:.4} -> {d1:.4} Ah ({:.0}% of start), final |i_e| = {:.2e} A",
                100.0 * d1 / d0,
                last.i_bridge.abs()
            );
        }
    }

    let (n1, n2) = {
        let last = trace.rows.last().unwrap();
        (last.n1_ah, last.n2_ah)
    };
    let first = trace.rows.first().unwrap();
    println!(
        "total lithium drift: {:.3e} Ah",
        (n1 + n2) - (first.n1_ah + first.n2_ah)
    );
    Ok(())
}
