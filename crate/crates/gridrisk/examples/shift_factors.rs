//! DC shift factors on a small triangle network: injections at any bus map
//! linearly to line flows relative to the slack.
//!
//! ```bash
//! cargo run --example shift_factors
//! ```

use gridrisk::system::{compute_shift_factors, validate_system, PowerSystem, TransmissionLine};

fn main() {
    let sys = PowerSystem {
        bus_ids: vec!["north".into(), "east".into(), "south".into()],
        slack_bus: Some(2),
        tpg: Vec::new(),
        re: Vec::new(),
        ses: Vec::new(),
        dr: Vec::new(),
        loads: Vec::new(),
        lines: vec![
            TransmissionLine {
                id: "north-east".into(),
                from_bus: 0,
                to_bus: 1,
                reactance: 0.2,
                flow_cap: 300.0,
            },
            TransmissionLine {
                id: "east-south".into(),
                from_bus: 1,
                to_bus: 2,
                reactance: 0.2,
                flow_cap: 300.0,
            },
            TransmissionLine {
                id: "north-south".into(),
                from_bus: 0,
                to_bus: 2,
                reactance: 0.2,
                flow_cap: 300.0,
            },
        ],
        cost_emergency: 1000.0,
        dt: 1.0,
    };
    let sys = validate_system(sys).expect("valid system");
    let sf = compute_shift_factors(&sys).expect("connected network");

    println!("shift factors (MW on line per MW injected at bus, slack = south):");
    print!("{:<14}", "line \\ bus");
    for bus in &sys.bus_ids {
        print!("{bus:>10}");
    }
    println!();
    for (li, line) in sys.lines.iter().enumerate() {
        print!("{:<14}", line.id);
        for b in 0..sys.bus_ids.len() {
            print!("{:>10.4}", sf.factors[li][b]);
        }
        println!();
    }

    // 90 MW injected at north, withdrawn at the slack: 2/3 takes the direct
    // line, 1/3 the detour.
    let flows = sf.flows(&[90.0, 0.0, 0.0]);
    println!("\nflows for 90 MW injected at north:");
    for (line, flow) in sys.lines.iter().zip(&flows) {
        println!("  {:<12} {:>8.2} MW", line.id, flow);
    }
}
