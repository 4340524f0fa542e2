//! Writes a self-contained demo directory for the `gridrisk` command-line
//! walkthrough: a 3-bus system, five synthetic "years" of hourly history
//! (one week each) and a run configuration.
//!
//! ```bash
//! cargo run --example make_demo_data -- demo
//! gridrisk --config demo/gridrisk.json generate-scenarios
//! gridrisk --config demo/gridrisk.json assess
//! gridrisk --config demo/gridrisk.json mitigate
//! gridrisk --config demo/gridrisk.json report
//! ```

use std::path::PathBuf;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("demo"));
    std::fs::create_dir_all(&dir).expect("create demo dir");

    let system = r#"{
  "buses": ["A", "B", "C"],
  "slack_bus": "A",
  "dt": 1.0,
  "cost_emergency": 1000.0,
  "tpg": [
    {"id": "tpg1", "bus": "A", "p_min": 20.0, "p_max": 150.0,
     "ramp_up": 60.0, "ramp_down": 60.0, "min_on": 2, "min_off": 2,
     "cost_energy": 30.0, "cost_startup": 500.0, "cost_shutdown": 200.0},
    {"id": "tpg2", "bus": "B", "p_min": 10.0, "p_max": 100.0,
     "ramp_up": 50.0, "ramp_down": 50.0, "min_on": 2, "min_off": 2,
     "cost_energy": 45.0, "cost_startup": 300.0, "cost_shutdown": 150.0}
  ],
  "re": [
    {"id": "wind1", "bus": "C", "kind": "wind", "capacity": 120.0},
    {"id": "pv1", "bus": "A", "kind": "pv", "capacity": 80.0}
  ],
  "ses": [
    {"id": "ses1", "bus": "C", "p_cap": 80.0, "e_cap": 800.0,
     "soc_lo_frac": 0.1, "soc_hi_frac": 0.9, "eta_ch": 0.85, "eta_dc": 0.85,
     "e_init": 400.0, "cost_throughput": 5.0}
  ],
  "dr": [
    {"id": "dr1", "bus": "B", "p_cap": 30.0, "cost": 120.0}
  ],
  "loads": [
    {"id": "load1", "bus": "B"}
  ],
  "lines": [
    {"id": "AB", "from_bus": "A", "to_bus": "B", "reactance": 0.2, "flow_cap": 400.0},
    {"id": "BC", "from_bus": "B", "to_bus": "C", "reactance": 0.25, "flow_cap": 400.0},
    {"id": "AC", "from_bus": "A", "to_bus": "C", "reactance": 0.3, "flow_cap": 400.0}
  ]
}"#;
    std::fs::write(dir.join("system.json"), system).expect("write system");

    // Heavier loads than the workably-sized thermal fleet can always cover:
    // low-wind evening peaks leave occasional shortfalls for the risk stage.
    let tau = std::f64::consts::TAU;
    let horizon = 168;
    let mut csv = String::from("scenario_id,series_id,period,value_mw\n");
    for year in 0..5usize {
        let phase = year as f64 * 0.9;
        let windiness = 0.55 - 0.14 * (year as f64 * 1.3).sin();
        for t in 0..horizon {
            let tf = t as f64;
            let wind = (120.0
                * (windiness
                    + 0.25 * (tau * tf / 37.0 + phase).sin()
                    + 0.18 * (tau * tf / 11.0 + 2.3 * phase).sin()))
            .clamp(0.0, 120.0);
            csv.push_str(&format!("{year},wind1,{t},{wind}\n"));
        }
        for t in 0..horizon {
            let tf = t as f64;
            let hour = (t % 24) as f64;
            let daylight = ((hour - 6.0) * std::f64::consts::PI / 12.0).sin().max(0.0);
            let pv = (80.0 * daylight * (0.72 + 0.25 * (tau * tf / 168.0 + phase).sin()))
                .clamp(0.0, 80.0);
            csv.push_str(&format!("{year},pv1,{t},{pv}\n"));
        }
        for t in 0..horizon {
            let tf = t as f64;
            let hour = (t % 24) as f64;
            let diurnal = 1.0 + 0.35 * ((hour - 18.0) * tau / 24.0).cos();
            let weekly = 1.0 + 0.08 * (tau * tf / 168.0 + 0.5 * phase).sin();
            let load = (240.0 * diurnal * weekly + 15.0 * (tau * tf / 29.0 + phase).sin()).max(0.0);
            csv.push_str(&format!("{year},load1,{t},{load}\n"));
        }
    }
    std::fs::write(dir.join("history.csv"), csv).expect("write history");

    let config = r#"{
  "system": "system.json",
  "history": "history.csv",
  "out_dir": "out",
  "n_rep": 20,
  "block_len": 24,
  "seed": 42,
  "alpha": 0.8,
  "threshold": 5000.0,
  "delta_r": 4,
  "omega_rt": 10.0,
  "gap_tol": 1e-6,
  "max_iter": 20,
  "jobs": 0
}"#;
    std::fs::write(dir.join("gridrisk.json"), config).expect("write config");

    println!(
        "wrote {}/system.json, history.csv, gridrisk.json",
        dir.display()
    );
    println!(
        "next: gridrisk --config {}/gridrisk.json generate-scenarios",
        dir.display()
    );
}
