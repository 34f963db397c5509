//! Runs a bundled scenario (default: noneffective_mu03) and prints its verification records.
//!
//!     cargo run --release --example scenario_runner -- matsumura_unit_damping

use wavelab::cli::{catalog, run_text, RunOptions};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "noneffective_mu03".into());
    let Some(text) = catalog::find(&name) else {
        eprintln!("unknown scenario {name}; bundled:");
        for (n, _) in catalog::BUNDLED {
            eprintln!("  {n}");
        }
        std::process::exit(2);
    };
    let out = std::env::temp_dir().join(format!("wavelab_{name}"));
    let opts = RunOptions {
        out: out.clone(),
        ..Default::default()
    };
    match run_text(text, &opts) {
        Ok(report) => {
            for v in &report.verifications {
                println!("{:<20} predicted {:.4} fitted {:.4} pass {}", v.theorem_id.as_str(), v.predicted, v.fitted, v.pass);
            }
            for c in &report.checks {
                println!("{:<36} {:.4e} {} {:.1e} pass {}", c.name, c.value, c.relation, c.threshold, c.pass);
            }
            println!("outputs in {}", out.display());
            std::process::exit(report.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
