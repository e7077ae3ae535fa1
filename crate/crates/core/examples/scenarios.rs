//! The three renewable-expansion counterfactuals, priced with the known
//! synthetic cost function, plus the demand-drop equivalence.
//!
//! cargo run --release --example scenarios

use redispatch::net_demand::build_panel;
use redispatch::scenarios::{renewable_equivalence, run_scenario_with, ScenarioKind, ScenarioSpec};
use redispatch::splits::DateRange;
use redispatch::synth::{generate, GeneratorConfig, GroundTruthCost};

fn main() -> redispatch::Result<()> {
    let range = DateRange::ymd((2019, 1, 1), (2019, 12, 31));
    let cfg = GeneratorConfig { range, lockdown: vec![], ..GeneratorConfig::default() };
    let panel = build_panel(&generate(&cfg)?.dataset)?;
    let model = GroundTruthCost(cfg.cost);
    for kind in ScenarioKind::ALL {
        let spec = ScenarioSpec { evaluation_range: range, ..ScenarioSpec::new(kind, 2.0) };
        let r = run_scenario_with(&spec, &model, &panel)?;
        println!(
            "{:<18} {:+9.0} EUR/h ({:+.1}%), {:.0} MWh of net demand removed",
            kind.as_str(),
            r.delta_per_hour,
            100.0 * r.relative_to_predicted,
            r.removed_energy_mwh
        );
    }
    let eq = renewable_equivalence(31_600.0, 4_900.0, 0.20)?;
    println!("a 20% demand drop matches renewables x{:.2} ({:.0} MWh)", eq.factor, eq.implied_output_mwh);
    Ok(())
}
