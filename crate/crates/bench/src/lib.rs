//! Fixtures shared by the criterion benches.

use mfg_spi::{load_scenario, MfgProblem, PolicyField, SidePair};

/// Preset with `key = value` overrides applied.
pub fn problem(name: &str, overrides: &[(&str, &str)]) -> MfgProblem {
    let mut s = load_scenario(name).expect("preset");
    for (k, v) in overrides {
        s.set(k, v).expect("override");
    }
    s.build().expect("scenario builds")
}

/// A rough but admissible policy: alternating drifts of size `amp`.
pub fn rough_policy(problem: &MfgProblem, amp: f64) -> PolicyField {
    PolicyField::from_fn(&problem.grid, |t, i, a| {
        let s = if (t + i + a) % 2 == 0 { amp } else { -amp };
        SidePair::new(s, -s)
    })
}
