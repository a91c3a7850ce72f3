//! Scenarios shipped with the binary, also found under `scenarios/`.

use crate::error::CliError;
use crate::scenario::{parse_scenario_str, Scenario};

pub const DEMOS: [(&str, &str); 5] = [
    ("two-body", include_str!("../../../scenarios/two-body.toml")),
    ("three-body", include_str!("../../../scenarios/three-body.toml")),
    ("discrete", include_str!("../../../scenarios/discrete.toml")),
    ("chain", include_str!("../../../scenarios/chain.toml")),
    ("verify", include_str!("../../../scenarios/verify.toml")),
];

pub fn demo(name: &str) -> Result<Scenario, CliError> {
    let (_, text) = DEMOS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        CliError::UnknownDemo(name.to_string(), DEMOS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "))
    })?;
    parse_scenario_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_demos_parse() {
        for (name, _) in DEMOS {
            demo(name).unwrap();
        }
        assert!(demo("nope").is_err());
    }
}
