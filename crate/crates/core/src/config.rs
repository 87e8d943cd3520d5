//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, unknown keys are rejected,
//! and every key is optional — missing keys take the reference defaults of
//! [`SimConfig::default`]. The `area` value is written `WIDTHxHEIGHT`
//! (e.g. `500x500`). `baseline_flat_pay` defaults to half the currency
//! weight when not set explicitly.

use std::error::Error;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::shapley::CoalitionValueVariant;
use crate::sim::{Mode, SimConfig};
use crate::topology::RoutePolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line the problem was found on; 0 for file-level problems.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error on line {}: {}", self.line, self.message)
        }
    }
}

impl Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// Reads and parses a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
    let text = fs::read_to_string(path.as_ref())
        .map_err(|e| err(0, format!("cannot read {}: {e}", path.as_ref().display())))?;
    parse_config_str(&text)
}

/// Parses config text. See the module docs for the grammar.
pub fn parse_config_str(text: &str) -> Result<SimConfig, ConfigError> {
    let mut config = SimConfig::default();
    let mut flat_pay_set = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        apply(&mut config, key, value, line_no)?;
        if key == "baseline_flat_pay" {
            flat_pay_set = true;
        }
    }

    if !flat_pay_set {
        // Half a unit of saved power, in micro-credits.
        config.baseline_flat_pay = ((config.currency_weight as f64) * 0.5).round() as u64;
    }
    config.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(config)
}

/// Applies a single `key = value` override, as the CLI flags also do.
/// Rejected assignments leave the config untouched.
pub fn apply(
    config: &mut SimConfig,
    key: &str,
    value: &str,
    line_no: usize,
) -> Result<(), ConfigError> {
    fn parse<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        value
            .parse()
            .map_err(|e| err(line, format!("bad value for {key}: {e}")))
    }

    let mut updated = config.clone();
    match key {
        "n_nodes" => updated.n_nodes = parse(key, value, line_no)?,
        "area" => {
            let Some((w, h)) = value.split_once('x') else {
                return Err(err(
                    line_no,
                    format!("area must be WIDTHxHEIGHT (e.g. 500x500), got `{value}`"),
                ));
            };
            updated.area = (
                parse("area width", w.trim(), line_no)?,
                parse("area height", h.trim(), line_no)?,
            );
        }
        "comm_range" => updated.comm_range = parse(key, value, line_no)?,
        "ticks" => updated.ticks = parse(key, value, line_no)?,
        "p_send" => updated.p_send = parse(key, value, line_no)?,
        "mode" => {
            updated.mode = match value {
                "faster" => Mode::Faster,
                "baseline" => Mode::Baseline,
                other => {
                    return Err(err(
                        line_no,
                        format!("mode must be `faster` or `baseline`, got `{other}`"),
                    ))
                }
            }
        }
        "variant" => {
            updated.variant = match value {
                "saved" => CoalitionValueVariant::Saved,
                "literal" => CoalitionValueVariant::Literal,
                other => {
                    return Err(err(
                        line_no,
                        format!("variant must be `saved` or `literal`, got `{other}`"),
                    ))
                }
            }
        }
        "epsilon_min" => updated.epsilon_min = parse(key, value, line_no)?,
        "currency_weight" => updated.currency_weight = parse(key, value, line_no)?,
        "initial_richness" => updated.initial_richness = parse(key, value, line_no)?,
        "initial_energy" => updated.initial_energy = parse(key, value, line_no)?,
        "p_tx" => updated.p_tx = parse(key, value, line_no)?,
        "p_rx" => updated.p_rx = parse(key, value, line_no)?,
        "p_idle" => updated.p_idle = parse(key, value, line_no)?,
        "tick_seconds" => updated.tick_seconds = parse(key, value, line_no)?,
        "baseline_flat_pay" => updated.baseline_flat_pay = parse(key, value, line_no)?,
        "baseline_refusal_threshold" => {
            updated.baseline_refusal_threshold = parse(key, value, line_no)?
        }
        "routing_policy" => {
            updated.routing_policy = match value {
                "min_energy" => RoutePolicy::MinEnergy,
                "min_hop" => RoutePolicy::MinHop,
                other => {
                    return Err(err(
                        line_no,
                        format!("routing_policy must be `min_energy` or `min_hop`, got `{other}`"),
                    ))
                }
            }
        }
        "distance_scaled_tx" => updated.distance_scaled_tx = parse(key, value, line_no)?,
        "seed" => updated.seed = parse(key, value, line_no)?,
        other => return Err(err(line_no, format!("unknown key `{other}`"))),
    }

    // Catch out-of-range values on the line that set them. The incoming
    // config was valid (or will be re-validated whole by the parser), so a
    // failure here is attributable to this assignment.
    if let Err(e) = updated.validate() {
        if e.field == key || key == "area" {
            return Err(err(line_no, e.to_string()));
        }
    }
    *config = updated;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let config = parse_config_str("").unwrap();
        assert_eq!(config, SimConfig::default());
        assert_eq!(config.n_nodes, 20);
        assert_eq!(config.area, (500.0, 500.0));
        assert_eq!(config.comm_range, 250.0);
        assert_eq!(config.initial_energy, 100.0);
        assert_eq!(config.p_tx, 1.4);
        assert_eq!(config.p_rx, 1.0);
        assert_eq!(config.p_idle, 0.83);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "\n# a comment\n  seed = 7   # trailing comment\n\n";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn overrides_apply() {
        let text = "mode = faster\nseed = 7\nticks = 50\nvariant = literal\narea = 300x400\n";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.mode, Mode::Faster);
        assert_eq!(config.seed, 7);
        assert_eq!(config.ticks, 50);
        assert_eq!(config.variant, CoalitionValueVariant::Literal);
        assert_eq!(config.area, (300.0, 400.0));
    }

    #[test]
    fn out_of_range_values_name_their_line() {
        let e = parse_config_str("seed = 1\np_send = 1.5\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("p_send"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config_str("speed = 9\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("unknown key"));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let e = parse_config_str("just some words\n").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn flat_pay_follows_currency_weight() {
        let config = parse_config_str("currency_weight = 2000\n").unwrap();
        assert_eq!(config.baseline_flat_pay, 1000);

        let config = parse_config_str("currency_weight = 2000\nbaseline_flat_pay = 3\n").unwrap();
        assert_eq!(config.baseline_flat_pay, 3);
    }

    #[test]
    fn bad_enum_values_are_rejected() {
        assert!(parse_config_str("mode = turbo\n").is_err());
        assert!(parse_config_str("variant = printed\n").is_err());
        assert!(parse_config_str("routing_policy = fastest\n").is_err());
    }
}
