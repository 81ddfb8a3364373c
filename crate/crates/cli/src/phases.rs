//! Phase-list parsing: comma-separated values in radians or multiples of pi
//! ("0.77pi", "-0.4pi", "pi", "1.5708").

use crate::CliError;

pub fn parse_phase_list(text: &str) -> Result<Vec<f64>, CliError> {
    let phases: Result<Vec<f64>, CliError> = text
        .split(',')
        .map(str::trim)
        .filter(|tok| !tok.is_empty())
        .map(parse_phase)
        .collect();
    let phases = phases?;
    if phases.is_empty() {
        return Err(CliError::Config("empty phase list".to_string()));
    }
    Ok(phases)
}

fn parse_phase(token: &str) -> Result<f64, CliError> {
    let bad = || CliError::Config(format!("cannot parse phase '{token}'"));
    if let Some(prefix) = token.strip_suffix("pi") {
        let factor = match prefix.trim() {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().map_err(|_| bad())?,
        };
        return Ok(factor * std::f64::consts::PI);
    }
    token.parse::<f64>().map_err(|_| bad())
}
