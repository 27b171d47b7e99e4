//! Plain-text policy checkpoints.
//!
//! One `key value` pair per line, then the flat parameter vector, one value
//! per line. Floats use Rust's shortest round-trip formatting, so a load
//! after a save restores every bit.

use std::path::Path;
use std::str::FromStr;

use super::network::Perceptron;
use super::state::InputScale;
use super::{AdpError, Policy, QNetwork};

const MAGIC: &str = "holdline-policy";
const VERSION: u32 = 1;

pub fn to_string(policy: &Policy) -> String {
    let net = &policy.network.net;
    let s = &policy.network.scale;
    let coefficient = match policy.coefficient {
        crate::model::CostCoefficient::Dch => "dch",
        crate::model::CostCoefficient::Esh => "esh",
    };
    let mut out = format!(
        "{MAGIC} {VERSION}\n\
         line_fingerprint {}\n\
         lookahead {}\n\
         gamma {}\n\
         coefficient {coefficient}\n\
         inputs {}\n\
         hidden {} {}\n\
         slope {}\n\
         headway_s {}\n\
         n_buses {}\n\
         n_stops {}\n\
         max_hold_s {}\n\
         cost_scale {}\n\
         params {}\n",
        policy.line_fingerprint,
        policy.lookahead,
        policy.gamma,
        net.inputs(),
        net.hidden().0,
        net.hidden().1,
        net.slope(),
        s.headway_s,
        s.n_buses,
        s.n_stops,
        s.max_hold_s,
        policy.network.cost_scale,
        net.params().len(),
    );
    for p in net.params() {
        out.push_str(&p.to_string());
        out.push('\n');
    }
    out
}

fn bad(msg: impl Into<String>) -> AdpError {
    AdpError::Checkpoint(msg.into())
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn field(&mut self, key: &str) -> Result<&'a str, AdpError> {
        let (n, line) = self.lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
        let (k, v) = line.split_once(' ').ok_or_else(|| bad(format!("line {}: expected `{key} <value>`", n + 1)))?;
        if k != key {
            return Err(bad(format!("line {}: expected {key}, found {k}", n + 1)));
        }
        Ok(v.trim())
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<T, AdpError> {
        let v = self.field(key)?;
        v.parse().map_err(|_| bad(format!("{key}: cannot parse {v:?}")))
    }
}

pub fn from_str(text: &str) -> Result<Policy, AdpError> {
    let mut r = Reader { lines: text.lines().enumerate() };
    let version: u32 = r.parse(MAGIC)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let line_fingerprint = r.field("line_fingerprint")?.to_string();
    let lookahead = r.parse("lookahead")?;
    let gamma = r.parse("gamma")?;
    let coefficient = r.field("coefficient")?.parse().map_err(bad)?;
    let inputs: usize = r.parse("inputs")?;
    let hidden = r.field("hidden")?;
    let hidden = match hidden.split_whitespace().map(str::parse).collect::<Result<Vec<usize>, _>>() {
        Ok(v) if v.len() == 2 => (v[0], v[1]),
        _ => return Err(bad(format!("hidden: expected two sizes, found {hidden:?}"))),
    };
    let slope = r.parse("slope")?;
    let scale = InputScale {
        headway_s: r.parse("headway_s")?,
        n_buses: r.parse("n_buses")?,
        n_stops: r.parse("n_stops")?,
        max_hold_s: r.parse("max_hold_s")?,
    };
    let cost_scale = r.parse("cost_scale")?;
    let count: usize = r.parse("params")?;
    let mut params = Vec::with_capacity(count);
    for (n, line) in r.lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        params.push(line.parse::<f64>().map_err(|_| bad(format!("line {}: bad parameter {line:?}", n + 1)))?);
    }
    if params.len() != count {
        return Err(bad(format!("expected {count} parameters, found {}", params.len())));
    }
    if inputs != scale.input_width() {
        return Err(bad("input width does not match stop and bus counts"));
    }
    let net = Perceptron::from_params(inputs, hidden, slope, params).ok_or_else(|| bad("parameter count does not match layer sizes"))?;
    Ok(Policy { network: QNetwork { net, scale, cost_scale }, lookahead, gamma, coefficient, line_fingerprint })
}

pub fn save(policy: &Policy, path: &Path) -> Result<(), AdpError> {
    std::fs::write(path, to_string(policy))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Policy, AdpError> {
    from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_line, HyperParams};
    use crate::simulator::Simulation;

    #[test]
    fn round_trip_is_exact() {
        let sim = Simulation::new(builtin_line("L5").unwrap()).unwrap();
        let mut policy = Policy::initial(&sim, &HyperParams::default());
        policy.network.net.params_mut()[0] = 0.1 + 0.2;
        policy.network.net.params_mut()[1] = -1e-300;
        let text = to_string(&policy);
        let back = from_str(&text).unwrap();
        assert_eq!(back, policy);
        for (a, b) in back.network.net.params().iter().zip(policy.network.net.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let sim = Simulation::new(builtin_line("L5").unwrap()).unwrap();
        let text = to_string(&Policy::initial(&sim, &HyperParams::default()));
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(matches!(from_str(&cut), Err(AdpError::Checkpoint(_))));
        assert!(from_str("garbage").is_err());
    }
}
