//! Line-based network spec files for the receptive-field analyzer.
//!
//! Format, one directive per line (`#` starts a comment):
//!
//! ```text
//! stage <filters> <size> <pool> [tap]
//! fusion <classes>
//! ```
//!
//! The last stage is treated as tapped regardless of annotation; `fusion`
//! is optional and defaults to 128 classes.

use anyhow::{anyhow, Result};
use bldnet::netgraph::{NetworkSpec, StageSpec};

pub fn parse_spec(text: &str) -> Result<NetworkSpec> {
    let mut stages: Vec<StageSpec> = Vec::new();
    let mut fusion_classes = 128usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap();
        match word {
            "stage" => {
                let fields: Vec<&str> = parts.collect();
                if fields.len() < 3 || fields.len() > 4 {
                    return Err(anyhow!(
                        "line {}: expected 'stage <filters> <size> <pool> [tap]'",
                        line_no
                    ));
                }
                let parse = |s: &str, what: &str| -> Result<usize> {
                    s.parse()
                        .map_err(|_| anyhow!("line {}: {} '{}' is not an integer", line_no, what, s))
                };
                let filters = parse(fields[0], "filter count")?;
                let size = parse(fields[1], "filter size")?;
                let pool = parse(fields[2], "pool")?;
                let tapped = match fields.get(3) {
                    None => false,
                    Some(&"tap") => true,
                    Some(other) => {
                        return Err(anyhow!(
                            "line {}: unexpected token '{}' (only 'tap' is allowed)",
                            line_no,
                            other
                        ))
                    }
                };
                stages.push(StageSpec::new(filters, size, pool, tapped));
            }
            "fusion" => {
                let value = parts
                    .next()
                    .ok_or_else(|| anyhow!("line {}: expected 'fusion <classes>'", line_no))?;
                fusion_classes = value
                    .parse()
                    .map_err(|_| anyhow!("line {}: class count '{}' is not an integer", line_no, value))?;
                if parts.next().is_some() {
                    return Err(anyhow!("line {}: trailing tokens after 'fusion'", line_no));
                }
            }
            other => {
                return Err(anyhow!(
                    "line {}: unknown directive '{}' (expected 'stage' or 'fusion')",
                    line_no,
                    other
                ))
            }
        }
    }
    if stages.is_empty() {
        return Err(anyhow!("spec file defines no stages"));
    }
    if let Some(last) = stages.last_mut() {
        last.tapped = true;
    }
    NetworkSpec::new(stages, fusion_classes).map_err(|e| anyhow!("{}", e))
}
