//! `bldnet rf`: receptive-field chain and per-stage output extents.

use crate::specfile::parse_spec;
use anyhow::{bail, Context, Result};
use bldnet::netgraph::NetworkSpec;
use std::path::Path;

pub fn run(file: Option<&Path>, preset: &str, input_size: usize) -> Result<()> {
    let spec = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read spec {}", path.display()))?;
            parse_spec(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => match preset {
            "standard" => NetworkSpec::standard(),
            "reduced" => NetworkSpec::reduced(),
            other => bail!("unknown preset '{}' (use standard or reduced)", other),
        },
    };

    // receptive_field_chain returns R(m)..R(0)
    let chain = spec.receptive_field_chain();
    let m = spec.stages().len();
    println!("stage\tfilters\tsize\tpool\ttap\trf\tout");
    let mut extent = input_size;
    for (i, s) in spec.stages().iter().enumerate() {
        extent /= s.pool;
        // R(i) pairs with the output of stage i
        let rf = chain[m - 1 - i];
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}x{}",
            i + 1,
            s.filter_count,
            s.filter_size,
            s.pool,
            if s.tapped { "tap" } else { "-" },
            rf,
            extent,
            extent
        );
    }
    println!("fusion_classes\t{}", spec.fusion_classes());
    println!("fusion_channels\t{}", spec.fusion_input_channels());
    println!("receptive_field\t{}", spec.receptive_field());
    Ok(())
}
