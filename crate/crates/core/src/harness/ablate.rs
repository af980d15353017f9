use std::path::Path;

use rayon::prelude::*;

use super::config::{AblationDelta, RunConfig};
use super::evaluate::evaluate;
use super::train::train;
use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Head;
use crate::table::{fmt_ap, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub config: RunConfig,
    /// `AP_I, AP_V, AP_T, AP_IV, AP_IT, AP_IVT`
    pub aggregates: [Option<f64>; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            ["variant", "m", "position", "layers"]
                .into_iter()
                .map(String::from)
                .chain(Head::ALL.map(|h| h.column().to_string())),
        );
        for r in &self.rows {
            let tam = &r.config.model.tam;
            let mut row = vec![
                r.label.clone(),
                r.config.model.clip_size.to_string(),
                format!("{:?}", tam.position).to_lowercase(),
                tam.layers.to_string(),
            ];
            row.extend(r.aggregates.iter().map(|&v| fmt_ap(v)));
            t.push(row);
        }
        t
    }
}

/// Trains and evaluates every variant from the base seed. An empty grid
/// yields the base configuration alone.
pub fn ablate(
    base: &RunConfig,
    grid: &[AblationDelta],
    train_data: &Dataset,
    eval_data: &Dataset,
    out_dir: Option<&Path>,
) -> Result<AblationTable> {
    base.validate()?;
    let variants: Vec<(String, RunConfig)> = if grid.is_empty() {
        vec![("base".into(), AblationDelta::default().apply(base)?)]
    } else {
        grid.iter()
            .map(|d| Ok((d.label(), d.apply(base)?)))
            .collect::<Result<_>>()?
    };
    let rows = variants
        .into_par_iter()
        .map(|(label, cfg)| {
            let trained = train(&cfg, train_data, None)?;
            let eval = evaluate(
                &trained.model,
                &trained.taxonomy_digest,
                eval_data,
                cfg.batch,
                None,
            )?;
            Ok(AblationRow {
                label,
                aggregates: eval.report.aggregates(),
                config: cfg,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = AblationTable { rows };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let t = table.table();
        for (name, text) in [("ablation.csv", t.to_csv()), ("ablation.txt", t.to_text())] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(table)
}
