use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::report::{RateTable, StageReport};
use super::run::{run_scene, ImageDump};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchReport {
    pub reports: Vec<StageReport>,
    /// Always recomputed from `reports`.
    pub table: RateTable,
}

#[derive(Serialize)]
struct AggregateLine<'a> {
    aggregate: &'a RateTable,
}

impl BatchReport {
    pub fn from_reports(reports: Vec<StageReport>) -> Self {
        let table = RateTable::from_reports(&reports);
        Self { reports, table }
    }

    /// One JSON object per flower, then `{"aggregate": …}`.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.reports {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&AggregateLine { aggregate: &self.table })?);
        out.push('\n');
        Ok(out)
    }

    /// Writes `reports.jsonl`, `aggregate.csv` and `summary.txt`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("reports.jsonl"), self.to_json_lines()?)?;
        self.table.write_csv(fs::File::create(dir.join("aggregate.csv"))?)?;
        fs::write(dir.join("summary.txt"), self.table.to_string())?;
        Ok(())
    }
}

pub fn write_dumps(dir: &Path, dumps: &[ImageDump]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for d in dumps {
        d.image.save_ppm(dir.join(format!("{}.ppm", d.name)))?;
        if let Some(meta) = &d.sidecar {
            fs::write(dir.join(format!("{}.json", d.name)), serde_json::to_string_pretty(meta)?)?;
        }
    }
    Ok(())
}

/// Runs scenes `base_seed .. base_seed + n_scenes` in parallel and joins
/// their reports in seed order. Writes outputs when the config names an
/// output directory.
pub fn run_batch(config: &ScenarioConfig, n_scenes: usize, base_seed: u64) -> Result<BatchReport> {
    config.validate()?;
    if n_scenes == 0 {
        return Err(Error::Config("a batch needs at least one scene".into()));
    }
    let runs = (0..n_scenes as u64)
        .into_par_iter()
        .map(|i| run_scene(config, base_seed + i))
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    let mut dumps = Vec::new();
    for run in runs {
        reports.extend(run.reports);
        dumps.extend(run.dumps);
    }
    let batch = BatchReport::from_reports(reports);
    if let Some(dir) = &config.output_dir {
        batch.write_to(dir)?;
        if config.dump_images {
            write_dumps(&dir.join("images"), &dumps)?;
        }
    }
    Ok(batch)
}
