//! Run-directory serialization: samples.csv, thresholds.csv, vgrid.bin
//! (little-endian f64), meta.json, and the posterior summary table.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::math::{mean, quantile_sorted, sample_sd};
use crate::model::HierarchicalModel;
use crate::sampler::GdsRun;

/// Writes the run artifacts into `dir` (created if needed). `extra_meta`
/// fields are merged into meta.json at the top level; callers use it to embed
/// the originating config and derived quantities like log_ml.
pub fn write_run_dir(
    run: &GdsRun,
    dir: &Path,
    extra_meta: Option<Value>,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;

    let mut samples = BufWriter::new(File::create(dir.join("samples.csv"))?);
    for s in &run.samples {
        let row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        writeln!(samples, "{}", row.join(","))?;
    }
    samples.flush()?;

    let mut thresholds = BufWriter::new(File::create(dir.join("thresholds.csv"))?);
    writeln!(thresholds, "v_star")?;
    for v in &run.thresholds {
        writeln!(thresholds, "{v}")?;
    }
    thresholds.flush()?;

    let mut vgrid = BufWriter::new(File::create(dir.join("vgrid.bin"))?);
    for v in run.qv.v() {
        vgrid.write_all(&v.to_le_bytes())?;
    }
    vgrid.flush()?;

    let mut meta = json!({
        "log_c1": run.log_c1,
        "log_c2": run.log_c2,
        "scale_s_final": run.scale_s_final,
        "m": run.qv.len(),
        "r": run.samples.len(),
        "total_proposals": run.total_proposals,
        "gamma_hat": run.gamma_hat(),
        "mean_proposals_per_draw": run.mean_proposals_per_draw(),
        "median_proposals_per_draw": run.median_proposals_per_draw(),
    });
    if let Some(Value::Object(extra)) = extra_meta {
        let obj = meta.as_object_mut().unwrap();
        for (k, v) in extra {
            obj.insert(k, v);
        }
    }
    let mut meta_file = File::create(dir.join("meta.json"))?;
    serde_json::to_writer_pretty(&mut meta_file, &meta)?;
    meta_file.write_all(b"\n")?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q2_5: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q97_5: f64,
}

/// Posterior mean/sd and quantiles for each population-level parameter.
pub fn population_summary(model: &dyn HierarchicalModel, run: &GdsRun) -> Vec<SummaryRow> {
    let p = model.pop_dim();
    let names = model.pop_names();
    let mut rows = Vec::with_capacity(p);
    for j in 0..p {
        let mut values: Vec<f64> = run.samples.iter().map(|s| s.pop_block(p)[j]).collect();
        values.sort_unstable_by(f64::total_cmp);
        rows.push(SummaryRow {
            name: names[j].clone(),
            mean: mean(&values),
            sd: if values.len() > 1 { sample_sd(&values) } else { 0.0 },
            q2_5: quantile_sorted(&values, 0.025),
            q25: quantile_sorted(&values, 0.25),
            q50: quantile_sorted(&values, 0.50),
            q75: quantile_sorted(&values, 0.75),
            q97_5: quantile_sorted(&values, 0.975),
        });
    }
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("parameter,mean,sd,q2.5,q25,q50,q75,q97.5\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.name, r.mean, r.sd, r.q2_5, r.q25, r.q50, r.q75, r.q97_5
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParameterVector;
    use crate::sampler::QvEstimate;

    fn dummy_run() -> GdsRun {
        GdsRun {
            samples: vec![
                ParameterVector::new(vec![1.0, 2.0]),
                ParameterVector::new(vec![3.0, 4.0]),
            ],
            n_per_draw: vec![1, 3],
            thresholds: vec![0.5, 0.25],
            qv: QvEstimate::from_values(vec![0.1, 0.4, 0.2]),
            log_c1: -1.0,
            log_c2: -2.0,
            scale_s_final: 1.5,
            total_proposals: 4,
        }
    }

    #[test]
    fn run_dir_files_and_meta_merge() {
        let dir = tempfile::tempdir().unwrap();
        let run = dummy_run();
        write_run_dir(&run, dir.path(), Some(json!({"log_ml": -12.5}))).unwrap();
        for f in ["samples.csv", "thresholds.csv", "vgrid.bin", "meta.json"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        let meta: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap())
                .unwrap();
        assert_eq!(meta["log_ml"], json!(-12.5));
        assert_eq!(meta["r"], json!(2));
        assert_eq!(meta["total_proposals"], json!(4));
        let vgrid = std::fs::read(dir.path().join("vgrid.bin")).unwrap();
        assert_eq!(vgrid.len(), 3 * 8);
        let first = f64::from_le_bytes(vgrid[0..8].try_into().unwrap());
        assert_eq!(first, 0.1); // sorted grid
    }
}
