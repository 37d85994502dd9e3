use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::ModelPosterior;
use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::hierarchy::hex;
use crate::marginal::MarginalFamily;
use crate::propagation::{CdfBand, Support, WeightedRun};

/// Named columns of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != names.len()) {
            return Err(Error::input(format!("row {} has {} values for {} columns", i + 1, r.len(), names.len())));
        }
        Ok(Self { names, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::input(format!("no column named `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn pairs(&self, a: &str, b: &str) -> Result<Vec<(f64, f64)>> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        Ok(self.rows.iter().map(|r| (r[i], r[j])).collect())
    }

    /// Rows restricted and reordered to `names`.
    pub fn select(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let idx: Vec<usize> = names.iter().map(|n| self.index(n)).collect::<Result<_>>()?;
        Ok(self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect())
    }
}

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_err(path: &Path, row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Read a CSV with a header row and a numeric body. Row numbers in errors
/// count the header as row 1.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if names.is_empty() || names.iter().any(String::is_empty) {
        return Err(parse_err(path, 1, "", "header row has an empty column name"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = i + 2;
        if rec.len() != names.len() {
            return Err(parse_err(
                path,
                row_no,
                "",
                format!("expected {} fields, found {}", names.len(), rec.len()),
            ));
        }
        let mut row = Vec::with_capacity(names.len());
        for (field, name) in rec.iter().zip(&names) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, row_no, name, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, row_no, name, format!("`{field}` is not finite")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 2, "", "no data rows"));
    }
    Dataset::new(names, rows)
}

pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&data.names)?;
    for r in &data.rows {
        w.write_record(r.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(std::fs::read(path)?)))
}

/// File-name-safe form of a label.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

pub fn marginal_param_names(f: MarginalFamily) -> [&'static str; 2] {
    match f {
        MarginalFamily::Gaussian | MarginalFamily::Lognormal => ["mu", "sigma"],
        MarginalFamily::Gamma | MarginalFamily::Weibull => ["shape", "scale"],
    }
}

pub fn copula_param_names(f: CopulaFamily) -> &'static [&'static str] {
    match f {
        CopulaFamily::Independence => &[],
        CopulaFamily::Gaussian => &["rho"],
        CopulaFamily::StudentT => &["rho", "nu"],
        _ => &["theta"],
    }
}

/// One row of `model_probs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProbRow {
    /// Variable name, or `copula:<a>-<b>` for copula posteriors.
    pub target: String,
    /// Ensemble entry for conditional copula posteriors.
    pub entry: Option<usize>,
    pub model: String,
    pub log_evidence: f64,
    pub probability: f64,
}

pub fn posterior_rows<F: Copy>(
    target: &str,
    entry: Option<usize>,
    post: &ModelPosterior<F>,
    name: impl Fn(F) -> String,
) -> Vec<ModelProbRow> {
    post.candidates
        .iter()
        .zip(&post.log_evidences)
        .zip(&post.model_probs)
        .map(|((&f, &le), &p)| ModelProbRow {
            target: target.to_string(),
            entry,
            model: name(f),
            log_evidence: le,
            probability: p,
        })
        .collect()
}

pub fn write_model_probs(path: &Path, rows: &[ModelProbRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["target", "entry", "model", "log_evidence", "probability"])?;
    for r in rows {
        w.write_record([
            r.target.clone(),
            r.entry.map(|e| e.to_string()).unwrap_or_default(),
            r.model.clone(),
            fmt_f64(r.log_evidence),
            fmt_f64(r.probability),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model_probs(path: &Path) -> Result<Vec<ModelProbRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::input(format!("{}: bad number `{}`", path.display(), &rec[i])))
        };
        out.push(ModelProbRow {
            target: rec[0].to_string(),
            entry: if rec[1].is_empty() {
                None
            } else {
                Some(rec[1].parse().map_err(|_| Error::input("bad entry index"))?)
            },
            model: rec[2].to_string(),
            log_evidence: num(3)?,
            probability: num(4)?,
        });
    }
    Ok(out)
}

/// Chain samples of one candidate, one row per stored state.
pub fn write_chain(path: &Path, names: &[&str], samples: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for s in samples {
        w.write_record(s.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata stored next to `run_samples.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub variables: Vec<String>,
    pub seed: u64,
    pub samples: usize,
    pub model_evaluations: usize,
    pub support: Vec<Support>,
    pub ensemble_key: String,
}

pub const RUN_SAMPLES: &str = "run_samples.csv";
pub const RUN_META: &str = "run_meta.json";

pub fn write_run(dir: &Path, run: &WeightedRun, variables: &[String], evaluations: usize) -> Result<Vec<PathBuf>> {
    let samples_path = dir.join(RUN_SAMPLES);
    let mut w = csv::Writer::from_path(&samples_path)?;
    let mut header: Vec<String> = variables.to_vec();
    header.push("g".into());
    header.push("ln_q".into());
    w.write_record(&header)?;
    for ((x, g), lq) in run.samples.iter().zip(&run.outputs).zip(&run.ln_q) {
        let mut rec: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
        rec.push(fmt_f64(*g));
        rec.push(fmt_f64(*lq));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let meta_path = dir.join(RUN_META);
    write_json(
        &meta_path,
        &RunMeta {
            variables: variables.to_vec(),
            seed: run.seed,
            samples: run.len(),
            model_evaluations: evaluations,
            support: run.support.clone(),
            ensemble_key: run.ensemble_key.clone(),
        },
    )?;
    Ok(vec![samples_path, meta_path])
}

pub fn read_run(dir: &Path) -> Result<(WeightedRun, RunMeta)> {
    let meta: RunMeta = read_json(&dir.join(RUN_META))?;
    let data = read_csv(&dir.join(RUN_SAMPLES))?;
    let d = meta.variables.len();
    if data.names.len() != d + 2 || data.names[..d] != meta.variables[..] {
        return Err(Error::input("run_samples.csv columns do not match run_meta.json"));
    }
    let run = WeightedRun {
        samples: data.rows.iter().map(|r| r[..d].to_vec()).collect(),
        outputs: data.rows.iter().map(|r| r[d]).collect(),
        ln_q: data.rows.iter().map(|r| r[d + 1]).collect(),
        seed: meta.seed,
        support: meta.support.clone(),
        ensemble_key: meta.ensemble_key.clone(),
    };
    if run.len() != meta.samples {
        return Err(Error::input("run_samples.csv row count does not match run_meta.json"));
    }
    run.validate()?;
    Ok((run, meta))
}

/// `grid,lower,upper` plus one column per kept candidate (`c<l>_<k>`).
pub fn write_band(path: &Path, band: &CdfBand, n_tc: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["grid".to_string(), "lower".into(), "upper".into()];
    for m in 0..band.members.len() {
        header.push(format!("c{}_{}", m / n_tc, m % n_tc));
    }
    w.write_record(&header)?;
    for i in 0..band.grid.len() {
        let mut rec = vec![fmt_f64(band.grid[i]), fmt_f64(band.lower[i]), fmt_f64(band.upper[i])];
        rec.extend(band.members.iter().map(|m| fmt_f64(m[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Grid and envelope from a band file.
pub fn read_band(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let d = read_csv(path)?;
    let (g, lo, hi) = (d.index("grid")?, d.index("lower")?, d.index("upper")?);
    Ok((
        d.rows.iter().map(|r| r[g]).collect(),
        d.rows.iter().map(|r| r[lo]).collect(),
        d.rows.iter().map(|r| r[hi]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn csv_round_trip_is_bit_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let mut rng = rng_from_seed(1);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300))).collect())
            .collect();
        let d = Dataset::new(vec!["V_f".into(), "E_m".into(), "nu_m".into(), "E_1f".into()], rows).unwrap();
        write_csv(&p, &d).unwrap();
        let back = read_csv(&p).unwrap();
        assert_eq!(back.len(), 20);
        assert_eq!(back.names.len(), 4);
        for (a, b) in d.rows.iter().flatten().zip(back.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "a,b\n1,2\n3,x\n").unwrap();
        match read_csv(&p) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "a,b\n1,2\n3\n").unwrap();
        assert!(matches!(read_csv(&p), Err(Error::Parse { row: 3, .. })));
        std::fs::write(&p, "a,b\n1,NaN\n").unwrap();
        assert!(matches!(read_csv(&p), Err(Error::Parse { row: 2, .. })));
        std::fs::write(&p, "a,b\n").unwrap();
        assert!(read_csv(&p).is_err());
    }

    #[test]
    fn dataset_access() {
        let d = Dataset::new(vec!["x".into(), "y".into()], vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.column("y").unwrap(), vec![2.0, 4.0]);
        assert_eq!(d.pairs("y", "x").unwrap(), vec![(2.0, 1.0), (4.0, 3.0)]);
        assert_eq!(d.select(&["y".into()]).unwrap(), vec![vec![2.0], vec![4.0]]);
        assert!(d.column("z").is_err());
        assert!(Dataset::new(vec!["x".into()], vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn model_probs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let rows = vec![
            ModelProbRow { target: "E_m".into(), entry: None, model: "Gaussian".into(), log_evidence: -3.5, probability: 0.7 },
            ModelProbRow { target: "copula:E_m-nu_m".into(), entry: Some(3), model: "Frank".into(), log_evidence: f64::NEG_INFINITY, probability: 0.0 },
        ];
        write_model_probs(&p, &rows).unwrap();
        assert_eq!(read_model_probs(&p).unwrap(), rows);
    }

    #[test]
    fn sanitize_labels() {
        assert_eq!(sanitize("E_m-nu_m"), "E_m-nu_m");
        assert_eq!(sanitize("a b/c"), "a_b_c");
    }
}
