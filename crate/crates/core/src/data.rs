//! Fatigue dataset schemas, their CSV dialect, and the built-in constraint
//! tables for the three reference datasets.
//!
//! CSV dialect: comma separated, UTF-8, `#` starts a comment line, plain
//! decimal numbers. A single-load file is
//!
//! ```text
//! material,stress_mpa
//! Nickel-Silver Alloy,478
//! lifetime
//! 251000
//! ...
//! ```
//!
//! and a two-load file is
//!
//! ```text
//! material,stress_high_mpa,stress_low_mpa
//! Nickel-Silver Alloy,666,478
//! n1,n2
//! 13300,190000
//! ...
//! ```
//!
//! The metadata pair and the column header lines are optional.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::damage::CycleRatios;
use crate::distributions::MomentConstraints;
use crate::error::{Error, Result};
use crate::propagate::{build_input_model, run, InputJointModel, MarginalSpec, ModelKind};

pub const UNSPECIFIED_MATERIAL: &str = "unspecified";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLoadDataset {
    pub material: String,
    pub stress: Option<f64>,
    pub lifetimes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub n1: f64,
    pub observations: Vec<f64>,
}

/// High-low two-level experiment; groups sorted by strictly increasing `n1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLoadDataset {
    pub material: String,
    pub stress_high: Option<f64>,
    pub stress_low: Option<f64>,
    pub groups: Vec<Group>,
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

fn rows(text: &str, path: &str) -> Result<Vec<Row>> {
    // csv positions do not count skipped comment lines, so line numbers are
    // tracked here and csv only splits the fields of one physical line
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(t.as_bytes());
        let rec = rdr
            .records()
            .next()
            .expect("nonempty line yields a record")
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(Row {
            line,
            fields: rec.iter().map(str::to_string).collect(),
        });
    }
    Ok(out)
}

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn number(path: &str, row: &Row, k: usize, what: &str) -> Result<f64> {
    let s = &row.fields[k];
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, row.line, format!("{what} '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, row.line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn is_header(row: &Row, names: &[&str]) -> bool {
    row.fields.len() == names.len() && row.fields.iter().zip(names).all(|(a, b)| a.eq_ignore_ascii_case(b))
}

fn positive_stress(path: &str, row: &Row, k: usize) -> Result<f64> {
    let s = number(path, row, k, "stress")?;
    if s <= 0.0 {
        return Err(parse_err(path, row.line, "stress must be positive"));
    }
    Ok(s)
}

pub fn parse_single_load(text: &str, path: &str) -> Result<SingleLoadDataset> {
    let rows = rows(text, path)?;
    let mut it = rows.iter().peekable();
    let mut material = UNSPECIFIED_MATERIAL.to_string();
    let mut stress = None;
    if let Some(r) = it.peek() {
        if is_header(r, &["material", "stress_mpa"]) {
            let h = it.next().expect("peeked");
            let m = it
                .next()
                .ok_or_else(|| parse_err(path, h.line, "metadata header without a value row"))?;
            if m.fields.len() != 2 {
                return Err(parse_err(path, m.line, "metadata row needs material and stress"));
            }
            material = m.fields[0].clone();
            stress = Some(positive_stress(path, m, 1)?);
        }
    }
    if it.peek().is_some_and(|r| is_header(r, &["lifetime"])) {
        it.next();
    }
    let mut lifetimes = Vec::new();
    for r in it {
        if r.fields.len() != 1 {
            return Err(parse_err(path, r.line, format!("expected one lifetime, found {} fields", r.fields.len())));
        }
        let v = number(path, r, 0, "lifetime")?;
        if v <= 0.0 {
            return Err(parse_err(path, r.line, format!("lifetime must be positive, got {v}")));
        }
        lifetimes.push(v);
    }
    if lifetimes.is_empty() {
        let line = rows.last().map_or(0, |r| r.line);
        return Err(parse_err(path, line, "no lifetimes found"));
    }
    Ok(SingleLoadDataset {
        material,
        stress,
        lifetimes,
    })
}

pub fn parse_two_load(text: &str, path: &str) -> Result<TwoLoadDataset> {
    let rows = rows(text, path)?;
    let mut it = rows.iter().peekable();
    let mut material = UNSPECIFIED_MATERIAL.to_string();
    let (mut stress_high, mut stress_low) = (None, None);
    if let Some(r) = it.peek() {
        if is_header(r, &["material", "stress_high_mpa", "stress_low_mpa"]) {
            let h = it.next().expect("peeked");
            let m = it
                .next()
                .ok_or_else(|| parse_err(path, h.line, "metadata header without a value row"))?;
            if m.fields.len() != 3 {
                return Err(parse_err(path, m.line, "metadata row needs material and two stresses"));
            }
            material = m.fields[0].clone();
            let (hi, lo) = (positive_stress(path, m, 1)?, positive_stress(path, m, 2)?);
            if hi <= lo {
                return Err(parse_err(path, m.line, "high-low sequence needs stress_high > stress_low"));
            }
            stress_high = Some(hi);
            stress_low = Some(lo);
        }
    }
    if it.peek().is_some_and(|r| is_header(r, &["n1", "n2"])) {
        it.next();
    }
    let mut obs = Vec::new();
    for r in it {
        if r.fields.len() != 2 {
            return Err(parse_err(path, r.line, format!("expected n1,n2, found {} fields", r.fields.len())));
        }
        let n1 = number(path, r, 0, "n1")?;
        let n2 = number(path, r, 1, "n2")?;
        if n1 < 0.0 {
            return Err(parse_err(path, r.line, format!("n1 must be nonnegative, got {n1}")));
        }
        if n2 <= 0.0 {
            return Err(parse_err(path, r.line, format!("n2 must be positive, got {n2}")));
        }
        obs.push((n1, n2));
    }
    if obs.is_empty() {
        let line = rows.last().map_or(0, |r| r.line);
        return Err(parse_err(path, line, "no observations found"));
    }
    // stable sort keeps the file order of replicates within a group
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<Group> = Vec::new();
    for (n1, n2) in obs {
        match groups.last_mut() {
            Some(g) if g.n1 == n1 => g.observations.push(n2),
            _ => groups.push(Group {
                n1,
                observations: vec![n2],
            }),
        }
    }
    Ok(TwoLoadDataset {
        material,
        stress_high,
        stress_low,
        groups,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(Error::from)
}

pub fn load_single_load_csv(path: impl AsRef<Path>) -> Result<SingleLoadDataset> {
    let p = path.as_ref();
    parse_single_load(&read(p)?, &p.display().to_string())
}

pub fn load_two_load_csv(path: impl AsRef<Path>) -> Result<TwoLoadDataset> {
    let p = path.as_ref();
    parse_two_load(&read(p)?, &p.display().to_string())
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>, comment: Option<&str>) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    write(&mut w).expect("writing to memory cannot fail");
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input");
    match comment {
        Some(c) => c.lines().map(|l| format!("# {l}\n")).collect::<String>() + &body,
        None => body,
    }
}

impl SingleLoadDataset {
    /// CSV text in the dialect above, preceded by `comment` lines if given.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        csv_string(
            |w| {
                if let Some(s) = self.stress {
                    w.write_record(["material", "stress_mpa"])?;
                    w.write_record([self.material.as_str(), &s.to_string()])?;
                }
                w.write_record(["lifetime"])?;
                for v in &self.lifetimes {
                    w.write_record([v.to_string()])?;
                }
                Ok(())
            },
            comment,
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv(comment))?)
    }
}

impl TwoLoadDataset {
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        csv_string(
            |w| {
                if let (Some(h), Some(l)) = (self.stress_high, self.stress_low) {
                    w.write_record(["material", "stress_high_mpa", "stress_low_mpa"])?;
                    w.write_record([self.material.clone(), h.to_string(), l.to_string()])?;
                }
                w.write_record(["n1", "n2"])?;
                for g in &self.groups {
                    for v in &g.observations {
                        w.write_record([g.n1.to_string(), v.to_string()])?;
                    }
                }
                Ok(())
            },
            comment,
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv(comment))?)
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.observations.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(n1, mean n2)` per group.
    pub fn mean_points(&self) -> Vec<(f64, f64)> {
        self.groups
            .iter()
            .map(|g| (g.n1, g.observations.iter().sum::<f64>() / g.observations.len() as f64))
            .collect()
    }

    /// Group means as cycle ratios against the given single-level lives.
    pub fn ratio_points(&self, life1: f64, life2: f64) -> Result<Vec<CycleRatios>> {
        self.mean_points()
            .into_iter()
            .map(|(n1, n2)| CycleRatios::from_cycles(n1, life1, n2, life2))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Tanaka,
    Xie045,
    Xie16mn,
}

impl DatasetId {
    pub const ALL: [DatasetId; 3] = [DatasetId::Tanaka, DatasetId::Xie045, DatasetId::Xie16mn];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanaka" => Ok(DatasetId::Tanaka),
            "xie045" => Ok(DatasetId::Xie045),
            "xie16mn" => Ok(DatasetId::Xie16mn),
            _ => Err(Error::invalid(format!("unknown dataset '{s}' (expected tanaka, xie045 or xie16mn)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetId::Tanaka => "tanaka",
            DatasetId::Xie045 => "xie045",
            DatasetId::Xie16mn => "xie16mn",
        }
    }
}

/// MaxEnt inputs for one DLDR parameter with a uniformly distributed COV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamRecord {
    pub support: [f64; 2],
    pub mean: f64,
    pub cov_range: [f64; 2],
}

impl ParamRecord {
    pub fn to_spec(&self) -> MarginalSpec {
        MarginalSpec::hierarchical(self.support[0], self.support[1], self.mean, self.cov_range[0], self.cov_range[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QRatioRecord {
    pub support: [f64; 2],
    pub mean: f64,
}

impl QRatioRecord {
    /// Mean-only MaxEnt on the support.
    pub fn to_spec(&self) -> Result<MarginalSpec> {
        Ok(MarginalSpec::MaxentFixed {
            constraints: MomentConstraints::with_mean(self.support[0], self.support[1], self.mean)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleLoadSize {
    pub stress_mpa: f64,
    pub specimens: usize,
}

/// Published metadata and MaxEnt inputs of one reference dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintTable {
    pub dataset_id: DatasetId,
    pub material: &'static str,
    pub stress_high_mpa: f64,
    pub stress_low_mpa: f64,
    pub alpha: ParamRecord,
    pub b: ParamRecord,
    pub q_ratio: QRatioRecord,
    pub n1_schedule: Vec<f64>,
    pub single_load_sizes: Vec<SingleLoadSize>,
    pub two_load_size: usize,
    pub group_sizes: Vec<usize>,
    pub notes: Vec<&'static str>,
}

const COV_RANGE: [f64; 2] = [0.05, 0.10];

fn record(lo: f64, hi: f64, mean: f64) -> ParamRecord {
    ParamRecord {
        support: [lo, hi],
        mean,
        cov_range: COV_RANGE,
    }
}

fn sizes(pairs: &[(f64, usize)]) -> Vec<SingleLoadSize> {
    pairs
        .iter()
        .map(|&(stress_mpa, specimens)| SingleLoadSize { stress_mpa, specimens })
        .collect()
}

pub fn builtin_constraints(id: DatasetId) -> ConstraintTable {
    match id {
        DatasetId::Tanaka => ConstraintTable {
            dataset_id: id,
            material: "Nickel-Silver Alloy",
            stress_high_mpa: 666.0,
            stress_low_mpa: 478.0,
            alpha: record(-1.0, 1.0, -0.03),
            b: record(0.0, 1.0, 0.80),
            q_ratio: QRatioRecord {
                support: [1.60, 2.60],
                mean: 2.00,
            },
            n1_schedule: vec![13300.0, 26500.0, 39800.0, 55400.0],
            single_load_sizes: sizes(&[(478.0, 200), (666.0, 200)]),
            two_load_size: 200,
            group_sizes: vec![50, 50, 50, 50],
            notes: vec![],
        },
        DatasetId::Xie045 => ConstraintTable {
            dataset_id: id,
            material: "0.45% Carbon Steel",
            stress_high_mpa: 331.0,
            stress_low_mpa: 309.0,
            alpha: record(0.0, 1.0, 0.34),
            b: record(0.0, 1.0, 0.45),
            q_ratio: QRatioRecord {
                support: [0.51, 0.76],
                mean: 0.63,
            },
            n1_schedule: vec![40300.0, 80600.0, 120900.0],
            single_load_sizes: sizes(&[(331.0, 18), (309.0, 16)]),
            two_load_size: 38,
            group_sizes: vec![13, 13, 12],
            notes: vec![],
        },
        DatasetId::Xie16mn => ConstraintTable {
            dataset_id: id,
            material: "16 Mn Steel Alloy",
            stress_high_mpa: 394.0,
            stress_low_mpa: 373.0,
            alpha: record(0.0, 1.0, 0.50),
            b: record(0.0, 1.0, 0.50),
            q_ratio: QRatioRecord {
                support: [1.50, 1.98],
                mean: 1.74,
            },
            n1_schedule: vec![26000.0, 44000.0, 75000.0],
            single_load_sizes: sizes(&[(373.0, 15), (394.0, 15)]),
            two_load_size: 30,
            group_sizes: vec![10, 10, 10],
            notes: vec!["two-load total of 30 specimens and three batches of 10 each are both recorded; they agree"],
        },
    }
}

/// Assumed single-level life means for the knee-probability protocol. The
/// reference datasets publish no life statistics, so these are assumptions,
/// documented per dataset in the fixture that carries them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeAssumption {
    pub n1_mean: f64,
    pub n2_mean: f64,
    #[serde(default)]
    pub rationale: String,
}

/// Knee-probability protocol: built-in α and B marginals plus assumed
/// life marginals (MaxEnt on [0, ∞) with a uniformly drawn COV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeProtocol {
    #[serde(default)]
    pub description: String,
    pub cov_range: [f64; 2],
    pub n_samples: usize,
    pub seed: u64,
    pub beta1: Vec<f64>,
    pub datasets: BTreeMap<DatasetId, LifeAssumption>,
}

impl KneeProtocol {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&read(path.as_ref())?)?)
    }

    pub fn life_specs(&self, id: DatasetId) -> Result<(MarginalSpec, MarginalSpec)> {
        let a = self
            .datasets
            .get(&id)
            .ok_or_else(|| Error::invalid(format!("protocol has no life assumption for {}", id.name())))?;
        let [lo, hi] = self.cov_range;
        Ok((
            MarginalSpec::hierarchical(0.0, f64::INFINITY, a.n1_mean, lo, hi),
            MarginalSpec::hierarchical(0.0, f64::INFINITY, a.n2_mean, lo, hi),
        ))
    }

    /// Marginal specs of the DLDR model for `id`.
    pub fn specs(&self, id: DatasetId) -> Result<BTreeMap<String, MarginalSpec>> {
        let t = builtin_constraints(id);
        let (n1, n2) = self.life_specs(id)?;
        Ok(BTreeMap::from([
            ("N1".to_string(), n1),
            ("N2".to_string(), n2),
            ("alpha".to_string(), t.alpha.to_spec()),
            ("B".to_string(), t.b.to_spec()),
        ]))
    }

    pub fn model(&self, id: DatasetId) -> Result<InputJointModel> {
        build_input_model(&self.specs(id)?, ModelKind::Dldr, &BTreeMap::new())
    }
}

/// Synthetic stand-in for one reference dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub high: SingleLoadDataset,
    pub low: SingleLoadDataset,
    pub two_load: TwoLoadDataset,
}

/// Draws synthetic lifetimes for `id` from the protocol model: single-level
/// lives from the N1 and N2 marginals, and one DLDR specimen per two-load
/// observation with its own (N1, N2, α, B). Draws that fail in the first
/// stage or whose knee leaves the unit square are skipped. Cycle counts are
/// rounded to integers.
pub fn synthesize(id: DatasetId, protocol: &KneeProtocol, seed: u64) -> Result<SyntheticSet> {
    let t = builtin_constraints(id);
    let model = protocol.model(id)?;
    let size = |stress: f64| {
        t.single_load_sizes
            .iter()
            .find(|s| s.stress_mpa == stress)
            .map(|s| s.specimens)
            .expect("sizes cover both stress levels")
    };
    let (nh, nl) = (size(t.stress_high_mpa), size(t.stress_low_mpa));
    let pool = 8 * (nh.max(nl) + t.two_load_size);
    let r = run(&model, &t.n1_schedule, pool, seed)?;
    let col = |name: &str| r.column(name).expect("dldr run has lives").to_vec();
    let (l1, l2) = (col("N1"), col("N2"));

    let mut cursor = 0;
    let mut groups = Vec::with_capacity(t.n1_schedule.len());
    for (j, (&n1, &g)) in t.n1_schedule.iter().zip(&t.group_sizes).enumerate() {
        let mut observations = Vec::with_capacity(g);
        while observations.len() < g {
            if cursor == pool {
                return Err(Error::Domain("too few valid synthetic specimens".into()));
            }
            let v = r.n2[j][cursor];
            if r.flags[cursor] == 0 && v.is_finite() && v >= 1.0 {
                observations.push(v.round());
            }
            cursor += 1;
        }
        groups.push(Group { n1, observations });
    }
    let material = t.material.to_string();
    let single = |stress: f64, lives: &[f64], n: usize| SingleLoadDataset {
        material: material.clone(),
        stress: Some(stress),
        lifetimes: lives.iter().take(n).map(|v| v.round()).collect(),
    };
    Ok(SyntheticSet {
        high: single(t.stress_high_mpa, &l1, nh),
        low: single(t.stress_low_mpa, &l2, nl),
        two_load: TwoLoadDataset {
            material: material.clone(),
            stress_high: Some(t.stress_high_mpa),
            stress_low: Some(t.stress_low_mpa),
            groups,
        },
    })
}

/// Comment block that marks a synthetic CSV file.
pub fn synthetic_header(id: DatasetId, seed: u64, what: &str) -> String {
    format!(
        "SYNTHETIC DATA: not experimental measurements.\n\
         {what} for dataset '{}', drawn by dldr::data::synthesize with seed {seed}\n\
         from the built-in alpha and B marginals and the assumed life means in\n\
         fixtures/knee_protocol.json.",
        id.name()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_tables() {
        let t = builtin_constraints(DatasetId::Tanaka);
        assert_eq!(t.alpha.mean, -0.03);
        assert_eq!(t.alpha.support, [-1.0, 1.0]);
        assert_eq!((t.b.mean, t.b.support), (0.80, [0.0, 1.0]));
        assert_eq!((t.q_ratio.mean, t.q_ratio.support), (2.00, [1.60, 2.60]));
        assert_eq!(t.n1_schedule, [13300.0, 26500.0, 39800.0, 55400.0]);
        assert_eq!((t.single_load_sizes[0].specimens, t.single_load_sizes[1].specimens, t.two_load_size), (200, 200, 200));
        assert_eq!(t.group_sizes, [50; 4]);

        let x = builtin_constraints(DatasetId::Xie045);
        assert_eq!((x.alpha.mean, x.alpha.support), (0.34, [0.0, 1.0]));
        assert_eq!((x.b.mean, x.b.support), (0.45, [0.0, 1.0]));
        assert_eq!((x.q_ratio.mean, x.q_ratio.support), (0.63, [0.51, 0.76]));
        assert_eq!(x.n1_schedule, [40300.0, 80600.0, 120900.0]);
        assert_eq!((x.single_load_sizes[0].specimens, x.single_load_sizes[1].specimens, x.two_load_size), (18, 16, 38));
        assert_eq!(x.group_sizes.iter().sum::<usize>(), 38);

        let m = builtin_constraints(DatasetId::Xie16mn);
        assert_eq!((m.alpha.mean, m.b.mean), (0.50, 0.50));
        assert_eq!((m.q_ratio.mean, m.q_ratio.support), (1.74, [1.50, 1.98]));
        assert_eq!(m.n1_schedule, [26000.0, 44000.0, 75000.0]);
        assert_eq!((m.single_load_sizes[0].specimens, m.single_load_sizes[1].specimens, m.two_load_size), (15, 15, 30));
        assert_eq!(m.group_sizes, [10; 3]);
        assert_eq!(m.notes.len(), 1);

        for id in DatasetId::ALL {
            let t = builtin_constraints(id);
            assert_eq!(t.alpha.cov_range, [0.05, 0.10]);
            assert_eq!(t.b.cov_range, [0.05, 0.10]);
            assert!(t.stress_high_mpa > t.stress_low_mpa);
            assert_eq!(DatasetId::parse(id.name()).unwrap(), id);
        }
        assert!(DatasetId::parse("unknown").is_err());
    }

    #[test]
    fn single_load_examples() {
        let d = parse_single_load("material,stress_mpa\nX,478\nlifetime\n1\n2\n3\n", "t").unwrap();
        assert_eq!(d.lifetimes, [1.0, 2.0, 3.0]);
        assert_eq!(d.stress, Some(478.0));
        let d = parse_single_load("# only numbers\n10\n20\n30\n", "t").unwrap();
        assert_eq!(d.lifetimes.len(), 3);
        assert_eq!(d.material, UNSPECIFIED_MATERIAL);
        match parse_single_load("lifetime\n5\n-4\n", "f.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_single_load("material,stress_mpa\nX,478\nlifetime\n", "t").is_err());
        assert!(parse_single_load("", "t").is_err());
        assert!(parse_single_load("12,13\n", "t").is_err());
    }

    #[test]
    fn two_load_examples() {
        let d = parse_two_load("n1,n2\n100,900\n100,850\n200,700\n", "t").unwrap();
        assert_eq!(d.groups.len(), 2);
        assert_eq!(d.groups[0].observations, [900.0, 850.0]);
        let d = parse_two_load("200,700\n100,900\n100,850\n", "t").unwrap();
        assert_eq!(d.groups[0].n1, 100.0);
        assert_eq!(d.groups[1].observations, [700.0]);
        match parse_two_load("n1,n2\n100,900\n\n# c\n100,0\n", "g.csv") {
            Err(Error::Parse { line, path, .. }) => assert_eq!((line, path.as_str()), (5, "g.csv")),
            other => panic!("{other:?}"),
        }
        assert!(parse_two_load("material,stress_high_mpa,stress_low_mpa\nX,300,400\n1,2\n", "t").is_err());
        let d = parse_two_load("n1,n2\n100,900\n100,850\n200,700\n", "t").unwrap();
        assert_eq!(d.mean_points(), [(100.0, 875.0), (200.0, 700.0)]);
    }

    #[test]
    fn round_trip_with_metadata_and_comment() {
        let d = TwoLoadDataset {
            material: "Steel, quoted".into(),
            stress_high: Some(331.0),
            stress_low: Some(309.0),
            groups: vec![
                Group {
                    n1: 40300.0,
                    observations: vec![1.0e5, 123456.789],
                },
                Group {
                    n1: 80600.0,
                    observations: vec![0.1 + 0.2],
                },
            ],
        };
        let text = d.to_csv(Some("synthetic\nsecond line"));
        assert!(text.starts_with("# synthetic\n# second line\n"));
        assert_eq!(parse_two_load(&text, "t").unwrap(), d);
    }
}
