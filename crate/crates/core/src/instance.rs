//! Self-describing text format for problem instances.
//!
//! ```text
//! # comment
//! n = 3
//! m = 2
//! k = 1
//! c = 1
//! d = 1
//! bound_a = 0.5168
//! bound_y = 0.3136
//! seed = 7
//! [a_bar]
//! <m rows of n numbers>
//! [y_bar]
//! <m numbers>
//! ```
//!
//! Optional sections `[x_true]`, `[a]`, `[y]`, `[delta_a]`, `[delta_y]`
//! carry the ground truth; missing perturbation sections default to the
//! difference between perturbed and clean data. Numbers are written with 17
//! significant digits, so writing and re-reading is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{support_of, DenseMatrix, GroundTruth, PerturbedProblem};

const SECTIONS: [&str; 7] = ["a_bar", "y_bar", "x_true", "a", "y", "delta_a", "delta_y"];

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub problem: PerturbedProblem,
    pub truth: Option<GroundTruth>,
    pub seed: Option<u64>,
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "[{name}]");
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

fn write_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "[{name}]");
    let line: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
    let _ = writeln!(out, "{}", line.join(" "));
}

struct Section {
    line: usize,
    values: Vec<f64>,
}

impl Instance {
    pub fn new(problem: PerturbedProblem, truth: Option<GroundTruth>, seed: Option<u64>) -> Self {
        Instance { problem, truth, seed }
    }

    pub fn to_text(&self) -> String {
        let p = &self.problem;
        let mut out = String::new();
        let _ = writeln!(out, "n = {}", p.n());
        let _ = writeln!(out, "m = {}", p.m());
        if let Some(t) = &self.truth {
            let _ = writeln!(out, "k = {}", t.k());
            let _ = writeln!(out, "c = {}", fmt_num(t.c));
            let _ = writeln!(out, "d = {}", fmt_num(t.d));
        }
        let _ = writeln!(out, "bound_a = {}", fmt_num(p.bound_a));
        let _ = writeln!(out, "bound_y = {}", fmt_num(p.bound_y));
        if let Some(s) = self.seed {
            let _ = writeln!(out, "seed = {s}");
        }
        write_matrix(&mut out, "a_bar", p.a_bar.as_matrix());
        write_vector(&mut out, "y_bar", &p.y_bar);
        if let Some(t) = &self.truth {
            write_vector(&mut out, "x_true", &t.x_true);
            write_matrix(&mut out, "a", t.a.as_matrix());
            write_vector(&mut out, "y", &t.y);
            write_matrix(&mut out, "delta_a", t.delta_a.as_matrix());
            write_vector(&mut out, "delta_y", &t.delta_y);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse { line: line_no, msg: format!("unknown section [{name}]") });
                }
                if sections.contains_key(name) {
                    return Err(Error::Parse { line: line_no, msg: format!("duplicate section [{name}]") });
                }
                sections.insert(name.to_string(), Section { line: line_no, values: Vec::new() });
                current = Some(name.to_string());
                continue;
            }
            match &current {
                None => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| Error::Parse { line: line_no, msg: "expected `key = value`".into() })?;
                    let key = key.trim().to_string();
                    if header.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
                        return Err(Error::Parse { line: line_no, msg: format!("duplicate key `{key}`") });
                    }
                }
                Some(name) => {
                    let sec = sections.get_mut(name).expect("section registered");
                    for tok in line.split_whitespace() {
                        let v: f64 = tok
                            .parse()
                            .map_err(|_| Error::Parse { line: line_no, msg: format!("bad number `{tok}`") })?;
                        sec.values.push(v);
                    }
                }
            }
        }

        let get_usize = |key: &str| -> Result<Option<usize>> {
            header
                .get(key)
                .map(|(l, v)| v.parse().map_err(|_| Error::Parse { line: *l, msg: format!("bad integer for `{key}`") }))
                .transpose()
        };
        let get_f64 = |key: &str| -> Result<Option<f64>> {
            header
                .get(key)
                .map(|(l, v)| v.parse().map_err(|_| Error::Parse { line: *l, msg: format!("bad number for `{key}`") }))
                .transpose()
        };
        for (key, (line, _)) in &header {
            if !["n", "m", "k", "c", "d", "bound_a", "bound_y", "seed"].contains(&key.as_str()) {
                return Err(Error::Parse { line: *line, msg: format!("unknown key `{key}`") });
            }
        }
        let missing = |key: &str| Error::Parse { line: 0, msg: format!("missing key `{key}`") };
        let n = get_usize("n")?.ok_or_else(|| missing("n"))?;
        let m = get_usize("m")?.ok_or_else(|| missing("m"))?;
        let bound_a = get_f64("bound_a")?.ok_or_else(|| missing("bound_a"))?;
        let bound_y = get_f64("bound_y")?.ok_or_else(|| missing("bound_y"))?;
        let seed = header
            .get("seed")
            .map(|(l, v)| v.parse::<u64>().map_err(|_| Error::Parse { line: *l, msg: "bad seed".into() }))
            .transpose()?;

        let take = |name: &str, len: usize| -> Result<Option<Vec<f64>>> {
            match sections.get(name) {
                None => Ok(None),
                Some(s) if s.values.len() == len => Ok(Some(s.values.clone())),
                Some(s) => Err(Error::Parse {
                    line: s.line,
                    msg: format!("[{name}] has {} numbers, expected {len}", s.values.len()),
                }),
            }
        };
        let need = |name: &str, len: usize| -> Result<Vec<f64>> {
            take(name, len)?.ok_or_else(|| Error::Parse { line: 0, msg: format!("missing section [{name}]") })
        };

        let a_bar = DenseMatrix::from_row_slice(m, n, &need("a_bar", m * n)?)?;
        let y_bar = DVector::from_vec(need("y_bar", m)?);
        let problem = PerturbedProblem::new(a_bar, y_bar, bound_a, bound_y)?;

        let truth = match take("x_true", n)? {
            None => None,
            Some(x) => {
                let x_true = DVector::from_vec(x);
                let a = DenseMatrix::from_row_slice(m, n, &need("a", m * n)?)?;
                let y = DVector::from_vec(need("y", m)?);
                let delta_a = match take("delta_a", m * n)? {
                    Some(v) => DenseMatrix::from_row_slice(m, n, &v)?,
                    None => DenseMatrix::new(problem.a_bar.as_matrix() - a.as_matrix())?,
                };
                let delta_y = take("delta_y", m)?.map(DVector::from_vec).unwrap_or_else(|| &problem.y_bar - &y);
                let support = support_of(x_true.as_slice());
                let mags = || support.iter().map(|&i| x_true[i].abs());
                let c = get_f64("c")?.unwrap_or_else(|| mags().fold(f64::INFINITY, f64::min));
                let d = get_f64("d")?.unwrap_or_else(|| mags().fold(0.0, f64::max));
                if let Some(k) = get_usize("k")? {
                    if k != support.len() {
                        return Err(Error::Parse {
                            line: header["k"].0,
                            msg: format!("k = {k} but x_true has {} nonzeros", support.len()),
                        });
                    }
                }
                let gt = GroundTruth { x_true, support, c, d, a, y, delta_a, delta_y };
                gt.validate()?;
                Some(gt)
            }
        };
        Ok(Instance { problem, truth, seed })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
