//! Plain-text model files.
//!
//! ```text
//! dwd-model v1
//! q 1
//! C 375
//! z_scale 4.2
//! label_negative -1
//! label_positive 1
//! beta 0.25
//! status Converged
//! iterations 81
//! ...
//! d 3
//! w
//! 0.5
//! -0.5
//! 0.7071067811865476
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a saved model
//! loads back bit for bit.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use dwd::ingest::LabelMap;
use dwd::model::Termination;
use dwd::{SolveStatus, TrainedModel};

use crate::error::{CliError, CliResult};

pub const HEADER: &str = "dwd-model v1";

const SCALAR_KEYS: [&str; 17] = [
    "q",
    "C",
    "z_scale",
    "label_negative",
    "label_positive",
    "beta",
    "status",
    "iterations",
    "psqmr_iterations",
    "double_count",
    "eta_p",
    "eta_d",
    "eta_c",
    "eta_gap",
    "primal_objective",
    "dual_objective",
    "d",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: TrainedModel,
    pub labels: LabelMap,
}

impl ModelFile {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let m = &self.model;
        let t = &m.termination;
        writeln!(out, "{HEADER}")?;
        writeln!(out, "q {}", m.q)?;
        writeln!(out, "C {}", m.c)?;
        writeln!(out, "z_scale {}", m.z_scale)?;
        writeln!(out, "label_negative {}", self.labels.negative)?;
        writeln!(out, "label_positive {}", self.labels.positive)?;
        writeln!(out, "beta {}", m.beta)?;
        writeln!(out, "status {}", t.status)?;
        writeln!(out, "iterations {}", t.iterations)?;
        writeln!(out, "psqmr_iterations {}", t.psqmr_iterations)?;
        writeln!(out, "double_count {}", t.double_count)?;
        writeln!(out, "eta_p {}", t.eta_p)?;
        writeln!(out, "eta_d {}", t.eta_d)?;
        writeln!(out, "eta_c {}", t.eta_c)?;
        writeln!(out, "eta_gap {}", t.eta_gap)?;
        writeln!(out, "primal_objective {}", t.primal_objective)?;
        writeln!(out, "dual_objective {}", t.dual_objective)?;
        writeln!(out, "d {}", m.w.len())?;
        writeln!(out, "w")?;
        for v in &m.w {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> CliResult<Self> {
        let mut lines = input.lines().enumerate();
        let bad = |line: usize, msg: String| CliError::Data(format!("model file line {line}: {msg}"));

        match lines.next() {
            Some((_, Ok(h))) if h.trim_end() == HEADER => {}
            Some((_, Ok(h))) => return Err(bad(1, format!("expected {HEADER:?}, found {h:?}"))),
            Some((_, Err(e))) => return Err(e.into()),
            None => return Err(CliError::Data("model file is empty".into())),
        }

        let mut fields: HashMap<String, String> = HashMap::new();
        let mut saw_w = false;
        for (i, line) in lines.by_ref() {
            let line = line?;
            let line = line.trim_end();
            if line == "w" {
                saw_w = true;
                break;
            }
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| bad(i + 1, format!("expected \"key value\", found {line:?}")))?;
            if !SCALAR_KEYS.contains(&key) {
                return Err(bad(i + 1, format!("unknown key {key:?}")));
            }
            if fields.insert(key.to_string(), value.to_string()).is_some() {
                return Err(bad(i + 1, format!("duplicate key {key:?}")));
            }
        }
        if !saw_w {
            return Err(CliError::Data("model file has no w section".into()));
        }
        for key in SCALAR_KEYS {
            if !fields.contains_key(key) {
                return Err(CliError::Data(format!("model file is missing {key:?}")));
            }
        }

        fn get<T: FromStr>(fields: &HashMap<String, String>, key: &str) -> CliResult<T> {
            fields[key]
                .parse()
                .map_err(|_| CliError::Data(format!("model file: cannot parse {key} = {:?}", fields[key])))
        }

        let d: usize = get(&fields, "d")?;
        let mut w = Vec::with_capacity(d);
        for (i, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| bad(i + 1, format!("weight {line:?} is not a number")))?;
            w.push(v);
        }
        if w.len() != d {
            return Err(CliError::Data(format!("model file declares d = {d} but lists {} weights", w.len())));
        }

        let status: SolveStatus = fields["status"]
            .parse()
            .map_err(|_| CliError::Data(format!("model file: unknown status {:?}", fields["status"])))?;
        let termination = Termination {
            status,
            iterations: get(&fields, "iterations")?,
            psqmr_iterations: get(&fields, "psqmr_iterations")?,
            double_count: get(&fields, "double_count")?,
            eta_p: get(&fields, "eta_p")?,
            eta_d: get(&fields, "eta_d")?,
            eta_c: get(&fields, "eta_c")?,
            eta_gap: get(&fields, "eta_gap")?,
            primal_objective: get(&fields, "primal_objective")?,
            dual_objective: get(&fields, "dual_objective")?,
        };
        Ok(ModelFile {
            model: TrainedModel {
                w,
                beta: get(&fields, "beta")?,
                q: get(&fields, "q")?,
                c: get(&fields, "C")?,
                z_scale: get(&fields, "z_scale")?,
                termination,
            },
            labels: LabelMap {
                negative: get(&fields, "label_negative")?,
                positive: get(&fields, "label_positive")?,
            },
        })
    }
}
