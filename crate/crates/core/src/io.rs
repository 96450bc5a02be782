//! Bit-exact JSON and CSV interchange.
//!
//! Operators travel as a label list plus a row-major matrix of `[re, im]`
//! pairs; classical tables as nested probability arrays indexed
//! `table[a][x]` over flat output/input tuples. Readers validate structure
//! (shapes, finiteness, known roles) and leave semantic checks (positivity,
//! normalization, channel-ness) to the types themselves, so a structurally
//! sound file with bad physics reads fine and is rejected downstream.

use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::ClassicalChannel;
use crate::decompose::{ClassicalDecomposition, QuantumDecomposition};
use crate::error::{Error, Result};
use crate::explore::DeterministicChannel;
use crate::label::{Role, SystemLabel, TensorSpace};
use crate::operator::{CMatrix, LabeledOperator};

fn is_zero_tag(tag: &u32) -> bool {
    *tag == 0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelSpec {
    pub party: usize,
    pub role: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "is_zero_tag")]
    pub tag: u32,
}

impl LabelSpec {
    fn to_label(&self) -> Result<SystemLabel> {
        let mut chars = self.role.chars();
        let (Some(c), None) = (chars.next(), chars.next()) else {
            return Err(Error::Malformed(format!("role {:?} is not a letter", self.role)));
        };
        let role = Role::from_letter(c)
            .ok_or_else(|| Error::Malformed(format!("unknown role {:?}", self.role)))?;
        if self.dim == 0 {
            return Err(Error::ZeroDimension(format!(
                "label {}{} with dimension 0",
                self.role, self.party
            )));
        }
        Ok(SystemLabel::new(self.party, role, self.dim).with_tag(self.tag))
    }

    fn from_label(l: &SystemLabel) -> Self {
        LabelSpec {
            party: l.party,
            role: l.role.letter().to_string(),
            dim: l.dim,
            tag: l.tag,
        }
    }
}

/// A labeled operator as a portable JSON document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorFile {
    pub labels: Vec<LabelSpec>,
    /// Row-major `[re, im]` entries; side length is the product of `dim`s.
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl OperatorFile {
    pub fn from_operator(op: &LabeledOperator) -> Self {
        let d = op.space().total_dim();
        let m = op.matrix();
        OperatorFile {
            labels: op.space().labels().iter().map(LabelSpec::from_label).collect(),
            matrix: (0..d)
                .map(|r| (0..d).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        }
    }

    pub fn to_operator(&self) -> Result<LabeledOperator> {
        let labels = self
            .labels
            .iter()
            .map(LabelSpec::to_label)
            .collect::<Result<Vec<_>>>()?;
        let space = TensorSpace::new(labels)?;
        let d = space.total_dim();
        if self.matrix.len() != d || self.matrix.iter().any(|row| row.len() != d) {
            return Err(Error::Malformed(format!(
                "matrix is not {d} x {d} (dims multiply to {d})"
            )));
        }
        for row in &self.matrix {
            for [re, im] in row {
                if !re.is_finite() || !im.is_finite() {
                    return Err(Error::Malformed(format!("non-finite entry [{re}, {im}]")));
                }
            }
        }
        let m = CMatrix::from_fn(d, d, |r, c| {
            let [re, im] = self.matrix[r][c];
            C64::new(re, im)
        });
        LabeledOperator::new(space, m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

/// A classical conditional-probability table as JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalChannelFile {
    pub outputs: Vec<usize>,
    pub inputs: Vec<usize>,
    /// `table[a][x]` over flat row-major output and input tuples.
    pub table: Vec<Vec<f64>>,
}

impl ClassicalChannelFile {
    pub fn from_channel(ch: &ClassicalChannel) -> Self {
        let nx = ch.num_inputs();
        ClassicalChannelFile {
            outputs: ch.out_dims().to_vec(),
            inputs: ch.in_dims().to_vec(),
            table: ch.probs().chunks(nx).map(|row| row.to_vec()).collect(),
        }
    }

    pub fn to_channel(&self) -> Result<ClassicalChannel> {
        let na: usize = self.outputs.iter().product();
        let nx: usize = self.inputs.iter().product();
        if self.table.len() != na || self.table.iter().any(|row| row.len() != nx) {
            return Err(Error::Malformed(format!(
                "table is not {na} x {nx} (alphabet products)"
            )));
        }
        if let Some(bad) = self.table.iter().flatten().find(|p| !p.is_finite()) {
            return Err(Error::Malformed(format!("non-finite entry {bad}")));
        }
        ClassicalChannel::new(
            self.outputs.clone(),
            self.inputs.clone(),
            self.table.iter().flatten().copied().collect(),
        )
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

/// A quantum one-way decomposition as JSON: the two stages plus the shared
/// memory size; the memory label is the `M`-role label of either stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantumDecompositionFile {
    pub party: usize,
    pub memory_dim: usize,
    pub residual: f64,
    pub encoder: OperatorFile,
    pub decoder: OperatorFile,
}

impl QuantumDecompositionFile {
    pub fn from_decomposition(d: &QuantumDecomposition) -> Self {
        QuantumDecompositionFile {
            party: d.party,
            memory_dim: d.memory.dim,
            residual: d.residual,
            encoder: OperatorFile::from_operator(d.encoder.choi()),
            decoder: OperatorFile::from_operator(d.decoder.choi()),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

/// A classical one-way decomposition as JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalDecompositionFile {
    pub party: usize,
    pub memory_dim: usize,
    pub residual: f64,
    pub encoder: ClassicalChannelFile,
    pub decoder: ClassicalChannelFile,
}

impl ClassicalDecompositionFile {
    pub fn from_decomposition(d: &ClassicalDecomposition) -> Self {
        ClassicalDecompositionFile {
            party: d.party,
            memory_dim: d.memory_dim,
            residual: d.residual,
            encoder: ClassicalChannelFile::from_channel(&d.encoder),
            decoder: ClassicalChannelFile::from_channel(&d.decoder),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| {
        Error::Malformed(format!("cannot read {}: {e}", path.as_ref().display()))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Malformed(format!("cannot parse {}: {e}", path.as_ref().display()))
    })
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Malformed(format!("cannot serialize: {e}")))?;
    text.push('\n');
    fs::write(path.as_ref(), text).map_err(|e| {
        Error::Malformed(format!("cannot write {}: {e}", path.as_ref().display()))
    })
}

fn table_header(id: &str, n_out: usize, n_in: usize) -> String {
    let mut cols = vec![id.to_string()];
    for a in 0..n_out {
        for x in 0..n_in {
            cols.push(format!("p_a{a}_x{x}"));
        }
    }
    cols.join(",")
}

/// Census tables as RFC 4180 CSV, one row per deterministic channel with
/// its integer code first.
pub fn census_csv(census: &[DeterministicChannel]) -> String {
    let mut out = String::new();
    if let Some(first) = census.first() {
        let n_out: usize = first.out_dims().iter().product();
        let n_in: usize = first.in_dims().iter().product();
        out.push_str(&table_header("code", n_out, n_in));
        out.push_str("\r\n");
    }
    for det in census {
        let ch = det.to_classical();
        let mut cols = vec![det.code().to_string()];
        cols.extend(ch.probs().iter().map(|p| p.to_string()));
        out.push_str(&cols.join(","));
        out.push_str("\r\n");
    }
    out
}

/// Probability tables as RFC 4180 CSV, one row per table, indexed.
pub fn tables_csv(tables: &[ClassicalChannel]) -> String {
    let mut out = String::new();
    if let Some(first) = tables.first() {
        out.push_str(&table_header(
            "index",
            first.num_outputs(),
            first.num_inputs(),
        ));
        out.push_str("\r\n");
    }
    for (k, ch) in tables.iter().enumerate() {
        let mut cols = vec![k.to_string()];
        cols.extend(ch.probs().iter().map(|p| p.to_string()));
        out.push_str(&cols.join(","));
        out.push_str("\r\n");
    }
    out
}
