//! System labels and ordered tensor spaces.
//!
//! Every tensor factor carries a [`SystemLabel`] identifying whose system it
//! is and which role it plays. Operators are always accompanied by an ordered
//! list of labels (a [`TensorSpace`]); all structural operations address
//! factors by label rather than by position, so callers never track factor
//! order by hand.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role a tensor factor plays.
///
/// `A` is the system a party receives, `X` the system it sends back. `P` and
/// `F` are optional global extensions (an input handed in before all parties
/// act and an output kept after they are done), and `M` is internal memory
/// produced by decompositions. The declaration order is the canonical role
/// order used when sorting spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    X,
    P,
    F,
    M,
}

impl Role {
    pub fn letter(self) -> char {
        match self {
            Role::A => 'A',
            Role::X => 'X',
            Role::P => 'P',
            Role::F => 'F',
            Role::M => 'M',
        }
    }

    pub fn from_letter(c: char) -> Option<Role> {
        match c {
            'A' => Some(Role::A),
            'X' => Some(Role::X),
            'P' => Some(Role::P),
            'F' => Some(Role::F),
            'M' => Some(Role::M),
            _ => None,
        }
    }
}

/// One tensor factor: `(party, role, tag)` identifies the system, `dim` its
/// dimension. Party `0` is reserved for global systems (roles `P`/`F`); the
/// `tag` disambiguates multiple systems with the same party and role, as
/// produced by channel insertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemLabel {
    pub party: usize,
    pub role: Role,
    pub dim: usize,
    #[serde(default)]
    pub tag: u32,
}

/// Identity of a label, without the dimension.
pub type LabelKey = (usize, Role, u32);

impl SystemLabel {
    pub fn new(party: usize, role: Role, dim: usize) -> Self {
        SystemLabel {
            party,
            role,
            dim,
            tag: 0,
        }
    }

    pub fn with_tag(mut self, tag: u32) -> Self {
        self.tag = tag;
        self
    }

    /// Party input system `A_party`.
    pub fn a(party: usize, dim: usize) -> Self {
        SystemLabel::new(party, Role::A, dim)
    }

    /// Party output system `X_party`.
    pub fn x(party: usize, dim: usize) -> Self {
        SystemLabel::new(party, Role::X, dim)
    }

    /// Global past extension.
    pub fn p(dim: usize) -> Self {
        SystemLabel::new(0, Role::P, dim)
    }

    /// Global future extension.
    pub fn f(dim: usize) -> Self {
        SystemLabel::new(0, Role::F, dim)
    }

    /// Memory system attached to `party`.
    pub fn mem(party: usize, dim: usize) -> Self {
        SystemLabel::new(party, Role::M, dim)
    }

    pub fn key(&self) -> LabelKey {
        (self.party, self.role, self.tag)
    }

    /// Canonical order: party, then role, then tag.
    fn sort_key(&self) -> (usize, Role, u32, usize) {
        (self.party, self.role, self.tag, self.dim)
    }
}

impl PartialOrd for SystemLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SystemLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.role.letter())?;
        if self.party != 0 {
            write!(f, "{}", self.party)?;
        }
        if self.tag != 0 {
            write!(f, "#{}", self.tag)?;
        }
        Ok(())
    }
}

/// An ordered list of distinct labels; the space an operator lives on.
///
/// Flat indices are row-major over the factors in list order: the first
/// label varies slowest. The empty space has total dimension one and hosts
/// scalars.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpace {
    labels: Vec<SystemLabel>,
}

impl TensorSpace {
    pub fn new(labels: Vec<SystemLabel>) -> Result<Self> {
        for (i, l) in labels.iter().enumerate() {
            if l.dim == 0 {
                return Err(Error::ZeroDimension(l.to_string()));
            }
            for m in &labels[..i] {
                if m.key() == l.key() {
                    return Err(Error::DuplicateLabel(l.to_string()));
                }
            }
        }
        Ok(TensorSpace { labels })
    }

    pub fn empty() -> Self {
        TensorSpace { labels: Vec::new() }
    }

    pub fn single(label: SystemLabel) -> Self {
        TensorSpace {
            labels: vec![label],
        }
    }

    pub fn labels(&self) -> &[SystemLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.labels.iter().map(|l| l.dim).product()
    }

    /// Position of a label, matched by `(party, role, tag)`.
    pub fn position(&self, label: &SystemLabel) -> Option<usize> {
        self.labels.iter().position(|l| l.key() == label.key())
    }

    pub fn contains(&self, label: &SystemLabel) -> bool {
        self.position(label).is_some()
    }

    /// The label stored for a key, with its authoritative dimension.
    pub fn get(&self, label: &SystemLabel) -> Option<&SystemLabel> {
        self.position(label).map(|i| &self.labels[i])
    }

    /// Same label set, sorted canonically.
    pub fn canonical(&self) -> TensorSpace {
        let mut labels = self.labels.clone();
        labels.sort();
        TensorSpace { labels }
    }

    /// Concatenation; errors if the label sets overlap.
    pub fn concat(&self, other: &TensorSpace) -> Result<TensorSpace> {
        for l in &other.labels {
            if self.contains(l) {
                return Err(Error::OverlappingLabels(l.to_string()));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        TensorSpace::new(labels)
    }

    /// The space with the given labels removed (order of the rest kept).
    pub fn without(&self, drop: &[SystemLabel]) -> TensorSpace {
        let labels = self
            .labels
            .iter()
            .filter(|l| !drop.iter().any(|d| d.key() == l.key()))
            .cloned()
            .collect();
        TensorSpace { labels }
    }

    /// Restriction to the given labels, in this space's order.
    pub fn restricted(&self, keep: &[SystemLabel]) -> TensorSpace {
        let labels = self
            .labels
            .iter()
            .filter(|l| keep.iter().any(|k| k.key() == l.key()))
            .cloned()
            .collect();
        TensorSpace { labels }
    }

    /// Row-major strides for the factor list.
    pub fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        strides
    }

    pub fn display(&self) -> String {
        self.labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}
