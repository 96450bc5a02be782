//! Signed products of trace-and-replace maps.
//!
//! A [`ReductionExpression`] is a formal product with one factor per party:
//! either `1 - [X_i]` (the complement of replacing the party's output) or
//! `[A_i X_i]` (replacing both of the party's systems), optionally times
//! bare replacements of further labels. Multiplying the product out gives a
//! signed sum of plain replacements, which [`signed_reduce`] evaluates. All
//! replacement maps commute, so the expansion order is irrelevant.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::label::{Role, SystemLabel, TensorSpace};
use crate::operator::LabeledOperator;

/// Per-party factor of a reduction expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartyFactor {
    /// `1 - [X_i]`: identity minus replacement of the party output.
    OneMinusX,
    /// `[A_i X_i]`: replacement of both party systems.
    Ax,
}

/// A signed product of replacement maps, addressed by party index.
#[derive(Clone, Debug, Default)]
pub struct ReductionExpression {
    factors: BTreeMap<usize, PartyFactor>,
    extra: Vec<SystemLabel>,
}

impl ReductionExpression {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_factor(mut self, party: usize, factor: PartyFactor) -> Self {
        self.factors.insert(party, factor);
        self
    }

    /// Append a bare replacement factor for `label`.
    pub fn with_replacement(mut self, label: SystemLabel) -> Self {
        self.extra.push(label);
        self
    }

    pub fn factors(&self) -> &BTreeMap<usize, PartyFactor> {
        &self.factors
    }

    fn find_label(space: &TensorSpace, party: usize, role: Role) -> Result<SystemLabel> {
        space
            .labels()
            .iter()
            .find(|l| l.party == party && l.role == role)
            .copied()
            .ok_or_else(|| {
                Error::UnknownLabel(format!("{}{party}", role.letter()))
            })
    }

    /// Multiply the product out against `space`: a list of `(sign, labels)`
    /// terms, one per choice in each `1 - [X_i]` factor.
    pub fn expand(&self, space: &TensorSpace) -> Result<Vec<(f64, Vec<SystemLabel>)>> {
        let mut base: Vec<SystemLabel> = Vec::new();
        for l in &self.extra {
            base.push(
                *space
                    .get(l)
                    .ok_or_else(|| Error::UnknownLabel(l.to_string()))?,
            );
        }
        let mut optional: Vec<SystemLabel> = Vec::new();
        for (&party, factor) in &self.factors {
            let x = Self::find_label(space, party, Role::X)?;
            match factor {
                PartyFactor::OneMinusX => optional.push(x),
                PartyFactor::Ax => {
                    base.push(Self::find_label(space, party, Role::A)?);
                    base.push(x);
                }
            }
        }
        let k = optional.len();
        let mut terms = Vec::with_capacity(1 << k);
        for mask in 0u32..(1 << k) {
            let mut labels = base.clone();
            for (j, l) in optional.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    labels.push(*l);
                }
            }
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            terms.push((sign, labels));
        }
        Ok(terms)
    }
}

/// Evaluate a reduction expression on an operator.
pub fn signed_reduce(op: &LabeledOperator, expr: &ReductionExpression) -> Result<LabeledOperator> {
    let terms = expr.expand(op.space())?;
    let mut acc = LabeledOperator::zeros(op.space().clone());
    for (sign, labels) in terms {
        let term = op.trace_and_replace(&labels)?;
        let signed = term.scale(num_complex::Complex64::new(sign, 0.0));
        acc = acc.add(&signed);
    }
    Ok(acc)
}
