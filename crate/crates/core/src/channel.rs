//! Multipartite channels and parity-erasure checks.
//!
//! A channel here runs opposite to the local parties: it consumes the party
//! outputs `X_1 ... X_N` (plus an optional global past) and produces the
//! party inputs `A_1 ... A_N` (plus an optional global future). The channel
//! erases parity when, for every nonempty party subset `I`, the joint state
//! delivered to the parties in `I` carries no trace of the parity of bits
//! the parties in `I` encoded into their outputs, whatever the other parties
//! feed in.
//!
//! Two independent quantum checkers are provided and kept separate on
//! purpose. [`parity_erasure_quantum`] evaluates the subset reduction
//! conditions on the Choi matrix; [`parity_erasure_quantum_direct`] feeds
//! encoded states through the channel and inspects signed sums of marginal
//! outputs. Their per-subset residuals differ (the direct probe fixes the
//! other parties' states where the Choi reduction averages them) but their
//! overall verdicts agree on every valid channel.
//!
//! # Finite probe families suffice
//!
//! The definitions quantify over all encodings and all states for the other
//! parties. The checkers run over finite families instead, which is enough
//! by linearity: the signed sum depends on each encoding pair only through
//! the difference `rho_0 - rho_1`, a traceless Hermitian operator, and is
//! linear in it, so a family of pairs whose differences span the traceless
//! Hermitian space witnesses every violation ([`spanning_state_pairs`]).
//! Likewise the dependence on each fixed state is linear, so states forming
//! an operator basis ([`tomography_states`]) cover all density matrices.
//! The classical case is the diagonal restriction: letter pairs span the
//! distribution differences and single letters are the extreme points of
//! the simplex. A randomized-encoding fuzz test backs this reduction.

use itertools::Itertools;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Role, SystemLabel, TensorSpace};
use crate::operator::{choi_measure_prepare, CMatrix, LabeledOperator};
use crate::process::{pair, PartySubset, ProcessMatrix};
use crate::reduction::{signed_reduce, PartyFactor, ReductionExpression};

/// Tolerance at which the quantum checkers insist their input is a channel.
pub const CHANNEL_VALIDITY_TOL: f64 = 1e-6;

/// A conditional probability table `p(a_1..a_N | x_1..x_N)` over finite
/// per-party alphabets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalChannel {
    out_dims: Vec<usize>,
    in_dims: Vec<usize>,
    /// Flat table, row-major over `a` then `x` (party 1 slowest).
    probs: Vec<f64>,
}

fn flat_index(dims: &[usize], point: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), point.len());
    let mut idx = 0;
    for (d, p) in dims.iter().zip(point) {
        debug_assert!(p < d);
        idx = idx * d + p;
    }
    idx
}

/// All points of the box with the given per-axis sizes, row-major order.
pub fn grid_points(dims: &[usize]) -> Vec<Vec<usize>> {
    if dims.is_empty() {
        return vec![Vec::new()];
    }
    dims.iter()
        .map(|&d| 0..d)
        .multi_cartesian_product()
        .collect()
}

impl ClassicalChannel {
    pub fn new(out_dims: Vec<usize>, in_dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if out_dims.iter().chain(&in_dims).any(|&d| d == 0) {
            return Err(Error::ZeroDimension("alphabet size 0".into()));
        }
        let na: usize = out_dims.iter().product();
        let nx: usize = in_dims.iter().product();
        if probs.len() != na * nx {
            return Err(Error::InvalidTable(format!(
                "table has {} entries, expected {}",
                probs.len(),
                na * nx
            )));
        }
        Ok(ClassicalChannel {
            out_dims,
            in_dims,
            probs,
        })
    }

    /// Build a table entrywise from `f(a, x)`.
    pub fn from_fn(
        out_dims: Vec<usize>,
        in_dims: Vec<usize>,
        mut f: impl FnMut(&[usize], &[usize]) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::new();
        for a in grid_points(&out_dims) {
            for x in grid_points(&in_dims) {
                probs.push(f(&a, &x));
            }
        }
        ClassicalChannel::new(out_dims, in_dims, probs)
    }

    /// Number of output slots. Only the party-paired checks require one
    /// input slot per output slot; see [`Self::ensure_party_table`].
    pub fn n(&self) -> usize {
        self.out_dims.len()
    }

    /// Party count, requiring one input alphabet per output alphabet.
    pub fn ensure_party_table(&self) -> Result<usize> {
        if self.out_dims.len() != self.in_dims.len() {
            return Err(Error::InvalidTable(format!(
                "{} output alphabets vs {} input alphabets",
                self.out_dims.len(),
                self.in_dims.len()
            )));
        }
        Ok(self.out_dims.len())
    }

    pub fn out_dims(&self) -> &[usize] {
        &self.out_dims
    }

    pub fn in_dims(&self) -> &[usize] {
        &self.in_dims
    }

    pub fn num_inputs(&self) -> usize {
        self.in_dims.iter().product()
    }

    pub fn num_outputs(&self) -> usize {
        self.out_dims.iter().product()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, a: &[usize], x: &[usize]) -> f64 {
        self.probs[flat_index(&self.out_dims, a) * self.num_inputs() + flat_index(&self.in_dims, x)]
    }

    /// Nonnegativity and per-input normalization.
    pub fn check(&self, tol: f64) -> Result<()> {
        if let Some(p) = self.probs.iter().find(|&&p| p < -tol || !p.is_finite()) {
            return Err(Error::InvalidTable(format!("entry {p} out of range")));
        }
        let nx = self.num_inputs();
        for xf in 0..nx {
            let total: f64 = (0..self.num_outputs())
                .map(|af| self.probs[af * nx + xf])
                .sum();
            if (total - 1.0).abs() > tol {
                return Err(Error::InvalidTable(format!(
                    "input column {xf} sums to {total}"
                )));
            }
        }
        Ok(())
    }

    /// Marginal probability of the outputs of the listed parties (1-based),
    /// other outputs summed away.
    pub fn marginal(&self, parties: &[usize], a_part: &[usize], x: &[usize]) -> f64 {
        let free: Vec<usize> = (1..=self.n()).filter(|i| !parties.contains(i)).collect();
        let free_dims: Vec<usize> = free.iter().map(|&i| self.out_dims[i - 1]).collect();
        let mut total = 0.0;
        for rest in grid_points(&free_dims) {
            let mut a = vec![0usize; self.n()];
            for (k, &i) in parties.iter().enumerate() {
                a[i - 1] = a_part[k];
            }
            for (k, &i) in free.iter().enumerate() {
                a[i - 1] = rest[k];
            }
            total += self.prob(&a, x);
        }
        total
    }
}

/// Per nonempty party subset, the worst violation of its parity condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParityReport {
    pub subsets: Vec<(PartySubset, f64)>,
    pub tol: f64,
    pub verdict: bool,
}

impl ParityReport {
    fn from_residuals(subsets: Vec<(PartySubset, f64)>, tol: f64) -> Self {
        let verdict = subsets.iter().all(|(_, r)| *r <= tol);
        ParityReport {
            subsets,
            tol,
            verdict,
        }
    }

    pub fn residual(&self, subset: &PartySubset) -> Option<f64> {
        self.subsets
            .iter()
            .find(|(s, _)| s == subset)
            .map(|(_, r)| *r)
    }

    pub fn worst(&self) -> Option<&(PartySubset, f64)> {
        self.subsets
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

/// Classical parity-erasure check: for every nonempty subset `I`, every
/// choice of an input letter pair per party in `I`, and every fixed input
/// letter for the parties outside, the signed sum over the pair choices of
/// the marginal distribution of `I`'s outputs must vanish.
pub fn parity_erasure_classical(ch: &ClassicalChannel, tol: f64) -> Result<ParityReport> {
    ch.check(tol.max(1e-9))?;
    let n = ch.ensure_party_table()?;
    let mut subsets = Vec::new();
    for subset in PartySubset::all_nonempty(n) {
        let inside = subset.parties();
        let outside: Vec<usize> = (1..=n).filter(|i| !subset.contains(*i)).collect();
        // all (x0, x1) letter pairs per inside party
        let pair_choices: Vec<Vec<(usize, usize)>> = inside
            .iter()
            .map(|&i| {
                let d = ch.in_dims[i - 1];
                (0..d).tuple_combinations().collect()
            })
            .collect();
        let outside_dims: Vec<usize> = outside.iter().map(|&j| ch.in_dims[j - 1]).collect();
        let inside_out_dims: Vec<usize> = inside.iter().map(|&i| ch.out_dims[i - 1]).collect();
        let mut worst = 0.0f64;
        for pairs in pair_choices.iter().multi_cartesian_product() {
            for fixed in grid_points(&outside_dims) {
                for a_part in grid_points(&inside_out_dims) {
                    let mut signed = 0.0;
                    for bits in 0..(1usize << inside.len()) {
                        let mut x = vec![0usize; n];
                        let mut sign = 1.0;
                        for (k, &i) in inside.iter().enumerate() {
                            let (x0, x1) = *pairs[k];
                            if bits & (1 << k) != 0 {
                                x[i - 1] = x1;
                                sign = -sign;
                            } else {
                                x[i - 1] = x0;
                            }
                        }
                        for (k, &j) in outside.iter().enumerate() {
                            x[j - 1] = fixed[k];
                        }
                        signed += sign * ch.marginal(inside, &a_part, &x);
                    }
                    worst = worst.max(signed.abs());
                }
            }
        }
        subsets.push((subset, worst));
    }
    Ok(ParityReport::from_residuals(subsets, tol))
}

/// Report from [`weak_parity_check`]: the signed-sum form with the other
/// parties' inputs held fixed, and the coarser form conditioning only on
/// the parity under uniform inputs. The two are reported side by side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakParityReport {
    pub strong: ParityReport,
    pub coarse: ParityReport,
}

impl WeakParityReport {
    pub fn verdict(&self) -> bool {
        self.strong.verdict && self.coarse.verdict
    }
}

/// Weak parity check for binary-input tables: the joint outcome of the
/// parties in `I` must be independent of the parity of their input bits.
pub fn weak_parity_check(ch: &ClassicalChannel, tol: f64) -> Result<WeakParityReport> {
    if ch.in_dims.iter().any(|&d| d != 2) {
        return Err(Error::InvalidTable(format!(
            "weak parity check needs binary inputs, got {:?}",
            ch.in_dims
        )));
    }
    ch.check(tol.max(1e-9))?;
    let n = ch.ensure_party_table()?;
    let mut strong = Vec::new();
    let mut coarse = Vec::new();
    for subset in PartySubset::all_nonempty(n) {
        let inside = subset.parties();
        let outside: Vec<usize> = (1..=n).filter(|i| !subset.contains(*i)).collect();
        let outside_dims: Vec<usize> = outside.iter().map(|&j| ch.in_dims[j - 1]).collect();
        let inside_out_dims: Vec<usize> = inside.iter().map(|&i| ch.out_dims[i - 1]).collect();
        let mut worst_strong = 0.0f64;
        for fixed in grid_points(&outside_dims) {
            for a_part in grid_points(&inside_out_dims) {
                let mut signed = 0.0;
                for bits in 0..(1usize << inside.len()) {
                    let mut x = vec![0usize; n];
                    for (k, &i) in inside.iter().enumerate() {
                        x[i - 1] = (bits >> k) & 1;
                    }
                    for (k, &j) in outside.iter().enumerate() {
                        x[j - 1] = fixed[k];
                    }
                    let sign = if (bits.count_ones() & 1) == 0 { 1.0 } else { -1.0 };
                    signed += sign * ch.marginal(inside, &a_part, &x);
                }
                worst_strong = worst_strong.max(signed.abs());
            }
        }
        // coarse form: condition only on the parity, inputs uniform
        let mut worst_coarse = 0.0f64;
        for a_part in grid_points(&inside_out_dims) {
            let mut by_parity = [0.0f64; 2];
            let mut counts = [0usize; 2];
            for x in grid_points(&ch.in_dims) {
                let parity = inside.iter().map(|&i| x[i - 1]).sum::<usize>() & 1;
                by_parity[parity] += ch.marginal(inside, &a_part, &x);
                counts[parity] += 1;
            }
            let diff = by_parity[0] / counts[0] as f64 - by_parity[1] / counts[1] as f64;
            worst_coarse = worst_coarse.max(diff.abs());
        }
        strong.push((subset.clone(), worst_strong));
        coarse.push((subset, worst_coarse));
    }
    Ok(WeakParityReport {
        strong: ParityReport::from_residuals(strong, tol),
        coarse: ParityReport::from_residuals(coarse, tol),
    })
}

/// A quantum channel as a labeled Choi matrix plus the set of labels it
/// consumes. Party outputs (`X`) and global pasts (`P`) are inputs; party
/// inputs (`A`) and global futures (`F`) are outputs; memories (`M`) may sit
/// on either side.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    choi: LabeledOperator,
    inputs: Vec<SystemLabel>,
}

impl QuantumChannel {
    pub fn new(choi: LabeledOperator, inputs: &[SystemLabel]) -> Result<Self> {
        let mut ins = Vec::new();
        for l in inputs {
            match choi.space().get(l) {
                Some(found) if found.dim == l.dim => ins.push(*found),
                Some(found) => {
                    return Err(Error::DimensionMismatch {
                        label: l.to_string(),
                        left: found.dim,
                        right: l.dim,
                    })
                }
                None => return Err(Error::UnknownLabel(l.to_string())),
            }
        }
        ins.sort();
        ins.dedup();
        if ins.len() != inputs.len() {
            return Err(Error::DuplicateLabel("repeated input label".into()));
        }
        let ch = QuantumChannel { choi, inputs: ins };
        for l in ch.choi.space().labels() {
            let is_input = ch.is_input(l);
            let ok = match l.role {
                Role::X | Role::P => is_input,
                Role::A | Role::F => !is_input,
                Role::M => true,
            };
            if !ok {
                return Err(Error::InvalidChannel(format!(
                    "label {l} sits on the wrong side of the channel"
                )));
            }
        }
        Ok(ch)
    }

    /// Require every party index that appears on a label to have both an
    /// input-side `X` and an output-side `A`. Composition stages (encoders,
    /// decoders) legitimately carry one side only; anything treated as a
    /// multipartite channel in its own right must pass this.
    pub fn ensure_party_complete(&self) -> Result<()> {
        for party in self.parties() {
            let has_x = self
                .inputs
                .iter()
                .any(|l| l.party == party && l.role == Role::X);
            let has_a = self
                .output_labels()
                .iter()
                .any(|l| l.party == party && l.role == Role::A);
            if !has_x || !has_a {
                return Err(Error::InvalidChannel(format!(
                    "party {party} must have both an input-side X and an output-side A"
                )));
            }
        }
        Ok(())
    }

    /// Infer the input side from label roles (`X` and `P` consume, the rest
    /// produce). Memory labels are rejected here; pass them explicitly.
    pub fn from_roles(choi: LabeledOperator) -> Result<Self> {
        if choi.space().labels().iter().any(|l| l.role == Role::M) {
            return Err(Error::InvalidChannel(
                "memory label needs an explicit input side".into(),
            ));
        }
        let inputs: Vec<SystemLabel> = choi
            .space()
            .labels()
            .iter()
            .filter(|l| matches!(l.role, Role::X | Role::P))
            .copied()
            .collect();
        let ch = QuantumChannel::new(choi, &inputs)?;
        ch.ensure_party_complete()?;
        Ok(ch)
    }

    pub fn choi(&self) -> &LabeledOperator {
        &self.choi
    }

    fn is_input(&self, l: &SystemLabel) -> bool {
        self.inputs.iter().any(|i| i.key() == l.key())
    }

    pub fn input_labels(&self) -> &[SystemLabel] {
        &self.inputs
    }

    pub fn output_labels(&self) -> Vec<SystemLabel> {
        self.choi
            .space()
            .labels()
            .iter()
            .filter(|l| !self.is_input(l))
            .copied()
            .collect()
    }

    /// Sorted party indices appearing in `A` or `X` labels.
    pub fn parties(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .choi
            .space()
            .labels()
            .iter()
            .filter(|l| matches!(l.role, Role::A | Role::X))
            .map(|l| l.party)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Inputs that belong to no party (global pasts, input-side memories).
    pub fn nonparty_inputs(&self) -> Vec<SystemLabel> {
        self.inputs
            .iter()
            .filter(|l| l.role != Role::X)
            .copied()
            .collect()
    }

    /// Outputs that belong to no party (global futures, output-side
    /// memories).
    pub fn nonparty_outputs(&self) -> Vec<SystemLabel> {
        self.output_labels()
            .into_iter()
            .filter(|l| l.role != Role::A)
            .collect()
    }

    /// PSD and trace-preservation check.
    pub fn ensure_channel(&self, tol: f64) -> Result<()> {
        self.choi.ensure_hermitian(tol)?;
        if !self.choi.is_psd(tol)? {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix has eigenvalue {:.3e}",
                self.choi.min_eigenvalue(tol)?
            )));
        }
        let outs = self.output_labels();
        let marg = self.choi.partial_trace(&outs)?;
        let tp = marg
            .sub(&LabeledOperator::identity(marg.space().clone()))
            .op_norm();
        if tp > tol {
            return Err(Error::InvalidChannel(format!(
                "trace preservation violated by {tp:.3e}"
            )));
        }
        Ok(())
    }

    /// Apply the channel to a state on its full input space.
    pub fn apply(&self, state: &LabeledOperator) -> Result<LabeledOperator> {
        state.link(&self.choi, &self.inputs)
    }
}

/// A process matrix viewed as the channel from party outputs (and global
/// past) to party inputs (and global future).
pub fn process_as_channel(w: &ProcessMatrix) -> Result<QuantumChannel> {
    QuantumChannel::new(w.operator().clone(), &w.signature().channel_inputs())
}

/// Embed a probability table as the diagonal quantum channel in the
/// computational bases.
pub fn embed_classical(ch: &ClassicalChannel) -> Result<QuantumChannel> {
    ch.check(1e-9)?;
    let n = ch.ensure_party_table()?;
    let in_labels: Vec<SystemLabel> = (1..=n)
        .map(|i| SystemLabel::x(i, ch.in_dims()[i - 1]))
        .collect();
    let out_labels: Vec<SystemLabel> = (1..=n)
        .map(|i| SystemLabel::a(i, ch.out_dims()[i - 1]))
        .collect();
    let mut labels = in_labels.clone();
    labels.extend(&out_labels);
    labels.sort();
    let space = TensorSpace::new(labels)?;
    let mut m = CMatrix::zeros(space.total_dim(), space.total_dim());
    for a in grid_points(ch.out_dims()) {
        for x in grid_points(ch.in_dims()) {
            let mut point = Vec::new();
            for l in space.labels() {
                let v = if l.role == Role::X {
                    x[l.party - 1]
                } else {
                    a[l.party - 1]
                };
                point.push(v);
            }
            let idx = flat_index(
                &space.labels().iter().map(|l| l.dim).collect::<Vec<_>>(),
                &point,
            );
            m[(idx, idx)] = C64::new(ch.prob(&a, &x), 0.0);
        }
    }
    QuantumChannel::new(LabeledOperator::new(space, m)?, &in_labels)
}

/// Choi-route parity check: the subset reduction conditions of the process
/// picture, evaluated on the channel's Choi matrix. Residuals in operator
/// norm.
pub fn parity_erasure_quantum(ch: &QuantumChannel, tol: f64) -> Result<ParityReport> {
    ch.ensure_channel(CHANNEL_VALIDITY_TOL)?;
    ch.ensure_party_complete()?;
    let parties = ch.parties();
    let extra = ch.nonparty_outputs();
    let mut subsets = Vec::new();
    for subset in subsets_of(&parties) {
        let mut expr = ReductionExpression::new();
        for &p in &parties {
            let factor = if subset.contains(p) {
                PartyFactor::OneMinusX
            } else {
                PartyFactor::Ax
            };
            expr = expr.with_factor(p, factor);
        }
        for l in &extra {
            expr = expr.with_replacement(*l);
        }
        let residual = signed_reduce(ch.choi(), &expr)?.op_norm();
        subsets.push((subset, residual));
    }
    Ok(ParityReport::from_residuals(subsets, tol))
}

/// Nonempty subsets of an arbitrary sorted party list.
fn subsets_of(parties: &[usize]) -> Vec<PartySubset> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << parties.len()) {
        let chosen: Vec<usize> = parties
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &p)| p)
            .collect();
        out.push(PartySubset::new(chosen).expect("mask is nonzero"));
    }
    out
}

/// State pairs on a `d`-level system whose differences span the traceless
/// Hermitian operators: neighboring basis states, and the two eigenstates
/// of each real and imaginary off-diagonal direction.
pub fn spanning_state_pairs(d: usize) -> Vec<(CMatrix, CMatrix)> {
    let mut pairs = Vec::new();
    let basis = |k: usize| {
        let mut v = CMatrix::zeros(d, d);
        v[(k, k)] = C64::new(1.0, 0.0);
        v
    };
    for k in 0..d - 1 {
        pairs.push((basis(k), basis(k + 1)));
    }
    let proj = |k: usize, l: usize, phase: C64| {
        // |psi><psi| with psi = (|k> + phase |l>)/sqrt(2)
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = C64::new(0.5, 0.0);
        m[(l, l)] = C64::new(0.5, 0.0);
        m[(k, l)] = 0.5 * phase.conj();
        m[(l, k)] = 0.5 * phase;
        m
    };
    for k in 0..d {
        for l in k + 1..d {
            pairs.push((
                proj(k, l, C64::new(1.0, 0.0)),
                proj(k, l, C64::new(-1.0, 0.0)),
            ));
            pairs.push((
                proj(k, l, C64::new(0.0, 1.0)),
                proj(k, l, C64::new(0.0, -1.0)),
            ));
        }
    }
    pairs
}

/// States on a `d`-level system spanning the full Hermitian operator space:
/// the basis states plus one superposition state per off-diagonal direction.
pub fn tomography_states(d: usize) -> Vec<CMatrix> {
    let mut states = Vec::new();
    for k in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = C64::new(1.0, 0.0);
        states.push(m);
    }
    for (plus_x, plus_y) in spanning_state_pairs(d)
        .into_iter()
        .skip(d - 1)
        .tuples()
        .map(|(a, b)| (a.0, b.0))
    {
        states.push(plus_x);
        states.push(plus_y);
    }
    states
}

fn as_state(label: SystemLabel, m: &CMatrix) -> LabeledOperator {
    LabeledOperator::new(TensorSpace::single(label), m.clone()).expect("square state matrix")
}

/// Literal parity-erasure check: encode bit pairs on the subset's inputs,
/// spanning states everywhere else, push through the channel, and take the
/// trace norm of the signed sum of the subset's marginal outputs.
pub fn parity_erasure_quantum_direct(ch: &QuantumChannel, tol: f64) -> Result<ParityReport> {
    ch.ensure_channel(CHANNEL_VALIDITY_TOL)?;
    ch.ensure_party_complete()?;
    let parties = ch.parties();
    let x_label = |p: usize| -> SystemLabel {
        *ch.input_labels()
            .iter()
            .find(|l| l.party == p && l.role == Role::X)
            .expect("checked in constructor")
    };
    let a_label = |p: usize| -> SystemLabel {
        ch.output_labels()
            .into_iter()
            .find(|l| l.party == p && l.role == Role::A)
            .expect("checked in constructor")
    };
    let mut subsets = Vec::new();
    for subset in subsets_of(&parties) {
        let inside = subset.parties().to_vec();
        let mut fixed_labels: Vec<SystemLabel> = parties
            .iter()
            .filter(|p| !subset.contains(**p))
            .map(|&p| x_label(p))
            .collect();
        fixed_labels.extend(ch.nonparty_inputs());
        // discard everything except the subset's own outputs
        let traced: Vec<SystemLabel> = ch
            .output_labels()
            .into_iter()
            .filter(|l| !(l.role == Role::A && subset.contains(l.party)))
            .collect();
        let pair_choices: Vec<Vec<(CMatrix, CMatrix)>> = inside
            .iter()
            .map(|&p| spanning_state_pairs(x_label(p).dim))
            .collect();
        let state_choices: Vec<Vec<CMatrix>> = fixed_labels
            .iter()
            .map(|l| tomography_states(l.dim))
            .collect();
        let mut worst = 0.0f64;
        for pairs in pair_choices.iter().multi_cartesian_product() {
            let fixed_combos: Vec<Vec<&CMatrix>> = if fixed_labels.is_empty() {
                vec![Vec::new()]
            } else {
                state_choices.iter().multi_cartesian_product().collect()
            };
            for fixed in fixed_combos {
                let mut signed: Option<LabeledOperator> = None;
                for bits in 0..(1usize << inside.len()) {
                    let mut input = LabeledOperator::scalar(C64::new(1.0, 0.0));
                    for (k, &p) in inside.iter().enumerate() {
                        let m = if bits & (1 << k) != 0 {
                            &pairs[k].1
                        } else {
                            &pairs[k].0
                        };
                        input = input.tensor(&as_state(x_label(p), m))?;
                    }
                    for (k, l) in fixed_labels.iter().enumerate() {
                        input = input.tensor(&as_state(*l, fixed[k]))?;
                    }
                    let out = ch.apply(&input)?;
                    let marg = out.partial_trace(&traced)?;
                    let sign = if (bits.count_ones() & 1) == 0 { 1.0 } else { -1.0 };
                    let term = marg.scale(C64::new(sign, 0.0));
                    signed = Some(match signed {
                        None => term,
                        Some(acc) => acc.add(&term),
                    });
                }
                worst = worst.max(signed.expect("at least one bit pattern").trace_norm());
            }
        }
        let _ = a_label;
        subsets.push((subset, worst));
    }
    Ok(ParityReport::from_residuals(subsets, tol))
}

/// Per-party pairs of states fed into the party outputs, indexed by a bit.
#[derive(Clone, Debug)]
pub struct Encoding {
    pub pairs: Vec<[CMatrix; 2]>,
}

impl Encoding {
    pub fn check(&self, tol: f64) -> Result<()> {
        for (i, pair) in self.pairs.iter().enumerate() {
            for m in pair {
                let op = LabeledOperator::new(
                    TensorSpace::single(SystemLabel::x(i + 1, m.nrows())),
                    m.clone(),
                )?;
                if (op.trace().re - 1.0).abs() > tol || !op.is_psd(tol)? {
                    return Err(Error::InvalidChannel(format!(
                        "encoding state for party {} is not a state",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-party measurement effects on the party inputs.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub effects: Vec<Vec<CMatrix>>,
}

impl Measurement {
    pub fn check(&self, tol: f64) -> Result<()> {
        for (i, effects) in self.effects.iter().enumerate() {
            if effects.is_empty() {
                return Err(Error::InvalidChannel(format!(
                    "party {} has no measurement effects",
                    i + 1
                )));
            }
            let d = effects[0].nrows();
            let mut total = CMatrix::zeros(d, d);
            for e in effects {
                let op = LabeledOperator::new(
                    TensorSpace::single(SystemLabel::a(i + 1, d)),
                    e.clone(),
                )?;
                if !op.is_psd(tol)? {
                    return Err(Error::InvalidChannel(format!(
                        "party {} has a negative effect",
                        i + 1
                    )));
                }
                total += e;
            }
            let gap = (&total - CMatrix::identity(d, d))
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            if gap > tol {
                return Err(Error::InvalidChannel(format!(
                    "party {} effects do not sum to identity",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// The conditional probability table observed when each party measures its
/// input with the given effects and feeds back the state selected by its
/// bit: `p(a | x) = pairing of W with measure-and-prepare operations`.
pub fn local_io_relation(
    w: &ProcessMatrix,
    enc: &Encoding,
    meas: &Measurement,
) -> Result<ClassicalChannel> {
    let sig = w.signature();
    let n = sig.n();
    if enc.pairs.len() != n || meas.effects.len() != n {
        return Err(Error::Malformed(format!(
            "{} encodings and {} measurements for {} parties",
            enc.pairs.len(),
            meas.effects.len(),
            n
        )));
    }
    enc.check(1e-9)?;
    meas.check(1e-9)?;
    let out_dims: Vec<usize> = meas.effects.iter().map(|e| e.len()).collect();
    let in_dims = vec![2usize; n];
    let mut probs = Vec::new();
    for a in grid_points(&out_dims) {
        for x in grid_points(&in_dims) {
            let mut ops = Vec::new();
            for i in 1..=n {
                ops.push(choi_measure_prepare(
                    &meas.effects[i - 1][a[i - 1]],
                    &enc.pairs[i - 1][x[i - 1]],
                    sig.a_label(i)?,
                    sig.x_label(i)?,
                )?);
            }
            let p = pair(w, &ops, 1e-7)?.probability()?;
            probs.push(p.max(0.0));
        }
    }
    ClassicalChannel::new(out_dims, in_dims, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{
        random_ordered_process, random_valid_process, wire_comb, PartySignature,
    };
    use crate::random::{self, rng_from_seed};

    fn subset(parties: &[usize]) -> PartySubset {
        PartySubset::new(parties.to_vec()).unwrap()
    }

    fn bit_channel(f: impl Fn(&[usize], &[usize]) -> bool) -> ClassicalChannel {
        ClassicalChannel::from_fn(vec![2, 2], vec![2, 2], |a, x| {
            if f(a, x) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn classical_swap() -> ClassicalChannel {
        bit_channel(|a, x| a[0] == x[1] && a[1] == x[0])
    }

    fn one_way_channel() -> ClassicalChannel {
        // a1 = 0, a2 = x1
        bit_channel(|a, x| a[0] == 0 && a[1] == x[0])
    }

    fn identity_feedback() -> ClassicalChannel {
        bit_channel(|a, x| a[0] == x[0] && a[1] == 0)
    }

    #[test]
    fn one_way_table_erases_parity() {
        let report = parity_erasure_classical(&one_way_channel(), 1e-12).unwrap();
        assert!(report.verdict, "{report:?}");
    }

    #[test]
    fn swap_table_transmits_joint_parity() {
        let report = parity_erasure_classical(&classical_swap(), 1e-9).unwrap();
        assert!(!report.verdict);
        assert_eq!(report.residual(&subset(&[1])), Some(0.0));
        assert_eq!(report.residual(&subset(&[2])), Some(0.0));
        let r12 = report.residual(&subset(&[1, 2])).unwrap();
        assert!((r12 - 1.0).abs() < 1e-12, "residual {r12}");
    }

    #[test]
    fn identity_feedback_fails_at_its_own_party() {
        let report = parity_erasure_classical(&identity_feedback(), 1e-9).unwrap();
        assert!(!report.verdict);
        let r1 = report.residual(&subset(&[1])).unwrap();
        assert!((r1 - 1.0).abs() < 1e-12);
        assert_eq!(report.residual(&subset(&[2])), Some(0.0));
        assert_eq!(report.residual(&subset(&[1, 2])), Some(0.0));
    }

    #[test]
    fn weak_check_accepts_one_way_rejects_swap() {
        let ok = weak_parity_check(&bit_channel(|a, x| a[0] == x[1] && a[1] == 0), 1e-12).unwrap();
        assert!(ok.verdict(), "{ok:?}");
        let bad = weak_parity_check(&classical_swap(), 1e-9).unwrap();
        assert!(!bad.strong.verdict);
        assert!(!bad.coarse.verdict);
    }

    #[test]
    fn weak_check_requires_binary_inputs() {
        let ch = ClassicalChannel::from_fn(vec![2], vec![3], |a, _| {
            if a[0] == 0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(weak_parity_check(&ch, 1e-9).is_err());
    }

    #[test]
    fn ternary_letter_pairs_catch_hidden_dependence() {
        // a depends only on whether x = 2; binary restrictions would miss
        // nothing here, but the pair (0, 2) must flag it.
        let ch = ClassicalChannel::from_fn(vec![2], vec![3], |a, x| {
            let bit = usize::from(x[0] == 2);
            if a[0] == bit {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let report = parity_erasure_classical(&ch, 1e-9).unwrap();
        assert!(!report.verdict);
    }

    #[test]
    fn spanning_pairs_span_traceless_hermitians() {
        for d in [2usize, 3] {
            let pairs = spanning_state_pairs(d);
            assert_eq!(pairs.len(), d * d - 1);
            // stack vectorized differences and check the rank
            let mut m = CMatrix::zeros(d * d, pairs.len());
            for (j, (p0, p1)) in pairs.iter().enumerate() {
                let diff = p0 - p1;
                for r in 0..d {
                    for c in 0..d {
                        m[(r * d + c, j)] = diff[(r, c)];
                    }
                }
            }
            let rank = m.svd(false, false).rank(1e-9);
            assert_eq!(rank, d * d - 1);
        }
    }

    #[test]
    fn tomography_states_span_hermitians() {
        for d in [2usize, 3] {
            let states = tomography_states(d);
            assert_eq!(states.len(), d * d);
            let mut m = CMatrix::zeros(d * d, states.len());
            for (j, s) in states.iter().enumerate() {
                for r in 0..d {
                    for c in 0..d {
                        m[(r * d + c, j)] = s[(r, c)];
                    }
                }
            }
            assert_eq!(m.svd(false, false).rank(1e-9), d * d);
        }
    }

    fn swap_channel() -> QuantumChannel {
        // Choi of the swap X1 X2 -> A1 A2 with A1 <- X2, A2 <- X1
        let x1 = SystemLabel::x(1, 2);
        let x2 = SystemLabel::x(2, 2);
        let a1 = SystemLabel::a(1, 2);
        let a2 = SystemLabel::a(2, 2);
        let w1 = crate::operator::choi_identity(x2, a1).unwrap();
        let w2 = crate::operator::choi_identity(x1, a2).unwrap();
        QuantumChannel::from_roles(w1.tensor(&w2).unwrap().canonicalized()).unwrap()
    }

    fn depolarizing_channel() -> QuantumChannel {
        let x1 = SystemLabel::x(1, 2);
        let x2 = SystemLabel::x(2, 2);
        let a1 = SystemLabel::a(1, 2);
        let a2 = SystemLabel::a(2, 2);
        let space = TensorSpace::new(vec![a1, a2, x1, x2]).unwrap();
        let choi = LabeledOperator::identity(space).scale(C64::new(0.25, 0.0));
        QuantumChannel::from_roles(choi).unwrap()
    }

    #[test]
    fn swap_choi_fails_only_the_joint_subset() {
        let ch = swap_channel();
        let report = parity_erasure_quantum(&ch, 1e-9).unwrap();
        assert!(!report.verdict);
        assert!(report.residual(&subset(&[1])).unwrap() < 1e-12);
        assert!(report.residual(&subset(&[2])).unwrap() < 1e-12);
        assert!(report.residual(&subset(&[1, 2])).unwrap() > 0.5);

        let direct = parity_erasure_quantum_direct(&ch, 1e-9).unwrap();
        assert!(!direct.verdict);
        assert!(direct.residual(&subset(&[1])).unwrap() < 1e-12);
        assert!(direct.residual(&subset(&[2])).unwrap() < 1e-12);
        assert!(direct.residual(&subset(&[1, 2])).unwrap() > 0.5);
    }

    #[test]
    fn depolarizing_channel_erases_everything() {
        let ch = depolarizing_channel();
        assert!(parity_erasure_quantum(&ch, 1e-10).unwrap().verdict);
        assert!(parity_erasure_quantum_direct(&ch, 1e-10).unwrap().verdict);
    }

    #[test]
    fn ordered_process_channel_passes_both_checkers() {
        let sig = PartySignature::qubits(2);
        let w = random_ordered_process(&sig, &[2, 1], 101).unwrap();
        let ch = process_as_channel(&w).unwrap();
        let choi_route = parity_erasure_quantum(&ch, 1e-8).unwrap();
        assert!(choi_route.verdict, "{choi_route:?}");
        let direct = parity_erasure_quantum_direct(&ch, 1e-8).unwrap();
        assert!(direct.verdict, "{direct:?}");
    }

    #[test]
    fn checkers_agree_on_random_channels() {
        let mut rng = rng_from_seed(333);
        let sig = PartySignature::qubits(2);
        for trial in 0..20 {
            let ins: Vec<SystemLabel> = (1..=2).map(|i| sig.x_label(i).unwrap()).collect();
            let outs: Vec<SystemLabel> = (1..=2).map(|i| sig.a_label(i).unwrap()).collect();
            let choi = random::random_cptp_choi(
                &TensorSpace::new(ins.clone()).unwrap(),
                &TensorSpace::new(outs).unwrap(),
                2,
                &mut rng,
            )
            .unwrap();
            let ch = QuantumChannel::new(choi, &ins).unwrap();
            let a = parity_erasure_quantum(&ch, 1e-9).unwrap();
            let b = parity_erasure_quantum_direct(&ch, 1e-9).unwrap();
            assert_eq!(a.verdict, b.verdict, "trial {trial}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn classical_embedding_matches_classical_verdicts() {
        for (ch, expect) in [
            (one_way_channel(), true),
            (classical_swap(), false),
            (identity_feedback(), false),
        ] {
            let classical = parity_erasure_classical(&ch, 1e-9).unwrap();
            assert_eq!(classical.verdict, expect);
            let q = embed_classical(&ch).unwrap();
            let choi_route = parity_erasure_quantum(&q, 1e-9).unwrap();
            let direct = parity_erasure_quantum_direct(&q, 1e-9).unwrap();
            assert_eq!(choi_route.verdict, expect);
            assert_eq!(direct.verdict, expect);
        }
    }

    #[test]
    fn extended_channel_with_past_and_future_checks_cleanly() {
        let sig = PartySignature::qubits(2).with_past(2).with_future(2);
        let w = random_valid_process(&sig, 77).unwrap();
        let ch = process_as_channel(&w).unwrap();
        assert!(parity_erasure_quantum(&ch, 1e-8).unwrap().verdict);
        assert!(parity_erasure_quantum_direct(&ch, 1e-8).unwrap().verdict);
    }

    #[test]
    fn channel_constructor_rejects_misplaced_roles() {
        let a1 = SystemLabel::a(1, 2);
        let x1 = SystemLabel::x(1, 2);
        let choi = crate::operator::choi_identity(x1, a1).unwrap();
        // declaring A1 as an input contradicts its role
        assert!(QuantumChannel::new(choi, &[a1]).is_err());
    }

    fn random_encoding<R: rand::Rng>(n: usize, rng: &mut R) -> Encoding {
        Encoding {
            pairs: (0..n)
                .map(|_| {
                    [
                        random::random_density_matrix(2, rng),
                        random::random_density_matrix(2, rng),
                    ]
                })
                .collect(),
        }
    }

    fn random_measurement<R: rand::Rng>(n: usize, outcomes: usize, rng: &mut R) -> Measurement {
        Measurement {
            effects: (0..n)
                .map(|_| random::random_povm(2, outcomes, rng))
                .collect(),
        }
    }

    #[test]
    fn io_relation_of_uniform_noise_ignores_settings() {
        let sig = PartySignature::qubits(2);
        let space = sig.space();
        let noise = LabeledOperator::identity(space).scale(C64::new(0.25, 0.0));
        let w = ProcessMatrix::new(sig, noise).unwrap();
        let mut rng = rng_from_seed(7);
        let table = local_io_relation(
            &w,
            &random_encoding(2, &mut rng),
            &random_measurement(2, 2, &mut rng),
        )
        .unwrap();
        table.check(1e-9).unwrap();
        for a in grid_points(table.out_dims()) {
            let base = table.prob(&a, &[0, 0]);
            for x in grid_points(table.in_dims()) {
                assert!((table.prob(&a, &x) - base).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn io_relation_single_party_reproduces_state_statistics() {
        let sig = PartySignature::qubits(1);
        let mut rng = rng_from_seed(8);
        let rho = random::random_state(TensorSpace::single(sig.a_label(1).unwrap()), &mut rng);
        let w = crate::process::prepare_and_ignore(&rho, &sig).unwrap();
        let proj = |k: usize| {
            let mut m = CMatrix::zeros(2, 2);
            m[(k, k)] = C64::new(1.0, 0.0);
            m
        };
        let meas = Measurement {
            effects: vec![vec![proj(0), proj(1)]],
        };
        let table = local_io_relation(&w, &random_encoding(1, &mut rng), &meas).unwrap();
        for a in 0..2 {
            for x in 0..2 {
                let expect = rho.matrix()[(a, a)].re;
                assert!((table.prob(&[a], &[x]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn io_relation_of_wire_comb_copies_the_first_bit() {
        let sig = PartySignature::qubits(2);
        let zero = {
            let mut m = CMatrix::zeros(2, 2);
            m[(0, 0)] = C64::new(1.0, 0.0);
            LabeledOperator::new(TensorSpace::single(sig.a_label(1).unwrap()), m).unwrap()
        };
        let w = wire_comb(&sig, &zero).unwrap();
        let basis = |k: usize| {
            let mut m = CMatrix::zeros(2, 2);
            m[(k, k)] = C64::new(1.0, 0.0);
            m
        };
        let enc = Encoding {
            pairs: vec![[basis(0), basis(1)], [basis(0), basis(1)]],
        };
        let meas = Measurement {
            effects: vec![
                vec![basis(0), basis(1)],
                vec![basis(0), basis(1)],
            ],
        };
        let table = local_io_relation(&w, &enc, &meas).unwrap();
        // party 2 reads party 1's bit; party 1 reads 0
        for x in grid_points(table.in_dims()) {
            for a in grid_points(table.out_dims()) {
                let expect = if a[0] == 0 && a[1] == x[0] { 1.0 } else { 0.0 };
                assert!(
                    (table.prob(&a, &x) - expect).abs() < 1e-12,
                    "a={a:?} x={x:?}"
                );
            }
        }
        let weak = weak_parity_check(&table, 1e-10).unwrap();
        assert!(weak.strong.verdict);
    }

    #[test]
    fn io_relations_of_valid_processes_pass_weak_checks() {
        let mut rng = rng_from_seed(99);
        let sig = PartySignature::qubits(2);
        for seed in 0..5u64 {
            let w = random_valid_process(&sig, 400 + seed).unwrap();
            let table = local_io_relation(
                &w,
                &random_encoding(2, &mut rng),
                &random_measurement(2, 2, &mut rng),
            )
            .unwrap();
            table.check(1e-9).unwrap();
            let weak = weak_parity_check(&table, 1e-10).unwrap();
            assert!(weak.strong.verdict, "seed {seed}: {:?}", weak.strong);
            assert!(weak.coarse.verdict, "seed {seed}: {:?}", weak.coarse);
        }
    }

    /// Randomized-encoding fuzz: the spanning families above decide the
    /// verdict; arbitrary encodings must never flip a passing channel.
    #[test]
    fn random_encodings_never_flip_a_passing_verdict() {
        let sig = PartySignature::qubits(2);
        let w = random_valid_process(&sig, 2024).unwrap();
        let ch = process_as_channel(&w).unwrap();
        assert!(parity_erasure_quantum_direct(&ch, 1e-9).unwrap().verdict);
        let mut rng = rng_from_seed(2025);
        let x1 = sig.x_label(1).unwrap();
        let x2 = sig.x_label(2).unwrap();
        let a_of = |p: usize| sig.a_label(p).unwrap();
        let mut trials = 0;
        while trials < 500 {
            for sub in [vec![1], vec![2], vec![1, 2]] {
                let pairs: Vec<[CMatrix; 2]> = (0..2)
                    .map(|_| {
                        [
                            random::random_density_matrix(2, &mut rng),
                            random::random_density_matrix(2, &mut rng),
                        ]
                    })
                    .collect();
                let mut signed: Option<LabeledOperator> = None;
                for bits in 0..(1usize << sub.len()) {
                    let mut input = LabeledOperator::scalar(C64::new(1.0, 0.0));
                    for (k, &p) in sub.iter().enumerate() {
                        let m = &pairs[p - 1][(bits >> k) & 1];
                        let label = if p == 1 { x1 } else { x2 };
                        input = input.tensor(&as_state(label, m)).unwrap();
                    }
                    for p in 1..=2 {
                        if !sub.contains(&p) {
                            let label = if p == 1 { x1 } else { x2 };
                            input = input
                                .tensor(&as_state(label, &pairs[p - 1][0]))
                                .unwrap();
                        }
                    }
                    let out = ch.apply(&input).unwrap();
                    let traced: Vec<SystemLabel> = (1..=2)
                        .filter(|p| !sub.contains(p))
                        .map(a_of)
                        .collect();
                    let marg = out.partial_trace(&traced).unwrap();
                    let sign = if (bits.count_ones() & 1) == 0 { 1.0 } else { -1.0 };
                    let term = marg.scale(C64::new(sign, 0.0));
                    signed = Some(match signed {
                        None => term,
                        Some(acc) => acc.add(&term),
                    });
                }
                let r = signed.unwrap().trace_norm();
                assert!(r < 1e-9, "subset {sub:?} trial {trials}: residual {r}");
                trials += 1;
            }
        }
    }
}
