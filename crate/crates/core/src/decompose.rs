//! One-way-signaling decompositions and recursive supermap application.
//!
//! A channel whose output to party `i` does not depend on party `i`'s own
//! input factors through a memory: an encoder `E` maps the remaining inputs
//! to `A_i (x) M`, and a decoder `D` maps `X_i (x) M` to the remaining
//! outputs. Parity-erasure channels satisfy this no-influence condition at
//! every party, so a local operation can be spliced between `E` and `D`;
//! repeating the splice party by party consumes the whole channel and turns
//! it into the supermap acting on the local operations.
//!
//! The quantum decomposition builds `E` as an isometric dilation of the
//! marginal channel into party `i`'s input and recovers `D` in closed form
//! by contracting the original Choi matrix against the pseudo-inverse of
//! that dilation, the least-squares solution of the recomposition equation.
//! Failures are surfaced, never repaired: an out-of-tolerance recomposition
//! is an error carrying the no-influence residual so the caller can tell a
//! violated precondition from numerical degeneracy.

use num_complex::Complex64 as C64;

use crate::channel::{
    grid_points, parity_erasure_quantum, ClassicalChannel, QuantumChannel, CHANNEL_VALIDITY_TOL,
};
use crate::error::{Error, Result};
use crate::label::{LabelKey, Role, SystemLabel, TensorSpace};
use crate::operator::{choi_of_isometry, CMatrix, LabeledOperator};
use crate::process::Paired;
use crate::reduction::{signed_reduce, PartyFactor, ReductionExpression};

/// Recomposition tolerance for the quantum decomposition postconditions.
pub const DECOMPOSITION_TOL: f64 = 1e-7;

/// Singular values of the marginal Choi below this threshold are treated as
/// zero when sizing the memory system.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Residual of the condition that the channel's output to party `i` ignores
/// party `i`'s input: maximum variation of the marginal `p(a_i | x)` as
/// `x_i` alone changes, all other inputs held fixed.
pub fn no_influence_residual_classical(ch: &ClassicalChannel, party: usize) -> Result<f64> {
    let n = ch.ensure_party_table()?;
    if party == 0 || party > n {
        return Err(Error::PartyOutOfRange { party, n });
    }
    ch.check(1e-9)?;
    let other_dims: Vec<usize> = (1..=n)
        .filter(|&j| j != party)
        .map(|j| ch.in_dims()[j - 1])
        .collect();
    let d_xi = ch.in_dims()[party - 1];
    let d_ai = ch.out_dims()[party - 1];
    let mut worst = 0.0f64;
    for rest in grid_points(&other_dims) {
        for a_i in 0..d_ai {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for x_i in 0..d_xi {
                let mut x = Vec::with_capacity(n);
                let mut it = rest.iter();
                for j in 1..=n {
                    x.push(if j == party {
                        x_i
                    } else {
                        *it.next().unwrap()
                    });
                }
                let q = ch.marginal(&[party], &[a_i], &x);
                lo = lo.min(q);
                hi = hi.max(q);
            }
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}

/// Quantum no-influence residual: the operator norm of the traceless-in-
/// `X_i` part of the channel's marginal Choi into `A_i`, with all other
/// inputs left free.
pub fn no_influence_residual_quantum(ch: &QuantumChannel, party: usize) -> Result<f64> {
    let a_i = party_output(ch, party)?;
    let traced: Vec<SystemLabel> = ch
        .output_labels()
        .into_iter()
        .filter(|l| l.key() != a_i.key())
        .collect();
    let marginal = ch.choi().partial_trace(&traced)?;
    let expr = ReductionExpression::new().with_factor(party, PartyFactor::OneMinusX);
    Ok(signed_reduce(&marginal, &expr)?.op_norm())
}

fn party_input(ch: &QuantumChannel, party: usize) -> Result<SystemLabel> {
    ch.input_labels()
        .iter()
        .find(|l| l.party == party && l.role == Role::X)
        .copied()
        .ok_or(Error::PartyOutOfRange {
            party,
            n: ch.parties().len(),
        })
}

fn party_output(ch: &QuantumChannel, party: usize) -> Result<SystemLabel> {
    ch.output_labels()
        .into_iter()
        .find(|l| l.party == party && l.role == Role::A)
        .ok_or(Error::PartyOutOfRange {
            party,
            n: ch.parties().len(),
        })
}

/// One-way-signaling decomposition of a classical table at one party.
#[derive(Clone, Debug)]
pub struct ClassicalDecomposition {
    pub party: usize,
    /// Inputs of the other parties to `(a_i, m)`: out dims `[d_A_i, mem]`.
    pub encoder: ClassicalChannel,
    /// `(x_i, m)` to the other parties' outputs: in dims `[d_X_i, mem]`.
    pub decoder: ClassicalChannel,
    pub memory_dim: usize,
    pub residual: f64,
}

impl ClassicalDecomposition {
    /// Rebuild the original table by summing the encoder and decoder over
    /// the shared memory letter.
    pub fn recompose(&self) -> Result<ClassicalChannel> {
        let party = self.party;
        let other_in: Vec<usize> = self.encoder.in_dims().to_vec();
        let other_out: Vec<usize> = self.decoder.out_dims().to_vec();
        let d_ai = self.encoder.out_dims()[0];
        let d_xi = self.decoder.in_dims()[0];
        let mem = self.memory_dim;
        let mut in_dims = other_in.clone();
        in_dims.insert(party - 1, d_xi);
        let mut out_dims = other_out.clone();
        out_dims.insert(party - 1, d_ai);
        ClassicalChannel::from_fn(out_dims, in_dims, |a, x| {
            let a_i = a[party - 1];
            let x_i = x[party - 1];
            let a_rest: Vec<usize> = a
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != party - 1)
                .map(|(_, &v)| v)
                .collect();
            let x_rest: Vec<usize> = x
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != party - 1)
                .map(|(_, &v)| v)
                .collect();
            (0..mem)
                .map(|m| {
                    self.encoder.prob(&[a_i, m], &x_rest) * self.decoder.prob(&a_rest, &[x_i, m])
                })
                .sum()
        })
    }
}

/// Chain-rule decomposition of a classical channel at party `i`: the
/// encoder draws `a_i` from its marginal given the other inputs and copies
/// `(a_i, x_rest)` into the memory; the decoder plays the conditional of
/// the remaining outputs.
pub fn classical_oneway_decompose(
    ch: &ClassicalChannel,
    party: usize,
    tol: f64,
) -> Result<ClassicalDecomposition> {
    let n = ch.ensure_party_table()?;
    let gate = no_influence_residual_classical(ch, party)?;
    if gate > tol {
        return Err(Error::NoInfluenceViolated {
            party,
            residual: gate,
        });
    }
    let other: Vec<usize> = (1..=n).filter(|&j| j != party).collect();
    let other_in: Vec<usize> = other.iter().map(|&j| ch.in_dims()[j - 1]).collect();
    let other_out: Vec<usize> = other.iter().map(|&j| ch.out_dims()[j - 1]).collect();
    let d_ai = ch.out_dims()[party - 1];
    let d_xi = ch.in_dims()[party - 1];
    let n_other_in: usize = other_in.iter().product();
    let mem = d_ai * n_other_in;

    let full_x = |x_i: usize, x_rest: &[usize]| {
        let mut x = x_rest.to_vec();
        x.insert(party - 1, x_i);
        x
    };
    // marginal q(a_i | x_rest), averaged over the (ignorable) x_i
    let q = |a_i: usize, x_rest: &[usize]| -> f64 {
        (0..d_xi)
            .map(|x_i| ch.marginal(&[party], &[a_i], &full_x(x_i, x_rest)))
            .sum::<f64>()
            / d_xi as f64
    };
    let mem_index = |a_i: usize, x_rest: &[usize]| {
        let mut idx = a_i;
        for (d, v) in other_in.iter().zip(x_rest) {
            idx = idx * d + v;
        }
        idx
    };

    let encoder = ClassicalChannel::from_fn(vec![d_ai, mem], other_in.clone(), |am, x_rest| {
        if am[1] == mem_index(am[0], x_rest) {
            q(am[0], x_rest)
        } else {
            0.0
        }
    })?;

    let n_other_out: usize = other_out.iter().product();
    let decoder = ClassicalChannel::from_fn(other_out, vec![d_xi, mem], |a_rest, xm| {
        let x_i = xm[0];
        let a_i = xm[1] / n_other_in;
        let x_rest_flat = xm[1] % n_other_in;
        // unflatten the copied other-party inputs
        let mut x_rest = vec![0usize; other_in.len()];
        let mut r = x_rest_flat;
        for k in (0..other_in.len()).rev() {
            x_rest[k] = r % other_in[k];
            r /= other_in[k];
        }
        let denom = q(a_i, &x_rest);
        if denom <= 1e-12 {
            return 1.0 / n_other_out as f64;
        }
        let mut a = a_rest.to_vec();
        a.insert(party - 1, a_i);
        ch.prob(&a, &full_x(x_i, &x_rest)) / denom
    })?;

    let result = ClassicalDecomposition {
        party,
        encoder,
        decoder,
        memory_dim: mem,
        residual: 0.0,
    };
    let rebuilt = result.recompose()?;
    let residual = rebuilt
        .probs()
        .iter()
        .zip(ch.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ClassicalDecomposition { residual, ..result })
}

/// One-way-signaling decomposition of a quantum channel at one party.
#[derive(Clone, Debug)]
pub struct QuantumDecomposition {
    pub party: usize,
    /// Isometric stage: remaining inputs to `A_i (x) M`.
    pub encoder: QuantumChannel,
    /// Closing stage: `X_i (x) M` to the remaining outputs.
    pub decoder: QuantumChannel,
    pub memory: SystemLabel,
    /// Operator-norm recomposition error.
    pub residual: f64,
}

impl QuantumDecomposition {
    /// Contract encoder and decoder over the memory.
    pub fn recompose(&self) -> Result<LabeledOperator> {
        self.encoder
            .choi()
            .link(self.decoder.choi(), &[self.memory])
    }
}

fn fresh_memory(ch: &QuantumChannel, party: usize, dim: usize) -> SystemLabel {
    let mut label = SystemLabel::mem(party, dim);
    let mut tag = 0u32;
    while ch
        .choi()
        .space()
        .labels()
        .iter()
        .any(|l| l.key() == label.key())
    {
        tag += 1;
        label = SystemLabel::mem(party, dim).with_tag(tag);
    }
    label
}

/// Decompose a quantum channel at party `i` into an isometric encoder into
/// `A_i (x) M` and a decoder consuming `X_i (x) M`.
///
/// The encoder dilates the marginal channel into `A_i`, with the memory
/// dimension set by the numerical rank of the marginal Choi. The decoder is
/// the contraction of the original Choi against the pseudo-inverse of the
/// encoder's Choi-space action, which is the least-squares solution of the
/// recomposition equation, so any residual above [`DECOMPOSITION_TOL`] is a
/// genuine failure and is reported as an error rather than repaired.
pub fn quantum_oneway_decompose(
    ch: &QuantumChannel,
    party: usize,
    tol: f64,
) -> Result<QuantumDecomposition> {
    ch.ensure_channel(CHANNEL_VALIDITY_TOL)?;
    let gate = no_influence_residual_quantum(ch, party)?;
    if gate > tol {
        return Err(Error::NoInfluenceViolated {
            party,
            residual: gate,
        });
    }
    let a_i = party_output(ch, party)?;
    let x_i = party_input(ch, party)?;
    let other_inputs: Vec<SystemLabel> = ch
        .input_labels()
        .iter()
        .filter(|l| l.key() != x_i.key())
        .copied()
        .collect();

    // marginal Choi into A_i, X_i dependence removed
    let traced: Vec<SystemLabel> = ch
        .output_labels()
        .into_iter()
        .filter(|l| l.key() != a_i.key())
        .collect();
    let marginal = ch
        .choi()
        .partial_trace(&traced)?
        .partial_trace(&[x_i])?
        .scale(C64::new(1.0 / x_i.dim as f64, 0.0));
    let mut ordered = other_inputs.clone();
    ordered.push(a_i);
    let marginal = marginal.permuted(&TensorSpace::new(ordered)?)?;

    let (vals, vecs) = marginal.eigh(CHANNEL_VALIDITY_TOL)?;
    let kept: Vec<usize> = (0..vals.len())
        .filter(|&k| vals[k] > RANK_THRESHOLD)
        .collect();
    if kept.is_empty() {
        return Err(Error::DecompositionFailed(format!(
            "marginal Choi at party {party} has no spectrum above {RANK_THRESHOLD:.0e}"
        )));
    }
    let mem_dim = kept.len();
    let memory = fresh_memory(ch, party, mem_dim);
    let d_in: usize = other_inputs.iter().map(|l| l.dim).product();
    let d_a = a_i.dim;

    // V[(u, m), z] = sqrt(lambda_m) v_m[(z, u)]
    let mut v = CMatrix::zeros(d_a * mem_dim, d_in);
    for (m, &k) in kept.iter().enumerate() {
        let root = vals[k].sqrt();
        for z in 0..d_in {
            for u in 0..d_a {
                v[(u * mem_dim + m, z)] = vecs[(z * d_a + u, k)] * C64::new(root, 0.0);
            }
        }
    }
    let in_space = TensorSpace::new(other_inputs.clone())?;
    let out_space = TensorSpace::new(vec![a_i, memory])?;
    let encoder_choi = choi_of_isometry(&v, &in_space, &out_space)?;

    // Decoder in closed form. The encoder's Choi-space action sends the
    // decoder's Choi D to (B (x) I) D (B (x) I)^dag with B the column
    // matrix of sqrt(lambda_m) eigenvectors, so the least-squares inverse
    // contracts with the conjugated eigenvectors scaled by 1/sqrt(lambda);
    // the link product supplies the transpose on contracted labels.
    let mut pinv = CMatrix::zeros(d_in * d_a, mem_dim);
    for (m, &k) in kept.iter().enumerate() {
        let root = vals[k].sqrt();
        for r in 0..d_in * d_a {
            pinv[(r, m)] = vecs[(r, k)].conj() / C64::new(root, 0.0);
        }
    }
    let mut ordered_za = other_inputs.clone();
    ordered_za.push(a_i);
    let pinv_choi = choi_of_isometry(
        &pinv,
        &TensorSpace::single(memory),
        &TensorSpace::new(ordered_za)?,
    )?;
    let mut contract = other_inputs.clone();
    contract.push(a_i);
    let decoder_choi = pinv_choi.link(ch.choi(), &contract)?.hermitized();

    let encoder = QuantumChannel::new(encoder_choi, &other_inputs)?;
    let decoder = QuantumChannel::new(decoder_choi, &[x_i, memory])?;
    let result = QuantumDecomposition {
        party,
        encoder,
        decoder,
        memory,
        residual: 0.0,
    };

    let residual = result.recompose()?.sub(ch.choi()).op_norm();
    let psd_gap = (-result.decoder.choi().min_eigenvalue(1.0)?).max(0.0);
    let tp_gap = {
        let outs = result.decoder.output_labels();
        let marg = result.decoder.choi().partial_trace(&outs)?;
        marg.sub(&LabeledOperator::identity(marg.space().clone()))
            .op_norm()
    };
    if residual > DECOMPOSITION_TOL || psd_gap > DECOMPOSITION_TOL || tp_gap > DECOMPOSITION_TOL {
        return Err(Error::DecompositionFailed(format!(
            "party {party}: recomposition {residual:.3e}, decoder positivity gap {psd_gap:.3e}, \
             trace preservation gap {tp_gap:.3e} (no-influence residual {gate:.3e})"
        )));
    }
    Ok(QuantumDecomposition { residual, ..result })
}

/// A local operation at one party: the Choi matrix of a completely positive
/// map from `A_i` (with optional past-side ancillas, role `P`) to `X_i`
/// (with optional future-side ancillas, role `F`).
#[derive(Clone, Debug)]
pub struct LocalChannel {
    choi: LabeledOperator,
    party: usize,
}

impl LocalChannel {
    pub fn new(choi: LabeledOperator, party: usize) -> Result<Self> {
        let mut has_a = false;
        let mut has_x = false;
        for l in choi.space().labels() {
            match l.role {
                Role::A if l.party == party => has_a = true,
                Role::X if l.party == party => has_x = true,
                Role::P | Role::F => {}
                _ => {
                    return Err(Error::InvalidChannel(format!(
                        "label {l} does not belong to a local operation at party {party}"
                    )))
                }
            }
        }
        if !has_a || !has_x {
            return Err(Error::InvalidChannel(format!(
                "local operation at party {party} needs both A{party} and X{party}"
            )));
        }
        Ok(LocalChannel { choi, party })
    }

    pub fn party(&self) -> usize {
        self.party
    }

    pub fn choi(&self) -> &LabeledOperator {
        &self.choi
    }

    /// Input side: the party input `A_i` plus past-side ancillas.
    pub fn input_labels(&self) -> Vec<SystemLabel> {
        self.choi
            .space()
            .labels()
            .iter()
            .filter(|l| matches!(l.role, Role::A | Role::P))
            .copied()
            .collect()
    }

    pub fn output_labels(&self) -> Vec<SystemLabel> {
        self.choi
            .space()
            .labels()
            .iter()
            .filter(|l| matches!(l.role, Role::X | Role::F))
            .copied()
            .collect()
    }

    /// Identity on the input side minus the map's trace effect; zero for a
    /// trace-preserving operation, positive semidefinite for any instrument
    /// element.
    pub fn trace_deficiency(&self) -> Result<LabeledOperator> {
        let marg = self.choi.partial_trace(&self.output_labels())?;
        Ok(LabeledOperator::identity(marg.space().clone()).sub(&marg))
    }

    pub fn ensure_cp(&self, tol: f64) -> Result<()> {
        self.choi.ensure_hermitian(tol)?;
        if !self.choi.is_psd(tol)? {
            return Err(Error::InvalidChannel(format!(
                "local operation at party {} is not completely positive",
                self.party
            )));
        }
        Ok(())
    }

    pub fn ensure_channel(&self, tol: f64) -> Result<()> {
        self.ensure_cp(tol)?;
        let gap = self.trace_deficiency()?.op_norm();
        if gap > tol {
            return Err(Error::InvalidChannel(format!(
                "local operation at party {} is not trace preserving (gap {gap:.3e})",
                self.party
            )));
        }
        Ok(())
    }
}

/// Splice a trace-preserving local operation into the channel at its party:
/// decompose the channel there, route `A_i` into the operation and its
/// `X_i` output into the decoder. The result is a channel over one party
/// fewer, inheriting the operation's ancillas as global past/future
/// factors, and is verified to still erase parity.
pub fn insert_channel(t: &QuantumChannel, c: &LocalChannel, tol: f64) -> Result<QuantumChannel> {
    c.ensure_channel(CHANNEL_VALIDITY_TOL)?;
    let party = c.party();
    let a_i = party_output(t, party)?;
    let x_i = party_input(t, party)?;
    for l in c.choi().space().labels() {
        if matches!(l.role, Role::A | Role::X) {
            let host = if l.role == Role::A { a_i } else { x_i };
            if l.dim != host.dim {
                return Err(Error::DimensionMismatch {
                    label: l.to_string(),
                    left: l.dim,
                    right: host.dim,
                });
            }
        } else if t.choi().space().contains(l) {
            return Err(Error::OverlappingLabels(l.to_string()));
        }
    }
    let d = quantum_oneway_decompose(t, party, tol)?;
    let mid = d.encoder.choi().link(c.choi(), &[a_i])?;
    let composed = mid.link(d.decoder.choi(), &[x_i, d.memory])?;
    let mut inputs: Vec<SystemLabel> = t
        .input_labels()
        .iter()
        .filter(|l| l.key() != x_i.key())
        .copied()
        .collect();
    inputs.extend(
        c.input_labels()
            .into_iter()
            .filter(|l| l.role == Role::P),
    );
    let out = QuantumChannel::new(composed.canonicalized(), &inputs)?;
    let report = parity_erasure_quantum(&out, tol.max(DECOMPOSITION_TOL))?;
    if !report.verdict {
        let (subset, residual) = report.worst().expect("nonempty party set");
        return Err(Error::NotParityErasure {
            subset: subset.parties().to_vec(),
            residual: *residual,
        });
    }
    Ok(out)
}

/// Extend a trace-decreasing operation to a channel by adding a two-level
/// record that marks whether the original branch fired; selecting the `0`
/// record recovers the original operation exactly.
fn complete_to_channel(
    op: &LocalChannel,
    taken: &[LabelKey],
) -> Result<(LocalChannel, Option<SystemLabel>)> {
    op.ensure_cp(CHANNEL_VALIDITY_TOL)?;
    let deficiency = op.trace_deficiency()?;
    if deficiency.op_norm() <= CHANNEL_VALIDITY_TOL {
        return Ok((op.clone(), None));
    }
    if !deficiency.is_psd(CHANNEL_VALIDITY_TOL)? {
        return Err(Error::InvalidChannel(format!(
            "local operation at party {} increases trace",
            op.party()
        )));
    }
    // fresh record label among the F tags
    let mut tag = 1000 + op.party() as u32;
    let mut record = SystemLabel::f(2).with_tag(tag);
    while taken.contains(&record.key()) {
        tag += 1;
        record = SystemLabel::f(2).with_tag(tag);
    }
    let pointer = |k: usize| {
        let mut m = CMatrix::zeros(2, 2);
        m[(k, k)] = C64::new(1.0, 0.0);
        LabeledOperator::new(TensorSpace::single(record), m).expect("2x2 state")
    };
    // discarded branch: absorb the missing trace and emit a fixed state
    let mut rest_state = LabeledOperator::scalar(C64::new(1.0, 0.0));
    for l in op.output_labels() {
        let mut m = CMatrix::zeros(l.dim, l.dim);
        m[(0, 0)] = C64::new(1.0, 0.0);
        rest_state = rest_state.tensor(&LabeledOperator::new(TensorSpace::single(l), m)?)?;
    }
    let fired = op.choi().tensor(&pointer(0))?;
    let missed = deficiency.tensor(&rest_state)?.tensor(&pointer(1))?;
    let completed = LocalChannel::new(fired.add(&missed).canonicalized(), op.party())?;
    Ok((completed, Some(record)))
}

/// Apply the supermap encoded by a parity-erasure channel to one local
/// operation per party, by decomposing and splicing party after party.
///
/// Operations may be trace-decreasing (instrument elements); they are
/// completed to channels with a record system that is post-selected at the
/// end, so the result is the outcome probability (all labels consumed) or
/// the induced Choi matrix on the surviving global factors. The insertion
/// order defaults to descending party index and must not affect the result.
pub fn apply_supermap(
    t: &QuantumChannel,
    ops: &[LocalChannel],
    order: Option<&[usize]>,
    tol: f64,
) -> Result<Paired> {
    let parties = t.parties();
    let report = parity_erasure_quantum(t, tol)?;
    if !report.verdict {
        let (subset, residual) = report.worst().expect("nonempty party set");
        return Err(Error::NotParityErasure {
            subset: subset.parties().to_vec(),
            residual: *residual,
        });
    }
    let order: Vec<usize> = match order {
        Some(o) => o.to_vec(),
        None => parties.iter().rev().copied().collect(),
    };
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted != parties {
        return Err(Error::Malformed(format!(
            "insertion order {order:?} does not cover parties {parties:?}"
        )));
    }
    if ops.len() != parties.len() {
        return Err(Error::Malformed(format!(
            "{} operations supplied for {} parties",
            ops.len(),
            parties.len()
        )));
    }
    let mut chosen: Vec<&LocalChannel> = Vec::new();
    for &p in &parties {
        let mut found = ops.iter().filter(|o| o.party() == p);
        let op = found.next().ok_or_else(|| {
            Error::Malformed(format!("no local operation supplied for party {p}"))
        })?;
        if found.next().is_some() {
            return Err(Error::Malformed(format!(
                "multiple local operations supplied for party {p}"
            )));
        }
        chosen.push(op);
    }

    // complete instrument elements to channels, tracking their records
    let mut taken: Vec<LabelKey> = t.choi().space().labels().iter().map(|l| l.key()).collect();
    for op in ops {
        taken.extend(op.choi().space().labels().iter().map(|l| l.key()));
    }
    let mut records = Vec::new();
    let mut completed = Vec::new();
    for (k, &p) in parties.iter().enumerate() {
        let (c, record) = complete_to_channel(chosen[k], &taken)?;
        if let Some(r) = record {
            taken.push(r.key());
            records.push(r);
        }
        completed.push((p, c));
    }

    let mut current = t.clone();
    for &p in &order {
        let c = &completed
            .iter()
            .find(|(q, _)| *q == p)
            .expect("order covers the parties")
            .1;
        current = insert_channel(&current, c, tol)?;
    }

    // post-select the completion records on the surviving branch
    let mut result = current.choi().clone();
    for r in &records {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(1.0, 0.0);
        let proj = LabeledOperator::new(TensorSpace::single(*r), m)?;
        result = result.link(&proj, &[*r])?;
    }
    if result.space().is_empty() {
        let v = result.scalar_value()?;
        if v.im.abs() > 1e-6 {
            return Err(Error::Malformed(format!(
                "supermap application produced a non-real scalar ({} + {}i)",
                v.re, v.im
            )));
        }
        Ok(Paired::Probability(v.re))
    } else {
        Ok(Paired::Induced(result.canonicalized()))
    }
}
