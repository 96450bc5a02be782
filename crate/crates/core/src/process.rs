//! Process matrices: validation, projection, generation, and pairing.
//!
//! A process matrix for `N` parties is the Choi matrix `W` of a channel from
//! the joint party outputs `X_1 ... X_N` (with an optional global past `P`)
//! to the joint party inputs `A_1 ... A_N` (with an optional global future
//! `F`). Validity requires, besides positivity and trace normalization, one
//! reduction condition per nonempty party subset `I`:
//!
//! ```text
//!   prod_{i in I} (1 - [X_i]) prod_{j not in I} [A_j X_j]  W  =  0
//! ```
//!
//! where `[L]` replaces factor `L` by the maximally mixed state (see
//! [`crate::reduction`]). When a global future is present the condition
//! additionally replaces `F`, and the global past rides along untouched.
//! These conditions cut out a linear subspace; [`project_to_subspace`] is the
//! orthogonal projection onto it, assembled from the same commuting
//! replacement maps.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Role, SystemLabel, TensorSpace};
use crate::operator::{choi_identity, LabeledOperator};
use crate::random;
use crate::reduction::{signed_reduce, PartyFactor, ReductionExpression};

/// Dimensions of one party's systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyDims {
    /// Input handed to the party.
    pub d_a: usize,
    /// Output returned by the party.
    pub d_x: usize,
}

/// Party count and system dimensions, with optional global past/future
/// extensions (dimension 1 means absent).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartySignature {
    parties: Vec<PartyDims>,
    d_p: usize,
    d_f: usize,
}

impl PartySignature {
    pub fn new(parties: Vec<PartyDims>) -> Self {
        PartySignature {
            parties,
            d_p: 1,
            d_f: 1,
        }
    }

    /// `n` parties, all systems qubits.
    pub fn qubits(n: usize) -> Self {
        PartySignature::new(vec![PartyDims { d_a: 2, d_x: 2 }; n])
    }

    pub fn with_past(mut self, d_p: usize) -> Self {
        self.d_p = d_p.max(1);
        self
    }

    pub fn with_future(mut self, d_f: usize) -> Self {
        self.d_f = d_f.max(1);
        self
    }

    pub fn n(&self) -> usize {
        self.parties.len()
    }

    pub fn d_p(&self) -> usize {
        self.d_p
    }

    pub fn d_f(&self) -> usize {
        self.d_f
    }

    fn check_party(&self, party: usize) -> Result<()> {
        if party == 0 || party > self.n() {
            return Err(Error::PartyOutOfRange {
                party,
                n: self.n(),
            });
        }
        Ok(())
    }

    pub fn d_a(&self, party: usize) -> Result<usize> {
        self.check_party(party)?;
        Ok(self.parties[party - 1].d_a)
    }

    pub fn d_x(&self, party: usize) -> Result<usize> {
        self.check_party(party)?;
        Ok(self.parties[party - 1].d_x)
    }

    pub fn a_label(&self, party: usize) -> Result<SystemLabel> {
        Ok(SystemLabel::a(party, self.d_a(party)?))
    }

    pub fn x_label(&self, party: usize) -> Result<SystemLabel> {
        Ok(SystemLabel::x(party, self.d_x(party)?))
    }

    pub fn p_label(&self) -> Option<SystemLabel> {
        (self.d_p > 1).then(|| SystemLabel::p(self.d_p))
    }

    pub fn f_label(&self) -> Option<SystemLabel> {
        (self.d_f > 1).then(|| SystemLabel::f(self.d_f))
    }

    /// Read a signature off a label set: one untagged `A`/`X` pair per
    /// party, numbered contiguously from 1, plus at most one untagged
    /// global past and future factor.
    pub fn from_space(space: &TensorSpace) -> Result<PartySignature> {
        let mut d_a = std::collections::BTreeMap::new();
        let mut d_x = std::collections::BTreeMap::new();
        let mut d_p = 1usize;
        let mut d_f = 1usize;
        for l in space.labels() {
            if l.tag != 0 {
                return Err(Error::Malformed(format!(
                    "label {l} carries a tag; process-matrix spaces are untagged"
                )));
            }
            match l.role {
                Role::A if l.party >= 1 => {
                    d_a.insert(l.party, l.dim);
                }
                Role::X if l.party >= 1 => {
                    d_x.insert(l.party, l.dim);
                }
                Role::P => d_p = l.dim,
                Role::F => d_f = l.dim,
                _ => {
                    return Err(Error::Malformed(format!(
                        "label {l} does not belong to a process-matrix space"
                    )))
                }
            }
        }
        let n = d_a.len();
        if d_x.len() != n
            || d_a.keys().zip(1..=n).any(|(&p, want)| p != want)
            || d_x.keys().zip(1..=n).any(|(&p, want)| p != want)
        {
            return Err(Error::Malformed(
                "parties must carry one A and one X each, numbered 1..=n".into(),
            ));
        }
        let parties = (1..=n)
            .map(|p| PartyDims {
                d_a: d_a[&p],
                d_x: d_x[&p],
            })
            .collect();
        Ok(PartySignature::new(parties).with_past(d_p).with_future(d_f))
    }

    /// Canonical space: global labels first, then per-party `A_i, X_i`.
    pub fn space(&self) -> TensorSpace {
        let mut labels = Vec::new();
        labels.extend(self.p_label());
        labels.extend(self.f_label());
        for i in 1..=self.n() {
            labels.push(self.a_label(i).unwrap());
            labels.push(self.x_label(i).unwrap());
        }
        let mut labels = labels;
        labels.sort();
        TensorSpace::new(labels).expect("signature labels are distinct")
    }

    /// Product of party output dimensions times the past dimension: the
    /// required trace of a valid process matrix.
    pub fn trace_target(&self) -> f64 {
        let dx: usize = self.parties.iter().map(|p| p.d_x).product();
        (dx * self.d_p) as f64
    }

    /// Product of party input dimensions times the future dimension.
    pub fn input_side_dim(&self) -> usize {
        let da: usize = self.parties.iter().map(|p| p.d_a).product();
        da * self.d_f
    }

    /// Labels the channel consumes: the party outputs and the global past.
    pub fn channel_inputs(&self) -> Vec<SystemLabel> {
        let mut v: Vec<SystemLabel> = (1..=self.n())
            .map(|i| self.x_label(i).unwrap())
            .collect();
        v.extend(self.p_label());
        v
    }

    /// Labels the channel produces: the party inputs and the global future.
    pub fn channel_outputs(&self) -> Vec<SystemLabel> {
        let mut v: Vec<SystemLabel> = (1..=self.n())
            .map(|i| self.a_label(i).unwrap())
            .collect();
        v.extend(self.f_label());
        v
    }
}

/// A nonempty, sorted set of party indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartySubset(Vec<usize>);

impl PartySubset {
    pub fn new(mut parties: Vec<usize>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::EmptySubset);
        }
        parties.sort_unstable();
        parties.dedup();
        Ok(PartySubset(parties))
    }

    pub fn parties(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, party: usize) -> bool {
        self.0.contains(&party)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All nonempty subsets of `{1, ..., n}`, by ascending bitmask.
    pub fn all_nonempty(n: usize) -> Vec<PartySubset> {
        let mut out = Vec::with_capacity((1usize << n) - 1);
        for mask in 1u32..(1 << n) {
            let parties: Vec<usize> = (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            out.push(PartySubset(parties));
        }
        out
    }
}

impl std::fmt::Display for PartySubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{{{}}}",
            self.0
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

/// The reduction expression testing subset `I` against a signature: parties
/// in `I` get `1 - [X_i]`, parties outside get `[A_j X_j]`, and the global
/// future (when present) is replaced outright.
pub fn subset_expression(subset: &PartySubset, sig: &PartySignature) -> Result<ReductionExpression> {
    for &p in subset.parties() {
        sig.check_party(p)?;
    }
    let mut expr = ReductionExpression::new();
    for i in 1..=sig.n() {
        let factor = if subset.contains(i) {
            PartyFactor::OneMinusX
        } else {
            PartyFactor::Ax
        };
        expr = expr.with_factor(i, factor);
    }
    if let Some(f) = sig.f_label() {
        expr = expr.with_replacement(f);
    }
    Ok(expr)
}

/// Diagnostics from validating a candidate process matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Smallest eigenvalue; negative values beyond `-tol` fail.
    pub psd_margin: f64,
    /// `|Tr W - d_P * prod_i d_{X_i}|`.
    pub trace_error: f64,
    /// Operator-norm residual of the reduction condition per subset.
    pub subset_residuals: Vec<(PartySubset, f64)>,
    /// Deviation of `Tr_out[W]` from the identity on the input factors.
    pub tp_residual: f64,
    pub tol: f64,
    pub verdict: bool,
}

impl ValidationReport {
    pub fn worst_subset(&self) -> Option<&(PartySubset, f64)> {
        self.subset_residuals
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

/// A candidate process matrix: a Hermitian operator on the signature space.
#[derive(Clone, Debug)]
pub struct ProcessMatrix {
    signature: PartySignature,
    op: LabeledOperator,
}

impl ProcessMatrix {
    pub fn new(signature: PartySignature, op: LabeledOperator) -> Result<Self> {
        let want = signature.space();
        if op.space().len() != want.len() {
            return Err(Error::Malformed(format!(
                "operator space [{}] does not match signature space [{}]",
                op.space().display(),
                want.display()
            )));
        }
        for l in want.labels() {
            match op.space().get(l) {
                Some(found) if found.dim == l.dim => {}
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
        Ok(ProcessMatrix { signature, op })
    }

    pub fn signature(&self) -> &PartySignature {
        &self.signature
    }

    pub fn operator(&self) -> &LabeledOperator {
        &self.op
    }

    /// Residual of the reduction condition for one subset: the operator norm
    /// of the signed reduction of `W`.
    pub fn subset_condition_residual(&self, subset: &PartySubset) -> Result<f64> {
        let expr = subset_expression(subset, &self.signature)?;
        Ok(signed_reduce(&self.op, &expr)?.op_norm())
    }

    /// Full validity check at tolerance `tol`.
    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        self.op.ensure_hermitian(tol)?;
        let psd_margin = self.op.min_eigenvalue(tol)?;
        let trace_error = (self.op.trace().re - self.signature.trace_target()).abs();
        let mut subset_residuals = Vec::new();
        for subset in PartySubset::all_nonempty(self.signature.n()) {
            let r = self.subset_condition_residual(&subset)?;
            subset_residuals.push((subset, r));
        }
        let outputs = self.signature.channel_outputs();
        let tp_residual = if outputs.is_empty() {
            (self.op.trace().re - self.signature.trace_target()).abs()
        } else {
            let marg = self.op.partial_trace(&outputs)?;
            marg.sub(&LabeledOperator::identity(marg.space().clone()))
                .op_norm()
        };
        let verdict = psd_margin >= -tol
            && trace_error <= tol
            && tp_residual <= tol
            && subset_residuals.iter().all(|(_, r)| *r <= tol);
        Ok(ValidationReport {
            psd_margin,
            trace_error,
            subset_residuals,
            tp_residual,
            tol,
            verdict,
        })
    }
}

/// Orthogonal projection (in the Hilbert-Schmidt inner product) onto the
/// subspace where every subset reduction condition vanishes.
///
/// Each subset expression is itself an orthogonal projector built from
/// commuting replacement maps, and distinct subsets project onto mutually
/// orthogonal ranges, so subtracting all of them from the identity projects
/// onto the common kernel. For signatures with a global past, the component
/// that would break trace preservation on `P` is removed as well.
pub fn project_to_subspace(
    op: &LabeledOperator,
    sig: &PartySignature,
) -> Result<LabeledOperator> {
    let mut out = op.clone();
    for subset in PartySubset::all_nonempty(sig.n()) {
        let expr = subset_expression(&subset, sig)?;
        out = out.sub(&signed_reduce(op, &expr)?);
    }
    Ok(out)
}

fn strip_past_violation(op: &LabeledOperator, sig: &PartySignature) -> Result<LabeledOperator> {
    let p = match sig.p_label() {
        Some(p) => p,
        None => return Ok(op.clone()),
    };
    // remove the component with P traceless and everything else replaced:
    // [all A X F] - [all A X F P]
    let mut labels: Vec<SystemLabel> = Vec::new();
    for i in 1..=sig.n() {
        labels.push(sig.a_label(i)?);
        labels.push(sig.x_label(i)?);
    }
    labels.extend(sig.f_label());
    let mut with_p = labels.clone();
    with_p.push(p);
    let bad = op
        .trace_and_replace(&labels)?
        .sub(&op.trace_and_replace(&with_p)?);
    Ok(op.sub(&bad))
}

/// Random valid process matrix from a seed: a Gaussian Hermitian operator is
/// projected onto the valid subspace, mixed with uniform noise until
/// positive, and normalized to the required trace.
pub fn random_valid_process(sig: &PartySignature, seed: u64) -> Result<ProcessMatrix> {
    let mut rng = random::rng_from_seed(seed);
    random_valid_process_with(sig, &mut rng)
}

pub fn random_valid_process_with<R: Rng>(
    sig: &PartySignature,
    rng: &mut R,
) -> Result<ProcessMatrix> {
    let space = sig.space();
    let dim = space.total_dim();
    let h = random::random_hermitian(space.clone(), rng);
    let projected = strip_past_violation(&project_to_subspace(&h, sig)?, sig)?;
    // traceless direction inside the valid subspace
    let avg = projected.trace() / C64::new(dim as f64, 0.0);
    let traceless = projected.sub(&LabeledOperator::identity(space.clone()).scale(avg));
    let noise_level = 1.0 / sig.input_side_dim() as f64;
    let uniform = LabeledOperator::identity(space.clone()).scale(C64::new(noise_level, 0.0));
    let min_eig = traceless.min_eigenvalue(1e-9)?;
    let w = if min_eig >= -1e-300 {
        uniform
    } else {
        // scale the direction so the mixture keeps a strict positivity margin
        let s = 0.9 * noise_level / (-min_eig);
        uniform.add(&traceless.scale(C64::new(s, 0.0)))
    };
    ProcessMatrix::new(sig.clone(), w)
}

/// Deterministic pieces of a causally ordered circuit: an initial state fed
/// to the first party and one channel linking each party to the next.
pub struct CombParts {
    /// State on `A_{order[0]} (x) M_1` (memory label supplied separately),
    /// or on `A_{order[0]}` alone for memoryless combs.
    pub initial: LabeledOperator,
    /// Choi matrices of channels `X_{order[k]} (x) M_k -> A_{order[k+1]} (x)
    /// M_{k+1}`.
    pub links: Vec<LabeledOperator>,
}

/// Assemble the process matrix of a causally ordered circuit: the initial
/// state enters the first party, each link channel carries the previous
/// party's output (plus memory) to the next party, and the last party's
/// output is discarded together with the final memory.
///
/// `parts.initial` and each link are given as labeled operators whose label
/// sets determine the wiring; memory labels must use role `M` and are
/// contracted away in sequence.
pub fn comb_process(sig: &PartySignature, parts: &CombParts) -> Result<ProcessMatrix> {
    let mut acc = parts.initial.clone();
    for link in &parts.links {
        let shared: Vec<SystemLabel> = acc
            .space()
            .labels()
            .iter()
            .filter(|l| link.space().contains(l))
            .copied()
            .collect();
        acc = acc.link(link, &shared)?;
    }
    // discard any memory left dangling
    let mems: Vec<SystemLabel> = acc
        .space()
        .labels()
        .iter()
        .filter(|l| l.role == Role::M)
        .copied()
        .collect();
    if !mems.is_empty() {
        acc = acc.partial_trace(&mems)?;
    }
    // tensor identity on channel inputs the circuit never reads
    for l in sig.space().labels() {
        if !acc.space().contains(l) {
            if l.role == Role::X || l.role == Role::P {
                acc = acc.tensor(&LabeledOperator::identity(TensorSpace::single(*l)))?;
            } else {
                return Err(Error::Malformed(format!(
                    "circuit never produces output label {l}"
                )));
            }
        }
    }
    ProcessMatrix::new(sig.clone(), acc.canonicalized())
}

/// Random causally ordered process: a random circuit threading the parties
/// in the given order through random memory channels.
///
/// With a global past the first stage is a channel from `P`; with a global
/// future the final stage maps the last party's output and memory into `F`
/// (otherwise both are discarded).
pub fn random_ordered_process(
    sig: &PartySignature,
    order: &[usize],
    seed: u64,
) -> Result<ProcessMatrix> {
    let mut rng = random::rng_from_seed(seed);
    random_ordered_process_with(sig, order, &mut rng)
}

pub fn random_ordered_process_with<R: Rng>(
    sig: &PartySignature,
    order: &[usize],
    rng: &mut R,
) -> Result<ProcessMatrix> {
    let n = sig.n();
    let mut seen: Vec<usize> = order.to_vec();
    seen.sort_unstable();
    let expect: Vec<usize> = (1..=n).collect();
    if seen != expect {
        return Err(Error::Malformed(format!(
            "order {order:?} is not a permutation of 1..={n}"
        )));
    }
    let mem_dim = 2usize;
    let mem = |k: usize| SystemLabel::mem(order[k], mem_dim).with_tag(u32::MAX - k as u32);

    let first_a = sig.a_label(order[0])?;
    let initial = if let Some(p) = sig.p_label() {
        let out = TensorSpace::new(vec![first_a, mem(0)])?;
        random::random_cptp_choi(&TensorSpace::single(p), &out, 2, rng)?
    } else {
        random::random_state(TensorSpace::new(vec![first_a, mem(0)])?, rng)
    };
    let mut links = Vec::new();
    for k in 0..n - 1 {
        let ins = TensorSpace::new(vec![sig.x_label(order[k])?, mem(k)])?;
        let outs = TensorSpace::new(vec![sig.a_label(order[k + 1])?, mem(k + 1)])?;
        links.push(random::random_cptp_choi(&ins, &outs, 2, rng)?);
    }
    if let Some(f) = sig.f_label() {
        let ins = TensorSpace::new(vec![sig.x_label(order[n - 1])?, mem(n - 1)])?;
        links.push(random::random_cptp_choi(
            &ins,
            &TensorSpace::single(f),
            2,
            rng,
        )?);
    }
    comb_process(sig, &CombParts { initial, links })
}

/// Outcome of pairing a process with local operations.
#[derive(Clone, Debug)]
pub enum Paired {
    /// All labels contracted: a probability (or weight).
    Probability(f64),
    /// Leftover global labels: the Choi matrix of the induced map.
    Induced(LabeledOperator),
}

impl Paired {
    pub fn probability(&self) -> Result<f64> {
        match self {
            Paired::Probability(p) => Ok(*p),
            Paired::Induced(op) => Err(Error::Malformed(format!(
                "pairing left labels [{}], not a scalar",
                op.space().display()
            ))),
        }
    }

    /// Largest entrywise deviation from `other`, aligning induced maps on a
    /// common label order first. Errors when one side is a scalar and the
    /// other is not.
    pub fn difference(&self, other: &Paired) -> Result<f64> {
        match (self, other) {
            (Paired::Probability(p), Paired::Probability(q)) => Ok((p - q).abs()),
            (Paired::Induced(a), Paired::Induced(b)) => {
                let b = b.permuted(a.space())?;
                let d = a.space().total_dim();
                let mut worst = 0.0f64;
                for r in 0..d {
                    for c in 0..d {
                        worst = worst.max((a.matrix()[(r, c)] - b.matrix()[(r, c)]).norm());
                    }
                }
                Ok(worst)
            }
            _ => Err(Error::Malformed(
                "one pairing is a scalar, the other an induced map".into(),
            )),
        }
    }
}

/// Pair a process matrix with one completely positive local operation per
/// party (Choi matrices on `A_i` and `X_i`, plus any ancilla labels).
/// Returns the outcome probability, or the induced Choi matrix when global
/// extensions or ancillas remain.
pub fn pair(w: &ProcessMatrix, ops: &[LabeledOperator], tol: f64) -> Result<Paired> {
    let sig = w.signature();
    if ops.len() != sig.n() {
        return Err(Error::Malformed(format!(
            "{} operations supplied for {} parties",
            ops.len(),
            sig.n()
        )));
    }
    let mut joint: Option<LabeledOperator> = None;
    for (idx, op) in ops.iter().enumerate() {
        let party = idx + 1;
        let a = sig.a_label(party)?;
        let x = sig.x_label(party)?;
        for l in [a, x] {
            match op.space().get(&l) {
                Some(found) if found.dim == l.dim => {}
                Some(found) => {
                    return Err(Error::DimensionMismatch {
                        label: l.to_string(),
                        left: found.dim,
                        right: l.dim,
                    })
                }
                None => return Err(Error::UnknownLabel(format!("{l} in operation {party}"))),
            }
        }
        if !op.is_psd(tol)? {
            return Err(Error::InvalidChannel(format!(
                "operation for party {party} is not completely positive"
            )));
        }
        joint = Some(match joint {
            None => op.clone(),
            Some(j) => j.tensor(op)?,
        });
    }
    let joint = joint.expect("at least one party");
    let mut contract = Vec::new();
    for i in 1..=sig.n() {
        contract.push(sig.a_label(i)?);
        contract.push(sig.x_label(i)?);
    }
    let result = w.operator().link(&joint, &contract)?;
    if result.space().is_empty() {
        let v = result.scalar_value()?;
        if v.im.abs() > 1e-6 {
            return Err(Error::Malformed(format!(
                "pairing produced a non-real scalar ({} + {}i)",
                v.re, v.im
            )));
        }
        Ok(Paired::Probability(v.re))
    } else {
        Ok(Paired::Induced(result.canonicalized()))
    }
}

/// Process matrix of the one-party process that hands the party a fixed
/// state and ignores its output.
pub fn prepare_and_ignore(state: &LabeledOperator, sig: &PartySignature) -> Result<ProcessMatrix> {
    let x = sig.x_label(1)?;
    let w = state
        .tensor(&LabeledOperator::identity(TensorSpace::single(x)))?
        .canonicalized();
    ProcessMatrix::new(sig.clone(), w)
}

/// The two-party process in which party 1 acts first: a fixed input state,
/// an identity wire from party 1's output to party 2's input, and party 2's
/// output discarded.
pub fn wire_comb(sig: &PartySignature, state: &LabeledOperator) -> Result<ProcessMatrix> {
    let wire = choi_identity(sig.x_label(1)?, sig.a_label(2)?)?;
    let w = state
        .tensor(&wire)?
        .tensor(&LabeledOperator::identity(TensorSpace::single(
            sig.x_label(2)?,
        )))?;
    ProcessMatrix::new(sig.clone(), w.canonicalized())
}
