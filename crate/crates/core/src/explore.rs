//! Exhaustive exploration of classical parity-erasure channels at bit
//! scale.
//!
//! Three views of the same polytope are computed independently and
//! cross-checked: the brute-force census of deterministic tables that pass
//! the parity conditions, the vertex set of the polytope cut out by the
//! normalization and parity equalities, and causal-separability
//! certificates from an exact feasibility LP over the census hull. All
//! polyhedral arithmetic is exact rational; floating point appears only at
//! the boundary when tables enter or leave.

use itertools::Itertools;
use num_traits::{Signed, Zero};

use crate::channel::{grid_points, parity_erasure_classical, ClassicalChannel};
use crate::error::{Error, Result};
use crate::linprog::{self, rat_from_f64, rat_int, rat_to_f64, Feasibility, Rat};
use crate::process::PartySubset;

/// Joint-alphabet bound for exhaustive enumeration: both the input and the
/// output alphabet products must stay within this size (two bit-parties).
pub const DEFAULT_SCALE_CAP: usize = 4;

/// A deterministic table `a = f(x)`, stored as the flat output tuple per
/// flat input tuple (row-major, first party slowest).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeterministicChannel {
    out_dims: Vec<usize>,
    in_dims: Vec<usize>,
    map: Vec<usize>,
}

impl DeterministicChannel {
    pub fn new(out_dims: Vec<usize>, in_dims: Vec<usize>, map: Vec<usize>) -> Result<Self> {
        if out_dims.iter().chain(&in_dims).any(|&d| d == 0) {
            return Err(Error::ZeroDimension("alphabet size 0".into()));
        }
        let n_in: usize = in_dims.iter().product();
        let n_out: usize = out_dims.iter().product();
        if map.len() != n_in {
            return Err(Error::InvalidTable(format!(
                "assignment has {} entries for {} inputs",
                map.len(),
                n_in
            )));
        }
        if let Some(bad) = map.iter().find(|&&a| a >= n_out) {
            return Err(Error::InvalidTable(format!(
                "assigned output {bad} outside the {n_out}-letter alphabet"
            )));
        }
        Ok(DeterministicChannel {
            out_dims,
            in_dims,
            map,
        })
    }

    /// Decode from the base-`|outputs|` integer whose digit at position
    /// `x` is the flat output for input `x` (least significant first).
    pub fn from_code(out_dims: &[usize], in_dims: &[usize], code: u64) -> Result<Self> {
        let n_in: usize = in_dims.iter().product();
        let n_out: usize = out_dims.iter().product::<usize>().max(1) as usize;
        let mut map = Vec::with_capacity(n_in);
        let mut rest = code;
        for _ in 0..n_in {
            map.push((rest % n_out as u64) as usize);
            rest /= n_out as u64;
        }
        if rest != 0 {
            return Err(Error::InvalidTable(format!(
                "code {code} exceeds the {n_out}^{n_in} table space"
            )));
        }
        DeterministicChannel::new(out_dims.to_vec(), in_dims.to_vec(), map)
    }

    pub fn code(&self) -> u64 {
        let n_out: u64 = self.out_dims.iter().product::<usize>() as u64;
        self.map
            .iter()
            .rev()
            .fold(0u64, |acc, &a| acc * n_out + a as u64)
    }

    pub fn out_dims(&self) -> &[usize] {
        &self.out_dims
    }

    pub fn in_dims(&self) -> &[usize] {
        &self.in_dims
    }

    /// Output tuple assigned to the given input tuple.
    pub fn output_for(&self, x: &[usize]) -> Vec<usize> {
        let mut xf = 0usize;
        for (d, v) in self.in_dims.iter().zip(x) {
            xf = xf * d + v;
        }
        let mut af = self.map[xf];
        let mut a = vec![0usize; self.out_dims.len()];
        for k in (0..self.out_dims.len()).rev() {
            a[k] = af % self.out_dims[k];
            af /= self.out_dims[k];
        }
        a
    }

    pub fn to_classical(&self) -> ClassicalChannel {
        ClassicalChannel::from_fn(self.out_dims.clone(), self.in_dims.clone(), |a, x| {
            if self.output_for(x) == a {
                1.0
            } else {
                0.0
            }
        })
        .expect("dims validated at construction")
    }
}

fn check_cap(out_dims: &[usize], in_dims: &[usize], cap: usize) -> Result<(usize, usize)> {
    if out_dims.iter().chain(in_dims).any(|&d| d == 0) {
        return Err(Error::ZeroDimension("alphabet size 0".into()));
    }
    let n_out: usize = out_dims.iter().product();
    let n_in: usize = in_dims.iter().product();
    if n_out > cap || n_in > cap {
        return Err(Error::ScaleCap(format!(
            "joint alphabets {n_out} x {n_in} exceed the exhaustive cap {cap}"
        )));
    }
    Ok((n_out, n_in))
}

/// Every deterministic table on the given alphabets, exactly once, within
/// the default scale cap.
pub fn enumerate_deterministic(
    out_dims: &[usize],
    in_dims: &[usize],
) -> Result<impl Iterator<Item = DeterministicChannel>> {
    enumerate_deterministic_capped(out_dims, in_dims, DEFAULT_SCALE_CAP)
}

pub fn enumerate_deterministic_capped(
    out_dims: &[usize],
    in_dims: &[usize],
    cap: usize,
) -> Result<impl Iterator<Item = DeterministicChannel>> {
    let (n_out, n_in) = check_cap(out_dims, in_dims, cap)?;
    let total = (n_out as u64).pow(n_in as u32);
    let out_dims = out_dims.to_vec();
    let in_dims = in_dims.to_vec();
    Ok((0..total).map(move |code| {
        DeterministicChannel::from_code(&out_dims, &in_dims, code).expect("code in range")
    }))
}

/// Deterministic tables that satisfy every parity condition. For two
/// bit-parties these are exactly the causally ordered assignments: one
/// party's output is constant and the other's depends only on the first
/// party's input.
pub fn deterministic_parity_erasure_census(
    out_dims: &[usize],
    in_dims: &[usize],
) -> Result<Vec<DeterministicChannel>> {
    let mut census = Vec::new();
    for det in enumerate_deterministic(out_dims, in_dims)? {
        if parity_erasure_classical(&det.to_classical(), 1e-9)?.verdict {
            census.push(det);
        }
    }
    Ok(census)
}

/// Exact equality rows over the flat table space: one normalization row per
/// input and the signed-sum parity rows of every nonempty subset, mirroring
/// the classical checker entry for entry.
fn parity_equality_system(
    out_dims: &[usize],
    in_dims: &[usize],
) -> Result<(Vec<Vec<Rat>>, Vec<Rat>)> {
    let n = out_dims.len();
    if in_dims.len() != n {
        return Err(Error::InvalidTable(format!(
            "{} output alphabets vs {} input alphabets",
            n,
            in_dims.len()
        )));
    }
    let n_in: usize = in_dims.iter().product();
    let n_out: usize = out_dims.iter().product();
    let nv = n_in * n_out;
    let flat = |dims: &[usize], point: &[usize]| {
        let mut idx = 0usize;
        for (d, p) in dims.iter().zip(point) {
            idx = idx * d + p;
        }
        idx
    };
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for x in 0..n_in {
        let mut row = vec![Rat::zero(); nv];
        for a in 0..n_out {
            row[a * n_in + x] = rat_int(1);
        }
        rows.push(row);
        rhs.push(rat_int(1));
    }
    for subset in PartySubset::all_nonempty(n) {
        let inside = subset.parties();
        let outside: Vec<usize> = (1..=n).filter(|i| !subset.contains(*i)).collect();
        let pair_choices: Vec<Vec<(usize, usize)>> = inside
            .iter()
            .map(|&i| (0..in_dims[i - 1]).tuple_combinations().collect())
            .collect();
        let outside_in_dims: Vec<usize> = outside.iter().map(|&j| in_dims[j - 1]).collect();
        let inside_out_dims: Vec<usize> = inside.iter().map(|&i| out_dims[i - 1]).collect();
        let outside_out_dims: Vec<usize> = outside.iter().map(|&j| out_dims[j - 1]).collect();
        for pairs in pair_choices.iter().multi_cartesian_product() {
            for fixed in grid_points(&outside_in_dims) {
                for a_part in grid_points(&inside_out_dims) {
                    let mut row = vec![Rat::zero(); nv];
                    for bits in 0..(1usize << inside.len()) {
                        let mut x = vec![0usize; n];
                        let mut sign = 1i64;
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
                        let xf = flat(in_dims, &x);
                        for rest in grid_points(&outside_out_dims) {
                            let mut a = vec![0usize; n];
                            for (k, &i) in inside.iter().enumerate() {
                                a[i - 1] = a_part[k];
                            }
                            for (k, &j) in outside.iter().enumerate() {
                                a[j - 1] = rest[k];
                            }
                            let cell = flat(out_dims, &a) * n_in + xf;
                            row[cell] = &row[cell] + rat_int(sign);
                        }
                    }
                    rows.push(row);
                    rhs.push(Rat::zero());
                }
            }
        }
    }
    Ok((rows, rhs))
}

/// Vertices of the parity-erasure polytope, by exact basic-solution
/// enumeration over the equality system.
pub fn parity_polytope_vertices(
    out_dims: &[usize],
    in_dims: &[usize],
) -> Result<Vec<ClassicalChannel>> {
    check_cap(out_dims, in_dims, DEFAULT_SCALE_CAP)?;
    let (rows, rhs) = parity_equality_system(out_dims, in_dims)?;
    let verts = linprog::polytope_vertices(&rows, &rhs)?;
    verts
        .into_iter()
        .map(|v| {
            ClassicalChannel::new(
                out_dims.to_vec(),
                in_dims.to_vec(),
                v.iter().map(rat_to_f64).collect(),
            )
        })
        .collect()
}

/// Membership verdict for the hull of causally ordered deterministic
/// tables, decided by an exact feasibility LP.
#[derive(Clone, Debug, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeparabilityCertificate {
    /// Convex weights over the census reproducing the table within the LP
    /// tolerance; `residual` is the exact worst-entry deviation.
    Separable { weights: Vec<f64>, residual: f64 },
    /// Separating functional: `witness . v + offset <= 0` on every census
    /// table yet `witness . target + offset >= margin > 0`, scaled so the
    /// largest witness coefficient has unit magnitude.
    Inseparable {
        witness: Vec<f64>,
        offset: f64,
        margin: f64,
    },
}

/// Largest entrywise deviation of the weighted census mixture from the
/// target, computed exactly.
fn mixture_residual(verts: &[Vec<Rat>], weights: &[Rat], target: &[Rat]) -> Rat {
    let mut worst = Rat::zero();
    for e in 0..target.len() {
        let mixed: Rat = verts.iter().zip(weights).map(|(v, w)| &v[e] * w).sum();
        let dev = (mixed - &target[e]).abs();
        if dev > worst {
            worst = dev;
        }
    }
    worst
}

fn separating_certificate(
    y: &[Rat],
    nv: usize,
    a: &[Vec<Rat>],
    b: &[Rat],
) -> Result<SeparabilityCertificate> {
    let scale = y[1..1 + nv]
        .iter()
        .map(|g| g.abs())
        .max()
        .unwrap_or_else(Rat::zero);
    if scale.is_zero() {
        return Err(Error::LpFailure(
            "separating functional vanished on the table space".into(),
        ));
    }
    let witness: Vec<f64> = y[1..1 + nv]
        .iter()
        .map(|g| rat_to_f64(&(g / &scale)))
        .collect();
    let offset = rat_to_f64(&(&y[0] / &scale));
    let margin_exact: Rat = (0..a.len()).map(|i| &y[i] * &b[i]).sum();
    let margin = rat_to_f64(&(&margin_exact / &scale));
    Ok(SeparabilityCertificate::Inseparable {
        witness,
        offset,
        margin,
    })
}

/// Decide whether the table is a convex mixture of causally ordered
/// deterministic tables, up to entrywise slack `tol`.
///
/// Exact membership of the table's dyadic image is tried first; only when
/// that fails does the slack come in, absorbing the rounding of targets
/// that were computed in floating point. The reported residual is always
/// the exact deviation of the returned mixture, and an infeasible outcome
/// certifies that no mixture comes within `tol` of the table.
pub fn causal_separability_lp(
    ch: &ClassicalChannel,
    tol: f64,
) -> Result<SeparabilityCertificate> {
    ch.ensure_party_table()?;
    check_cap(ch.out_dims(), ch.in_dims(), DEFAULT_SCALE_CAP)?;
    ch.check(1e-9)?;
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::Malformed(format!("slack {tol} out of range")));
    }
    let census = deterministic_parity_erasure_census(ch.out_dims(), ch.in_dims())?;
    let verts: Vec<Vec<Rat>> = census
        .iter()
        .map(|d| {
            d.to_classical()
                .probs()
                .iter()
                .map(|&p| rat_from_f64(p))
                .collect::<Result<Vec<Rat>>>()
        })
        .collect::<Result<_>>()?;
    let target: Vec<Rat> = ch
        .probs()
        .iter()
        .map(|&p| rat_from_f64(p))
        .collect::<Result<_>>()?;
    let k = verts.len();
    let nv = target.len();

    // exact membership: weights only
    let mut a: Vec<Vec<Rat>> = Vec::with_capacity(1 + nv);
    let mut b: Vec<Rat> = Vec::with_capacity(1 + nv);
    a.push(vec![rat_int(1); k]);
    b.push(rat_int(1));
    for e in 0..nv {
        a.push(verts.iter().map(|v| v[e].clone()).collect());
        b.push(target[e].clone());
    }
    let exact = linprog::feasibility(&a, &b)?;
    if let Feasibility::Feasible(x) = &exact {
        let residual = rat_to_f64(&mixture_residual(&verts, x, &target));
        return Ok(SeparabilityCertificate::Separable {
            weights: x.iter().map(rat_to_f64).collect(),
            residual,
        });
    }
    if tol == 0.0 {
        let Feasibility::Infeasible(y) = exact else {
            unreachable!("feasible case returned above")
        };
        return separating_certificate(&y, nv, &a, &b);
    }

    // slack run: per-entry deviations u - w with u + w <= tol
    let eps = rat_from_f64(tol)?;
    let cols = k + 3 * nv;
    let mut a: Vec<Vec<Rat>> = Vec::with_capacity(1 + 2 * nv);
    let mut b: Vec<Rat> = Vec::with_capacity(1 + 2 * nv);
    let mut norm_row = vec![Rat::zero(); cols];
    for j in 0..k {
        norm_row[j] = rat_int(1);
    }
    a.push(norm_row);
    b.push(rat_int(1));
    for e in 0..nv {
        let mut row = vec![Rat::zero(); cols];
        for (j, v) in verts.iter().enumerate() {
            row[j] = v[e].clone();
        }
        row[k + e] = rat_int(1);
        row[k + nv + e] = rat_int(-1);
        a.push(row);
        b.push(target[e].clone());
    }
    for e in 0..nv {
        let mut row = vec![Rat::zero(); cols];
        row[k + e] = rat_int(1);
        row[k + nv + e] = rat_int(1);
        row[k + 2 * nv + e] = rat_int(1);
        a.push(row);
        b.push(eps.clone());
    }
    match linprog::feasibility(&a, &b)? {
        Feasibility::Feasible(x) => {
            let residual = rat_to_f64(&mixture_residual(&verts, &x[..k], &target));
            Ok(SeparabilityCertificate::Separable {
                weights: x[..k].iter().map(rat_to_f64).collect(),
                residual,
            })
        }
        Feasibility::Infeasible(y) => separating_certificate(&y, nv, &a, &b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn bits() -> (Vec<usize>, Vec<usize>) {
        (vec![2, 2], vec![2, 2])
    }

    fn det_from_fns(
        f: impl Fn(&[usize]) -> usize,
        g: impl Fn(&[usize]) -> usize,
    ) -> DeterministicChannel {
        let map = grid_points(&[2, 2])
            .iter()
            .map(|x| f(x) * 2 + g(x))
            .collect();
        DeterministicChannel::new(vec![2, 2], vec![2, 2], map).unwrap()
    }

    #[test]
    fn enumeration_counts_match_alphabet_powers() {
        let (o, i) = bits();
        let all: Vec<_> = enumerate_deterministic(&o, &i).unwrap().collect();
        assert_eq!(all.len(), 256);
        let codes: HashSet<u64> = all.iter().map(|d| d.code()).collect();
        assert_eq!(codes.len(), 256);
        let single: Vec<_> = enumerate_deterministic(&[2], &[2]).unwrap().collect();
        assert_eq!(single.len(), 4);
    }

    #[test]
    fn codes_round_trip() {
        let (o, i) = bits();
        for det in enumerate_deterministic(&o, &i).unwrap() {
            let back = DeterministicChannel::from_code(&o, &i, det.code()).unwrap();
            assert_eq!(det, back);
        }
        assert!(DeterministicChannel::from_code(&o, &i, 256).is_err());
    }

    #[test]
    fn scale_cap_refuses_three_bit_parties() {
        let dims = vec![2, 2, 2];
        match enumerate_deterministic(&dims, &dims).map(|it| it.count()) {
            Err(Error::ScaleCap(_)) => {}
            other => panic!("expected scale cap, got {other:?}"),
        }
        assert!(matches!(
            parity_polytope_vertices(&dims, &dims),
            Err(Error::ScaleCap(_))
        ));
    }

    /// The twelve tables built straight from the causal-order structure:
    /// one output constant, the other depending only on the first's input.
    fn expected_census_codes() -> HashSet<u64> {
        let mut expect = HashSet::new();
        for c in 0..2usize {
            for g in 0..4usize {
                // a1 = c, a2 = g(x1) with g encoded as (g >> x1) & 1
                expect.insert(det_from_fns(|_| c, |x| (g >> x[0]) & 1).code());
                // a2 = c, a1 = g(x2)
                expect.insert(det_from_fns(|x| (g >> x[1]) & 1, |_| c).code());
            }
        }
        expect
    }

    #[test]
    fn census_is_exactly_the_causally_ordered_tables() {
        let (o, i) = bits();
        let census = deterministic_parity_erasure_census(&o, &i).unwrap();
        assert_eq!(census.len(), 12);
        let got: HashSet<u64> = census.iter().map(|d| d.code()).collect();
        assert_eq!(got, expected_census_codes());
    }

    #[test]
    fn census_members_are_structurally_one_way() {
        let (o, i) = bits();
        for det in deterministic_parity_erasure_census(&o, &i).unwrap() {
            let out = |x1: usize, x2: usize| det.output_for(&[x1, x2]);
            let a1_const = (0..2)
                .flat_map(|x1| (0..2).map(move |x2| (x1, x2)))
                .all(|(x1, x2)| out(x1, x2)[0] == out(0, 0)[0]);
            let a2_from_x1 = (0..2).all(|x1| out(x1, 0)[1] == out(x1, 1)[1]);
            let a2_const = (0..2)
                .flat_map(|x1| (0..2).map(move |x2| (x1, x2)))
                .all(|(x1, x2)| out(x1, x2)[1] == out(0, 0)[1]);
            let a1_from_x2 = (0..2).all(|x2| out(0, x2)[0] == out(1, x2)[0]);
            assert!(
                (a1_const && a2_from_x1) || (a2_const && a1_from_x2),
                "table {} is not causally ordered",
                det.code()
            );
        }
    }

    #[test]
    fn swap_is_not_in_the_census() {
        let swap = det_from_fns(|x| x[1], |x| x[0]);
        let (o, i) = bits();
        let census: HashSet<u64> = deterministic_parity_erasure_census(&o, &i)
            .unwrap()
            .iter()
            .map(|d| d.code())
            .collect();
        assert!(!census.contains(&swap.code()));
    }

    #[test]
    fn single_party_census_is_the_constant_tables() {
        let census = deterministic_parity_erasure_census(&[2], &[2]).unwrap();
        assert_eq!(census.len(), 2);
        for det in census {
            assert_eq!(det.output_for(&[0]), det.output_for(&[1]));
        }
    }

    #[test]
    fn polytope_vertices_equal_the_census() {
        let (o, i) = bits();
        let verts = parity_polytope_vertices(&o, &i).unwrap();
        assert_eq!(verts.len(), 12);
        let vert_tables: HashSet<Vec<u64>> = verts
            .iter()
            .map(|v| v.probs().iter().map(|p| p.to_bits()).collect())
            .collect();
        let census_tables: HashSet<Vec<u64>> = deterministic_parity_erasure_census(&o, &i)
            .unwrap()
            .iter()
            .map(|d| {
                d.to_classical()
                    .probs()
                    .iter()
                    .map(|p| p.to_bits())
                    .collect()
            })
            .collect();
        assert_eq!(vert_tables, census_tables);
        for v in &verts {
            assert!(v.probs().iter().all(|&p| p == 0.0 || p == 1.0));
            assert!(parity_erasure_classical(v, 1e-12).unwrap().verdict);
        }
    }

    #[test]
    fn uniform_vertex_mixture_is_interior_and_separable() {
        let (o, i) = bits();
        let verts = parity_polytope_vertices(&o, &i).unwrap();
        let k = verts.len() as f64;
        let probs: Vec<f64> = (0..16)
            .map(|e| verts.iter().map(|v| v.probs()[e]).sum::<f64>() / k)
            .collect();
        let mix = ClassicalChannel::new(o.clone(), i.clone(), probs).unwrap();
        assert!(parity_erasure_classical(&mix, 1e-12).unwrap().verdict);
        assert!(mix.probs().iter().all(|&p| p > 0.0 && p < 1.0));
        match causal_separability_lp(&mix, 1e-9).unwrap() {
            SeparabilityCertificate::Separable { weights, residual } => {
                let total: f64 = weights.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(residual <= 1e-9);
            }
            other => panic!("expected separable, got {other:?}"),
        }
    }

    #[test]
    fn swap_gets_a_separating_functional() {
        let swap = det_from_fns(|x| x[1], |x| x[0]).to_classical();
        match causal_separability_lp(&swap, 1e-9).unwrap() {
            SeparabilityCertificate::Inseparable {
                witness, margin, ..
            } => {
                assert_eq!(witness.len(), 16);
                assert!(margin > 0.1, "margin {margin}");
            }
            other => panic!("expected inseparable, got {other:?}"),
        }
    }

    #[test]
    fn comb_mixture_is_recovered() {
        // 0.5 (a1 = 0, a2 = x1) + 0.5 (a2 = 0, a1 = x2)
        let one = det_from_fns(|_| 0, |x| x[0]).to_classical();
        let two = det_from_fns(|x| x[1], |_| 0).to_classical();
        let probs: Vec<f64> = one
            .probs()
            .iter()
            .zip(two.probs())
            .map(|(a, b)| 0.5 * a + 0.5 * b)
            .collect();
        let mix = ClassicalChannel::new(vec![2, 2], vec![2, 2], probs.clone()).unwrap();
        match causal_separability_lp(&mix, 1e-9).unwrap() {
            SeparabilityCertificate::Separable { weights, residual } => {
                assert!(residual <= 1e-15, "residual {residual}");
                // reconstruct the mixture from the returned weights
                let census = deterministic_parity_erasure_census(&[2, 2], &[2, 2]).unwrap();
                for e in 0..16 {
                    let rebuilt: f64 = census
                        .iter()
                        .zip(&weights)
                        .map(|(d, w)| w * d.to_classical().probs()[e])
                        .sum();
                    assert!((rebuilt - probs[e]).abs() < 1e-9);
                }
            }
            other => panic!("expected separable, got {other:?}"),
        }
    }

    #[test]
    fn random_dyadic_hull_points_are_separable() {
        use rand::Rng;
        let mut rng = crate::random::rng_from_seed(97);
        let (o, i) = bits();
        let verts: Vec<Vec<f64>> = parity_polytope_vertices(&o, &i)
            .unwrap()
            .iter()
            .map(|v| v.probs().to_vec())
            .collect();
        for _ in 0..20 {
            // dyadic weights: integers over 1024, exactly representable
            let mut raw: Vec<u32> = (0..verts.len()).map(|_| rng.gen_range(0..64)).collect();
            let total: u32 = raw.iter().sum();
            if total == 0 {
                raw[0] = 1;
            }
            let shortfall = 1024u32.saturating_sub(raw.iter().sum());
            raw[0] += shortfall;
            let weights: Vec<f64> = raw.iter().map(|&r| r as f64 / 1024.0).collect();
            let scale: f64 = weights.iter().sum();
            let probs: Vec<f64> = (0..16)
                .map(|e| {
                    verts
                        .iter()
                        .zip(&weights)
                        .map(|(v, w)| w * v[e])
                        .sum::<f64>()
                        / scale
                })
                .collect();
            let mix = ClassicalChannel::new(o.clone(), i.clone(), probs).unwrap();
            assert!(matches!(
                causal_separability_lp(&mix, 1e-9).unwrap(),
                SeparabilityCertificate::Separable { .. }
            ));
        }
    }

    #[test]
    fn sampled_non_census_tables_are_inseparable() {
        let (o, i) = bits();
        let census: HashSet<u64> = deterministic_parity_erasure_census(&o, &i)
            .unwrap()
            .iter()
            .map(|d| d.code())
            .collect();
        let mut checked = 0;
        for det in enumerate_deterministic(&o, &i).unwrap() {
            if census.contains(&det.code()) || det.code() % 11 != 0 {
                continue;
            }
            match causal_separability_lp(&det.to_classical(), 1e-9).unwrap() {
                SeparabilityCertificate::Inseparable { margin, .. } => {
                    assert!(margin > 0.0, "table {}", det.code());
                }
                other => panic!("table {} separable: {other:?}", det.code()),
            }
            checked += 1;
        }
        assert!(checked >= 10, "only {checked} tables sampled");
    }
}
