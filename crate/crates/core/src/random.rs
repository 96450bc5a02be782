//! Seeded random operators, states, and channels.
//!
//! Everything here is driven by an explicit RNG so callers get reproducible
//! objects from a `u64` seed.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::label::TensorSpace;
use crate::operator::{CMatrix, LabeledOperator};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Gaussian Hermitian matrix, `(G + G^dag) / 2`.
pub fn random_hermitian_matrix<R: Rng>(dim: usize, rng: &mut R) -> CMatrix {
    let g = random_matrix(dim, dim, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_hermitian<R: Rng>(space: TensorSpace, rng: &mut R) -> LabeledOperator {
    let m = random_hermitian_matrix(space.total_dim(), rng);
    LabeledOperator::new(space, m).expect("square by construction")
}

/// Density matrix `G G^dag / Tr`, full rank with probability one.
pub fn random_density_matrix<R: Rng>(dim: usize, rng: &mut R) -> CMatrix {
    let g = random_matrix(dim, dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m * C64::new(1.0 / tr, 0.0)
}

pub fn random_state<R: Rng>(space: TensorSpace, rng: &mut R) -> LabeledOperator {
    let m = random_density_matrix(space.total_dim(), rng);
    LabeledOperator::new(space, m).expect("square by construction")
}

/// Haar-distributed unitary via phase-fixed QR of a Gaussian matrix.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> CMatrix {
    random_isometry(dim, dim, rng)
}

/// Haar-style isometry `V: C^cols -> C^rows` with `V^dag V = I` (requires
/// `rows >= cols`).
pub fn random_isometry<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = random_matrix(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Choi matrix of a random CPTP map between the given spaces, on the space
/// `in_space ++ out_space`. `env_dim` controls the Kraus rank.
pub fn random_cptp_choi<R: Rng>(
    in_space: &TensorSpace,
    out_space: &TensorSpace,
    env_dim: usize,
    rng: &mut R,
) -> Result<LabeledOperator> {
    let din = in_space.total_dim();
    let dout = out_space.total_dim();
    let v = random_isometry(dout * env_dim, din, rng);
    // C[(i u),(j w)] = sum_e V[(u e), i] conj(V[(w e), j])
    let mut m = CMatrix::zeros(din * dout, din * dout);
    for i in 0..din {
        for j in 0..din {
            for u in 0..dout {
                for w in 0..dout {
                    let mut acc = C64::new(0.0, 0.0);
                    for e in 0..env_dim {
                        acc += v[(u * env_dim + e, i)] * v[(w * env_dim + e, j)].conj();
                    }
                    m[(i * dout + u, j * dout + w)] = acc;
                }
            }
        }
    }
    LabeledOperator::new(in_space.concat(out_space)?, m)
}

/// Random POVM with `k` outcomes on a `dim`-dimensional system.
pub fn random_povm<R: Rng>(dim: usize, k: usize, rng: &mut R) -> Vec<CMatrix> {
    assert!(k >= 1);
    let parts: Vec<CMatrix> = (0..k)
        .map(|_| {
            let g = random_matrix(dim, dim, rng);
            &g * g.adjoint()
        })
        .collect();
    let mut total = CMatrix::zeros(dim, dim);
    for p in &parts {
        total += p;
    }
    let inv_sqrt = hermitian_power(&total, -0.5);
    parts
        .into_iter()
        .map(|p| &inv_sqrt * p * &inv_sqrt)
        .collect()
}

/// `H^p` for Hermitian positive definite `H`, via eigendecomposition.
pub fn hermitian_power(h: &CMatrix, p: f64) -> CMatrix {
    let sym = nalgebra::linalg::SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = sym.eigenvalues[k].max(1e-300);
        let col = sym.eigenvectors.column(k);
        out += (col * col.adjoint()) * C64::new(lam.powf(p), 0.0);
    }
    out
}

/// Random instrument on `in_space -> out_space` with `k` outcomes: Choi
/// matrices of completely positive maps that sum to a CPTP map.
pub fn random_instrument_chois<R: Rng>(
    in_space: &TensorSpace,
    out_space: &TensorSpace,
    k: usize,
    rng: &mut R,
) -> Result<Vec<LabeledOperator>> {
    let din = in_space.total_dim();
    let dout = out_space.total_dim();
    // dilate: CPTP map into out (x) outcome register, then pick out blocks
    let v = random_isometry(dout * k, din, rng);
    let mut chois = Vec::with_capacity(k);
    for outcome in 0..k {
        let mut m = CMatrix::zeros(din * dout, din * dout);
        for i in 0..din {
            for j in 0..din {
                for u in 0..dout {
                    for w in 0..dout {
                        m[(i * dout + u, j * dout + w)] =
                            v[(u * k + outcome, i)] * v[(w * k + outcome, j)].conj();
                    }
                }
            }
        }
        chois.push(LabeledOperator::new(in_space.concat(out_space)?, m)?);
    }
    Ok(chois)
}
