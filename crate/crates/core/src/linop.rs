//! The linearized operators as dense matrices in the orthonormal sine basis
//! `e_n = √2 sin(nπx)`, `n = 1..M`.
//!
//! With `s = ±1` the regime sign,
//! `L⁻ = −Δ + sμ − sφ²`, `L⁺ = −Δ + sμ − 3sφ²`, `𝓛 = [[0, L⁻], [−L⁺, 0]]`
//! and `𝓜 = [[A, B], [−B, −A]]` with `A = −Δ + sμ − 2sφ²`, `B = −sφ²`.
//! The two block operators are related by `i𝓛 = J⁻¹𝓜J`, `J = [[1, i], [1, −i]]`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::Regime;

/// Quadrature points per retained mode for the multiplication Gram matrices.
pub const OVERSAMPLING: usize = 4;

const DUMP_MAGIC: &[u8; 8] = b"GPBXMAT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    L,
    M,
}

/// A `2M × 2M` real block operator.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub matrix: Mat<f64>,
    pub regime: Regime,
    pub mu: f64,
    pub flavor: Flavor,
    pub modes: usize,
}

/// `c_j = ∫₀¹ f(x) cos(jπx) dx` for `j < count`, by the trapezoid rule on `q`
/// intervals. For `f` whose even extension is smooth and 2-periodic this is
/// spectrally accurate as long as `count ≪ 2q`.
pub fn cosine_moments<F: Fn(f64) -> f64>(f: F, count: usize, q: usize) -> Vec<f64> {
    let h = 1.0 / q as f64;
    let samples: Vec<f64> = (0..=q).map(|i| f(i as f64 * h)).collect();
    let table: Vec<f64> = (0..2 * q).map(|k| (PI * k as f64 / q as f64).cos()).collect();
    (0..count)
        .map(|j| {
            let mut s = 0.5 * (samples[0] + samples[q] * if j % 2 == 0 { 1.0 } else { -1.0 });
            for (i, v) in samples.iter().enumerate().take(q).skip(1) {
                s += v * table[(j * i) % (2 * q)];
            }
            s * h
        })
        .collect()
}

/// Gram matrix `G_mn = ∫ f e_m e_n = c_{|m−n|} − c_{m+n}` of multiplication by `f`.
pub fn multiplication_gram<F: Fn(f64) -> f64>(f: F, modes: usize) -> Mat<f64> {
    let c = cosine_moments(f, 2 * modes + 2, OVERSAMPLING * modes.max(16));
    Mat::from_fn(modes, modes, |i, j| {
        let (m, n) = (i + 1, j + 1);
        c[m.abs_diff(n)] - c[m + n]
    })
}

fn laplacian_diag(n: usize) -> f64 {
    let k = n as f64 * PI;
    k * k
}

/// `−Δ + sμ − c·sφ²` with `c = 1` (minus), `2` (the 𝓜 diagonal block) or `3` (plus).
fn shifted_operator(gs: &GroundState, weight: f64, modes: usize) -> Mat<f64> {
    let s = gs.regime.sign();
    let mut a = if gs.is_trivial() {
        Mat::zeros(modes, modes)
    } else {
        multiplication_gram(|x| -weight * s * gs.value(x).powi(2), modes)
    };
    for i in 0..modes {
        let d = a.read(i, i) + laplacian_diag(i + 1) + s * gs.mu;
        a.write(i, i, d);
    }
    symmetrize(&mut a);
    a
}

fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a.read(i, j) + a.read(j, i));
            a.write(i, j, v);
            a.write(j, i, v);
        }
    }
}

/// `L⁻` or `L⁺` in the sine basis.
pub fn assemble_scalar(gs: &GroundState, which: Which, modes: usize) -> Mat<f64> {
    let weight = match which {
        Which::Minus => 1.0,
        Which::Plus => 3.0,
    };
    shifted_operator(gs, weight, modes)
}

/// `𝓛` or `𝓜` in the sine basis, ordered as (first component, second component).
pub fn assemble_block(gs: &GroundState, flavor: Flavor, modes: usize) -> BlockOperator {
    let m = modes;
    let matrix = match flavor {
        Flavor::L => {
            let lm = assemble_scalar(gs, Which::Minus, m);
            let lp = assemble_scalar(gs, Which::Plus, m);
            Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
                (true, false) => lm.read(i, j - m),
                (false, true) => -lp.read(i - m, j),
                _ => 0.0,
            })
        }
        Flavor::M => {
            let a = shifted_operator(gs, 2.0, m);
            let s = gs.regime.sign();
            let b = if gs.is_trivial() {
                Mat::zeros(m, m)
            } else {
                let mut b = multiplication_gram(|x| -s * gs.value(x).powi(2), m);
                symmetrize(&mut b);
                b
            };
            Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
                (true, true) => a.read(i, j),
                (true, false) => b.read(i, j - m),
                (false, true) => -b.read(i - m, j),
                (false, false) => -a.read(i - m, j - m),
            })
        }
    };
    BlockOperator { matrix, regime: gs.regime, mu: gs.mu, flavor, modes }
}

/// `J (a, b) = (a + ib, a − ib)` on stacked component vectors.
pub fn j_apply(v: &[Complex64]) -> Vec<Complex64> {
    let m = v.len() / 2;
    let i = Complex64::i();
    let (a, b) = v.split_at(m);
    let top = a.iter().zip(b).map(|(x, y)| x + i * y);
    let bottom = a.iter().zip(b).map(|(x, y)| x - i * y);
    top.chain(bottom).collect()
}

/// `J⁻¹ (p, q) = ((p + q)/2, −i(p − q)/2)`.
pub fn j_inverse_apply(v: &[Complex64]) -> Vec<Complex64> {
    let m = v.len() / 2;
    let half_i = Complex64::new(0.0, 0.5);
    let (p, q) = v.split_at(m);
    let top = p.iter().zip(q).map(|(x, y)| (x + y) * 0.5);
    let bottom = p.iter().zip(q).map(|(x, y)| -half_i * (x - y));
    top.chain(bottom).collect()
}

/// Writes a `2M × 2M` (or `M × M`) matrix as a 16-byte header (magic, `M` as
/// little-endian u64) followed by row-major little-endian f64 entries.
pub fn write_matrix(path: &Path, matrix: &Mat<f64>, modes: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(modes as u64).to_le_bytes())?;
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            w.write_all(&matrix.read(i, j).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dump written by [`write_matrix`]; the matrix is taken to be square.
pub fn read_matrix(path: &Path) -> Result<(Mat<f64>, usize)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..8] != DUMP_MAGIC {
        return Err(Error::Parse(format!("{} is not a matrix dump", path.display())));
    }
    let modes = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let count = body.len() / 8;
    let n = (count as f64).sqrt().round() as usize;
    if n * n * 8 != body.len() {
        return Err(Error::Parse(format!("matrix dump body of {} bytes is not square", body.len())));
    }
    let data: Vec<f64> =
        body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((Mat::from_fn(n, n, |i, j| data[i * n + j]), modes))
}
