use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular-value ratio below which a column-scaled design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct Lstsq {
    pub x: DVector<f64>,
    pub residual_rms: f64,
    /// Ratio of extreme singular values of the column-scaled design matrix.
    pub condition: f64,
}

/// Least-squares solution of `a x ≈ b` by Householder QR of the
/// column-equilibrated design, with an SVD of the small triangular factor for
/// conditioning and rank checks.
pub(crate) fn solve(a: DMatrix<f64>, b: DVector<f64>, what: &'static str) -> Result<Lstsq> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::SeriesTooShort { len: m, required: n - 1 });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    let scale: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let s = c.norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }

    let qr = scaled.qr();
    let r = qr.r();
    let svd = r.clone().svd(false, true);
    let sv = &svd.singular_values;
    let (imin, smin) = sv.argmin();
    let smax = sv.max();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(smax > 0.0) || smin <= RANK_TOLERANCE * smax {
        let v_t = svd.v_t.expect("right singular vectors were requested");
        let mut dir: Vec<f64> = (0..n).map(|j| v_t[(imin, j)] / scale[j]).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lead = dir.iter().copied().fold(0.0, |acc: f64, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        dir.iter_mut().for_each(|v| *v *= sign / norm);
        return Err(Error::RankDeficient {
            what,
            null_direction: dir,
            condition,
        });
    }

    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let y = r
        .solve_upper_triangular(&qtb.rows(0, n).into_owned())
        .ok_or(Error::NonFinite(what))?;
    let x = DVector::from_iterator(n, y.iter().zip(&scale).map(|(v, s)| v / s));
    let resid = &a * &x - &b;
    let residual_rms = (resid.norm_squared() / m as f64).sqrt();
    Ok(Lstsq {
        x,
        residual_rms,
        condition,
    })
}
