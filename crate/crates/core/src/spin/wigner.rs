//! Wigner small-d matrices `d^j_{m'm}(β) = <j m'| exp(-iβ S_y) |j m>` for
//! spin `j = N/2`, stored in the Dicke index convention `p = j - m`.
//!
//! Each column is generated by the three-term recurrence that follows from
//! `D S_z D† = cos β S_z + sin β S_x`:
//!
//! ```text
//! (m - m' cos β) d_{m'm} = (sin β / 2) [ A(m') d_{m'-1,m} + B(m') d_{m'+1,m} ]
//! ```
//!
//! The recurrence is run from both ends of the column towards the centre of
//! the classically allowed band, where it is stable in either direction; the
//! two halves are matched on two overlapping entries and the column is fixed
//! by unit norm and the sign of the analytic edge value. No factorials are
//! formed, so the construction works for thousands of atoms.

use num_complex::Complex64;
use std::f64::consts::PI;

const RESCALE_ABOVE: f64 = 1e150;
const RESCALE_BY: f64 = 1e-150;

/// Real orthogonal `(N+1) x (N+1)` rotation matrix, column-major.
#[derive(Debug, Clone)]
pub struct SmallD {
    dim: usize,
    data: Vec<f64>,
}

impl SmallD {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Element `d_{m_p, m_q}`.
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.data[q * self.dim + p]
    }

    pub fn column(&self, q: usize) -> &[f64] {
        &self.data[q * self.dim..(q + 1) * self.dim]
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.dim);
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (q, &amp) in psi.iter().enumerate() {
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            for (o, &d) in out.iter_mut().zip(self.column(q)) {
                *o += amp * d;
            }
        }
        out
    }
}

/// Wraps an angle into `(-π, π]`.
fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Builds `d^{N/2}(beta)`.
pub fn small_d(n_atoms: usize, beta: f64) -> SmallD {
    let dim = n_atoms + 1;
    let wrapped = wrap_angle(beta);
    // d(β + 2π) = (-1)^N d(β)
    let turns = ((beta - wrapped) / (2.0 * PI)).round() as i64;
    let period_sign = if n_atoms % 2 == 1 && turns % 2 != 0 { -1.0 } else { 1.0 };
    let beta = wrapped;
    let mut data = vec![0.0; dim * dim];
    if beta == 0.0 {
        for p in 0..dim {
            data[p * dim + p] = period_sign;
        }
        return SmallD { dim, data };
    }

    let n = n_atoms as f64;
    let j = 0.5 * n;
    let s = beta.sin();
    let half_s = 0.5 * s;
    // 1 - cos β without cancellation
    let one_minus_c = 2.0 * (0.5 * beta).sin().powi(2);
    // up[p] couples p to p+1, dn[p] couples p to p-1.
    let up: Vec<f64> = (0..dim)
        .map(|p| ((n_atoms - p) as f64 * (p + 1) as f64).sqrt())
        .collect();
    let dn: Vec<f64> = (0..dim)
        .map(|p| (p as f64 * (n_atoms - p + 1) as f64).sqrt())
        .collect();
    let mprime: Vec<f64> = (0..dim).map(|p| j - p as f64).collect();
    let width: Vec<f64> = mprime
        .iter()
        .map(|&mp| (j * (j + 1.0) - mp * mp).sqrt())
        .collect();

    let (half_beta_s, half_beta_c) = (0.5 * beta).sin_cos();
    let mut fwd = vec![0.0; dim];
    let mut bwd = vec![0.0; dim];

    for q in 0..dim {
        let m = j - q as f64;
        let gap = |p: usize| (m - mprime[p]) + mprime[p] * one_minus_c;
        let diag = |p: usize| gap(p) / half_s;

        let pc = (0..dim)
            .min_by(|&a, &b| {
                let xa = gap(a).abs() / width[a];
                let xb = gap(b).abs() / width[b];
                xa.total_cmp(&xb)
            })
            .unwrap_or(0);
        let (lo, hi) = if pc == 0 { (0, 1) } else { (pc - 1, pc) };

        fwd[0] = 1.0;
        for p in 0..hi {
            let prev = if p == 0 { 0.0 } else { dn[p] * fwd[p - 1] };
            fwd[p + 1] = (diag(p) * fwd[p] - prev) / up[p];
            if fwd[p + 1].abs() > RESCALE_ABOVE {
                fwd[..=p + 1].iter_mut().for_each(|v| *v *= RESCALE_BY);
            }
        }

        bwd[n_atoms] = 1.0;
        for p in (lo + 1..=n_atoms).rev() {
            let next = if p == n_atoms { 0.0 } else { up[p] * bwd[p + 1] };
            bwd[p - 1] = (diag(p) * bwd[p] - next) / dn[p];
            if bwd[p - 1].abs() > RESCALE_ABOVE {
                bwd[p - 1..].iter_mut().for_each(|v| *v *= RESCALE_BY);
            }
        }

        let fmax = fwd[..=hi].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let bmax = bwd[lo..].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        fwd[..=hi].iter_mut().for_each(|v| *v /= fmax);
        bwd[lo..].iter_mut().for_each(|v| *v /= bmax);
        let ratio = (fwd[lo] * bwd[lo] + fwd[hi] * bwd[hi]) / (bwd[lo].powi(2) + bwd[hi].powi(2));

        let col = &mut data[q * dim..(q + 1) * dim];
        col[..=hi].copy_from_slice(&fwd[..=hi]);
        for p in hi + 1..dim {
            col[p] = ratio * bwd[p];
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();

        // sign of d_{j,m} = cos^{N-q}(β/2) (-sin(β/2))^q
        let mut sign = 1.0;
        if half_beta_c < 0.0 && (n_atoms - q) % 2 == 1 {
            sign = -sign;
        }
        if half_beta_s > 0.0 && q % 2 == 1 {
            sign = -sign;
        }
        let scale = period_sign * sign / norm;
        col.iter_mut().for_each(|v| *v *= scale);
    }
    SmallD { dim, data }
}
