//! Digital Butterworth high-pass design and zero-phase filtering.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Transfer-function coefficients `(b, a)` with `a[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

/// Designs an `order`-th order high-pass filter with cutoff `wn`, expressed as
/// a fraction of the Nyquist frequency, via the bilinear transform.
pub fn butter_highpass(order: usize, wn: f64) -> Result<TransferFunction> {
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    if !(wn > 0.0 && wn < 1.0) {
        return Err(Error::invalid(format!("cutoff {wn} must lie in (0, 1)")));
    }
    let fs = 2.0;
    // Analog prototype poles on the left half of the unit circle.
    let n = order as f64;
    let proto: Vec<Complex64> = (0..order)
        .map(|k| {
            let m = -(n - 1.0) + 2.0 * k as f64;
            -Complex64::from_polar(1.0, PI * m / (2.0 * n))
        })
        .collect();
    let warped = 2.0 * fs * (PI * wn / fs).tan();

    // Low-pass to high-pass: poles invert, `order` zeros land at the origin.
    let hp_poles: Vec<Complex64> = proto.iter().map(|&p| warped / p).collect();
    let hp_zeros = vec![Complex64::new(0.0, 0.0); order];
    let prod_neg_p: Complex64 = proto.iter().map(|&p| -p).product();
    let hp_gain = (Complex64::new(1.0, 0.0) / prod_neg_p).re;

    let fs2 = 2.0 * fs;
    let z_zeros: Vec<Complex64> = hp_zeros.iter().map(|&z| (fs2 + z) / (fs2 - z)).collect();
    let z_poles: Vec<Complex64> = hp_poles.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();
    let num: Complex64 = hp_zeros.iter().map(|&z| fs2 - z).product();
    let den: Complex64 = hp_poles.iter().map(|&p| fs2 - p).product();
    let gain = hp_gain * (num / den).re;

    let b = poly(&z_zeros).into_iter().map(|c| c * gain).collect();
    let a = poly(&z_poles);
    Ok(TransferFunction { b, a })
}

/// Real coefficients of `prod (x - r)`, highest power first.
fn poly(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

impl TransferFunction {
    /// `|H(e^{i w})|` at normalized angular frequency `w` in radians/sample.
    pub fn magnitude(&self, w: f64) -> f64 {
        let eval = |coef: &[f64]| -> Complex64 {
            coef.iter()
                .enumerate()
                .map(|(k, &c)| c * Complex64::from_polar(1.0, -w * k as f64))
                .sum()
        };
        (eval(&self.b) / eval(&self.a)).norm()
    }

    fn order(&self) -> usize {
        self.a.len().max(self.b.len()) - 1
    }

    /// Direct form II transposed filtering with initial state `zi`.
    pub fn lfilter(&self, x: &[f64], zi: &[f64]) -> Vec<f64> {
        let n = self.order();
        let b = padded(&self.b, n + 1);
        let a = padded(&self.a, n + 1);
        let mut z = zi.to_vec();
        z.resize(n, 0.0);
        let mut y = Vec::with_capacity(x.len());
        for &xi in x {
            let yi = b[0] * xi + z.first().copied().unwrap_or(0.0);
            for i in 0..n {
                let next = if i + 1 < n { z[i + 1] } else { 0.0 };
                z[i] = b[i + 1] * xi + next - a[i + 1] * yi;
            }
            y.push(yi);
        }
        y
    }

    /// Steady-state initial conditions for a unit step input.
    pub fn lfilter_zi(&self) -> Result<Vec<f64>> {
        let n = self.order();
        let b = padded(&self.b, n + 1);
        let a = padded(&self.a, n + 1);
        // (I - companion(a)^T) zi = b[1:] - a[1:] b[0]
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
            row[0] += a[i + 1];
            if i + 1 < n {
                row[i + 1] -= 1.0;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| b[i + 1] - a[i + 1] * b[0]).collect();
        solve(m, rhs)
    }

    /// Forward-backward filtering with odd extension of `3 * len(a)` samples
    /// at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let padlen = 3 * self.a.len().max(self.b.len());
        if x.len() <= padlen {
            return Err(Error::insufficient(format!(
                "filtering needs more than {padlen} samples, got {}",
                x.len()
            )));
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        ext.extend((1..=padlen).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=padlen).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.lfilter_zi()?;
        let scaled = |v: f64| zi.iter().map(|z| z * v).collect::<Vec<_>>();
        let fwd = self.lfilter(&ext, &scaled(ext[0]));
        let rev: Vec<f64> = fwd.iter().rev().copied().collect();
        let mut back = self.lfilter(&rev, &scaled(rev[0]));
        back.reverse();
        Ok(back[padlen..padlen + n].to_vec())
    }
}

fn padded(c: &[f64], len: usize) -> Vec<f64> {
    let mut v = c.to_vec();
    v.resize(len, 0.0);
    v
}

/// Gaussian elimination with partial pivoting.
fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::Internal("singular system in filter initialisation".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut out = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * out[k]).sum();
        out[row] = (rhs[row] - s) / m[row][row];
    }
    Ok(out)
}
