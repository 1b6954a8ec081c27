//! Thin QR factorization with column append and delete.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub(crate) struct IncrementalQr {
    q: Vec<Vec<f64>>,
    // r[c] is column c of the upper-triangular factor, length = number of columns
    r: Vec<Vec<f64>>,
}

impl IncrementalQr {
    pub fn new() -> Self {
        Self { q: Vec::new(), r: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    /// Appends a column; returns `false` (and leaves the factorization
    /// unchanged) when it is numerically dependent on the current columns.
    pub fn push(&mut self, x: &[f64]) -> bool {
        let xnorm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        let mut coeffs = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&self.q) {
                let a = dot(q, &v);
                *c += a;
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= a * qi);
            }
        }
        let rho = dot(&v, &v).sqrt();
        if rho.is_nan() || rho <= 1e-13 * xnorm {
            return false;
        }
        v.iter_mut().for_each(|vi| *vi /= rho);
        for col in &mut self.r {
            col.push(0.0);
        }
        coeffs.push(rho);
        self.r.push(coeffs);
        self.q.push(v);
        true
    }

    /// Deletes column `idx`, restoring triangularity with Givens rotations.
    pub fn remove(&mut self, idx: usize) {
        let m = self.q.len();
        self.r.remove(idx);
        for j in idx..m - 1 {
            let a = self.r[j][j];
            let b = self.r[j][j + 1];
            let h = a.hypot(b);
            if h == 0.0 {
                continue;
            }
            let (c, s) = (a / h, b / h);
            for col in self.r.iter_mut().skip(j) {
                let (x, y) = (col[j], col[j + 1]);
                col[j] = c * x + s * y;
                col[j + 1] = -s * x + c * y;
            }
            self.r[j][j] = h;
            self.r[j][j + 1] = 0.0;
            let (lo, hi) = self.q.split_at_mut(j + 1);
            for (x, y) in lo[j].iter_mut().zip(hi[0].iter_mut()) {
                let (a, b) = (*x, *y);
                *x = c * a + s * b;
                *y = -s * a + c * b;
            }
        }
        self.q.pop();
        for col in &mut self.r {
            col.pop();
        }
    }

    pub fn qt(&self, y: &[f64]) -> Vec<f64> {
        self.q.iter().map(|q| dot(q, y)).collect()
    }

    /// Solves `R x = b`.
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut x = vec![0.0; m];
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|c| self.r[c][i] * x[c]).sum();
            x[i] = (b[i] - s) / self.r[i][i];
        }
        x
    }

    /// Solves `R^T z = b`.
    pub fn solve_rt(&self, b: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut z = vec![0.0; m];
        for i in 0..m {
            let s: f64 = (0..i).map(|c| self.r[i][c] * z[c]).sum();
            z[i] = (b[i] - s) / self.r[i][i];
        }
        z
    }

    /// `R x`.
    pub fn r_mul(&self, x: &[f64]) -> Vec<f64> {
        let m = self.len();
        (0..m).map(|i| (i..m).map(|c| self.r[c][i] * x[c]).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn columns() -> Vec<Vec<f64>> {
        (0..4)
            .map(|c| (0..7).map(|i| ((i * 3 + c * 5) as f64 * 0.41).sin() + if i == c { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    fn reconstruct(qr: &IncrementalQr, c: usize) -> Vec<f64> {
        let mut x = vec![0.0; 7];
        for (i, q) in qr.q.iter().enumerate() {
            if i < qr.r[c].len() {
                x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += qr.r[c][i] * qi);
            }
        }
        x
    }

    #[test]
    fn append_and_delete_preserve_factorization() {
        let cols = columns();
        let mut qr = IncrementalQr::new();
        for c in &cols {
            assert!(qr.push(c));
        }
        qr.remove(1);
        let kept = [0, 2, 3];
        for (pos, &c) in kept.iter().enumerate() {
            let x = reconstruct(&qr, pos);
            for (a, b) in x.iter().zip(&cols[c]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&qr.q[i], &qr.q[j]) - want).abs() < 1e-12);
            }
            for j in i + 1..3 {
                assert_eq!(qr.r[i][j], 0.0);
            }
        }
        assert!(!qr.push(&cols[2]));
    }

    #[test]
    fn triangular_solves() {
        let mut qr = IncrementalQr::new();
        for c in &columns() {
            qr.push(c);
        }
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = qr.solve_r(&b);
        let rx = qr.r_mul(&x);
        for (a, b) in rx.iter().zip(&b) {
            assert!((a - b).abs() < 1e-12);
        }
        let z = qr.solve_rt(&b);
        for (i, bi) in b.iter().enumerate() {
            let s: f64 = (0..=i).map(|c| qr.r[i][c] * z[c]).sum();
            assert!((s - bi).abs() < 1e-12);
        }
    }
}
