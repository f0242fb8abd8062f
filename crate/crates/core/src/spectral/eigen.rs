//! Eigenvalues of a dense real nonsymmetric matrix.
//!
//! Balancing, Householder reduction to upper Hessenberg form, then the
//! Francis double-shift QR iteration without accumulation of vectors.

#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use crate::error::{Error, Result};

const RADIX: f64 = 2.0;

/// Square matrix stored 1-based so the iteration reads like its textbook form.
struct Work {
    n: usize,
    a: Vec<f64>,
}

impl Work {
    fn new(n: usize, row_major: &[f64]) -> Self {
        let mut a = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                a[(i + 1) * (n + 1) + j + 1] = row_major[i * n + j];
            }
        }
        Work { n, a }
    }

    #[inline]
    fn g(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.n + 1) + j]
    }

    #[inline]
    fn s(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.a[i * (n + 1) + j] = v;
    }

    fn balance(&mut self) {
        let n = self.n;
        let sqrdx = RADIX * RADIX;
        let mut done = false;
        while !done {
            done = true;
            for i in 1..=n {
                let mut r = 0.0;
                let mut c = 0.0;
                for j in 1..=n {
                    if j != i {
                        c += self.g(j, i).abs();
                        r += self.g(i, j).abs();
                    }
                }
                if c != 0.0 && r != 0.0 {
                    let mut g = r / RADIX;
                    let mut f = 1.0;
                    let s = c + r;
                    while c < g {
                        f *= RADIX;
                        c *= sqrdx;
                    }
                    g = r * RADIX;
                    while c > g {
                        f /= RADIX;
                        c /= sqrdx;
                    }
                    if (c + r) / f < 0.95 * s {
                        done = false;
                        let g = 1.0 / f;
                        for j in 1..=n {
                            let v = self.g(i, j) * g;
                            self.s(i, j, v);
                        }
                        for j in 1..=n {
                            let v = self.g(j, i) * f;
                            self.s(j, i, v);
                        }
                    }
                }
            }
        }
    }

    fn hessenberg(&mut self) {
        let n = self.n;
        if n < 3 {
            return;
        }
        let mut v = vec![0.0; n + 1];
        for k in 1..=n - 2 {
            let scale: f64 = (k + 1..=n).map(|i| self.g(i, k).abs()).sum();
            if scale == 0.0 {
                continue;
            }
            let mut h = 0.0;
            for i in k + 1..=n {
                v[i] = self.g(i, k) / scale;
                h += v[i] * v[i];
            }
            let alpha = if v[k + 1] > 0.0 { -h.sqrt() } else { h.sqrt() };
            h -= v[k + 1] * alpha;
            v[k + 1] -= alpha;
            // Reflector P = I - v vᵀ / h applied as P A P.
            for j in k..=n {
                let mut f = 0.0;
                for i in k + 1..=n {
                    f += v[i] * self.g(i, j);
                }
                f /= h;
                for i in k + 1..=n {
                    let x = self.g(i, j) - f * v[i];
                    self.s(i, j, x);
                }
            }
            for i in 1..=n {
                let mut f = 0.0;
                for j in k + 1..=n {
                    f += self.g(i, j) * v[j];
                }
                f /= h;
                for j in k + 1..=n {
                    let x = self.g(i, j) - f * v[j];
                    self.s(i, j, x);
                }
            }
            self.s(k + 1, k, alpha * scale);
            for i in k + 2..=n {
                self.s(i, k, 0.0);
            }
        }
    }

    fn francis_qr(&mut self, max_iter: usize) -> Result<Vec<Complex64>> {
        let n = self.n;
        let eps = f64::EPSILON;
        let mut wr = vec![0.0; n + 1];
        let mut wi = vec![0.0; n + 1];
        let mut anorm = 0.0;
        for i in 1..=n {
            for j in i.saturating_sub(1).max(1)..=n {
                anorm += self.g(i, j).abs();
            }
        }
        let mut nn = n;
        let mut t = 0.0;
        let mut total = 0usize;
        while nn >= 1 {
            let mut its = 0usize;
            loop {
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.g(l - 1, l - 1).abs() + self.g(l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if self.g(l, l - 1).abs() <= eps * s {
                        self.s(l, l - 1, 0.0);
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.g(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = 0.0;
                    nn -= 1;
                    break;
                }
                let mut y = self.g(nn - 1, nn - 1);
                let mut w = self.g(nn, nn - 1) * self.g(nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = z;
                        wi[nn] = -z;
                    }
                    nn = nn.saturating_sub(2);
                    break;
                }
                if total >= max_iter {
                    return Err(Error::Numerical(format!(
                        "QR iteration did not converge within {max_iter} iterations"
                    )));
                }
                if its > 0 && its.is_multiple_of(10) {
                    t += x;
                    for i in 1..=nn {
                        let v = self.g(i, i) - x;
                        self.s(i, i, v);
                    }
                    let s = self.g(nn, nn - 1).abs() + self.g(nn - 1, nn - 2).abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                its += 1;
                total += 1;
                let (mut p, mut q, mut r);
                let mut m = nn - 2;
                loop {
                    let z = self.g(m, m);
                    let rr = x - z;
                    let ss = y - z;
                    p = (rr * ss - w) / self.g(m + 1, m) + self.g(m, m + 1);
                    q = self.g(m + 1, m + 1) - z - rr - ss;
                    r = self.g(m + 2, m + 1);
                    let s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    let u = self.g(m, m - 1).abs() * (q.abs() + r.abs());
                    let v = p.abs() * (self.g(m - 1, m - 1).abs() + z.abs() + self.g(m + 1, m + 1).abs());
                    if u <= eps * v {
                        break;
                    }
                    m -= 1;
                }
                for i in m + 2..=nn {
                    self.s(i, i - 2, 0.0);
                    if i != m + 2 {
                        self.s(i, i - 3, 0.0);
                    }
                }
                let mut k = m;
                while k < nn {
                    let mut xs = 0.0;
                    if k != m {
                        p = self.g(k, k - 1);
                        q = self.g(k + 1, k - 1);
                        r = if k != nn - 1 { self.g(k + 2, k - 1) } else { 0.0 };
                        xs = p.abs() + q.abs() + r.abs();
                        if xs != 0.0 {
                            p /= xs;
                            q /= xs;
                            r /= xs;
                        }
                    }
                    let s = (p * p + q * q + r * r).sqrt().copysign(p);
                    if s != 0.0 {
                        if k == m {
                            if l != m {
                                let v = -self.g(k, k - 1);
                                self.s(k, k - 1, v);
                            }
                        } else {
                            self.s(k, k - 1, -s * xs);
                        }
                        p += s;
                        let xx = p / s;
                        let yy = q / s;
                        let zz = r / s;
                        q /= p;
                        r /= p;
                        for j in k..=nn {
                            let mut pp = self.g(k, j) + q * self.g(k + 1, j);
                            if k != nn - 1 {
                                pp += r * self.g(k + 2, j);
                                let v = self.g(k + 2, j) - pp * zz;
                                self.s(k + 2, j, v);
                            }
                            let v = self.g(k + 1, j) - pp * yy;
                            self.s(k + 1, j, v);
                            let v = self.g(k, j) - pp * xx;
                            self.s(k, j, v);
                        }
                        let mmin = nn.min(k + 3);
                        for i in l..=mmin {
                            let mut pp = xx * self.g(i, k) + yy * self.g(i, k + 1);
                            if k != nn - 1 {
                                pp += zz * self.g(i, k + 2);
                                let v = self.g(i, k + 2) - pp * r;
                                self.s(i, k + 2, v);
                            }
                            let v = self.g(i, k + 1) - pp * q;
                            self.s(i, k + 1, v);
                            let v = self.g(i, k) - pp;
                            self.s(i, k, v);
                        }
                    }
                    k += 1;
                }
            }
        }
        Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
    }
}

/// All eigenvalues of the `n × n` row-major matrix, with multiplicity.
pub(crate) fn real_eigenvalues(n: usize, row_major: &[f64]) -> Result<Vec<Complex64>> {
    if n == 1 {
        return Ok(vec![Complex64::new(row_major[0], 0.0)]);
    }
    let mut w = Work::new(n, row_major);
    w.balance();
    w.hessenberg();
    w.francis_qr(100 * n)
}
