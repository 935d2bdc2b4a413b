//! Dense eigen-decomposition and linear solves for small matrices.
//!
//! Eigenvalues: balancing, Hessenberg reduction by stabilized elimination,
//! then Francis double-shift QR. Eigenvectors: inverse iteration on the
//! original matrix in complex arithmetic.

use num_complex::Complex64;

use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;

/// Eigenvalues with unit-norm eigenvectors, sorted by real part ascending
/// (ties by imaginary part ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
}

type Mat = Vec<Vec<f64>>;

fn balance(a: &mut Mat) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut r, mut c) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
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
                let ginv = 1.0 / f;
                for j in 0..n {
                    a[i][j] *= ginv;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

fn hessenberg(a: &mut Mat) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut piv = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                piv = j;
            }
        }
        if piv != m {
            a.swap(piv, m);
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for j in 0..n {
                        a[j][m] += y * a[j][i];
                    }
                }
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        for v in row.iter_mut().take(i.saturating_sub(1)) {
            *v = 0.0;
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut Mat) -> Result<Vec<Complex64>> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let max_total = 100 * n.max(1);
    let mut total = 0usize;
    let mut anorm: f64 = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t: f64 = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= EPS * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if total >= max_total {
                return Err(Error::NoConvergence { iterations: total });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nu {
                    a[i][i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total += 1;
            let (mut p, mut q, mut r, mut z);
            let mut m = nu - 2;
            loop {
                z = a[m][m];
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s0;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= EPS * v {
                    break;
                }
                m -= 1;
            }
            for i in m..(nu - 1) {
                a[i + 2][i] = 0.0;
                if i != m {
                    a[i + 2][i - 1] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k + 1 != nu {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        p = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k + 1 != nu {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

/// Eigenvalues of a square matrix, unsorted.
pub fn eigenvalues(a: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let mut h = a.to_vec();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Solve `m z = b` in place by Gaussian elimination with partial pivoting.
/// Exact zero pivots are replaced by a tiny value, which is what inverse
/// iteration wants.
fn complex_solve_perturbed(mut m: Vec<Vec<Complex64>>, mut b: Vec<Complex64>, tiny: f64) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        if m[col][col].norm() == 0.0 {
            m[col][col] = Complex64::new(tiny, 0.0);
        }
        let d = m[col][col];
        for i in (col + 1)..n {
            let f = m[i][col] / d;
            if f != Complex64::new(0.0, 0.0) {
                for j in col..n {
                    let mv = m[col][j];
                    m[i][j] -= f * mv;
                }
                let bv = b[col];
                b[i] -= f * bv;
            }
        }
    }
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in (i + 1)..n {
            acc -= m[i][j] * z[j];
        }
        z[i] = acc / m[i][i];
    }
    z
}

fn normalize(v: &mut [Complex64]) {
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if big.norm() == 0.0 {
        return;
    }
    // largest component real and positive, then unit 2-norm
    let phase = big.conj() / big.norm();
    let mut nrm = 0.0;
    for c in v.iter_mut() {
        *c *= phase;
        nrm += c.norm_sqr();
    }
    let nrm = nrm.sqrt();
    for c in v.iter_mut() {
        *c /= nrm;
    }
    if let Some(c) = v.iter_mut().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        c.im = 0.0;
    }
}

/// Unit eigenvector for eigenvalue `lambda` by inverse iteration.
pub fn inverse_iteration(a: &[Vec<f64>], lambda: Complex64) -> Vec<Complex64> {
    let n = a.len();
    let scale = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tiny = EPS * scale;
    let shift = lambda + Complex64::new(tiny * 10.0, 0.0);
    let shifted: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = if i == j { shift } else { Complex64::new(0.0, 0.0) };
                    Complex64::new(a[i][j], 0.0) - d
                })
                .collect()
        })
        .collect();
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.0))
        .collect();
    normalize(&mut v);
    for _ in 0..4 {
        v = complex_solve_perturbed(shifted.clone(), v, tiny);
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            v = (0..n).map(|i| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).collect();
        }
        normalize(&mut v);
    }
    if lambda.im == 0.0 {
        for c in v.iter_mut() {
            c.im = 0.0;
        }
        normalize(&mut v);
    }
    v
}

/// Full eigen-decomposition, sorted by real part ascending.
pub fn eigen(a: &[Vec<f64>]) -> Result<Eigen> {
    let mut values = eigenvalues(a)?;
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let vectors = values.iter().map(|&l| inverse_iteration(a, l)).collect();
    Ok(Eigen { values, vectors })
}

/// Eigen-decomposition of a 5x5 matrix.
pub fn eigen5(j: &[[f64; 5]; 5]) -> Result<Eigen> {
    let a: Mat = j.iter().map(|r| r.to_vec()).collect();
    eigen(&a)
}

/// `|| (A - lambda I) v || / || v ||`.
pub fn eigen_residual(a: &[Vec<f64>], lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = a.len();
    let mut num = 0.0;
    for i in 0..n {
        let mut acc = -lambda * v[i];
        for j in 0..n {
            acc += a[i][j] * v[j];
        }
        num += acc.norm_sqr();
    }
    let den: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Solve the real system `a x = b` by partial-pivoting elimination.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() <= EPS * scale * n as f64 || scale == 0.0 {
            return Err(Error::Singular);
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for i in (col + 1)..n {
            let f = m[i][col] / m[col][col];
            for j in col..n {
                m[i][j] -= f * m[col][j];
            }
            rhs[i] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (a.re - re).abs() < tol && (a.im - im).abs() < tol
    }

    #[test]
    fn diagonal_spectrum_is_exact() {
        let mut j = [[0.0; 5]; 5];
        for (i, d) in [-1.0, -2.0, -3.0, 0.1, 0.2].into_iter().enumerate() {
            j[i][i] = d;
        }
        let e = eigen5(&j).unwrap();
        let expect = [-3.0, -2.0, -1.0, 0.1, 0.2];
        for (l, x) in e.values.iter().zip(expect) {
            assert!(close(*l, x, 0.0, 1e-12), "{l} vs {x}");
        }
    }

    #[test]
    fn rotation_block_gives_imaginary_pair() {
        let mut j = [[0.0; 5]; 5];
        for (i, row) in j.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        j[1][1] = 0.0;
        j[2][2] = 0.0;
        j[1][2] = -1.0;
        j[2][1] = 1.0;
        let e = eigen5(&j).unwrap();
        assert!(close(e.values[0], 0.0, -1.0, 1e-12));
        assert!(close(e.values[1], 0.0, 1.0, 1e-12));
        let a: Vec<Vec<f64>> = j.iter().map(|r| r.to_vec()).collect();
        for (l, v) in e.values.iter().zip(&e.vectors) {
            assert!(eigen_residual(&a, *l, v) < 1e-10);
        }
    }

    #[test]
    fn companion_matrix_roots() {
        // (l - 1)(l - 2)(l + 3) = l^3 - 7 l + 6
        let a = vec![
            vec![0.0, 7.0, -6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        let e = eigen(&a).unwrap();
        for (l, x) in e.values.iter().zip([-3.0, 1.0, 2.0]) {
            assert!(close(*l, x, 0.0, 1e-10));
        }
    }

    #[test]
    fn solve_detects_singular_system() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(solve(&a, &[1.0, 2.0]), Err(Error::Singular));
        let x = solve(&[vec![2.0, 1.0], vec![1.0, 3.0]], &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn non_finite_matrix_is_rejected() {
        let a = vec![vec![f64::NAN]];
        assert!(eigen(&a).is_err());
    }
}
