//! Minimal 3x3 complex linear algebra for the constant-coefficient oracle:
//! characteristic-polynomial eigendecomposition (Cardano roots plus
//! cross-product null vectors) and a scaling-and-squaring matrix
//! exponential used as the generalized form near defective points.

use num_complex::Complex64 as C64;

pub(crate) type Mat3 = [[C64; 3]; 3];
pub(crate) type Vec3 = [C64; 3];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [ZERO; 3];
    for i in 0..3 {
        out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    }
    out
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub(crate) fn mat_norm(a: &Mat3) -> f64 {
    a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vec_norm(v: &Vec3) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Roots of `x^3 + a2 x^2 + a1 x + a0` by the depressed-cubic Cardano
/// formula with the numerically stable branch choice.
pub(crate) fn cubic_roots(a2: C64, a1: C64, a0: C64) -> [C64; 3] {
    // x = t - a2/3: t^3 + p t + q
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = a0 - a1 * a2 / 3.0 + a2 * a2 * a2 * (2.0 / 27.0);
    if p.norm() == 0.0 && q.norm() == 0.0 {
        return [-shift; 3];
    }
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
    let sq = disc.sqrt();
    // pick the branch that keeps |u| large to avoid cancellation
    let c1 = -q / 2.0 + sq;
    let c2 = -q / 2.0 - sq;
    let u = if c1.norm() >= c2.norm() {
        c1.cbrt()
    } else {
        c2.cbrt()
    };
    let v = if u.norm() > 0.0 { -p / (u * 3.0) } else { ZERO };
    let omega = C64::new(-0.5, 0.75f64.sqrt());
    let omega2 = omega.conj();
    [
        u + v - shift,
        omega * u + omega2 * v - shift,
        omega2 * u + omega * v - shift,
    ]
}

/// Unconjugated cross product; a null vector of a rank-2 matrix is the
/// cross product of two independent rows.
fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Best-effort null vector of a singular 3x3 matrix. Handles rank 2
/// (cross products), rank 1 (orthogonal complement of the largest row),
/// and rank 0 (returns the `which`-th basis vector). `which` selects
/// among independent null directions in the degenerate cases.
fn null_vector(b: &Mat3, which: usize) -> Vec3 {
    let scale = mat_norm(b).max(1e-300);
    let crosses = [
        cross(&b[0], &b[1]),
        cross(&b[0], &b[2]),
        cross(&b[1], &b[2]),
    ];
    let (best, norm) = crosses
        .iter()
        .map(|c| (c, vec_norm(c)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    if norm > 1e-12 * scale * scale {
        let mut v = *best;
        for z in v.iter_mut() {
            *z /= norm;
        }
        return v;
    }
    // rank <= 1: null space is the plane orthogonal (bilinear sense) to the
    // largest row, or the whole space
    let (row, rnorm) = b
        .iter()
        .map(|r| (r, vec_norm(r)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    if rnorm <= 1e-14 * scale.max(1.0) {
        let mut v = [ZERO; 3];
        v[which % 3] = ONE;
        return v;
    }
    // two independent solutions of r . v = 0
    let k = (0..3)
        .max_by(|&i, &j| row[i].norm().total_cmp(&row[j].norm()))
        .unwrap();
    let mut candidates = Vec::new();
    for i in 0..3 {
        if i == k {
            continue;
        }
        let mut v = [ZERO; 3];
        v[i] = ONE;
        v[k] = -row[i] / row[k];
        let n = vec_norm(&v);
        for z in v.iter_mut() {
            *z /= n;
        }
        candidates.push(v);
    }
    candidates[which % candidates.len()]
}

/// Eigenvalues and eigenvector columns of a general complex 3x3 matrix.
/// Returns `None` when the eigenvector basis is too ill-conditioned to
/// trust (defective or nearly defective matrix).
pub(crate) fn eigen3(a: &Mat3) -> Option<([C64; 3], Mat3)> {
    let tr = a[0][0] + a[1][1] + a[2][2];
    // sum of principal 2x2 minors
    let m01 = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let m02 = a[0][0] * a[2][2] - a[0][2] * a[2][0];
    let m12 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let lambdas = cubic_roots(-tr, m01 + m02 + m12, -det);

    let scale = mat_norm(a).max(1.0);
    let mut vecs = [[ZERO; 3]; 3];
    for (k, &lam) in lambdas.iter().enumerate() {
        let mut b = *a;
        for (i, row) in b.iter_mut().enumerate() {
            row[i] -= lam;
        }
        let v = null_vector(&b, k);
        // residual check: ||A v - lam v|| small relative to the matrix
        let av = mat_vec(a, &v);
        let mut res = 0.0;
        for (avi, vi) in av.iter().zip(&v) {
            res += (avi - lam * vi).norm_sqr();
        }
        if res.sqrt() > 1e-8 * scale {
            return None;
        }
        for i in 0..3 {
            vecs[i][k] = v[i];
        }
    }
    Some((lambdas, vecs))
}

/// Solve `V x = b` by Gaussian elimination with partial pivoting; `None`
/// when `V` is numerically singular (columns nearly dependent).
#[allow(clippy::needless_range_loop)] // row-permuted indexing
pub(crate) fn solve3(v: &Mat3, b: &Vec3) -> Option<Vec3> {
    let mut m = *v;
    let mut rhs = *b;
    let mut perm = [0usize, 1, 2];
    let scale = mat_norm(v).max(1e-300);
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[perm[i]][col].norm().total_cmp(&m[perm[j]][col].norm()))
            .unwrap();
        perm.swap(col, piv);
        let p = m[perm[col]][col];
        if p.norm() < 1e-13 * scale {
            return None;
        }
        for row in col + 1..3 {
            let f = m[perm[row]][col] / p;
            for c in col..3 {
                let sub = f * m[perm[col]][c];
                m[perm[row]][c] -= sub;
            }
            let sub = f * rhs[perm[col]];
            rhs[perm[row]] -= sub;
        }
    }
    let mut x = [ZERO; 3];
    for col in (0..3).rev() {
        let mut acc = rhs[perm[col]];
        for c in col + 1..3 {
            acc -= m[perm[col]][c] * x[c];
        }
        x[col] = acc / m[perm[col]][col];
    }
    Some(x)
}

/// Matrix exponential by scaling and squaring with a Taylor series;
/// exact up to roundoff for any finite 3x3 matrix, including defective
/// ones, so it serves as the generalized form for degenerate spectra.
pub(crate) fn expm3(a: &Mat3) -> Mat3 {
    let norm = mat_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let factor = 0.5f64.powi(squarings as i32);
    let mut scaled = *a;
    for row in scaled.iter_mut() {
        for z in row.iter_mut() {
            *z *= factor;
        }
    }
    let mut result = identity();
    let mut term = identity();
    for k in 1..=24 {
        term = mat_mul(&term, &scaled);
        for row in term.iter_mut() {
            for z in row.iter_mut() {
                *z /= k as f64;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

fn identity() -> Mat3 {
    let mut m = [[ZERO; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cubic_roots_known_polynomial() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let mut roots = cubic_roots(c(-6.0, 0.0), c(11.0, 0.0), c(-6.0, 0.0));
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (r, expect) in roots.iter().zip([1.0, 2.0, 3.0]) {
            assert!((r - c(expect, 0.0)).norm() < 1e-12, "{r:?} vs {expect}");
        }
    }

    #[test]
    fn cubic_triple_root() {
        // (x+2)^3 = x^3 + 6x^2 + 12x + 8
        let roots = cubic_roots(c(6.0, 0.0), c(12.0, 0.0), c(8.0, 0.0));
        for r in roots {
            assert!((r - c(-2.0, 0.0)).norm() < 1e-7);
        }
    }

    #[test]
    fn eigen_diagonal() {
        let a = [
            [c(1.0, 0.5), ZERO, ZERO],
            [ZERO, c(-2.0, 0.0), ZERO],
            [ZERO, ZERO, c(0.0, 3.0)],
        ];
        let (lams, vecs) = eigen3(&a).unwrap();
        for (k, lam) in lams.iter().enumerate() {
            let v = [vecs[0][k], vecs[1][k], vecs[2][k]];
            let av = mat_vec(&a, &v);
            for i in 0..3 {
                assert!((av[i] - lam * v[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_rejects_defective() {
        // Jordan block: eigenvalue 0 with a 1D eigenspace
        let a = [[ZERO, ONE, ZERO], [ZERO, ZERO, ONE], [ZERO, ZERO, ZERO]];
        assert!(
            eigen3(&a).is_none() || {
                // if eigen3 somehow returns, the basis must still be singular
                let (_, v) = eigen3(&a).unwrap();
                solve3(&v, &[ONE, ZERO, ZERO]).is_none()
            }
        );
    }

    #[test]
    fn expm_of_zero_and_nilpotent() {
        let z = [[ZERO; 3]; 3];
        let e = expm3(&z);
        for (i, row) in e.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((entry - c(expect, 0.0)).norm() < 1e-15);
            }
        }
        // exp of the Jordan block: I + N + N^2/2
        let n = [
            [ZERO, c(2.0, 1.0), ZERO],
            [ZERO, ZERO, c(0.0, -1.0)],
            [ZERO, ZERO, ZERO],
        ];
        let e = expm3(&n);
        assert!((e[0][1] - c(2.0, 1.0)).norm() < 1e-13);
        assert!((e[1][2] - c(0.0, -1.0)).norm() < 1e-13);
        let n2 = c(2.0, 1.0) * c(0.0, -1.0) / 2.0;
        assert!((e[0][2] - n2).norm() < 1e-13);
        assert!((e[1][0]).norm() < 1e-15);
    }

    #[test]
    fn solve_random_system() {
        let v = [
            [c(1.0, 2.0), c(0.0, 1.0), c(3.0, 0.0)],
            [c(-1.0, 0.5), c(2.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, -1.0), c(1.0, 1.0)],
        ];
        let x_true = [c(0.5, -0.5), c(2.0, 1.0), c(-1.0, 0.25)];
        let b = mat_vec(&v, &x_true);
        let x = solve3(&v, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).norm() < 1e-12);
        }
    }
}
