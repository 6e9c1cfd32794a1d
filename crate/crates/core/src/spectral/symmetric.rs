//! Eigenvalues of dense symmetric matrices.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-style shifts. Only eigenvalues are produced; no
//! eigenvector accumulation is done, which keeps the reduction at roughly
//! `4/3·d³` flops.

/// Cross products of a set of equal-length vectors: `G[i][j] = <v_i, v_j>`.
///
/// `vectors` is `count` contiguous vectors of length `len`. Returns the full
/// symmetric `count × count` matrix, row-major.
pub(crate) fn gram(vectors: &[f64], count: usize, len: usize) -> Vec<f64> {
    debug_assert_eq!(vectors.len(), count * len);
    let v = |i: usize| &vectors[i * len..(i + 1) * len];
    let mut g = vec![0.0; count * count];
    let mut put = |i: usize, j: usize, x: f64| {
        g[i * count + j] = x;
        g[j * count + i] = x;
    };
    // 2 x 2 blocks share each load between two products.
    let mut i = 0;
    while i + 1 < count {
        let mut j = 0;
        while j < i {
            let [a, b, c, d] = dot2x2(v(i), v(i + 1), v(j), v(j + 1));
            put(i, j, a);
            put(i, j + 1, b);
            put(i + 1, j, c);
            put(i + 1, j + 1, d);
            j += 2;
        }
        let [a, b, _, d] = dot2x2(v(i), v(i + 1), v(i), v(i + 1));
        put(i, i, a);
        put(i + 1, i, b);
        put(i + 1, i + 1, d);
        i += 2;
    }
    if i < count {
        for j in 0..=i {
            put(i, j, dot(v(i), v(j)));
        }
    }
    g
}

/// Dot product with four independent accumulators so the loop vectorizes.
/// The reduction order is fixed, so results are reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `[<a0, b0>, <a0, b1>, <a1, b0>, <a1, b1>]`, each summed in the same order
/// as [`dot`].
fn dot2x2(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> [f64; 4] {
    let n = a0.len() / 4 * 4;
    let mut acc = [[0.0f64; 4]; 4];
    for k in (0..n).step_by(4) {
        let (x0, x1, y0, y1) = (&a0[k..k + 4], &a1[k..k + 4], &b0[k..k + 4], &b1[k..k + 4]);
        for l in 0..4 {
            acc[0][l] += x0[l] * y0[l];
            acc[1][l] += x0[l] * y1[l];
            acc[2][l] += x1[l] * y0[l];
            acc[3][l] += x1[l] * y1[l];
        }
    }
    let pairs = [(a0, b0), (a0, b1), (a1, b0), (a1, b1)];
    std::array::from_fn(|p| {
        let (x, y) = pairs[p];
        let tail: f64 = x[n..].iter().zip(&y[n..]).map(|(u, w)| u * w).sum();
        (acc[p][0] + acc[p][1]) + (acc[p][2] + acc[p][3]) + tail
    })
}

/// Reduces the symmetric matrix `a` (row-major, `n × n`, only the lower
/// triangle is read) to tridiagonal form. Returns `(diagonal, off_diagonal)`
/// where `off_diagonal[i]` couples rows `i - 1` and `i` (`off_diagonal[0] = 0`).
fn tridiagonalize(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let idx = |r: usize, c: usize| r * n + c;

    for i in (1..n).rev() {
        let l = i - 1;
        if l > 0 {
            let mut h = 0.0;
            let scale: f64 = (0..=l).map(|k| a[idx(i, k)].abs()).sum();
            if scale == 0.0 {
                off[i] = a[idx(i, l)];
            } else {
                for k in 0..=l {
                    a[idx(i, k)] /= scale;
                    h += a[idx(i, k)] * a[idx(i, k)];
                }
                let f = a[idx(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                off[i] = scale * g;
                h -= f * g;
                a[idx(i, l)] = f - g;

                // p = A·u / h, accumulated into off[0..=l] as scratch.
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[idx(j, k)] * a[idx(i, k)];
                    }
                    for k in j + 1..=l {
                        g += a[idx(k, j)] * a[idx(i, k)];
                    }
                    off[j] = g / h;
                    f += off[j] * a[idx(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[idx(i, j)];
                    let g = off[j] - hh * f;
                    off[j] = g;
                    for k in 0..=j {
                        a[idx(j, k)] -= f * off[k] + g * a[idx(i, k)];
                    }
                }
            }
        } else {
            off[i] = a[idx(i, l)];
        }
    }
    off[0] = 0.0;
    for (i, d) in diag.iter_mut().enumerate() {
        *d = a[idx(i, i)];
    }
    (diag, off)
}

/// Implicit QL on a symmetric tridiagonal matrix. `off` uses the layout
/// returned by [`tridiagonalize`]. Returns the eigenvalues, unsorted.
fn tridiagonal_ql(mut diag: Vec<f64>, mut off: Vec<f64>) -> Vec<f64> {
    const MAX_ITER: usize = 64;
    let n = diag.len();
    if n == 0 {
        return diag;
    }
    for i in 1..n {
        off[i - 1] = off[i];
    }
    off[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                // Converged as far as it will go; the residual coupling is
                // below anything the effective rank can see.
                break;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    diag
}

/// Eigenvalues of the symmetric `n × n` matrix `a` (row-major), unsorted.
pub(crate) fn symmetric_eigenvalues(a: Vec<f64>, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "matrix storage does not match n");
    let (diag, off) = tridiagonalize(a, n);
    tridiagonal_ql(diag, off)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocked_gram_matches_plain_dots() {
        for (count, len) in [(1, 3), (2, 5), (5, 7), (6, 8), (7, 1)] {
            let v: Vec<f64> = (0..count * len)
                .map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.3)
                .collect();
            let g = gram(&v, count, len);
            for i in 0..count {
                for j in 0..count {
                    let want = dot(&v[i * len..(i + 1) * len], &v[j * len..(j + 1) * len]);
                    assert_eq!(g[i * count + j], want, "({i}, {j}) of {count}x{len}");
                }
            }
        }
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn diagonal_matrix() {
        let a = vec![3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(sorted(symmetric_eigenvalues(a, 3)), vec![3.0, 2.0, -1.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let ev = sorted(symmetric_eigenvalues(vec![2.0, 1.0, 1.0, 2.0], 2));
        assert!((ev[0] - 3.0).abs() < 1e-14);
        assert!((ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn path_graph_laplacian() {
        // Tridiagonal 2,-1 matrix: eigenvalues 2 - 2cos(k·pi/(n+1)).
        let n = 12;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0;
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let got = sorted(symmetric_eigenvalues(a, n));
        let want = sorted(
            (1..=n)
                .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
                .collect(),
        );
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn dense_matrix_trace_and_frobenius_preserved() {
        let n = 9;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = ((i * 7 + j * 3) % 11) as f64 - 5.0;
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let frob: f64 = a.iter().map(|v| v * v).sum();
        let ev = symmetric_eigenvalues(a, n);
        assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-10);
        assert!((ev.iter().map(|v| v * v).sum::<f64>() - frob).abs() < 1e-9);
    }

    #[test]
    fn gram_is_symmetric_cross_products() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let g = gram(&v, 2, 3);
        assert_eq!(g, vec![14.0, 32.0, 32.0, 77.0]);
    }
}
