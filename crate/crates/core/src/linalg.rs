//! Least squares by Householder QR with column pivoting.

/// Coefficient of determination of `y` regressed on `xs` with an intercept.
///
/// Returns `None` when `y` has zero variance. Rank-deficient designs are
/// handled by dropping columns whose pivot falls below a relative tolerance.
pub fn r_squared(y: &[f64], xs: &[&[f64]]) -> Option<f64> {
    let n = y.len();
    let mut b = centered(y);
    let sst: f64 = b.iter().map(|v| v * v).sum();
    if sst == 0.0 {
        return None;
    }
    let mut a: Vec<Vec<f64>> = xs.iter().map(|x| centered(x)).collect();
    let p = a.len();
    let mut scale = 0.0;
    let mut rank = 0;

    for k in 0..p.min(n) {
        let (pivot, alpha) = (k..p)
            .map(|j| (j, a[j][k..].iter().map(|v| v * v).sum::<f64>().sqrt()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if k == 0 {
            scale = alpha;
        }
        if alpha <= 1e-10 * scale || alpha == 0.0 {
            break;
        }
        a.swap(k, pivot);

        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] += alpha.copysign(v[0]);
        let vv: f64 = v.iter().map(|e| e * e).sum();
        for col in a.iter_mut().skip(k) {
            reflect(&v, vv, &mut col[k..]);
        }
        reflect(&v, vv, &mut b[k..]);
        rank += 1;
    }

    let ssr: f64 = b[rank..].iter().map(|v| v * v).sum();
    Some((1.0 - ssr / sst).clamp(0.0, 1.0))
}

fn reflect(v: &[f64], vv: f64, x: &mut [f64]) {
    let d: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * d / vv;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}
