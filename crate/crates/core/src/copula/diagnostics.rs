//! Empirical dependence measures.

use crate::error::{Error, Result};

/// Kendall's τ-a, (concordant − discordant) / C(n, 2), in O(n log n).
///
/// Knight's algorithm: sort by (x, y), then count the exchanges a merge sort
/// on y needs. Tied pairs count as neither concordant nor discordant.
pub fn empirical_kendall_tau(data: &[(f64, f64)]) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::input("Kendall tau needs at least two observations"));
    }
    if data.iter().any(|(x, y)| x.is_nan() || y.is_nan()) {
        return Err(Error::input("Kendall tau input contains NaN"));
    }
    let mut pts = data.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let mut n1 = 0u64; // pairs tied in x
    let mut n3 = 0u64; // pairs tied in both
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pts[j].0 == pts[i].0 {
            j += 1;
        }
        let run = (j - i) as u64;
        n1 += run * (run - 1) / 2;
        let mut k = i;
        while k < j {
            let mut m = k + 1;
            while m < j && pts[m].1 == pts[k].1 {
                m += 1;
            }
            let r = (m - k) as u64;
            n3 += r * (r - 1) / 2;
            k = m;
        }
        i = j;
    }

    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut n2 = 0u64; // pairs tied in y
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let run = (j - i) as u64;
        n2 += run * (run - 1) / 2;
        i = j;
    }

    let diff = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * swaps as i128;
    Ok(diff as f64 / n0 as f64)
}

/// Stable merge sort returning the number of strict inversions.
fn merge_count(a: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = a.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = a.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if a[j] < a[i] {
            buf[k] = a[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = a[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&a[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&a[j..n]);
    a.copy_from_slice(&buf[..n]);
    swaps
}

/// O(n²) pair count; reference implementation for small inputs.
pub fn kendall_tau_brute_force(data: &[(f64, f64)]) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::input("Kendall tau needs at least two observations"));
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = data[i].0 - data[j].0;
            let dy = data[i].1 - data[j].1;
            let prod = dx * dy;
            if prod > 0.0 {
                s += 1;
            } else if prod < 0.0 {
                s -= 1;
            }
        }
    }
    Ok(s as f64 / (n * (n - 1) / 2) as f64)
}

/// Pearson product-moment correlation.
pub fn empirical_pearson_rho(data: &[(f64, f64)]) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::input("Pearson correlation needs at least two observations"));
    }
    let nf = n as f64;
    let mx = data.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = data.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in data {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero sample variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
