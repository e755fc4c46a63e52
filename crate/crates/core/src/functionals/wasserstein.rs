//! Quadratic Wasserstein distances: exact 1-D quantile couplings (samples
//! and grid densities), an exact assignment solver for small point clouds in
//! dimension 2-3, and second moments about a Dirac target.

use crate::error::{Error, Result};
use crate::microscale::GridDensity;
use crate::scalar::Scalar;

/// W2 between two empirical measures on the line, by the sorted-quantile
/// coupling (exact optimal transport in 1-D). Sample counts may differ; the
/// coupling is integrated exactly over the merged quantile breakpoints.
pub fn w2_empirical_1d<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("empty sample set".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len(), sb.len());
    let (na_t, nb_t) = (T::from_usize(na).unwrap(), T::from_usize(nb).unwrap());
    // integrate (F^{-1}(q) - G^{-1}(q))^2 dq piece by piece
    let mut cost = T::zero();
    let (mut i, mut j) = (0usize, 0usize);
    let mut q = T::zero();
    while i < na && j < nb {
        let qa = T::from_usize(i + 1).unwrap() / na_t;
        let qb = T::from_usize(j + 1).unwrap() / nb_t;
        let q_next = qa.min(qb);
        let d = sa[i] - sb[j];
        cost += d * d * (q_next - q);
        if qa <= qb {
            i += 1;
        }
        if qb <= qa {
            j += 1;
        }
        q = q_next;
    }
    Ok(cost.sqrt())
}

/// W2 between two empirical measures in dimension 2 or 3 with equal sample
/// counts (<= 2048), by an exact assignment (Jonker-Volgenant shortest
/// augmenting paths). Higher dimensions are not supported; use the
/// Dirac-moment bounds instead.
pub fn w2_empirical_nd<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Result<T> {
    let n = a.len();
    if n == 0 || b.len() != n {
        return Err(Error::Domain("assignment W2 needs equal nonzero sample counts".into()));
    }
    let dim = a[0].len();
    if !(2..=3).contains(&dim) {
        return Err(Error::Unsupported(format!(
            "exact assignment W2 supports dimension 2-3, got {}",
            dim
        )));
    }
    if n > 2048 {
        return Err(Error::Unsupported("assignment W2 capped at 2048 points".into()));
    }
    if a.iter().chain(b.iter()).any(|p| p.len() != dim) {
        return Err(Error::Domain("ragged point cloud".into()));
    }
    let cost = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for d in 0..dim {
            let diff = (a[i][d] - b[j][d]).to_f64().unwrap();
            s += diff * diff;
        }
        s
    };
    let total = assignment_cost(n, &cost);
    Ok(T::of((total / n as f64).sqrt()))
}

/// Jonker-Volgenant style shortest-augmenting-path assignment; returns the
/// minimal total cost.
fn assignment_cost(n: usize, cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    const INF: f64 = f64::INFINITY;
    // potentials and matching; columns indexed 1..=n with 0 as virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[j] = row assigned to column j
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        total += cost(matched[j] - 1, j - 1);
    }
    total
}

/// W2 between two 1-D grid densities via piecewise-linear CDF inversion on a
/// midpoint quantile rule.
pub fn w2_grid_1d<T: Scalar>(rho: &GridDensity<T>, nu: &GridDensity<T>, n_quantiles: usize) -> Result<T> {
    if rho.dim() != 1 || nu.dim() != 1 {
        return Err(Error::Domain("w2_grid_1d needs 1-D densities".into()));
    }
    let ca = cdf(rho);
    let cb = cdf(nu);
    let nq = n_quantiles.max(64);
    let nq_t = T::from_usize(nq).unwrap();
    let mut acc = T::zero();
    for k in 0..nq {
        let q = (T::from_usize(k).unwrap() + T::of(0.5)) / nq_t;
        let d = invert_cdf(&ca, rho, q) - invert_cdf(&cb, nu, q);
        acc += d * d;
    }
    Ok((acc / nq_t).sqrt())
}

fn cdf<T: Scalar>(d: &GridDensity<T>) -> Vec<T> {
    let h = d.x.step();
    let half = T::of(0.5);
    let mut c = Vec::with_capacity(d.values.len());
    let mut acc = T::zero();
    c.push(T::zero());
    for w in d.values.windows(2) {
        acc += (w[0] + w[1]) * half * h;
        c.push(acc);
    }
    // normalize the numerical CDF to end exactly at 1
    let total = *c.last().unwrap();
    for v in c.iter_mut() {
        *v = *v / total;
    }
    c
}

fn invert_cdf<T: Scalar>(c: &[T], d: &GridDensity<T>, q: T) -> T {
    let n = c.len();
    let h = d.x.step();
    // binary search for the bracketing cell
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if c[mid] <= q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let span = c[hi] - c[lo];
    let t = if span > T::zero() { (q - c[lo]) / span } else { T::of(0.5) };
    d.x.min + h * (T::from_usize(lo).unwrap() + t)
}

/// Second moment of a sample cloud about a point, in a weighted Euclidean
/// metric: mean over samples of weight * |y - eta|_2^2, with its standard
/// error. For the macroscopic Y metric pass weight = 1/M.
pub fn w2_to_dirac_samples<T: Scalar>(
    samples_flat: &[T],
    dim: usize,
    eta: &[T],
    metric_weight: T,
) -> Result<(T, T)> {
    if dim == 0 || samples_flat.len() % dim != 0 || eta.len() != dim {
        return Err(Error::Domain("sample array not a multiple of the dimension".into()));
    }
    let vals: Vec<T> = samples_flat
        .chunks(dim)
        .map(|row| {
            let mut s = T::zero();
            for (a, b) in row.iter().zip(eta.iter()) {
                s += (*a - *b) * (*a - *b);
            }
            s * metric_weight
        })
        .collect();
    Ok(crate::microscale::mean_stderr(&vals))
}

/// Second moment of a 1-D grid density about a point.
pub fn w2_to_dirac_grid<T: Scalar>(rho: &GridDensity<T>, eta: T) -> Result<T> {
    if rho.dim() != 1 {
        return Err(Error::Domain("w2_to_dirac_grid needs a 1-D density".into()));
    }
    Ok(rho.variance_x(eta))
}
