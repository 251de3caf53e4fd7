//! Exact discrete optimal transport for small instances, used as an oracle.
//!
//! Solved as a min-cost flow by successive shortest paths (Bellman-Ford on
//! the residual graph). Every augmentation saturates a supply, a demand or a
//! reverse arc, so the loop terminates; at most a few hundred augmentations
//! happen at the size cap.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest number of atoms accepted on either side.
pub const ATOM_CAP: usize = 32;

const ZERO: f64 = 1e-15;

/// Minimal `Σ c_ij π_ij` over couplings of `a` and `b`; `cost` is row-major
/// `a.len() x b.len()`. Returns the cost and the plan.
pub fn ot_bruteforce(a: &[f64], b: &[f64], cost: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 || cost.len() != n * m {
        return Err(Error::Invalid("empty instance or cost size mismatch"));
    }
    if n > ATOM_CAP || m > ATOM_CAP {
        return Err(Error::TooLarge { what: "atoms", limit: ATOM_CAP });
    }
    if a.iter().chain(b).any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Invalid("weights must be finite and nonnegative"));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-12 * sa.max(1.0) {
        return Err(Error::Invalid("unequal total masses"));
    }
    let mut supply: Vec<f64> = a.to_vec();
    let mut demand: Vec<f64> = b.iter().map(|v| v * sa / sb).collect();
    let mut flow = alloc::vec![0.0; n * m];
    // nodes: 0..n sources, n..n+m sinks
    let nodes = n + m;
    // relaxations must beat rounding, or near-zero cycles get followed
    let slack = 1e-12 * cost.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(f64::MIN_POSITIVE);
    loop {
        if supply.iter().all(|s| *s <= ZERO * sa) {
            break;
        }
        let mut dist = alloc::vec![f64::INFINITY; nodes];
        let mut pred = alloc::vec![usize::MAX; nodes];
        for i in 0..n {
            if supply[i] > ZERO * sa {
                dist[i] = 0.0;
            }
        }
        // bellman-ford: forward arcs i->j always, reverse j->i if flow > 0
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_finite() {
                    for j in 0..m {
                        let d = dist[i] + cost[i * m + j];
                        if d < dist[n + j] - slack {
                            dist[n + j] = d;
                            pred[n + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..m {
                if dist[n + j].is_finite() {
                    for i in 0..n {
                        if flow[i * m + j] > ZERO * sa {
                            let d = dist[n + j] - cost[i * m + j];
                            if d < dist[i] - slack {
                                dist[i] = d;
                                pred[i] = n + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // cheapest sink that still has demand
        let mut best = None;
        for j in 0..m {
            if demand[j] > ZERO * sa && dist[n + j].is_finite() && best.map_or(true, |b: usize| dist[n + j] < dist[n + b]) {
                best = Some(j);
            }
        }
        let Some(jt) = best else {
            return Err(Error::NoConvergence { what: "transport flow", iterations: 0, residual: supply.iter().sum() });
        };
        // trace back to the root source and find the bottleneck
        let mut path = Vec::new();
        let mut v = n + jt;
        let mut guard = 0;
        while pred[v] != usize::MAX {
            path.push(v);
            v = pred[v];
            guard += 1;
            if guard > 2 * nodes {
                return Err(Error::NoConvergence { what: "transport flow cycle", iterations: guard, residual: 0.0 });
            }
        }
        let root = v;
        let mut delta = supply[root].min(demand[jt]);
        for &node in &path {
            let p = pred[node];
            if node < n {
                // reverse arc sink p -> source node carries flow[node][p - n]
                delta = delta.min(flow[node * m + (p - n)]);
            }
        }
        for &node in &path {
            let p = pred[node];
            if node >= n {
                flow[p * m + (node - n)] += delta;
            } else {
                flow[node * m + (p - n)] -= delta;
            }
        }
        supply[root] -= delta;
        demand[jt] -= delta;
    }
    let total = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
    Ok((total, flow))
}

/// Exact `W_2` between weighted atoms on the line.
pub fn w2_bruteforce(x: &[f64], a: &[f64], y: &[f64], b: &[f64]) -> Result<f64> {
    if x.len() != a.len() || y.len() != b.len() {
        return Err(Error::Invalid("atoms and weights differ in length"));
    }
    let cost: Vec<f64> = x.iter().flat_map(|xi| y.iter().map(move |yj| (xi - yj) * (xi - yj))).collect();
    let (c, _) = ot_bruteforce(a, b, &cost)?;
    Ok(libm::sqrt(c.max(0.0) / a.iter().sum::<f64>()))
}

/// Exact `W_2` between weighted atoms in the plane. `period` wraps every axis.
pub fn w2_bruteforce_2d(x: &[[f64; 2]], a: &[f64], y: &[[f64; 2]], b: &[f64], period: Option<f64>) -> Result<f64> {
    if x.len() != a.len() || y.len() != b.len() {
        return Err(Error::Invalid("atoms and weights differ in length"));
    }
    let d2 = |p: [f64; 2], q: [f64; 2]| {
        let mut s = 0.0;
        for k in 0..2 {
            let mut d = p[k] - q[k];
            if let Some(l) = period {
                d -= l * libm::round(d / l);
            }
            s += d * d;
        }
        s
    };
    let cost: Vec<f64> = x.iter().flat_map(|p| y.iter().map(move |q| d2(*p, *q))).collect();
    let (c, _) = ot_bruteforce(a, b, &cost)?;
    Ok(libm::sqrt(c.max(0.0) / a.iter().sum::<f64>()))
}
