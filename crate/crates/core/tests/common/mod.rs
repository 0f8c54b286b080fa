use fpp::lattice::{EdgeId, LatticePoint};
use fpp::weights::WeightField;

/// Bellman–Ford on the in-plane box `|x_2|, |x_3| <= r` of `H_0` in Z^3 with
/// one exit edge per vertex. Shares nothing with the library search except
/// the weight oracle.
pub fn bellman_ford_slab(w: &impl WeightField, r: i32) -> f64 {
    let side = (2 * r + 1) as usize;
    let idx = |y: i32, z: i32| ((y + r) as usize) * side + (z + r) as usize;
    let point = |y: i32, z: i32| LatticePoint::new(vec![0, y, z]).unwrap();
    let mut dist = vec![f64::INFINITY; side * side];
    dist[idx(0, 0)] = 0.0;
    // Undirected in-plane edges as (u, v, τ).
    let mut edges = Vec::new();
    for y in -r..=r {
        for z in -r..=r {
            if y < r {
                edges.push((idx(y, z), idx(y + 1, z), w.weight(&EdgeId::new(point(y, z), 1))));
            }
            if z < r {
                edges.push((idx(y, z), idx(y, z + 1), w.weight(&EdgeId::new(point(y, z), 2))));
            }
        }
    }
    loop {
        let mut changed = false;
        for &(u, v, t) in &edges {
            if dist[u] + t < dist[v] {
                dist[v] = dist[u] + t;
                changed = true;
            }
            if dist[v] + t < dist[u] {
                dist[u] = dist[v] + t;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut best = f64::INFINITY;
    for y in -r..=r {
        for z in -r..=r {
            best = best.min(dist[idx(y, z)] + w.weight(&EdgeId::new(point(y, z), 0)));
        }
    }
    best
}
