//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{l2_sq, nearest};
use crate::model::VectorSet;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: VectorSet,
    /// Final cluster of every training vector.
    pub assignments: Vec<u32>,
    /// Within-cluster SSE measured after each assignment step, starting with
    /// the seeded centroids. Never increases.
    pub sse_history: Vec<f64>,
}

impl KMeansResult {
    pub fn sse(&self) -> f64 {
        *self.sse_history.last().unwrap_or(&0.0)
    }
}

/// Trains `k` centroids over `data` with seeded k-means++ initialisation
/// followed by up to `iters` Lloyd iterations (stopping early once the
/// assignment is stable). Clusters that go empty are re-seeded at the
/// farthest member of the currently largest cluster.
pub fn kmeans_train(data: &VectorSet, k: usize, iters: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if data.len() < k {
        return Err(Error::param(format!(
            "k-means needs at least k={k} vectors, got {}",
            data.len()
        )));
    }
    let dim = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(data, k, &mut rng);

    let mut assignments = vec![0u32; data.len()];
    let mut distances = vec![0f32; data.len()];
    let mut sse_history = Vec::with_capacity(iters + 1);

    sse_history.push(assign(data, &centroids, &mut assignments, &mut distances));

    for _ in 0..iters {
        let before = assignments.clone();
        update_centroids(data, &mut centroids, &mut assignments);
        sse_history.push(assign(data, &centroids, &mut assignments, &mut distances));
        if before == assignments {
            break;
        }
    }

    Ok(KMeansResult {
        centroids: VectorSet::new(dim, centroids).expect("centroid buffer is k*dim"),
        assignments,
        sse_history,
    })
}

fn kmeans_pp(data: &VectorSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let dim = data.dim();
    let n = data.len();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(data.row(first));

    let mut d2: Vec<f32> = data
        .as_slice()
        .par_chunks_exact(dim)
        .map(|v| l2_sq(v, data.row(first)))
        .collect();

    for _ in 1..k {
        let total: f64 = d2.iter().map(|&d| d as f64).sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d as f64;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every point already coincides with a centroid
            rng.gen_range(0..n)
        };
        let c = data.row(pick);
        centroids.extend_from_slice(c);
        d2.par_iter_mut()
            .zip(data.as_slice().par_chunks_exact(dim))
            .for_each(|(d, v)| *d = d.min(l2_sq(v, c)));
    }
    centroids
}

/// Assigns every vector to its nearest centroid and returns the SSE.
fn assign(
    data: &VectorSet,
    centroids: &[f32],
    assignments: &mut [u32],
    distances: &mut [f32],
) -> f64 {
    let dim = data.dim();
    assignments
        .par_iter_mut()
        .zip(distances.par_iter_mut())
        .zip(data.as_slice().par_chunks_exact(dim))
        .for_each(|((a, d), v)| {
            let (j, dist) = nearest(v, centroids, dim);
            *a = j as u32;
            *d = dist;
        });
    // sequential so the total is independent of thread partitioning
    distances.iter().map(|&d| d as f64).sum()
}

fn update_centroids(data: &VectorSet, centroids: &mut [f32], assignments: &mut [u32]) {
    let dim = data.dim();
    let k = centroids.len() / dim;
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (v, &a) in data.rows().zip(assignments.iter()) {
        let a = a as usize;
        counts[a] += 1;
        for (s, &x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(v) {
            *s += x as f64;
        }
    }

    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let largest = (0..k)
            .max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))
            .unwrap();
        if counts[largest] < 2 {
            continue;
        }
        let mean: Vec<f32> = sums[largest * dim..(largest + 1) * dim]
            .iter()
            .map(|s| (s / counts[largest] as f64) as f32)
            .collect();
        let (far, _) = assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a as usize == largest)
            .map(|(i, _)| (i, l2_sq(data.row(i), &mean)))
            .fold((usize::MAX, f32::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        let v = data.row(far);
        for (t, &x) in sums[largest * dim..(largest + 1) * dim].iter_mut().zip(v) {
            *t -= x as f64;
        }
        counts[largest] -= 1;
        for (t, &x) in sums[j * dim..(j + 1) * dim].iter_mut().zip(v) {
            *t = x as f64;
        }
        counts[j] = 1;
        assignments[far] = j as u32;
    }

    for j in 0..k {
        if counts[j] == 0 {
            continue;
        }
        let inv = 1.0 / counts[j] as f64;
        for (c, s) in centroids[j * dim..(j + 1) * dim]
            .iter_mut()
            .zip(&sums[j * dim..(j + 1) * dim])
        {
            *c = (s * inv) as f32;
        }
    }
}
