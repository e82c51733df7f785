//! Reference implementations and generators shared by the integration tests.
//! The oracles here deliberately avoid the library's code paths.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use statmatch::{FeatureMatrix, FeatureTensor, Image, Matrix};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Plain double loop over `rows`: `(1/N) sum f_i`.
pub fn oracle_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let c = rows[0].len();
    let mut out = vec![0.0; c];
    for j in 0..c {
        let mut s = 0.0;
        for row in rows {
            s += row[j];
        }
        out[j] = s / rows.len() as f64;
    }
    out
}

/// `(1/(N-1)) sum (f_i - mean)(f_i - mean)^T`, every entry computed separately.
pub fn oracle_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mean = oracle_mean(rows);
    let c = mean.len();
    let mut out = vec![vec![0.0; c]; c];
    for a in 0..c {
        for b in 0..c {
            let mut s = 0.0;
            for row in rows {
                s += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
            out[a][b] = s / (rows.len() - 1) as f64;
        }
    }
    out
}

pub fn rows_of(f: &FeatureMatrix) -> Vec<Vec<f64>> {
    f.rows().map(<[f64]>::to_vec).collect()
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

pub fn relative_frobenius(actual: &Matrix, expected: &Matrix) -> f64 {
    let norm = expected.frobenius_norm();
    actual.frobenius_distance(expected) / if norm > 0.0 { norm } else { 1.0 }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn random_rows(rng: &mut StdRng, n: usize, c: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..c).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

/// Rows with a random channel mixing so the covariance is not diagonal.
pub fn correlated_rows(rng: &mut StdRng, n: usize, c: usize, scale: f64) -> Vec<Vec<f64>> {
    // identity plus a bounded perturbation keeps the mixing well conditioned
    let amp = 0.5 / (c as f64).sqrt();
    let mix: Vec<Vec<f64>> = (0..c)
        .map(|k| {
            (0..c)
                .map(|j| f64::from(u8::from(j == k)) + rng.random_range(-amp..amp))
                .collect()
        })
        .collect();
    let offset: Vec<f64> = (0..c).map(|_| rng.random_range(-scale..scale)).collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..c).map(|_| rng.random_range(-scale..scale)).collect();
            (0..c)
                .map(|j| offset[j] + (0..c).map(|k| z[k] * mix[k][j]).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn random_image(rng: &mut StdRng, h: usize, w: usize, c: usize) -> Image {
    let pixels = (0..h * w * c).map(|_| rng.random::<u8>()).collect();
    Image::new(h, w, c, pixels).unwrap()
}

/// Image whose channels are correlated and do not span the full range, so
/// that matching has visible work to do and clamping is rarely hit.
pub fn structured_image(rng: &mut StdRng, h: usize, w: usize, c: usize) -> Image {
    let base: f64 = rng.random_range(60.0..190.0);
    let spread: f64 = rng.random_range(10.0..50.0);
    let weights: Vec<f64> = (0..c).map(|_| rng.random_range(0.3..1.0)).collect();
    let mut pixels = Vec::with_capacity(h * w * c);
    for _ in 0..h * w {
        let shared: f64 = rng.random_range(-1.0..1.0);
        for wgt in &weights {
            let own: f64 = rng.random_range(-1.0..1.0);
            let v = base + spread * (wgt * shared + (1.0 - wgt) * own);
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Image::new(h, w, c, pixels).unwrap()
}

pub fn random_tensor(rng: &mut StdRng, shape: &[usize]) -> FeatureTensor {
    let count: usize = shape.iter().product();
    let data = (0..count).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureTensor::new(shape.to_vec(), data).unwrap()
}

/// Tensor whose samples live in a random `rank`-dimensional subspace of the
/// channel space (plus an offset), like strongly correlated layer responses.
pub fn low_rank_tensor(
    rng: &mut StdRng,
    shape: &[usize],
    basis: &[Vec<f64>],
    offset: &[f64],
) -> FeatureTensor {
    let c = *shape.last().unwrap();
    let n: usize = shape[..shape.len() - 1].iter().product();
    let mut data = Vec::with_capacity(n * c);
    for _ in 0..n {
        let z: Vec<f64> = basis.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        for j in 0..c {
            let v = offset[j] + z.iter().zip(basis).map(|(zk, b)| zk * b[j]).sum::<f64>();
            data.push(v as f32);
        }
    }
    FeatureTensor::new(shape.to_vec(), data).unwrap()
}

/// Per-channel histogram matching written as the textbook double loop:
/// normalized CDFs, then for every pixel a linear scan for the first target
/// level whose CDF reaches the source CDF.
pub fn naive_hm(source: &Image, target: &Image) -> Vec<u8> {
    let c = source.channels();
    let cdf = |img: &Image, ch: usize| {
        let vals: Vec<u8> = img.pixels().iter().skip(ch).step_by(c).copied().collect();
        let mut out = [0.0f64; 256];
        for (k, slot) in out.iter_mut().enumerate() {
            let count = vals.iter().filter(|&&v| v as usize <= k).count();
            *slot = count as f64 / vals.len() as f64;
        }
        out
    };
    let cdfs: Vec<([f64; 256], [f64; 256])> =
        (0..c).map(|ch| (cdf(source, ch), cdf(target, ch))).collect();
    let mut out = Vec::with_capacity(source.pixels().len());
    for (i, &v) in source.pixels().iter().enumerate() {
        let (cs, ct) = &cdfs[i % c];
        let want = cs[v as usize];
        let mut mapped = 255;
        for (vp, &t) in ct.iter().enumerate() {
            if t >= want {
                mapped = vp;
                break;
            }
        }
        out.push(mapped as u8);
    }
    out
}

/// Normalized CDF of one channel, 256 bins.
pub fn channel_cdf(img: &Image, ch: usize) -> Vec<f64> {
    let mut hist = [0usize; 256];
    for v in img.channel_plane(ch) {
        hist[v as usize] += 1;
    }
    let n = img.pixel_count() as f64;
    let mut acc = 0;
    hist.iter()
        .map(|h| {
            acc += h;
            acc as f64 / n
        })
        .collect()
}

/// Prints one pass/fail line and fails the test on failure.
pub fn verdict(id: &str, title: &str, ok: bool, detail: String) {
    println!("[{}] {id} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{id} {title} failed: {detail}");
}
