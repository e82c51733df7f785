//! Acceptance suite. Every criterion prints one `[PASS]`/`[FAIL]` line; run
//! with `cargo test -p statmatch --test acceptance -- --nocapture` to see them.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use statmatch::histmatch::{build_mapping, compute_cdf, IMAGE_BINS};
use statmatch::pipeline::{
    build_plan, execute_plan, ConcreteMethod, DatasetRef, ExecuteOptions, Method,
};
use statmatch::stats::{compute_covariance, compute_mean, compute_stats, eig_sym_psd};
use statmatch::{fdm_features, fdm_image, fdm_tensor, hm_image, transform_pair, FeatureMatrix, FeatureTensor, Image};

const EPS: f64 = 1e-6;

fn within(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed < Duration::from_secs(budget_secs)
}

#[test]
fn ac01_fdm_moment_matching() {
    let start = Instant::now();
    let mut rng = rng(101);
    let (mut worst_mean, mut worst_cov) = (0.0f64, 0.0f64);
    for i in 0..500 {
        let c = if i % 2 == 0 { 3 } else { 1 };
        let mut dims = || (rng.random_range(16..=128), rng.random_range(16..=128));
        let ((hs, ws), (ht, wt)) = (dims(), dims());
        let (s, t) = if i % 4 < 2 {
            (random_image(&mut rng, hs, ws, c), random_image(&mut rng, ht, wt, c))
        } else {
            (structured_image(&mut rng, hs, ws, c), structured_image(&mut rng, ht, wt, c))
        };
        let (_, float) = fdm_image(&s, &t, EPS, true).unwrap();
        let target_rows = rows_of(&t.to_feature_matrix().unwrap());
        let out_rows = rows_of(&float);
        worst_mean = worst_mean.max(max_abs_diff(&oracle_mean(&out_rows), &oracle_mean(&target_rows)));
        let rel = relative_frobenius(
            &to_matrix(&oracle_covariance(&out_rows)),
            &to_matrix(&oracle_covariance(&target_rows)),
        );
        worst_cov = worst_cov.max(rel);
    }
    let elapsed = start.elapsed();
    verdict(
        "AC1",
        "FDM moment matching",
        worst_mean <= 1e-6 && worst_cov <= 1e-6 && within(elapsed, 30),
        format!(
            "500 pairs, max |mean diff| {worst_mean:.2e} (tol 1e-6), max rel cov err {worst_cov:.2e} (tol 1e-6), {:.2}s (budget 30s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn ac02_fdm_self_identity() {
    let start = Instant::now();
    let mut rng = rng(202);
    let mut identical = 0;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (h, w) = (rng.random_range(8..=64), rng.random_range(8..=64));
        let c = if i % 2 == 0 { 3 } else { 1 };
        let x = random_image(&mut rng, h, w, c);
        let (out, float) = fdm_image(&x, &x, EPS, true).unwrap();
        if out == x {
            identical += 1;
        }
        let orig: Vec<f64> = x.pixels().iter().map(|&v| f64::from(v)).collect();
        worst = worst.max(max_abs_diff(float.as_slice(), &orig));
    }
    let elapsed = start.elapsed();
    verdict(
        "AC2",
        "FDM self-identity",
        identical == 100 && worst <= 1e-6 && within(elapsed, 5),
        format!(
            "{identical}/100 byte-identical, float max-abs {worst:.2e} (tol 1e-6), {:.2}s (budget 5s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn ac03_fdm_hand_oracle() {
    // centered [-5, 5], whitened by 1/sqrt(50), recolored by sqrt(200), shifted by 110
    let s = Image::new(2, 1, 1, vec![0, 10]).unwrap();
    let t = Image::new(2, 1, 1, vec![100, 120]).unwrap();
    let (out, float) = fdm_image(&s, &t, EPS, true).unwrap();
    let hand: Vec<f64> = [0.0f64, 10.0]
        .iter()
        .map(|v| (v - 5.0) / 50f64.sqrt() * 200f64.sqrt() + 110.0)
        .collect();
    let ok = out.pixels() == [100, 120] && max_abs_diff(float.as_slice(), &hand) < 1e-12;
    verdict(
        "AC3",
        "FDM hand oracle",
        ok,
        format!("pixels {:?}, float {:?}", out.pixels(), float.as_slice()),
    );
}

#[test]
fn ac04_degenerate_robustness() {
    let mut rng = rng(404);
    let mut failures = Vec::new();
    let mut worst_level = 0.0f64;
    for i in 0..20 {
        let t = structured_image(&mut rng, 24, 24, 3);
        let target_mean = compute_mean(&t.to_feature_matrix().unwrap());

        let gray = rng.random::<u8>();
        let constant = Image::new(16, 20, 3, vec![gray; 16 * 20 * 3]).unwrap();
        match fdm_image(&constant, &t, EPS, true) {
            Ok((out, _)) => {
                for (k, &v) in out.pixels().iter().enumerate() {
                    worst_level = worst_level.max((f64::from(v) - target_mean[k % 3]).abs());
                }
            }
            Err(e) => failures.push(format!("constant image {i}: {e}")),
        }

        let mut pixels = random_image(&mut rng, 16, 20, 3).into_pixels();
        let ch = i % 3;
        for px in pixels.chunks_mut(3) {
            px[ch] = 77;
        }
        let one_flat = Image::new(16, 20, 3, pixels).unwrap();
        match fdm_image(&one_flat, &t, EPS, true) {
            Ok((_, float)) if float.as_slice().iter().all(|v| v.is_finite()) => {}
            Ok(_) => failures.push(format!("constant channel {i}: non-finite output")),
            Err(e) => failures.push(format!("constant channel {i}: {e}")),
        }
    }
    verdict(
        "AC4",
        "degenerate robustness",
        failures.is_empty() && worst_level <= 1.0,
        format!(
            "{} failures {:?}, constant source max distance to target mean {worst_level:.3} levels (tol 1)",
            failures.len(),
            failures
        ),
    );
}

#[test]
fn ac05_feature_level_fdm() {
    let start = Instant::now();
    let mut rng = rng(505);
    let c = 64;
    let rank = 10;
    let mut worst_cov = 0.0f64;
    let mut shapes_ok = true;
    let mut worst_self = 0.0f64;
    for _ in 0..10 {
        let mut basis = || -> Vec<Vec<f64>> { random_rows(&mut rng, rank, c, 1.0) };
        let (bs, bt) = (basis(), basis());
        let offs: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
        let offt: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = low_rank_tensor(&mut rng, &[4, 4, c], &bs, &offs);
        let t = low_rank_tensor(&mut rng, &[8, 8, c], &bt, &offt);
        let out = fdm_tensor(&s, &t, EPS).unwrap();
        shapes_ok &= out.shape() == [4, 4, c];
        let cov = |x: &FeatureTensor| {
            let rows: Vec<Vec<f64>> = x
                .data()
                .chunks(c)
                .map(|r| r.iter().map(|&v| f64::from(v)).collect())
                .collect();
            to_matrix(&oracle_covariance(&rows))
        };
        worst_cov = worst_cov.max(relative_frobenius(&cov(&out), &cov(&t)));

        for x in [s, t, random_tensor(&mut rng, &[4, 4, c]), random_tensor(&mut rng, &[8, 8, c])] {
            let same = fdm_tensor(&x, &x, EPS).unwrap();
            shapes_ok &= same.shape() == x.shape();
            let d = same
                .data()
                .iter()
                .zip(x.data())
                .fold(0.0f64, |m, (a, b)| m.max(f64::from(a - b).abs()));
            worst_self = worst_self.max(d);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "AC5",
        "feature-level FDM (c = 64)",
        shapes_ok && worst_cov <= 1e-5 && worst_self <= 1e-6 && within(elapsed, 5),
        format!(
            "shapes preserved: {shapes_ok}, rel cov err {worst_cov:.2e} (tol 1e-5, latent rank {rank}), self max-abs {worst_self:.2e} (tol 1e-6), {:.2}s (budget 5s)",
            elapsed.as_secs_f64()
        ),
    );
}

/// Random pair for the histogram criteria: uniform noise, clustered values,
/// or a handful of distinct levels (wide CDF plateaus).
fn hm_pair(rng: &mut rand::rngs::StdRng, i: usize) -> (Image, Image) {
    let c = if i.is_multiple_of(2) { 3 } else { 1 };
    let one = |rng: &mut rand::rngs::StdRng| {
        let (h, w) = (rng.random_range(1..=32), rng.random_range(1..=32));
        match rng.random_range(0..3) {
            0 => random_image(rng, h, w, c),
            1 => structured_image(rng, h, w, c),
            _ => {
                let levels: Vec<u8> = (0..rng.random_range(1..5)).map(|_| rng.random()).collect();
                let px = (0..h * w * c)
                    .map(|_| levels[rng.random_range(0..levels.len())])
                    .collect();
                Image::new(h, w, c, px).unwrap()
            }
        }
    };
    (one(rng), one(rng))
}

#[test]
fn ac06_hm_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng(606);
    let mut mismatches = 0;
    for i in 0..1000 {
        let (s, t) = hm_pair(&mut rng, i);
        if hm_image(&s, &t).unwrap().pixels() != naive_hm(&s, &t).as_slice() {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "AC6",
        "HM oracle equivalence",
        mismatches == 0 && within(elapsed, 30),
        format!("{mismatches}/1000 mismatches, {:.2}s (budget 30s)", elapsed.as_secs_f64()),
    );
}

#[test]
fn ac07_hm_properties() {
    let start = Instant::now();
    let mut rng = rng(707);
    let (mut non_monotone, mut not_idempotent, mut not_self, mut bound_violations) = (0, 0, 0, 0);
    for i in 0..1000 {
        let (s, t) = hm_pair(&mut rng, i);
        let out = hm_image(&s, &t).unwrap();
        for ch in 0..s.channels() {
            let cs = compute_cdf(s.channel_plane(ch), IMAGE_BINS).unwrap();
            let ct = compute_cdf(t.channel_plane(ch), IMAGE_BINS).unwrap();
            let map = build_mapping(&cs, &ct).unwrap();
            if map.mapping().windows(2).any(|w| w[0] > w[1]) {
                non_monotone += 1;
            }
            let (co, ctv) = (channel_cdf(&out, ch), channel_cdf(&t, ch));
            let sup = co.iter().zip(&ctv).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if sup > cs.max_bin_mass() + 1e-12 {
                bound_violations += 1;
            }
        }
        if hm_image(&out, &t).unwrap() != out {
            not_idempotent += 1;
        }
        if hm_image(&s, &s).unwrap() != s {
            not_self += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "AC7",
        "HM properties",
        non_monotone + not_idempotent + not_self + bound_violations == 0 && within(elapsed, 30),
        format!(
            "1000 pairs: non-monotone maps {non_monotone}, idempotence failures {not_idempotent}, self-identity failures {not_self}, CDF bound violations {bound_violations}, {:.2}s (budget 30s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn ac08_combination_correctness() {
    let start = Instant::now();
    let mut rng = rng(808);
    let mut mismatches = 0;
    for i in 0..100 {
        let c = if i % 2 == 0 { 3 } else { 1 };
        let (hs, ws, ht, wt) = (
            rng.random_range(8..=48),
            rng.random_range(8..=48),
            rng.random_range(8..=48),
            rng.random_range(8..=48),
        );
        let s = structured_image(&mut rng, hs, ws, c);
        let t = structured_image(&mut rng, ht, wt, c);
        let combined = transform_pair(&s, &t, ConcreteMethod::FdmThenHm, EPS, true).unwrap();
        let (after_fdm, _) = fdm_image(&s, &t, EPS, true).unwrap();
        if combined.pixels() != naive_hm(&after_fdm, &t).as_slice() {
            mismatches += 1;
        }
    }

    let source = DatasetRef::new((0..10_000).map(|i| PathBuf::from(format!("s{i:05}.png"))).collect())
        .unwrap();
    let target = DatasetRef::new((0..37).map(|i| PathBuf::from(format!("t{i:02}.png"))).collect())
        .unwrap();
    let plan = build_plan(&source, &target, Method::FdmOrHm(0.5), 7).unwrap();
    let fraction = plan.count(ConcreteMethod::Fdm) as f64 / 10_000.0;
    let elapsed = start.elapsed();
    verdict(
        "AC8",
        "combination correctness",
        mismatches == 0 && (0.48..=0.52).contains(&fraction) && within(elapsed, 60),
        format!(
            "fdm-then-hm mismatches {mismatches}/100, disjunctive FDM fraction {fraction:.4} (band [0.48, 0.52]), {:.2}s (budget 60s)",
            elapsed.as_secs_f64()
        ),
    );
}

fn write_dataset(dir: &Path, prefix: &str, count: usize, seed: u64) {
    let mut rng = rng(seed);
    for i in 0..count {
        let sub = dir.join(format!("part{}", i % 3));
        fs::create_dir_all(&sub).unwrap();
        let (h, w) = (rng.random_range(12..=32), rng.random_range(12..=32));
        let img = structured_image(&mut rng, h, w, 3);
        img.save_png(sub.join(format!("{prefix}{i:04}.png"))).unwrap();
    }
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn ac09_pipeline_determinism() {
    let start = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let (src, tgt) = (root.path().join("src"), root.path().join("tgt"));
    write_dataset(&src, "s", 200, 1);
    write_dataset(&tgt, "t", 25, 2);

    let run = |jobs: usize, name: &str| {
        let source = DatasetRef::discover(&src).unwrap();
        let target = DatasetRef::discover(&tgt).unwrap();
        let plan = build_plan(&source, &target, Method::FdmOrHm(0.5), 7).unwrap();
        let out = root.path().join(name);
        let options = ExecuteOptions {
            epsilon: EPS,
            clamp: true,
            jobs,
        };
        let report = execute_plan(&plan, options, &out).unwrap();
        (report.success_count(), tree_bytes(&out))
    };
    let (ok1, serial) = run(1, "jobs1");
    let (ok8, parallel) = run(8, "jobs8");
    let (ok_re, rerun) = run(8, "rerun");
    let elapsed = start.elapsed();
    verdict(
        "AC9",
        "pipeline determinism",
        ok1 == 200 && ok8 == 200 && ok_re == 200
            && serial.len() == 200
            && serial == parallel
            && serial == rerun
            && within(elapsed, 60),
        format!(
            "written {ok1}/{ok8}/{ok_re} of 200, jobs=1 vs jobs=8 identical: {}, rerun identical: {}, {:.2}s (budget 60s)",
            serial == parallel,
            serial == rerun,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn ac10_fmt1_codec() {
    let mut rng = rng(1010);
    let dir = tempfile::tempdir().unwrap();
    let mut shapes: Vec<Vec<usize>> = vec![vec![2, 1], vec![1], vec![1, 1], vec![2, 1, 1, 1], vec![3, 64]];
    while shapes.len() < 100 {
        let ndims = rng.random_range(1..=4);
        shapes.push((0..ndims).map(|_| rng.random_range(1..=9)).collect());
    }
    let mut failures = 0;
    for (i, shape) in shapes.iter().enumerate() {
        let count: usize = shape.iter().product();
        let data: Vec<f32> = (0..count)
            .map(|_| loop {
                let v = f32::from_bits(rng.random());
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        let t = FeatureTensor::new(shape.clone(), data).unwrap();
        let path = dir.path().join(format!("t{i}.fmt1"));
        t.write_fmt1(&path).unwrap();
        let back = FeatureTensor::read_fmt1(&path).unwrap();
        let bits = |x: &FeatureTensor| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if back.shape() != t.shape() || bits(&back) != bits(&t) || fs::read(&path).unwrap() != t.to_fmt1().unwrap() {
            failures += 1;
        }
    }
    verdict(
        "AC10",
        "FMT1 codec",
        failures == 0,
        format!("{failures}/100 round trips differ"),
    );
}

#[test]
fn ac11_stats_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng(1111);
    let (mut worst_mean, mut worst_cov, mut worst_recon, mut worst_orth) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut worst_spectrum, mut worst_white, mut worst_psd) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..1000 {
        let n = rng.random_range(2..=64);
        let c = rng.random_range(1..=8);
        let scale = [1e-3, 1.0, 255.0][i % 3];
        let rows = if i % 2 == 0 {
            random_rows(&mut rng, n, c, scale)
        } else {
            correlated_rows(&mut rng, n, c, scale)
        };
        let f = FeatureMatrix::from_rows(&rows).unwrap();

        let om = oracle_mean(&rows);
        let mean_scale = om.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(scale);
        worst_mean = worst_mean.max(max_abs_diff(&compute_mean(&f), &om) / mean_scale);
        let ocov = to_matrix(&oracle_covariance(&rows));
        let cov = compute_covariance(&f).unwrap();
        worst_cov = worst_cov.max(relative_frobenius(&cov, &ocov));

        let stats = compute_stats(&f, EPS).unwrap();
        let e = &stats.eigen;
        let u = &e.eigenvectors;
        let recon = u.scale_columns(&e.raw_eigenvalues).matmul(&u.transpose());
        worst_recon = worst_recon.max(relative_frobenius(&recon, &cov));
        worst_orth = worst_orth.max(u.matmul(&u.transpose()).max_abs_distance(&statmatch::Matrix::identity(c)));

        let lambda_max = e.raw_eigenvalues[0].abs().max(f64::MIN_POSITIVE);
        worst_psd = worst_psd.max(-e.raw_eigenvalues[c - 1] / lambda_max);

        // independent spectrum from nalgebra
        let na = nalgebra::DMatrix::from_row_slice(c, c, cov.as_slice());
        let mut reference: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        worst_spectrum = worst_spectrum.max(max_abs_diff(&e.raw_eigenvalues, &reference) / lambda_max);

        if e.raw_eigenvalues == e.eigenvalues {
            let w = stats.whitening_matrix();
            let white = w.transpose().matmul(&cov).matmul(&w);
            worst_white = worst_white.max(white.max_abs_distance(&statmatch::Matrix::identity(c)));
        }
    }
    let sym = eig_sym_psd(&statmatch::Matrix::identity(4), 0.0).unwrap();
    let elapsed = start.elapsed();
    let ok = worst_mean <= 1e-10
        && worst_cov <= 1e-10
        && worst_recon <= 1e-8
        && worst_orth <= 1e-8
        && worst_spectrum <= 1e-10
        && worst_white <= 1e-6
        && worst_psd <= 1e-10
        && sym.eigenvalues == vec![1.0; 4]
        && within(elapsed, 10);
    verdict(
        "AC11",
        "stats_core oracle equivalence",
        ok,
        format!(
            "mean {worst_mean:.1e}, cov {worst_cov:.1e} (tol 1e-10); reconstruction {worst_recon:.1e}, orthogonality {worst_orth:.1e} (tol 1e-8); spectrum vs nalgebra {worst_spectrum:.1e}; whitening {worst_white:.1e} (tol 1e-6); PSD slack {worst_psd:.1e}; {:.2}s (budget 10s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn fdm_features_reexport_matches_image_path() {
    let mut rng = rng(1212);
    let s = structured_image(&mut rng, 10, 12, 3);
    let t = structured_image(&mut rng, 9, 7, 3);
    let direct = fdm_features(&s.to_feature_matrix().unwrap(), &t.to_feature_matrix().unwrap(), EPS).unwrap();
    let (_, via_image) = fdm_image(&s, &t, EPS, true).unwrap();
    assert_eq!(direct, via_image);
}
