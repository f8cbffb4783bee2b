use aerostereo::metrics::{bmp, bmp_curve, evaluate, mse, ssim, DEFAULT_BMP_THRESHOLDS};
use aerostereo::{normalize_disparity, DisparityMap, EvalParams, SsimParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 16;

fn random_map(rng: &mut ChaCha8Rng, sentinel_rate: f64) -> DisparityMap {
    DisparityMap::from_fn(N, N, |_, _| {
        if rng.random_bool(sentinel_rate) {
            -1.0
        } else {
            rng.random_range(0.0..75.0f32)
        }
    })
}

fn noisy_copy(rng: &mut ChaCha8Rng, m: &DisparityMap, noise: f32) -> DisparityMap {
    DisparityMap::from_fn(N, N, |x, y| {
        let v = m.get(x, y);
        if v < 0.0 {
            v
        } else {
            (v + rng.random_range(-noise..noise)).max(0.0)
        }
    })
}

fn pairs(values_a: &DisparityMap, values_b: &DisparityMap) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..N * N {
        let (a, b) = (values_a.data()[i], values_b.data()[i]);
        if a >= 0.0 && b >= 0.0 {
            out.push((a as f64, b as f64));
        }
    }
    out
}

fn direct_mse(a: &DisparityMap, b: &DisparityMap) -> f64 {
    let p = pairs(a, b);
    p.iter().map(|(x, y)| (x - y).powi(2)).sum::<f64>() / p.len() as f64
}

fn direct_bmp(a: &DisparityMap, b: &DisparityMap, t: f64) -> f64 {
    let p = pairs(a, b);
    100.0 * p.iter().filter(|(x, y)| (x - y).abs() > t).count() as f64 / p.len() as f64
}

/// Mean of l·c·s over fully valid 8×8 windows, each statistic computed with two passes.
fn direct_ssim(a: &DisparityMap, b: &DisparityMap) -> Option<f64> {
    let win = 8;
    let (c1, c2) = ((0.01f64 * 75.0).powi(2), (0.03f64 * 75.0).powi(2));
    let c3 = c2 / 2.0;
    let mut sum = 0.0;
    let mut count = 0;
    for y0 in 0..=N - win {
        for x0 in 0..=N - win {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for y in y0..y0 + win {
                for x in x0..x0 + win {
                    xs.push(a.get(x, y) as f64);
                    ys.push(b.get(x, y) as f64);
                }
            }
            if xs.iter().chain(&ys).any(|v| *v < 0.0) {
                continue;
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
            let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
            let cov = xs.iter().zip(&ys).map(|(u, v)| (u - mx) * (v - my)).sum::<f64>() / n;
            let (sx, sy) = (vx.sqrt(), vy.sqrt());
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let c = (2.0 * sx * sy + c2) / (vx + vy + c2);
            let s = (cov + c3) / (sx * sy + c3);
            sum += l * c * s;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn metrics_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let params = SsimParams::default();
    for i in 0..100 {
        let a = random_map(&mut rng, 0.01);
        let b = if i % 2 == 0 {
            random_map(&mut rng, 0.01)
        } else {
            noisy_copy(&mut rng, &a, 5.0)
        };
        assert!(close(mse(&a, &b).unwrap(), direct_mse(&a, &b), 1e-6));
        for t in DEFAULT_BMP_THRESHOLDS {
            assert!(close(bmp(&a, &b, t).unwrap(), direct_bmp(&a, &b, t), 1e-6));
        }
        match (ssim(&a, &b, &params).ok(), direct_ssim(&a, &b)) {
            (Some(ours), Some(oracle)) => assert!(close(ours, oracle, 1e-6), "{ours} vs {oracle}"),
            (None, None) => {}
            other => panic!("window validity disagrees: {other:?}"),
        }
    }
}

#[test]
fn ssim_of_identical_maps_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let a = random_map(&mut rng, 0.0);
        assert!((ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn bmp_threshold_is_strict() {
    let truth = DisparityMap::filled(N, N, 10.0);
    for t in DEFAULT_BMP_THRESHOLDS {
        let est = DisparityMap::filled(N, N, 10.0 + t as f32);
        assert_eq!(bmp(&est, &truth, t).unwrap(), 0.0);
        let over = DisparityMap::filled(N, N, 10.5 + t as f32);
        assert_eq!(bmp(&over, &truth, t).unwrap(), 100.0);
    }
}

#[test]
fn bmp_curve_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_map(&mut rng, 0.05);
    let b = noisy_copy(&mut rng, &a, 20.0);
    let curve = bmp_curve(&a, &b, &DEFAULT_BMP_THRESHOLDS).unwrap();
    assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn evaluate_against_self_is_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_map(&mut rng, 0.0);
    let r = evaluate(&a, &a, &EvalParams::default(), false, 0.0).unwrap();
    assert_eq!(r.mse, 0.0);
    assert!((r.ssim.unwrap() - 1.0).abs() < 1e-9);
    assert!(r.bmp_curve.iter().all(|(_, p)| *p == 0.0));
    assert_eq!(r.valid_pixel_count, N * N);
}

#[test]
fn unit_residual_has_unit_mse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = DisparityMap::from_fn(N, N, |_, _| rng.random_range(0..70) as f32);
    let b = DisparityMap::from_fn(N, N, |x, y| a.get(x, y) + 1.0);
    let r = evaluate(&b, &a, &EvalParams::default(), false, 0.0).unwrap();
    assert!((r.mse - 1.0).abs() < 1e-9);
}

#[test]
fn normalization_absorbs_constant_offset() {
    let a = DisparityMap::from_fn(N, N, |x, y| (x * 3 + y) as f32);
    let b = DisparityMap::from_fn(N, N, |x, y| (x * 3 + y) as f32 + 20.0);
    let r = evaluate(&b, &a, &EvalParams::default(), true, 0.0).unwrap();
    assert!(r.mse < 1e-9);
    assert!(r.normalized);
}

#[test]
fn normalization_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let m = random_map(&mut rng, 0.1);
    let n = normalize_disparity(&m, 75.0).unwrap();
    let (lo, hi) = n.valid_range().unwrap();
    assert_eq!(lo, 0.0);
    assert!((hi as f64 - 75.0).abs() <= 1e-9);
    for i in 0..N * N {
        assert_eq!(m.data()[i] < 0.0, n.data()[i] < 0.0);
    }
    for _ in 0..1000 {
        let (i, j) = (rng.random_range(0..N * N), rng.random_range(0..N * N));
        let (a, b) = (m.data()[i], m.data()[j]);
        if a >= 0.0 && b >= 0.0 && a < b {
            assert!(n.data()[i] <= n.data()[j]);
        }
    }
}
