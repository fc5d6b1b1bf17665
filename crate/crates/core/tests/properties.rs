use levelset_core::adaptive::weighted_without_replacement;
use levelset_core::diverse::{conditional_variance, diversity_score, kernel_update, L_MIN};
use levelset_core::gp::kernel_eval;
use levelset_core::normal;
use levelset_core::planner::{reward, TaskRecord};
use levelset_core::tgmm::Tgmm;
use levelset_core::{Bounds, Dataset, GpHyper, KernelParams, PosteriorModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, d)
}

fn points(d: usize, lo: usize, hi: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(point(d), lo..hi)
}

fn hyper(l: Vec<f64>, sv: f64, noise: f64) -> GpHyper {
    GpHyper::new(KernelParams::new(l, sv).unwrap(), noise).unwrap()
}

fn dataset(xs: &[Vec<f64>], ys: &[f64], noise: f64) -> Dataset {
    let mut ds = Dataset::new(xs[0].len(), 0, noise).unwrap();
    for (x, y) in xs.iter().zip(ys) {
        ds.push(x, &[], *y).unwrap();
    }
    ds
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_matches_dense_solve(
        xs in points(2, 1, 20),
        seed in any::<u64>(),
        l in prop::collection::vec(0.3..5.0f64, 2),
        sv in 0.3..3.0f64,
        noise in 0.05..0.5f64,
        x in point(2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let h = hyper(l, sv, noise);
        let model = PosteriorModel::new(&dataset(&xs, &ys, noise), h.clone()).unwrap();
        let n = xs.len();
        let k = |a: &[f64], b: &[f64]| kernel_eval(a, b, &h.kernel).unwrap();
        let mut a = DMatrix::from_fn(n, n, |i, j| k(&xs[i], &xs[j]));
        for i in 0..n {
            a[(i, i)] += noise * noise;
        }
        let inv = a.try_inverse().unwrap();
        let kv = DVector::from_iterator(n, xs.iter().map(|p| k(p, &x)));
        let mean = (kv.transpose() * &inv * DVector::from_column_slice(&ys))[(0, 0)];
        let var = sv - (kv.transpose() * &inv * &kv)[(0, 0)];
        let (m, s) = model.predict(&x).unwrap();
        prop_assert!((m - mean).abs() <= 1e-7 * mean.abs().max(1.0));
        prop_assert!((s * s - var.max(0.0)).abs() <= 1e-7 * sv);
    }

    #[test]
    fn variance_never_grows_with_data(xs in points(2, 1, 15), extra in point(2), x in point(2)) {
        let h = hyper(vec![2.0, 2.0], 1.0, 0.1);
        let ys = vec![0.0; xs.len()];
        let before = PosteriorModel::new(&dataset(&xs, &ys, 0.1), h.clone()).unwrap().predict(&x).unwrap().1;
        let mut more = xs.clone();
        more.push(extra);
        let after = PosteriorModel::new(&dataset(&more, &vec![0.0; more.len()], 0.1), h).unwrap().predict(&x).unwrap().1;
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn kernel_matrix_is_symmetric_psd(xs in points(3, 2, 12), l in prop::collection::vec(0.0..6.0f64, 3)) {
        let p = KernelParams::new(l, 1.3).unwrap();
        let n = xs.len();
        let k = DMatrix::from_fn(n, n, |i, j| kernel_eval(&xs[i], &xs[j], &p).unwrap());
        prop_assert!((&k - k.transpose()).amax() == 0.0);
        let eig = k.symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|e| *e > -1e-9));
    }

    #[test]
    fn tgmm_samples_stay_in_box(means in points(2, 1, 6), v in 1e-4..10.0f64, seed in any::<u64>()) {
        let weights = vec![1.0; means.len()];
        let g = Tgmm::new(&weights, means, vec![v, v], Bounds::unit(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in g.sample(50, &mut rng) {
            prop_assert!(Bounds::unit(2).contains(&s));
            prop_assert!(g.pdf(&s).unwrap() > 0.0);
        }
    }

    #[test]
    fn tgmm_density_integrates_to_one(mu in point(1), mu2 in point(1), v in 0.001..1.0f64, w in 0.1..0.9f64) {
        let g = Tgmm::new(&[w, 1.0 - w], vec![mu, mu2], vec![v], Bounds::unit(1)).unwrap();
        let n = 4000;
        let total: f64 = (0..n).map(|i| g.pdf(&[(i as f64 + 0.5) / n as f64]).unwrap()).sum::<f64>() / n as f64;
        prop_assert!((total - 1.0).abs() < 2e-3, "integral {}", total);
    }

    #[test]
    fn diversity_is_monotone_and_submodular(
        s in points(2, 1, 6),
        extra in points(2, 0, 4),
        x in point(2),
        l in prop::collection::vec(0.5..8.0f64, 2),
    ) {
        let zeta = 0.1;
        let d = |set: &[Vec<f64>]| diversity_score(set, &l, zeta);
        let mut with_x = s.clone();
        with_x.push(x.clone());
        prop_assert!(d(&with_x) >= d(&s) - 1e-9);
        let mut big = s.clone();
        big.extend(extra);
        let mut big_x = big.clone();
        big_x.push(x);
        let gain_small = d(&with_x) - d(&s);
        let gain_big = d(&big_x) - d(&big);
        prop_assert!(gain_small >= gain_big - 1e-7);
    }

    #[test]
    fn conditional_variance_is_a_variance(s in points(2, 0, 6), x in point(2), l in prop::collection::vec(0.5..8.0f64, 2)) {
        let eta = conditional_variance(&x, &s, &l, 0.1);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&eta));
    }

    #[test]
    fn kernel_update_shrinks_one_dimension(
        s in points(3, 1, 5),
        theta in point(3),
        l in prop::collection::vec(0.01..5.0f64, 3),
        eps in 0.0..0.9f64,
    ) {
        let (new, d) = kernel_update(&l, &theta, &s, eps, 0.1);
        prop_assert!(d < 3);
        for i in 0..3 {
            if i == d {
                prop_assert!(new[i] <= l[i] && new[i] >= L_MIN.min(l[i]));
            } else {
                prop_assert_eq!(new[i], l[i]);
            }
        }
    }

    #[test]
    fn weighted_draw_is_distinct(weights in prop::collection::vec(0.0..1.0f64, 1..30), m in 0usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = weighted_without_replacement(&weights, m, &mut rng);
        let positive = weights.iter().filter(|w| **w > 0.0).count();
        prop_assert_eq!(picked.len(), m.min(positive));
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), picked.len());
        prop_assert!(picked.iter().all(|&i| weights[i] > 0.0));
    }

    #[test]
    fn reward_prefers_earlier_success(n in 0usize..12, gamma in 0.05..0.95f64) {
        let record = |k: usize| TaskRecord {
            contributes: (0..=k).map(|i| i == k).collect(),
            plan_found: true,
            samples: k + 1,
            wall_time: 0.0,
        };
        let (a, b) = (reward(&record(n), gamma), reward(&record(n + 1), gamma));
        prop_assert!(a > b && a <= gamma);
    }

    #[test]
    fn negative_straddle_bounds_crossing_mass(mean in -5.0..5.0f64, sd in 1e-3..3.0f64) {
        if -mean.abs() + 1.96 * sd < 0.0 {
            let cross = normal::cdf(-mean.abs() / sd);
            prop_assert!(2.0 * cross < 0.05 + 1e-12);
        }
    }
}
