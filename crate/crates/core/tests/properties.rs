use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varband::density::{beurling_density, gap_density_bound, separation};
use varband::kernel::toy_kernel;
use varband::paleywiener::VarBandFunction;
use varband::schrodinger::scattering_coeffs;
use varband::{BandwidthProfile, BlendShape, Interval, KernelModel, Potential, SampleSet};

fn sorted_points(raw: Vec<f64>) -> SampleSet {
    let mut pts = raw;
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    SampleSet::new(pts).unwrap()
}

fn blend() -> impl Strategy<Value = BandwidthProfile> {
    (0.5f64..4.0, 0.5f64..4.0, 0.5f64..3.0)
        .prop_map(|(pm, pp, r)| BandwidthProfile::smooth_blend(pm, pp, r, BlendShape::Quintic).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn toy_kernel_is_hermitian_psd(pm in 0.3f64..5.0, pp in 0.3f64..5.0, om in 0.2f64..5.0,
                                   xs in prop::collection::vec(-15.0f64..15.0, 2..9)) {
        let n = xs.len();
        let g = nalgebra::DMatrix::from_fn(n, n, |i, j| toy_kernel(pm, pp, om, xs[i], xs[j]));
        prop_assert!((&g - g.transpose()).amax() < 1e-14);
        let trace = g.trace();
        let ev = g.symmetric_eigen().eigenvalues;
        prop_assert!(ev.iter().all(|&e| e >= -1e-10 * trace.max(1.0)));
    }

    #[test]
    fn schrodinger_kernel_is_hermitian(q0 in -2.0f64..2.0, a in 0.2f64..2.0,
                                       x in -8.0f64..8.0, y in -8.0f64..8.0) {
        let model = KernelModel::schrodinger(Potential::square_well(q0, a),
            varband::SpectralSet::band(1.0).unwrap(), 10.0).unwrap();
        let kxy = model.kernel(x, y);
        let kyx = model.kernel(y, x);
        prop_assert!((kxy - kyx.conj()).norm() < 1e-10);
        // Cauchy-Schwarz for a positive kernel.
        prop_assert!(kxy.norm_sqr() <= model.kernel(x, x).re * model.kernel(y, y).re * (1.0 + 1e-8) + 1e-14);
    }

    #[test]
    fn bernstein_ratio_at_most_one(seed in any::<u64>(), k in 1u32..5, pm in 0.5f64..4.0, pp in 0.5f64..4.0) {
        let model = KernelModel::toy(pm, pp, 1.0, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = VarBandFunction::random(&model, &mut rng, Interval::new(-10.0, 10.0).unwrap(), 3);
        let r = f.bernstein_ratio(k, 1.0).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0 + 1e-9);
        // Ratios decrease in k.
        prop_assert!(f.bernstein_ratio(k + 1, 1.0).unwrap() <= r * (1.0 + 1e-12));
    }

    #[test]
    fn scattering_is_unitary(q0 in -3.0f64..3.0, a in 0.1f64..3.0, w in 0.05f64..6.0) {
        let d = scattering_coeffs(&Potential::square_well(q0, a), w).unwrap();
        prop_assert!(d.unitarity_defect() < 1e-7);
    }

    #[test]
    fn zeta_roundtrip(p in blend(), x in -30.0f64..30.0) {
        let s = p.zeta(x).unwrap();
        prop_assert!((p.zeta_inv(s).unwrap() - x).abs() < 1e-9);
    }

    #[test]
    fn density_is_warp_equivariant(p in blend(), raw in prop::collection::vec(-40.0f64..40.0, 20..120)) {
        let x = sorted_points(raw);
        let unit = BandwidthProfile::constant(1.0);
        let w = Interval::new(-40.0, 40.0).unwrap();
        let zw = Interval::new(p.zeta(-40.0).unwrap(), p.zeta(40.0).unwrap()).unwrap();
        let zx = SampleSet::new(x.points().iter().map(|&t| p.zeta(t).unwrap()).collect()).unwrap();
        let rs = [1.0, 3.0];
        let a = beurling_density(&p, &x, &rs, w, 0.02).unwrap();
        let b = beurling_density(&unit, &zx, &rs, zw, 0.02).unwrap();
        prop_assert_eq!(a.inf_count, b.inf_count);
        prop_assert_eq!(a.sup_count, b.sup_count);
    }

    #[test]
    fn density_is_monotone_in_the_set(raw in prop::collection::vec(-40.0f64..40.0, 10..80),
                                      extra in prop::collection::vec(-40.0f64..40.0, 1..40)) {
        let p = BandwidthProfile::two_level(1.0, 3.0);
        let w = Interval::new(-40.0, 40.0).unwrap();
        let x = sorted_points(raw.clone());
        let y = sorted_points(raw.into_iter().chain(extra).collect());
        let rs = [2.0, 5.0];
        let a = beurling_density(&p, &x, &rs, w, 0.02).unwrap();
        let b = beurling_density(&p, &y, &rs, w, 0.02).unwrap();
        for i in 0..rs.len() {
            prop_assert!(a.inf_count[i] <= b.inf_count[i] && a.sup_count[i] <= b.sup_count[i]);
            prop_assert!(a.inf_count[i] <= a.sup_count[i]);
        }
        let (sx, sy) = (separation(&p, &x).unwrap(), separation(&p, &y).unwrap());
        prop_assert!(sy.min_gap <= sx.min_gap && sy.n0 >= sx.n0);
    }

    #[test]
    fn gap_bound_holds(p in blend(), step in 0.2f64..2.0, jitter in 0.0f64..0.45, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (p.zeta(-50.0).unwrap(), p.zeta(50.0).unwrap());
        let mut pts = Vec::new();
        let mut s = lo + 0.5 * step;
        while s < hi {
            pts.push(p.zeta_inv((s + jitter * step * rng.random_range(-1.0..1.0)).clamp(lo, hi)).unwrap());
            s += step;
        }
        let x = sorted_points(pts);
        let g = gap_density_bound(&p, &x).unwrap();
        prop_assert!(g.holds, "{:?}", g);
    }
}
