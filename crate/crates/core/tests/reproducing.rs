use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varband::kernel::kernel_tail_mass;
use varband::paleywiener::VarBandFunction;
use varband::{BandwidthProfile, BlendShape, Interval, KernelModel, Potential, SpectralSet, C64};

fn toy_like() -> BandwidthProfile {
    BandwidthProfile::smooth_blend(1.0, 4.0, 2.0, BlendShape::Quintic).unwrap()
}

/// f(x) = int f(y) k(x, y) dy with the Liouville kernel evaluated pointwise.
#[test]
fn sl_kernel_reproduces() {
    let window = Interval::new(-250.0, 400.0).unwrap();
    let model = KernelModel::liouville(&toy_like(), SpectralSet::band(1.0).unwrap(), 400.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = VarBandFunction::random(&model, &mut rng, Interval::new(-10.0, 10.0).unwrap(), 3);
    let rule = model.spatial_rule(window);
    let fy = f.evaluate_many(&rule.nodes);
    let xs = [-7.0, -1.5, 0.0, 0.8, 3.0, 12.0];
    let k = model.kernel_matrix(&xs, &rule.nodes);
    for (i, &x) in xs.iter().enumerate() {
        let integral: C64 = (0..rule.nodes.len()).map(|j| k[(i, j)] * fy[j] * rule.weights[j]).sum();
        let direct = f.evaluate(x);
        assert!((integral - direct).norm() < 1e-4, "x={x}: {integral} vs {direct}");
    }
}

/// For every eps there is b with int_{|y - x| > b} |k(x, y)|^2 dy < eps k(x, x).
#[test]
fn kernel_tail_mass_has_radius() {
    let pot = Potential::from_profile(&toy_like()).unwrap();
    let model = KernelModel::schrodinger(pot, SpectralSet::band(1.0).unwrap(), 200.0).unwrap();
    let window = Interval::new(-200.0, 200.0).unwrap();
    for &x in &[0.0, -3.0] {
        let kxx = model.kernel(x, x).re;
        for &eps in &[0.1, 0.02] {
            let b = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
                .into_iter()
                .find(|&b| kernel_tail_mass(&model, x, b, window) < eps * kxx);
            assert!(b.is_some(), "x={x} eps={eps}");
        }
    }
}
