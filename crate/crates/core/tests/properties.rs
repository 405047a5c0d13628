use jjbarrier::breakdown::{calibrate_dielectric_strength, cumulative_conductance, min_thickness_samples};
use jjbarrier::edge::{build_kernels, detect_edges, DetectOptions, EdgeTrace};
use jjbarrier::fitting::{fit_double_gaussian, fit_simmons, lognormal_log_params, lognormal_moments, AreaMode};
use jjbarrier::grid::{EdsImage, Grid, TopographyMap};
use jjbarrier::io::{read_records, write_records, JunctionRecord};
use jjbarrier::mc::{sample_barrier, ThicknessDistribution};
use jjbarrier::simmons::{linspace, simmons_iv, Simmons, SimmonsParams};
use jjbarrier::stem::{build_lamella, project, tip_convolve, LamellaConfig, LamellaRegion, ProjectionAxis};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn simmons_fit_round_trip(
        t in 0.6f64..1.5,
        phi in 1.0f64..2.0,
        ft in 0.7f64..1.3,
        fphi in 0.7f64..1.3,
    ) {
        let truth = SimmonsParams::new(57_600.0, t, phi).unwrap();
        let iv = simmons_iv(&truth, &linspace(-1.2, 1.2, 41)).unwrap();
        let init = SimmonsParams { area: 57_600.0, thickness: t * ft, barrier_height: phi * fphi };
        let fit = fit_simmons(&iv, AreaMode::Fixed(57_600.0), init).unwrap();
        let p = fit.simmons();
        prop_assert!(rel(p.thickness, t) < 1e-4, "t {} vs {t}", p.thickness);
        prop_assert!(rel(p.barrier_height, phi) < 1e-4, "phi {} vs {phi}", p.barrier_height);
    }

    #[test]
    fn gradient_matches_central_differences(
        area in 100.0f64..1e5,
        t in 0.5f64..2.0,
        phi in 0.8f64..2.5,
        frac in -0.95f64..0.95,
    ) {
        let model = Simmons::<f64>::default();
        let p = SimmonsParams::new(area, t, phi).unwrap();
        let v = frac * 2.0 * phi * 0.9;
        prop_assume!(v.abs() > 1e-3);
        let g = model.gradient(&p, v).unwrap();
        let at = |a: f64, t: f64, phi: f64| model.current(&SimmonsParams { area: a, thickness: t, barrier_height: phi }, v).unwrap();
        let fd = |x: f64, f: &dyn Fn(f64) -> f64| {
            let h = 1e-5 * x;
            (f(x + h) - f(x - h)) / (2.0 * h)
        };
        let num = [
            fd(area, &|x| at(x, t, phi)),
            fd(t, &|x| at(area, x, phi)),
            fd(phi, &|x| at(area, t, x)),
        ];
        for (a, n) in g.iter().zip(num) {
            prop_assert!((a - n).abs() <= 1e-5 * n.abs().max(1e-30), "analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn current_is_odd_in_bias(t in 0.3f64..3.0, phi in 0.5f64..3.0, frac in 0.0f64..0.99) {
        let model = Simmons::<f64>::default();
        let p = SimmonsParams::new(1000.0, t, phi).unwrap();
        let v = frac * 2.0 * phi;
        let i = model.current(&p, v).unwrap();
        let j = model.current(&p, -v).unwrap();
        prop_assert!((i + j).abs() <= 1e-14 * i.abs());
    }

    #[test]
    fn conductance_falls_with_thickness(t in 0.5f64..3.0, dt in 0.01f64..0.5, phi in 0.5f64..3.0) {
        let model = Simmons::<f64>::default();
        let g = |t| model.zero_bias_conductance(&SimmonsParams::new(1.0, t, phi).unwrap()).unwrap();
        prop_assert!(g(t + dt) < g(t));
    }

    #[test]
    fn lognormal_moments_round_trip(mean in 0.05f64..5.0, cv in 0.0f64..2.0) {
        let sd = mean * cv;
        let (mu, sigma) = lognormal_log_params(mean, sd);
        let (m, s) = lognormal_moments(mu, sigma);
        prop_assert!(rel(m, mean) < 1e-12);
        prop_assert!((s - sd).abs() <= 1e-10 * mean);
    }

    #[test]
    fn calibration_hits_target_mean(
        minima in prop::collection::vec(0.01f64..2.0, 1..200),
        target in 0.1f64..5.0,
    ) {
        let cal = calibrate_dielectric_strength(&minima, target).unwrap();
        let v = cal.breakdown_voltages(&minima);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!(rel(mean, target) < 1e-12);
    }
}

fn bimodal() -> Vec<f64> {
    (0..120)
        .map(|i| {
            let u = (i as f64 * 0.618_033_988_75).fract() - 0.5;
            if i % 3 == 0 {
                1.6 + 0.1 * u
            } else {
                1.2 + 0.08 * u
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn double_gaussian_ignores_sample_order(shuffled in Just(bimodal()).prop_shuffle()) {
        let a = fit_double_gaussian(&bimodal(), Some(24)).unwrap();
        let b = fit_double_gaussian(&shuffled, Some(24)).unwrap();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.histogram, b.histogram);
    }

    #[test]
    fn cumulative_conductance_concave_above_diagonal(sd in 0.01f64..0.3, seed in any::<u64>()) {
        let dist = ThicknessDistribution::lognormal(1.0, sd).unwrap();
        let field = sample_barrier(&dist, 16.0, 16.0, 1.0, seed, 0).unwrap();
        let c = cumulative_conductance(&field, 1.22).unwrap();
        prop_assert_eq!(c[0], (0.0, 0.0));
        prop_assert_eq!(*c.last().unwrap(), (1.0, 1.0));
        for p in &c {
            prop_assert!(p.1 >= p.0 - 1e-12);
        }
        let slopes: Vec<f64> = c.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        for w in slopes.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn mesh_refinement_never_raises_minimum(
        fine_idx in 0usize..4,
        normal in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let fine = [0.1, 0.2, 0.25, 0.5][fine_idx];
        let dist = if normal {
            ThicknessDistribution::normal(1.0, 0.1).unwrap()
        } else {
            ThicknessDistribution::lognormal(1.0, 0.1).unwrap()
        };
        let coarse_min = min_thickness_samples(&dist, 10.0, 10.0, 2.0 * fine, 8, seed).unwrap();
        let fine_min = min_thickness_samples(&dist, 10.0, 10.0, fine, 8, seed).unwrap();
        for (f, c) in fine_min.iter().zip(&coarse_min) {
            prop_assert!(f <= c, "fine {f} > coarse {c}");
        }
    }

    #[test]
    fn tip_dilation_never_lowers(
        heights in prop::collection::vec(-1.0f64..1.0, 144),
        radius in 0.0f64..3.0,
    ) {
        let topo = TopographyMap::new(0.5, Grid::from_vec(12, 12, heights).unwrap()).unwrap();
        let d = tip_convolve(&topo, radius).unwrap();
        for (a, b) in d.heights.data().iter().zip(topo.heights.data()) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn projection_conserves_mass(heights in prop::collection::vec(-1.0f64..1.0, 100), thickness in 0.5f64..3.0) {
        let topo = TopographyMap::new(1.0, Grid::from_vec(10, 10, heights).unwrap()).unwrap();
        let region = LamellaRegion { x0: 0.0, y0: 0.0, length: 10.0, depth: 10.0 };
        let cfg = LamellaConfig { barrier_thickness: thickness, voxel: 0.5, z_margin: 1.0 };
        let lam = build_lamella(&topo, &region, &cfg).unwrap();
        let depth = project(&lam, ProjectionAxis::Depth).unwrap();
        let length = project(&lam, ProjectionAxis::Length).unwrap();
        let total = lam.total();
        prop_assert!((depth.values.sum() * lam.ny as f64 - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!((length.values.sum() * lam.nx as f64 - total).abs() <= 1e-9 * total.max(1.0));
    }
}

const PX: f64 = 0.1;

/// Image of `height` rows with `band` (rows x columns, row-major) placed at row `start`.
fn place(band: &[f64], cols: usize, height: usize, start: usize) -> EdsImage {
    let rows = band.len() / cols;
    let g = Grid::from_fn(cols, height, |x, y| {
        if y >= start && y < start + rows {
            band[(y - start) * cols + x]
        } else {
            0.0
        }
    });
    EdsImage::new(PX, g).unwrap()
}

fn edges(img: &EdsImage, k: usize, delta: f64, length: f64) -> (EdgeTrace, EdgeTrace) {
    let kp = build_kernels(k, delta, PX, length).unwrap();
    detect_edges(img, &kp, &DetectOptions::default()).unwrap()
}

fn band_strategy() -> impl Strategy<Value = Vec<f64>> {
    // 20 rows x 8 columns of bright, noisy band.
    prop::collection::vec(0.5f64..1.5, 160)
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn edges_translate_with_the_band(band in band_strategy(), shift in 0usize..10, k in 1usize..6, delta in 0.0f64..0.5) {
        let a = place(&band, 8, 60, 15);
        let b = place(&band, 8, 60, 15 + shift);
        let (la, ta) = edges(&a, k, delta, 0.5);
        let (lb, tb) = edges(&b, k, delta, 0.5);
        for c in 0..8 {
            prop_assert_eq!(lb.positions[c], la.positions[c] + shift as f64);
            prop_assert_eq!(tb.positions[c], ta.positions[c] + shift as f64);
        }
    }

    #[test]
    fn mirroring_swaps_faces(band in band_strategy(), k in 1usize..6, delta in 0.0f64..0.5) {
        let img = place(&band, 8, 50, 14);
        let mirrored = EdsImage::new(PX, img.values.flip_rows()).unwrap();
        let (lead, trail) = edges(&img, k, delta, 0.5);
        let (mlead, mtrail) = edges(&mirrored, k, delta, 0.5);
        let last = (img.height() - 1) as f64;
        for c in 0..8 {
            prop_assume!(!lead.tied[c] && !trail.tied[c]);
            prop_assert_eq!(mlead.positions[c], last - trail.positions[c]);
            prop_assert_eq!(mtrail.positions[c], last - lead.positions[c]);
        }
    }

    #[test]
    fn symmetric_kernel_ignores_offset(band in band_strategy(), k in 1usize..6, offset in -2.0f64..2.0) {
        let img = place(&band, 8, 50, 14);
        let shifted = EdsImage::new(PX, img.values.map(|v| v + offset)).unwrap();
        let (la, ta) = edges(&img, k, 0.0, 0.5);
        let (lb, tb) = edges(&shifted, k, 0.0, 0.5);
        // Offsets change the response by rounding only; compare away from ties.
        for c in 0..8 {
            prop_assume!(!la.tied[c] && !ta.tied[c]);
            prop_assert_eq!(la.positions[c], lb.positions[c]);
            prop_assert_eq!(ta.positions[c], tb.positions[c]);
        }
    }

    #[test]
    fn sharp_band_independent_of_gaussian_length(
        start in 5usize..25,
        width in 5usize..20,
        k in 1usize..5,
        length in 0.1f64..2.0,
    ) {
        let g = Grid::from_fn(12, 50, |_, y| if (start..start + width).contains(&y) { 1.0 } else { 0.0 });
        let img = EdsImage::new(PX, g).unwrap();
        let (la, ta) = edges(&img, k, 0.2, 0.5);
        let (lb, tb) = edges(&img, k, 0.2, length);
        prop_assert_eq!(la.positions, lb.positions);
        prop_assert_eq!(ta.positions, tb.positions);
    }
}

fn opt(s: impl Strategy<Value = f64>) -> impl Strategy<Value = Option<f64>> {
    prop::option::of(s)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn records_round_trip(
        rows in prop::collection::vec(
            (
                opt(1.0f64..1e6), opt(0.1f64..3.0), opt(0.1f64..3.0), opt(0.1f64..5.0), opt(1e-20f64..1e-10),
                prop::option::of((-50i64..50, -50i64..50)), any::<bool>(),
            ),
            0..20,
        )
    ) {
        let records: Vec<JunctionRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (r, t, phi, vbd, res, wafer, converged))| JunctionRecord {
                junction_id: format!("j{i}"),
                wafer_x: wafer.map(|w| w.0),
                wafer_y: wafer.map(|w| w.1),
                resistance_ohm: r,
                t_fit_nm: t,
                phi_fit_v: phi,
                v_bd_v: vbd,
                residual: res,
                converged,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_records(&path, &records).unwrap();
        prop_assert_eq!(read_records(&path).unwrap(), records);
    }
}
