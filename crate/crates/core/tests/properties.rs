use glmb::oracle::{random_glmb, random_mixture, rescale_units, RandomGlmb};
use glmb::poisson::{poisson_cs_divergence, poisson_void_probability, PoissonProcess};
use glmb::rng::stream;
use glmb::scenario::ospa;
use glmb::{cs_divergence, glmb_inner_product, glmb_void_probability, GaussianIntensity, GlmbDensity, Region};
use proptest::prelude::*;

const PLANAR: RandomGlmb =
    RandomGlmb { state_dim: 2, labels: 3, max_components: 5, max_gaussians: 3, spread: 4.0, sd_range: (0.3, 2.0) };

fn density(seed: u64, birth: u32) -> GlmbDensity {
    random_glmb(&mut stream(seed, &[birth as u64]), &PLANAR, birth)
}

fn intensity(seed: u64) -> GaussianIntensity {
    let mut rng = stream(seed, &[9]);
    let shape = random_mixture(&mut rng, &PLANAR);
    GaussianIntensity::scaled(&shape, 0.5 + (seed % 7) as f64).unwrap()
}

fn disc(x: f64, y: f64, r: f64) -> Region {
    Region::disc([x, y], r, [0, 1]).unwrap()
}

fn points(raw: &[(f64, f64)]) -> Vec<Vec<f64>> {
    raw.iter().map(|&(x, y)| vec![x, y]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_weights_and_cardinality_sum_to_one(seed in any::<u64>()) {
        let d = density(seed, 0);
        let total: f64 = d.components().iter().map(|c| c.weight()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let pmf = d.cardinality_distribution().pmf;
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let masses: f64 = d.label_space().into_iter().map(|l| d.intensity_function(l).mass()).sum();
        prop_assert!((masses - d.cardinality_distribution().mean()).abs() < 1e-9);
    }

    #[test]
    fn truncation_reports_the_discarded_weight(seed in any::<u64>(), keep in 1usize..5) {
        let d = density(seed, 0);
        let (t, err) = d.truncate(keep, 0.0).unwrap();
        let mut weights: Vec<f64> = d.components().iter().map(|c| c.weight()).collect();
        weights.sort_by(|a, b| b.total_cmp(a));
        let dropped: f64 = weights.iter().skip(keep).sum();
        prop_assert!((err - dropped).abs() < 1e-15);
        prop_assert_eq!(t.len(), keep.min(d.len()));
    }

    #[test]
    fn void_probability_is_bounded_and_monotone(
        seed in any::<u64>(), x in -5.0..5.0f64, y in -5.0..5.0f64, r in 0.1..4.0f64, grow in 0.0..3.0f64,
    ) {
        let d = density(seed, 0);
        let inner = glmb_void_probability(&d, &disc(x, y, r)).unwrap();
        let outer = glmb_void_probability(&d, &disc(x, y, r + grow)).unwrap();
        prop_assert!((0.0..=1.0).contains(&inner) && (0.0..=1.0).contains(&outer));
        prop_assert!(outer <= inner + 1e-9, "{outer} > {inner}");
    }

    #[test]
    fn void_probability_factorizes_over_independent_densities(
        a in any::<u64>(), b in any::<u64>(), x in -4.0..4.0f64, y in -4.0..4.0f64, r in 0.5..3.0f64,
    ) {
        let (da, db) = (density(a, 0), density(b, 1));
        let joint = da.independent_union(&db).unwrap();
        let s = disc(x, y, r);
        let product = glmb_void_probability(&da, &s).unwrap() * glmb_void_probability(&db, &s).unwrap();
        prop_assert!((glmb_void_probability(&joint, &s).unwrap() - product).abs() < 1e-10);
    }

    #[test]
    fn cs_divergence_is_a_symmetric_divergence(a in any::<u64>(), b in any::<u64>()) {
        let (da, db) = (density(a, 0), density(b, 0));
        let ab = cs_divergence(&da, &db).unwrap();
        let ba = cs_divergence(&db, &da).unwrap();
        prop_assert!(ab >= -1e-12);
        prop_assert!(ab == ba || (ab - ba).abs() <= 1e-12 * ab.abs().max(1.0), "{ab} vs {ba}");
        prop_assert!(cs_divergence(&da, &da).unwrap().abs() < 1e-9);
    }

    #[test]
    fn cauchy_schwarz_bound_holds(a in any::<u64>(), b in any::<u64>()) {
        let (da, db) = (density(a, 0), density(b, 0));
        let ab = glmb_inner_product(&da, &db).unwrap().log_value;
        let aa = glmb_inner_product(&da, &da).unwrap().log_value;
        let bb = glmb_inner_product(&db, &db).unwrap().log_value;
        prop_assert!(2.0 * ab <= aa + bb + 1e-9);
    }

    #[test]
    fn cs_divergence_does_not_depend_on_the_unit(a in any::<u64>(), b in any::<u64>(), unit in prop::sample::select(vec![1e-3, 1.0, 1e3])) {
        let (da, db) = (density(a, 0), density(b, 0));
        let base = cs_divergence(&da, &db).unwrap();
        let scaled = cs_divergence(&rescale_units(&da, unit).unwrap(), &rescale_units(&db, unit).unwrap()).unwrap();
        prop_assert!(base.is_infinite() && scaled.is_infinite() || (base - scaled).abs() < 1e-9, "{base} vs {scaled}");
    }

    #[test]
    fn poisson_void_probability_factorizes(a in any::<u64>(), b in any::<u64>(), r in 0.5..4.0f64) {
        let (pa, pb) = (PoissonProcess::new(intensity(a)).unwrap(), PoissonProcess::new(intensity(b)).unwrap());
        let s = disc(0.5, -0.5, r);
        let product = poisson_void_probability(&pa, &s).unwrap() * poisson_void_probability(&pb, &s).unwrap();
        prop_assert!((poisson_void_probability(&pa.superpose(&pb), &s).unwrap() - product).abs() < 1e-10);
    }

    #[test]
    fn poisson_divergence_is_symmetric_and_zero_on_equality(a in any::<u64>(), b in any::<u64>()) {
        let (pa, pb) = (PoissonProcess::new(intensity(a)).unwrap(), PoissonProcess::new(intensity(b)).unwrap());
        let ab = poisson_cs_divergence(&pa, &pb, 1.0).unwrap();
        prop_assert!((ab - poisson_cs_divergence(&pb, &pa, 1.0).unwrap()).abs() <= 1e-12 * ab.max(1.0));
        prop_assert!(poisson_cs_divergence(&pa, &pa, 1.0).unwrap().abs() < 1e-9);
        prop_assert!(a == b || ab > 0.0);
    }

    #[test]
    fn ospa_is_a_bounded_symmetric_metric(
        x in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 0..6),
        y in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 0..6),
        z in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 0..6),
        c in 1.0..100.0f64,
    ) {
        let (x, y, z) = (points(&x), points(&y), points(&z));
        let xy = ospa(&x, &y, c, 2.0).distance;
        prop_assert!((0.0..=c + 1e-9).contains(&xy));
        prop_assert!((xy - ospa(&y, &x, c, 2.0).distance).abs() < 1e-9);
        prop_assert!(ospa(&x, &x, c, 2.0).distance < 1e-9);
        let d = |a: &[Vec<f64>], b: &[Vec<f64>]| ospa(a, b, c, 1.0).distance;
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
    }
}
