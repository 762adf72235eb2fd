use ggfa::canon::{canonicalize, communalities, verify_identifiability_conditions};
use ggfa::io::{read_csv, write_csv, LoadOptions, ModelFile};
use ggfa::random_model::{random_orthogonal, random_params};
use ggfa::sample::sample;
use ggfa::{log_likelihood, Dataset, Model, Schema};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (0usize..=4, 0usize..=4)
        .prop_filter("at least one variable", |(p_x, q)| p_x + q > 0)
        .prop_flat_map(|(p_x, q)| (Just(p_x), Just(q), 1..=(p_x + q).min(3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixing_weights_normalize(seed in any::<u64>(), (p_x, q, p_z) in dims()) {
        let p = random_params(&mut ChaCha8Rng::seed_from_u64(seed), p_x, q, p_z);
        let model = Model::new(p).unwrap();
        let total: f64 = model.mixing_table().log_pi.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn likelihood_ignores_latent_rotation(seed in any::<u64>(), (p_x, q, p_z) in dims()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut r, p_x, q, p_z);
        let data = sample(&p, 40, seed).unwrap();
        let rotated = p.rotated(&random_orthogonal(&mut r, p_z)).unwrap();
        let a = log_likelihood(&data, &p).unwrap();
        let b = log_likelihood(&data, &rotated).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn structural_identities(seed in any::<u64>(), (p_x, q, p_z) in dims()) {
        let p = random_params(&mut ChaCha8Rng::seed_from_u64(seed), p_x, q, p_z);
        let sigma = p.sigma_x();
        let c2 = p.c * p.c;
        for j in 0..p_x {
            prop_assert!((sigma[(j, j)] - (1.0 + c2) * p.psi[j]).abs() <= 1e-10 * sigma[(j, j)]);
        }
        let h = communalities(&p);
        for v in h.iter() {
            prop_assert!((v - (c2 / (1.0 + c2)).sqrt()).abs() <= 1e-12);
        }
        let canon = canonicalize(&p).unwrap();
        prop_assert!((canon.p.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn canonical_form_is_a_fixed_point(seed in any::<u64>(), (p_x, q, p_z) in dims()) {
        let p = random_params(&mut ChaCha8Rng::seed_from_u64(seed), p_x, q, p_z);
        let once = canonicalize(&p).unwrap();
        prop_assume!(once.unique);
        let twice = canonicalize(&once.params).unwrap();
        prop_assert!((once.params.m_hat() - twice.params.m_hat()).amax() <= 1e-9);
        if p_z <= p_x + q {
            let report = verify_identifiability_conditions(&once.params);
            prop_assert!(report.orthogonal_columns && report.descending_nondegenerate && report.column_sums_nonnegative);
        }
    }

    #[test]
    fn data_csv_roundtrip(seed in any::<u64>(), (p_x, q, p_z) in dims(), frac in 0.0f64..0.5) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut r, p_x, q, p_z);
        let mut data = sample(&p, 30, seed).unwrap();
        for row in data.rows.iter_mut() {
            for v in row.x.iter_mut() {
                if r.random::<f64>() < frac { *v = None; }
            }
            for v in row.y.iter_mut() {
                if r.random::<f64>() < frac { *v = None; }
            }
        }
        let data = Dataset::new(data.schema.clone(), data.rows).unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &data.schema, &LoadOptions::default()).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn model_file_roundtrip(seed in any::<u64>(), (p_x, q, p_z) in dims()) {
        let p = random_params(&mut ChaCha8Rng::seed_from_u64(seed), p_x, q, p_z);
        let schema = Schema::generated(p_x, q).unwrap();
        let file = ModelFile::new(&schema, &p, false, None).unwrap();
        let text = file.to_json().unwrap();
        let back = ModelFile::from_json(&text).unwrap();
        prop_assert_eq!(back.params().unwrap(), p);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}
