use lplab_substrate::checkpoint::{load_net, save_net};
use lplab_substrate::{Activation, DenseNet, GaussianHead, LayerSpec, Rng};
use proptest::prelude::*;

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut rng = Rng::new(31);
    let mut net = DenseNet::new(
        &[
            LayerSpec {
                in_dim: 5,
                out_dim: 7,
                activation: Activation::Relu,
                batch_norm: true,
            },
            LayerSpec {
                in_dim: 7,
                out_dim: 3,
                activation: Activation::Identity,
                batch_norm: false,
            },
        ],
        0.9,
        &mut rng,
    );
    // Drift the running stats so they are not at their init values.
    for _ in 0..5 {
        let batch = rng.normal_array2(16, 5);
        net.forward(&batch).unwrap();
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.lplb");
    save_net(&net, &path).unwrap();
    let loaded = load_net(&path).unwrap();

    let batch = rng.normal_array2(4, 5);
    let a = net.predict(&batch).unwrap();
    let b = loaded.predict(&batch).unwrap();
    assert_eq!(a, b, "eval outputs must be bit-identical after round trip");
    assert_eq!(net.params_flat(), loaded.params_flat());

    // Saving the loaded net again reproduces the file byte for byte.
    let path2 = dir.path().join("net2.lplb");
    save_net(&loaded, &path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative_and_zero_iff_equal(
        qm in proptest::collection::vec(-3.0..3.0f64, 3),
        ql in proptest::collection::vec(-2.0..2.0f64, 3),
        pm in proptest::collection::vec(-3.0..3.0f64, 3),
        pl in proptest::collection::vec(-2.0..2.0f64, 3),
    ) {
        let q = GaussianHead::new(qm.clone().into(), ql.clone().into());
        let p = GaussianHead::new(pm.into(), pl.into());
        prop_assert!(q.kl(&p) >= 0.0);
        let q2 = GaussianHead::new(qm.into(), ql.into());
        prop_assert!(q.kl(&q2).abs() < 1e-12);
    }

    #[test]
    fn eval_forward_pure_under_random_nets(seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let net = DenseNet::mlp(&[3, 6, 2], Activation::Tanh, &mut rng);
        let batch = rng.normal_array2(3, 3);
        prop_assert_eq!(net.predict(&batch).unwrap(), net.predict(&batch).unwrap());
    }
}
