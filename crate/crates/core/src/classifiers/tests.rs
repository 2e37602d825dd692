use super::*;
use crate::rng;
use alloc::vec;

fn blobs(n_each: usize, sep: f64, noise: f64, dim: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut g = rng::seeded(seed, 9);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for class in [0u8, 1] {
        for _ in 0..n_each {
            let row: Vec<f64> = (0..dim)
                .map(|j| {
                    let c = if j == 0 { sep * f64::from(class) } else { 0.0 };
                    c + noise * rng::normal(&mut g)
                })
                .collect();
            rows.push(row);
            y.push(class);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn accuracy(p: &[u8], y: &[u8]) -> f64 {
    p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

fn spec(kind: ModelKind) -> ModelSpec {
    ModelSpec::new(kind).with_seed(7)
}

/// Exhaustive scan of directions in the plane: true if some direction puts
/// every class-1 projection strictly above every class-0 projection.
fn linearly_separable_2d(x: &Matrix, y: &[u8]) -> bool {
    (0..7200).any(|k| {
        let a = k as f64 * core::f64::consts::PI / 3600.0;
        let (c, s) = (libm::cos(a), libm::sin(a));
        let proj = |r: &[f64]| c * r[0] + s * r[1];
        let max0 = x.iter_rows().zip(y).filter(|(_, &l)| l == 0).map(|(r, _)| proj(r)).fold(f64::MIN, f64::max);
        let min1 = x.iter_rows().zip(y).filter(|(_, &l)| l == 1).map(|(r, _)| proj(r)).fold(f64::MAX, f64::min);
        max0 < min1
    })
}

#[test]
fn lr_fits_separable_data_exactly() {
    let (x, y) = blobs(100, 6.0, 1.0, 2, 1);
    assert!(linearly_separable_2d(&x, &y));
    let m = train(&spec(ModelKind::Lr), &x, &y).unwrap();
    assert_eq!(accuracy(&m.predict(&x).unwrap(), &y), 1.0);
}

#[test]
fn lr_score_is_sigmoid_of_dumped_linear_form() {
    let (x, y) = blobs(40, 2.0, 1.0, 3, 2);
    let m = train(&spec(ModelKind::Lr), &x, &y).unwrap();
    let Params::Linear(lin) = &m.params else { panic!("lr stores a linear model") };
    assert!(lin.platt.is_none());
    let scores = m.score(&x).unwrap();
    for (r, s) in x.iter_rows().zip(scores) {
        let z = lin.w[0] * r[0] + lin.w[1] * r[1] + lin.w[2] * r[2] + lin.b;
        let expect = 1.0 / (1.0 + libm::exp(-z));
        assert!((s - expect).abs() < 1e-12);
    }
}

#[test]
fn single_class_rules() {
    let (x, _) = blobs(5, 1.0, 1.0, 2, 3);
    for label in [0u8, 1] {
        let y = vec![label; x.rows()];
        for kind in [ModelKind::Knn, ModelKind::Gnb] {
            let mut s = spec(kind);
            if kind == ModelKind::Knn {
                s.hyperparams.k_neighbors = Some(3);
            }
            let m = train(&s, &x, &y).unwrap();
            let probe = Matrix::from_rows(&[[100.0, -3.0], [0.0, 0.0]]).unwrap();
            assert_eq!(m.predict(&probe).unwrap(), vec![label; 2]);
        }
        for kind in ModelKind::ALL.into_iter().filter(|k| !matches!(k, ModelKind::Knn | ModelKind::Gnb)) {
            assert_eq!(train(&spec(kind), &x, &y), Err(Error::SingleClass { model: kind.name() }));
        }
    }
}

fn gauss(x: f64, m: f64, v: f64) -> f64 {
    libm::exp(-(x - m) * (x - m) / (2.0 * v)) / libm::sqrt(2.0 * core::f64::consts::PI * v)
}

#[test]
fn gnb_matches_hand_computed_posterior() {
    // class 0: (0,0),(2,2) -> mean (1,1), var (1,1)
    // class 1: (4,0),(6,4) -> mean (5,2), var (1,4)
    let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0], [4.0, 0.0], [6.0, 4.0]]).unwrap();
    let y = [0, 0, 1, 1];
    let m = train(&spec(ModelKind::Gnb), &x, &y).unwrap();
    for q in [[3.0, 1.0], [1.0, 1.0], [5.5, 3.0], [2.5, -1.0]] {
        let f0 = 0.5 * gauss(q[0], 1.0, 1.0) * gauss(q[1], 1.0, 1.0);
        let f1 = 0.5 * gauss(q[0], 5.0, 1.0) * gauss(q[1], 2.0, 4.0);
        let got = m.score(&Matrix::from_rows(&[q]).unwrap()).unwrap()[0];
        assert!((got - f1 / (f0 + f1)).abs() < 1e-6, "{q:?}: {got} vs {}", f1 / (f0 + f1));
    }
}

#[test]
fn gnb_symmetric_midpoint_is_half() {
    let x = Matrix::from_rows(&[[-1.0, 2.0], [1.0, 2.0]]).unwrap();
    let m = train(&spec(ModelKind::Gnb), &x, &[0, 1]).unwrap();
    let s = m.score(&Matrix::from_rows(&[[0.0, 2.0]]).unwrap()).unwrap()[0];
    assert!((s - 0.5).abs() < 1e-12);
}

#[test]
fn knn_memorizes_and_votes() {
    let (x, y) = blobs(30, 0.5, 1.0, 3, 4);
    let mut s = spec(ModelKind::Knn);
    s.hyperparams.k_neighbors = Some(1);
    assert_eq!(train(&s, &x, &y).unwrap().predict(&x).unwrap(), y);

    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
    s.hyperparams.k_neighbors = Some(3);
    let m = train(&s, &x, &[1, 1, 0, 0]).unwrap();
    let sc = m.score(&Matrix::from_rows(&[[0.9]]).unwrap()).unwrap()[0];
    assert!((sc - 2.0 / 3.0).abs() < 1e-15);
    s.hyperparams.k_neighbors = Some(5);
    assert!(train(&s, &x, &[1, 1, 0, 0]).is_err());
}

#[test]
fn single_unbootstrapped_tree_forest_memorizes() {
    let (x, y) = blobs(60, 0.3, 1.0, 4, 5);
    let h = Hyperparams {
        n_trees: Some(1),
        bootstrap: Some(false),
        ..Hyperparams::default()
    };
    let m = train(&spec(ModelKind::Rf).with_hyperparams(h), &x, &y).unwrap();
    let pred = m.predict(&x).unwrap();
    for i in 0..y.len() {
        assert_eq!(pred[i], y[i], "row {i}");
    }
}

#[test]
fn tree_respects_depth_and_leaf_size() {
    let (x, y) = blobs(80, 0.5, 1.0, 3, 6);
    let h = Hyperparams {
        max_depth: Some(3),
        min_samples_leaf: Some(5),
        ..Hyperparams::default()
    };
    let m = train(&spec(ModelKind::Dtree).with_hyperparams(h), &x, &y).unwrap();
    let Params::Tree(t) = &m.params else { panic!() };
    assert!(t.depth() <= 3);
    let mut counts = vec![0usize; t.nodes.len()];
    for r in x.iter_rows() {
        let mut i = 0;
        while let TreeNode::Split { feature, threshold, left, right } = t.nodes[i] {
            i = if r[feature] <= threshold { left } else { right };
        }
        counts[i] += 1;
    }
    for (i, n) in t.nodes.iter().enumerate() {
        if matches!(n, TreeNode::Leaf { .. }) {
            assert!(counts[i] >= 5);
        }
    }
}

#[test]
fn predict_is_thresholded_score_and_training_is_deterministic() {
    let (x, y) = blobs(40, 1.5, 1.0, 3, 8);
    let (q, _) = blobs(25, 1.5, 1.5, 3, 9);
    for kind in ModelKind::ALL {
        let s = spec(kind);
        let a = train(&s, &x, &y).unwrap();
        let b = train(&s, &x, &y).unwrap();
        assert_eq!(a, b, "{kind:?}");
        let scores = a.score(&q).unwrap();
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)), "{kind:?}");
        let pred = a.predict(&q).unwrap();
        for (p, s) in pred.iter().zip(&scores) {
            assert_eq!(*p, u8::from(*s >= 0.5));
        }
        assert!(accuracy(&a.predict(&x).unwrap(), &y) > 0.7, "{kind:?}");
        let wrong = Matrix::zeros(2, 4);
        assert_eq!(
            a.score(&wrong),
            Err(Error::DimensionMismatch { expected: 3, found: 4 })
        );
    }
}

#[test]
fn mlp_gradient_matches_central_differences() {
    let (x, y) = blobs(5, 1.0, 1.0, 4, 10);
    let rows: Vec<&[f64]> = x.iter_rows().collect();
    for hidden in [vec![6], vec![5, 3]] {
        let net = mlp::Network::init(4, &hidden, 3);
        let lambda = 1e-3;
        let analytic = net.gradient(&rows, &y, lambda);
        let p = net.parameters();
        let h = 1e-6;
        let numeric: Vec<f64> = (0..p.len())
            .map(|i| {
                let mut up = p.clone();
                let mut down = p.clone();
                up[i] += h;
                down[i] -= h;
                (net.with_parameters(&up).loss(&rows, &y, lambda) - net.with_parameters(&down).loss(&rows, &y, lambda))
                    / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff.sqrt() / scale < 1e-4, "relative error {}", diff.sqrt() / scale);
    }
}

#[test]
fn boosting_loss_never_increases() {
    let (x, y) = blobs(100, 1.0, 1.0, 3, 11);
    for eta in [0.05, 0.1, 0.3] {
        let h = Hyperparams {
            shrinkage: Some(eta),
            n_trees: Some(60),
            ..Hyperparams::default()
        };
        let m = train(&spec(ModelKind::Gboost).with_hyperparams(h), &x, &y).unwrap();
        let mut prev = libm::log(2.0);
        for l in &m.info.loss_trace {
            assert!(*l <= prev + 1e-12, "eta {eta}: {l} > {prev}");
            prev = *l;
        }
    }
}

#[test]
fn forest_beats_single_tree_on_noisy_data() {
    let (mut rf_acc, mut dt_acc) = (0.0, 0.0);
    for seed in 0..10 {
        let (x, y) = blobs(150, 1.2, 1.0, 6, 100 + seed);
        let (q, qy) = blobs(200, 1.2, 1.0, 6, 200 + seed);
        let h = Hyperparams {
            n_trees: Some(50),
            ..Hyperparams::default()
        };
        let rf = train(&spec(ModelKind::Rf).with_seed(seed).with_hyperparams(h), &x, &y).unwrap();
        let dt = train(&spec(ModelKind::Dtree).with_seed(seed), &x, &y).unwrap();
        rf_acc += accuracy(&rf.predict(&q).unwrap(), &qy);
        dt_acc += accuracy(&dt.predict(&q).unwrap(), &qy);
    }
    assert!(rf_acc >= dt_acc, "rf {} < dtree {}", rf_acc / 10.0, dt_acc / 10.0);
}

#[test]
fn ridge_agrees_with_an_independent_solver() {
    let (x, y) = blobs(30, 1.0, 1.0, 3, 12);
    let lambda = 0.7;
    let h = Hyperparams {
        lambda: Some(lambda),
        ..Hyperparams::default()
    };
    let m = train(&spec(ModelKind::Ridge).with_hyperparams(h), &x, &y).unwrap();
    let Params::Linear(lin) = &m.params else { panic!() };
    // Augmented system with an unpenalized intercept column.
    let n = x.rows();
    let a = nalgebra::DMatrix::from_fn(n, 4, |i, j| if j < 3 { x[(i, j)] } else { 1.0 });
    let t = nalgebra::DVector::from_iterator(n, y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }));
    let mut reg = nalgebra::DMatrix::<f64>::identity(4, 4) * lambda;
    reg[(3, 3)] = 0.0;
    let sol = (a.transpose() * &a + reg).lu().solve(&(a.transpose() * t)).unwrap();
    for j in 0..3 {
        assert!((sol[j] - lin.w[j]).abs() < 1e-9);
    }
    assert!((sol[3] - lin.b).abs() < 1e-9);
}

#[test]
fn platt_fit_is_stationary() {
    let margins = [-2.0, -1.0, -0.5, 0.2, 0.4, 1.0, 1.5, -0.1, 0.8, 2.5];
    let y = [0, 0, 1, 0, 1, 1, 1, 0, 0, 1];
    let p = Platt::fit(&margins, &y);
    let hi = 6.0 / 7.0;
    let lo = 1.0 / 7.0;
    let (mut ga, mut gb) = (0.0, 0.0);
    for (&m, &l) in margins.iter().zip(&y) {
        let t = if l == 1 { hi } else { lo };
        let d = p.apply(m) - t;
        ga += d * m;
        gb += d;
    }
    assert!(ga.abs() < 1e-8 && gb.abs() < 1e-8);
    assert!(p.a > 0.0);
}

#[test]
fn hyperparams_are_validated_per_kind() {
    let (x, y) = blobs(10, 2.0, 1.0, 2, 13);
    let bad = [
        (ModelKind::Lr, Hyperparams { n_trees: Some(3), ..Hyperparams::default() }),
        (ModelKind::Knn, Hyperparams { k_neighbors: Some(0), ..Hyperparams::default() }),
        (ModelKind::Rf, Hyperparams { feature_fraction: Some(1.5), ..Hyperparams::default() }),
        (ModelKind::Gboost, Hyperparams { shrinkage: Some(2.0), ..Hyperparams::default() }),
        (ModelKind::Mlp, Hyperparams { hidden_sizes: Some(vec![]), ..Hyperparams::default() }),
        (ModelKind::Ridge, Hyperparams { lambda: Some(-1.0), ..Hyperparams::default() }),
        (ModelKind::SvmLinear, Hyperparams { learning_rate: Some(f64::NAN), ..Hyperparams::default() }),
    ];
    for (kind, h) in bad {
        assert!(
            matches!(train(&spec(kind).with_hyperparams(h), &x, &y), Err(Error::InvalidParameter { .. })),
            "{kind:?}"
        );
    }
    let mut nan = x.clone();
    nan.row_mut(0)[0] = f64::NAN;
    assert_eq!(train(&spec(ModelKind::Lr), &nan, &y), Err(Error::NonFinite("training features")));
}

#[test]
fn kind_names_round_trip() {
    for k in ModelKind::ALL {
        assert_eq!(ModelKind::from_name(k.name()), Some(k));
    }
}
