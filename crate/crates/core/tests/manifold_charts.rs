mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use treegeom::charts::{embed_operator, exp_operator_ordered, lift_core, oblique_projector, project_core, level_operators};
use treegeom::format::random_tucker_tensor;
use treegeom::linalg::matrix_exp;
use treegeom::tensor::tensor_product;
use treegeom::{
    assemble_delta, decompose_delta, exp_operator, ft_chart, ft_chart_inverse, ft_chart_point, is_member,
    random_tree_tensor, split, tucker_chart_inverse, tucker_chart_point, tucker_membership, DenseTensor,
    DimensionTree, Error, LaplacianLike, Matrix, ModeSubset, Partition, Splits, TreeRank, DEFAULT_TOL,
};

fn gaussian(shape: &[usize], r: &mut impl Rng) -> DenseTensor {
    DenseTensor::from_fn(shape.to_vec(), |_| r.sample(StandardNormal)).unwrap()
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
}

#[test]
fn split_of_elementary_tensor() {
    let v = elementary(&[3, 2, 2], &mut rng(1));
    let s = split(&v, &set(&[1]), DEFAULT_TOL).unwrap();
    assert_eq!(s.u.basis.shape(), (3, 1));
    assert_eq!(s.w.shape(), (3, 2));
    let q = s.u.basis.hstack(&s.w).unwrap();
    assert_mat_close(&q.tr_matmul(&q).unwrap(), &Matrix::identity(3), 1e-12);
}

#[test]
fn split_resolves_identity_and_counts_dimensions() {
    let mut g = rng(2);
    let v = gaussian(&[2, 3, 4], &mut g);
    let a = set(&[2, 3]);
    let s = split(&v, &a, DEFAULT_TOL).unwrap();
    let ident = s.u.projector().add(&s.w.matmul(&s.w.transpose()).unwrap()).unwrap();
    assert_mat_close(&ident, &Matrix::identity(12), 1e-12);
    assert_eq!(elimination_rank(&unfolding_oracle(&v, &a), 1e-9) + s.w.cols(), 12);
}

#[test]
fn projector_properties() {
    let v = gaussian(&[4, 2, 2], &mut rng(3));
    let s = split(&v, &set(&[1]), DEFAULT_TOL).unwrap();
    let (p, q) = oblique_projector(&s);
    assert_mat_close(&p.matmul(&p).unwrap(), &p, 1e-12);
    assert_mat_close(&q.matmul(&q).unwrap(), &q, 1e-12);
    assert_eq!(p.add(&q).unwrap(), Matrix::identity(4));
    let pu = p.matmul(&s.u.basis).unwrap();
    assert_mat_close(&pu, &s.u.basis, 1e-12);
}

#[test]
fn assemble_zero_and_single_block() {
    let v = gaussian(&[2, 3], &mut rng(4));
    let p = Partition::singletons(2);
    let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
    let z = LaplacianLike::zero(&p, &splits).unwrap();
    assert_eq!(assemble_delta(&z, &splits).unwrap(), Matrix::zeros(6, 6));
    let full = ModeSubset::full(2);
    let one = Partition::new(vec![full.clone()], 2).unwrap();
    let sp = Splits::new(&v, &[full.clone()], DEFAULT_TOL).unwrap();
    let l = LaplacianLike::random(&one, &sp, 1.0, &mut rng(5)).unwrap();
    let lhat = sp.get(&full).unwrap().lhat(&l.parts[&full]).unwrap();
    assert_mat_close(&assemble_delta(&l, &sp).unwrap(), &lhat, 1e-15);
}

#[test]
fn assemble_satisfies_leibniz_rule() {
    // blocks {1} and {2,3}: contiguous, so the flat index of u1⊗u2 is the Kronecker index
    let mut g = rng(6);
    let v = gaussian(&[3, 2, 2], &mut g);
    let p = Partition::new(vec![set(&[1]), set(&[2, 3])], 3).unwrap();
    let v = random_tucker_tensor(&p, &[2, 2], v.shape(), &mut g).unwrap();
    let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
    let l = LaplacianLike::random(&p, &splits, 1.0, &mut g).unwrap();
    let op = assemble_delta(&l, &splits).unwrap();
    let u1: Vec<f64> = (0..3).map(|_| g.sample(StandardNormal)).collect();
    let u2: Vec<f64> = (0..4).map(|_| g.sample(StandardNormal)).collect();
    let t = tensor_product(&[DenseTensor::vector(u1.clone()).unwrap(), DenseTensor::vector(u2.clone()).unwrap()]).unwrap();
    let lhs = op.matvec(t.data()).unwrap();
    let l1 = splits.get(&set(&[1])).unwrap().lhat(&l.parts[&set(&[1])]).unwrap();
    let l2 = splits.get(&set(&[2, 3])).unwrap().lhat(&l.parts[&set(&[2, 3])]).unwrap();
    let a = Matrix::column_vector(&l1.matvec(&u1).unwrap()).kron(&Matrix::column_vector(&u2));
    let b = Matrix::column_vector(&u1).kron(&Matrix::column_vector(&l2.matvec(&u2).unwrap()));
    let rhs = a.add(&b).unwrap();
    for (x, y) in lhs.iter().zip(rhs.as_slice()) {
        assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
    }
}

#[test]
fn decompose_examples() {
    let mut g = rng(7);
    let t = nested4();
    let v = random_tree_tensor(&t, &TreeRank::uniform(&t, 2), &[3, 2, 2, 3], 7).unwrap();
    let splits = Splits::for_tree(&v, &t, DEFAULT_TOL).unwrap();
    for p in t.level_partitions().unwrap() {
        let l = LaplacianLike::random(&p, &splits, 1.0, &mut g).unwrap();
        let op = assemble_delta(&l, &splits).unwrap();
        let back = decompose_delta(&op, &p, &splits, 1e-10).unwrap();
        assert!(back.max_part_diff(&l) <= 1e-10);
        assert!(rel(&assemble_delta(&back, &splits).unwrap(), &op) <= 1e-10);
        let zero = decompose_delta(&Matrix::zeros(36, 36), &p, &splits, 1e-10).unwrap();
        assert_eq!(zero.coord_norm(), 0.0);
        match decompose_delta(&Matrix::identity(36), &p, &splits, 1e-10) {
            Err(Error::NotInSpace { residual }) => assert!(residual > 1.0),
            other => panic!("expected not-in-space, got {other:?}"),
        }
    }
}

#[test]
fn exp_examples() {
    let mut g = rng(8);
    let v = gaussian(&[3, 2, 4], &mut g);
    let p = Partition::singletons(3);
    let v = random_tucker_tensor(&p, &[2, 1, 2], v.shape(), &mut g).unwrap();
    let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
    let z = LaplacianLike::zero(&p, &splits).unwrap();
    assert_eq!(exp_operator(&z, &splits).unwrap(), Matrix::identity(24));
    let l = LaplacianLike::random(&p, &splits, 1.0, &mut g).unwrap();
    let e = exp_operator(&l, &splits).unwrap();
    assert!(rel(&e, &matrix_exp(&assemble_delta(&l, &splits).unwrap()).unwrap()) <= 1e-10);

    let one = Partition::new(vec![set(&[1])], 1).unwrap();
    let w = gaussian(&[4], &mut g);
    let w = DenseTensor::vector(w.data().iter().map(|x| x * 0.0 + 1.0).collect()).unwrap();
    let sp = Splits::new(&w, one.blocks(), DEFAULT_TOL).unwrap();
    let l = LaplacianLike::random(&one, &sp, 1.0, &mut g).unwrap();
    let lhat = sp.get(&set(&[1])).unwrap().lhat(&l.parts[&set(&[1])]).unwrap();
    let single = exp_operator(&l, &sp).unwrap();
    assert_mat_close(&single, &Matrix::identity(4).add(&lhat).unwrap(), 1e-14);
    assert_mat_close(&single, &matrix_exp(&lhat).unwrap(), 1e-12);
}

#[test]
fn tucker_chart_examples() {
    let mut g = rng(9);
    let p = Partition::singletons(3);
    let ranks = [2, 2, 2];
    let v = random_tucker_tensor(&p, &ranks, &[3, 3, 3], &mut g).unwrap();
    let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
    let core = project_core(&v, &p, &splits).unwrap();
    let z = LaplacianLike::zero(&p, &splits).unwrap();
    let back = tucker_chart_point(&z, &core, &splits).unwrap();
    assert!(back.sub(&v).unwrap().frobenius_norm() <= 1e-12 * v.frobenius_norm());

    let (l0, u0) = tucker_chart_inverse(&v, &p, &splits, DEFAULT_TOL).unwrap();
    assert!(l0.coord_norm() <= 1e-12);
    assert!(u0.sub(&core).unwrap().frobenius_norm() <= 1e-12 * core.frobenius_norm());

    let l = LaplacianLike::random(&p, &splits, 0.1, &mut g).unwrap();
    let u = gaussian(&ranks, &mut g);
    let w = tucker_chart_point(&l, &u, &splits).unwrap();
    assert!(tucker_membership(&w, &p, &ranks, DEFAULT_TOL).unwrap().0);
    let (l2, u2) = tucker_chart_inverse(&w, &p, &splits, DEFAULT_TOL).unwrap();
    assert!(l2.max_part_diff(&l) <= 1e-8);
    assert!(u2.sub(&u).unwrap().frobenius_norm() <= 1e-8 * u.frobenius_norm());

    let again = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
    assert_eq!(tucker_chart_point(&l, &u, &again).unwrap(), w);
    // a rescaled anchor has the same subspaces, hence the same chart up to roundoff
    let other = Splits::new(&v.scale(-3.0), p.blocks(), DEFAULT_TOL).unwrap();
    let w3 = tucker_chart_point(&l, &u, &other).unwrap();
    assert!(w3.sub(&w).unwrap().frobenius_norm() <= 1e-12 * w.frobenius_norm());
}

#[test]
fn tucker_chart_swapped_subspace_is_outside_domain() {
    let e0 = DenseTensor::unit(2, 0);
    let e1 = DenseTensor::unit(2, 1);
    let v = tensor_product(&[e0.clone(), e0]).unwrap();
    let w = tensor_product(&[e1.clone(), e1]).unwrap();
    let p = Partition::singletons(2);
    let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
    match tucker_chart_inverse(&w, &p, &splits, DEFAULT_TOL) {
        Err(Error::OutsideChartDomain { condition, .. }) => assert!(condition > 1e8),
        other => panic!("expected outside-chart-domain, got {other:?}"),
    }
}

#[test]
fn tucker_chart_rejects_deficient_core_and_rank_mismatch() {
    let mut g = rng(10);
    let p = Partition::singletons(3);
    let v = random_tucker_tensor(&p, &[2, 2, 2], &[3, 3, 3], &mut g).unwrap();
    let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
    let l = LaplacianLike::random(&p, &splits, 0.1, &mut g).unwrap();
    let deficient = tensor_product(&[gaussian(&[2], &mut g), gaussian(&[2], &mut g), gaussian(&[2], &mut g)]).unwrap();
    assert!(matches!(tucker_chart_point(&l, &deficient, &splits), Err(Error::InvalidCore(_))));
    let other = gaussian(&[3, 3, 3], &mut g);
    assert!(matches!(tucker_chart_inverse(&other, &p, &splits, DEFAULT_TOL), Err(Error::NotOnManifold(_))));
}

#[test]
fn ft_chart_examples() {
    let t = nested4();
    let r = TreeRank::uniform(&t, 2);
    let v = random_tree_tensor(&t, &r, &[3; 4], 11).unwrap();
    assert!(matches!(ft_chart(&v, &t, &r, 0.0), Err(Error::InvalidArgument(_))));
    let chart = ft_chart(&v, &t, &r, DEFAULT_TOL).unwrap();
    let back = lift_core(&chart.core, chart.p1(), &chart.splits).unwrap();
    assert!(back.sub(&v).unwrap().frobenius_norm() <= 1e-10 * v.frobenius_norm());
    assert_eq!(chart.level_partitions.len(), 3);
    let mut wrong = r.clone();
    wrong.set(set(&[2, 3]), 1);
    assert!(matches!(ft_chart(&v, &t, &wrong, DEFAULT_TOL), Err(Error::NotOnManifold(_))));

    let e = elementary(&[2, 3, 2, 2], &mut rng(12));
    let ones = ft_chart(&e, &t, &TreeRank::ones(&t), DEFAULT_TOL).unwrap();
    for b in ones.splits.blocks() {
        assert_eq!(ones.splits.get(b).unwrap().r(), 1);
    }
}

#[test]
fn ft_chart_point_and_inverse() {
    let t = nested4();
    let r = TreeRank::uniform(&t, 2);
    let v = random_tree_tensor(&t, &r, &[3; 4], 13).unwrap();
    let chart = ft_chart(&v, &t, &r, DEFAULT_TOL).unwrap();
    assert!(chart.e_dim() > 0);
    let zero = vec![0.0; chart.e_dim()];
    let w0 = ft_chart_point(&chart, &zero, &chart.core).unwrap();
    assert!(w0.sub(&v).unwrap().frobenius_norm() <= 1e-12 * v.frobenius_norm());
    let (c0, u0) = ft_chart_inverse(&chart, &v, 1e-8).unwrap();
    assert!(c0.iter().all(|c| c.abs() <= 1e-10));
    assert!(u0.sub(&chart.core).unwrap().frobenius_norm() <= 1e-10 * chart.core.frobenius_norm());

    let mut g = rng(14);
    let coords: Vec<f64> = (0..chart.e_dim()).map(|_| 0.05 * g.sample::<f64, _>(StandardNormal)).collect();
    let u = chart.core.add(&gaussian(chart.core.shape(), &mut g).scale(0.05)).unwrap();
    let w = ft_chart_point(&chart, &coords, &u).unwrap();
    assert!(is_member(&w, &t, &r, DEFAULT_TOL).unwrap().member);
    let (c, u2) = ft_chart_inverse(&chart, &w, 1e-8).unwrap();
    for (a, b) in c.iter().zip(&coords) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
    assert!(u2.sub(&u).unwrap().frobenius_norm() <= 1e-8 * u.frobenius_norm());

    let ops = level_operators(&chart, &w, DEFAULT_TOL).unwrap();
    for op in &ops[1..] {
        assert!(rel(op, &ops[0]) <= 1e-9);
    }
}

#[test]
fn ft_chart_point_rejects_deficient_core() {
    let t = nested4();
    let r = TreeRank::uniform(&t, 2);
    let v = random_tree_tensor(&t, &r, &[3; 4], 15).unwrap();
    let chart = ft_chart(&v, &t, &r, DEFAULT_TOL).unwrap();
    let mut g = rng(16);
    let rank_one = tensor_product(&[gaussian(&[2], &mut g), gaussian(&[2], &mut g)]).unwrap();
    let zero = vec![0.0; chart.e_dim()];
    assert!(matches!(ft_chart_point(&chart, &zero, &rank_one), Err(Error::InvalidCore(_))));
}

#[test]
fn leaf_manifold_point_outside_tree_set_is_named() {
    let t = nested4();
    let r = TreeRank::uniform(&t, 2);
    let v = random_tree_tensor(&t, &r, &[3; 4], 17).unwrap();
    let chart = ft_chart(&v, &t, &r, DEFAULT_TOL).unwrap();
    let leaf = chart.leaf_partition().clone();
    let mut g = rng(18);
    let l = LaplacianLike::random(&leaf, &chart.splits, 0.05, &mut g).unwrap();
    let u = project_core(&v, &leaf, &chart.splits).unwrap();
    let u = u.add(&gaussian(u.shape(), &mut g).scale(0.1)).unwrap();
    let w = tucker_chart_point(&l, &u, &chart.splits).unwrap();
    assert!(tucker_membership(&w, &leaf, &[2; 4], DEFAULT_TOL).unwrap().0);
    assert!(!is_member(&w, &t, &r, DEFAULT_TOL).unwrap().member);
    match ft_chart_inverse(&chart, &w, 1e-8) {
        Err(Error::OutsideChartImage { level, .. }) => assert!((1..=3).contains(&level)),
        other => panic!("expected outside-chart-image, got {other:?}"),
    }
}

fn partitions_of(t: &DimensionTree) -> Vec<Partition> {
    t.level_partitions().unwrap()
}

fn tree_case() -> impl Strategy<Value = (DimensionTree, Vec<usize>, u64)> {
    (
        prop_oneof![
            Just(nested4()),
            Just(DimensionTree::tucker(3).unwrap()),
            Just(DimensionTree::linear(3).unwrap()),
            Just(DimensionTree::balanced_binary(4).unwrap()),
        ],
        any::<u64>(),
    )
        .prop_map(|(t, seed)| {
            let shape = random_shape(t.d(), 2, 3, &mut rng(seed));
            (t, shape, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn laplacian_like_algebra((t, shape, seed) in tree_case()) {
        let mut g = rng(seed);
        let r = random_ranks(&t, &shape, 2, &mut g);
        let v = random_tree_tensor(&t, &r, &shape, seed).unwrap();
        let splits = Splits::for_tree(&v, &t, DEFAULT_TOL).unwrap();
        for p in partitions_of(&t) {
            let l = LaplacianLike::random(&p, &splits, 1.0, &mut g).unwrap();
            let lhats = l.lhats(&splits).unwrap();
            let mut singles = Vec::new();
            for (b, lh) in &lhats {
                let sq = lh.matmul(lh).unwrap();
                prop_assert!(max_abs(&sq) <= 1e-14);
                singles.push(embed_operator(lh, b, &shape).unwrap());
            }
            for i in 0..singles.len() {
                for j in i + 1..singles.len() {
                    let ab = singles[i].matmul(&singles[j]).unwrap();
                    let ba = singles[j].matmul(&singles[i]).unwrap();
                    let scale = singles[i].frobenius_norm() * singles[j].frobenius_norm();
                    prop_assert!(ab.sub(&ba).unwrap().frobenius_norm() <= 1e-12 * scale.max(1.0));
                }
            }
            let e = exp_operator(&l, &splits).unwrap();
            let oracle = matrix_exp(&assemble_delta(&l, &splits).unwrap()).unwrap();
            prop_assert!(rel(&e, &oracle) <= 1e-10);
            let rev: Vec<usize> = (0..p.len()).rev().collect();
            let er = exp_operator_ordered(&l, &splits, &rev).unwrap();
            prop_assert!(er.sub(&e).unwrap().frobenius_norm() <= 1e-12 * e.frobenius_norm());
        }
    }

    #[test]
    fn tucker_chart_round_trip((t, shape, seed) in tree_case()) {
        let mut g = rng(seed);
        let r = random_ranks(&t, &shape, 2, &mut g);
        let v = random_tree_tensor(&t, &r, &shape, seed).unwrap();
        let splits = Splits::for_tree(&v, &t, DEFAULT_TOL).unwrap();
        for p in partitions_of(&t) {
            let l = LaplacianLike::random(&p, &splits, 0.1, &mut g).unwrap();
            let core = project_core(&v, &p, &splits).unwrap();
            let w = tucker_chart_point(&l, &core, &splits).unwrap();
            let (l2, u2) = tucker_chart_inverse(&w, &p, &splits, DEFAULT_TOL).unwrap();
            prop_assert!(l2.max_part_diff(&l) <= 1e-8);
            prop_assert!(u2.sub(&core).unwrap().frobenius_norm() <= 1e-8 * core.frobenius_norm());
            let w2 = tucker_chart_point(&l2, &u2, &splits).unwrap();
            prop_assert!(w2.sub(&w).unwrap().frobenius_norm() <= 1e-8 * w.frobenius_norm());
        }
    }
}
