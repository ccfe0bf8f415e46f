//! Numerical rank against exact elimination over the Gaussian rationals.

use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nodal::{
    assemble, generate, incidence_matrix, numerical_rank, predict_rank, verify_rank, Branch, CMatrix, GenSpec, Network,
    Shunt, TolPolicy,
};

type Q = Complex<BigRational>;

fn exact(z: Complex64) -> Q {
    Complex::new(
        BigRational::from_float(z.re).expect("finite"),
        BigRational::from_float(z.im).expect("finite"),
    )
}

fn exact_rank(mut m: Vec<Vec<Q>>) -> usize {
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            if m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone() / m[rank][c].clone();
            let (top, bottom) = m.split_at_mut(r);
            for (dst, src) in bottom[0][c..].iter_mut().zip(&top[rank][c..]) {
                *dst = dst.clone() - f.clone() * src.clone();
            }
        }
        rank += 1;
    }
    rank
}

fn exact_matrix(y: &CMatrix) -> Vec<Vec<Q>> {
    (0..y.rows())
        .map(|i| (0..y.cols()).map(|j| exact(y[(i, j)])).collect())
        .collect()
}

fn measured(y: &CMatrix) -> usize {
    numerical_rank(y, TolPolicy::Auto).unwrap().rank
}

#[test]
fn four_node_path() {
    let one = Complex64::new(1.0, 0.0);
    let net = Network::new(4, (0..3).map(|i| Branch::new(i, i + 1, one)).collect(), vec![]).unwrap();
    let y = assemble(&net).unwrap();
    assert_eq!(exact_rank(exact_matrix(y.matrix())), 3);
    assert_eq!(measured(y.matrix()), 3);
}

#[test]
fn incidence_of_connected_networks() {
    for seed in 0..30 {
        let spec = GenSpec {
            nodes: (2, 25),
            edge_density: 0.2,
            ..GenSpec::default()
        };
        let net = generate(&spec.with_seed(seed)).unwrap();
        let a = incidence_matrix(&net);
        let m = (0..a.rows)
            .map(|l| {
                (0..a.cols)
                    .map(|n| Complex::new(BigRational::from_integer(a.get(l, n).into()), BigRational::zero()))
                    .collect()
            })
            .collect();
        assert_eq!(exact_rank(m), net.node_count() - 1, "seed {seed}");
    }
}

/// Integer Gaussian admittances with positive real part, so assembled
/// matrices are exact in binary64.
fn integer_network(rng: &mut ChaCha8Rng) -> Network {
    let n = rng.random_range(2..=9usize);
    let mut y = || Complex64::new(rng.random_range(1..=4) as f64, rng.random_range(-3..=3) as f64);
    let mut branches: Vec<Branch> = (1..n).map(|k| Branch::new(k - 1, k, y())).collect();
    for _ in 0..n / 2 {
        branches.push(Branch::new(0, n - 1, y()));
    }
    let shunts = if n % 2 == 0 {
        vec![Shunt::new(n / 2, y())]
    } else {
        vec![]
    };
    Network::new(n, branches, shunts).unwrap()
}

#[test]
fn integer_networks_match_exact_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let net = integer_network(&mut rng);
        let y = assemble(&net).unwrap();
        let r = exact_rank(exact_matrix(y.matrix()));
        assert_eq!(r, predict_rank(&net).unwrap());
        assert_eq!(r, measured(y.matrix()));
    }
}

#[test]
fn non_passive_cycle_loses_rank_exactly() {
    // Spanning-tree admittance products sum to 1·1 + 1·(−½) + 1·(−½) = 0.
    let net = Network::new(
        3,
        vec![
            Branch::new(0, 1, Complex64::new(1.0, 0.0)),
            Branch::new(1, 2, Complex64::new(1.0, 0.0)),
            Branch::new(2, 0, Complex64::new(-0.5, 0.0)),
        ],
        vec![],
    )
    .unwrap();
    let y = assemble(&net).unwrap();
    assert_eq!(exact_rank(exact_matrix(y.matrix())), 1);
    let v = verify_rank(&net).unwrap();
    assert_eq!((v.predicted_rank, v.measured_rank, v.agrees), (2, 1, false));
}
