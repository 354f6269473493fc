use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varseq_core::expr::Atom;
use varseq_core::forms::Form;
use varseq_core::oracle::{fd_gradient_check, GridSection};
use varseq_core::variational::{euler_operator, Bank, Lagrangian};
use varseq_core::{random, BundleSpec, Expr, JetVar, MultiIndex, VarKey};

fn plane() -> BundleSpec {
    BundleSpec::new(&["x", "y"], &["u", "v"], 3).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Evaluates with every jet coordinate and base coordinate replaced by a
/// value derived from its identity.
fn eval_generic(e: &Expr) -> f64 {
    e.eval(&mut |a| match a {
        Atom::Coord(s) => Some(0.3 + 0.17 * *s as f64),
        Atom::Jet(v) => {
            let a: u32 = v.alpha.as_slice().iter().enumerate().map(|(k, &c)| (k as u32 + 2) * c as u32).sum();
            Some(0.4 + 0.11 * v.index as f64 - 0.07 * a as f64)
        }
        _ => None,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sum_and_product_are_commutative(seed in any::<u64>()) {
        let s = plane();
        let mut r = rng(seed);
        let a = random::expr(&s, &mut r, 2, 3);
        let b = random::expr(&s, &mut r, 2, 3);
        let c = random::expr(&s, &mut r, 2, 2);
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert!((&a * &(&b + &c) - (&a * &b + &a * &c)).is_zero_exact());
    }

    #[test]
    fn evaluation_respects_arithmetic(seed in any::<u64>()) {
        let s = plane();
        let mut r = rng(seed);
        let a = random::expr(&s, &mut r, 2, 3);
        let b = random::expr(&s, &mut r, 2, 3);
        let (ea, eb) = (eval_generic(&a), eval_generic(&b));
        let sum = eval_generic(&(&a + &b));
        let prod = eval_generic(&(&a * &b));
        prop_assert!((sum - (ea + eb)).abs() <= 1e-9 * (1.0 + ea.abs() + eb.abs()));
        prop_assert!((prod - ea * eb).abs() <= 1e-9 * (1.0 + (ea * eb).abs()));
    }

    #[test]
    fn partial_derivatives_commute(seed in any::<u64>()) {
        let s = plane();
        let mut r = rng(seed);
        let e = random::expr(&s, &mut r, 2, 4);
        let p = VarKey::Jet(JetVar::field(0, MultiIndex::from_slice(&[1, 0])));
        let q = VarKey::Jet(JetVar::field(1, MultiIndex::from_slice(&[0, 0])));
        let pq = e.partial(&p, &s.symbols).unwrap().partial(&q, &s.symbols).unwrap();
        let qp = e.partial(&q, &s.symbols).unwrap().partial(&p, &s.symbols).unwrap();
        prop_assert!((pq - qp).is_zero_exact());
    }

    #[test]
    fn total_derivatives_commute(seed in any::<u64>()) {
        let s = plane();
        let mut r = rng(seed);
        let e = random::expr(&s, &mut r, 3, 4);
        let xy = s.total_derivative(&s.total_derivative(&e, 0).unwrap(), 1).unwrap();
        let yx = s.total_derivative(&s.total_derivative(&e, 1).unwrap(), 0).unwrap();
        prop_assert!((xy - yx).is_zero_exact());
    }

    #[test]
    fn bicomplex_differentials_square_to_zero(seed in any::<u64>()) {
        let s = plane();
        let mut r = rng(seed);
        let w = random::form(&s, &mut r, 2, 2);
        prop_assert!(w.d_h(&s).unwrap().d_h(&s).unwrap().is_zero_exact());
        prop_assert!(w.d_v(&s).unwrap().d_v(&s).unwrap().is_zero_exact());
        let hv = w.d_v(&s).unwrap().d_h(&s).unwrap();
        let vh = w.d_h(&s).unwrap().d_v(&s).unwrap();
        prop_assert!((hv + vh).is_zero_exact());
    }

    #[test]
    fn euler_operator_annihilates_divergences(seed in any::<u64>()) {
        let s = plane();
        let mut r = rng(seed);
        let w = random::current(&s, &mut r, 2, 2);
        let div = s.divergence(&w).unwrap();
        for e in euler_operator(&s, &div, &Bank::all_fields(&s)).unwrap() {
            prop_assert!(e.is_zero_exact());
        }
    }
}

#[test]
fn exterior_derivative_of_function_splits() {
    let s = plane();
    let mut r = rng(7);
    let f = Form::function(random::expr(&s, &mut r, 2, 3));
    let d = f.d(&s).unwrap();
    assert!((d - f.d_h(&s).unwrap() - f.d_v(&s).unwrap()).is_zero_exact());
}

#[test]
fn gradient_error_shrinks_under_refinement() {
    // Second-order stencils: halving h should cut the error by about four.
    let s = BundleSpec::new(&["x"], &["u"], 1).unwrap();
    let u_x = Expr::field(0, MultiIndex::from_slice(&[1]));
    let lag = Lagrangian::new(&s, &(&u_x * &u_x) * &Expr::ratio(1, 2)).unwrap();
    let section = vec![Expr::sin(Expr::coord(0))];
    let error = |nodes: usize| {
        let h = 3.0 / (nodes as f64 - 1.0);
        let grid = GridSection::sample(&section, vec![0.0], h, vec![nodes], 2).unwrap();
        fd_gradient_check(&s, &lag, &grid, Some(&section), 400).unwrap().max_abs_error
    };
    let coarse = error(33);
    let fine = error(65);
    assert!(coarse / fine >= 3.0, "coarse {coarse:e}, fine {fine:e}");
}
