//! Seedable generators of random jet expressions, forms and currents, used
//! by property tests, the acceptance suite and the benchmarks.

use rand::Rng;

use crate::bundle::{enumerate_multiindices, BundleSpec, MultiIndex};
use crate::expr::{Expr, Func};
use crate::forms::Form;

fn nonzero_coeff<R: Rng>(rng: &mut R) -> i64 {
    let c = rng.gen_range(1..=3);
    if rng.gen_bool(0.5) {
        c
    } else {
        -c
    }
}

fn random_index<R: Rng>(spec: &BundleSpec, rng: &mut R, order: usize) -> MultiIndex {
    let all = enumerate_multiindices(spec.n(), order);
    all[rng.gen_range(0..all.len())].clone()
}

fn random_factor<R: Rng>(spec: &BundleSpec, rng: &mut R, order: usize) -> Expr {
    match rng.gen_range(0..10) {
        0 => Expr::coord(rng.gen_range(0..spec.n())),
        1 => {
            let f = [Func::Sin, Func::Cos, Func::Exp][rng.gen_range(0..3)];
            Expr::func(f, Expr::field(rng.gen_range(0..spec.m()), spec.zero_index()))
        }
        _ => Expr::field(rng.gen_range(0..spec.m()), random_index(spec, rng, order)),
    }
}

/// A random differential function: `terms` monomials of one to three
/// factors drawn from jet coordinates of order `<= order`, base
/// coordinates and elementary functions of the fields.
pub fn expr<R: Rng>(spec: &BundleSpec, rng: &mut R, order: usize, terms: usize) -> Expr {
    Expr::sum((0..terms).map(|_| {
        let k = rng.gen_range(1..=3);
        let mono = Expr::product((0..k).map(|_| random_factor(spec, rng, order)));
        mono.scale_int(nonzero_coeff(rng))
    }))
}

/// A random current with `n` components.
pub fn current<R: Rng>(spec: &BundleSpec, rng: &mut R, order: usize, terms: usize) -> Vec<Expr> {
    (0..spec.n()).map(|_| expr(spec, rng, order, terms)).collect()
}

/// A random form: a few terms, each a random coefficient times a wedge of
/// up to `n` horizontal and up to two contact generators.
pub fn form<R: Rng>(spec: &BundleSpec, rng: &mut R, order: usize, terms: usize) -> Form {
    let mut out = Form::zero();
    for _ in 0..terms {
        let mut w = Form::function(expr(spec, rng, order, 2));
        for _ in 0..rng.gen_range(0..=2usize) {
            let alpha = random_index(spec, rng, order);
            w = w.wedge(&Form::theta(rng.gen_range(0..spec.m()), alpha));
        }
        for _ in 0..rng.gen_range(0..=spec.n()) {
            w = w.wedge(&Form::dx(rng.gen_range(0..spec.n())));
        }
        out = out + w;
    }
    out
}
