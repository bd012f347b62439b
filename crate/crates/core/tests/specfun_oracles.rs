//! Bessel evaluation and zeros checked against oracles that share no code
//! with the library: a double-double power series, Newton on `tan x = x`,
//! and bisection on the `J₀` series.

use std::f64::consts::PI;

use abdisk::specfun::{
    bessel_j, bessel_j_derivative, bessel_zeros, closed_form_slopes, exact_ab_spectrum,
    interlacing_check, BesselOrder,
};
use proptest::prelude::*;

/// Unevaluated sum `hi + lo` with roughly 32 significant digits.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const PI: Dd = Dd {
        hi: PI,
        lo: 1.2246467991473532e-16,
    };

    fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        Dd::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, err + self.hi * o.lo + self.lo * o.hi)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Dd::new(q1)).neg());
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Dd::new(q2)).neg());
        let q3 = r.hi / o.hi;
        Dd::new(q1).add(Dd::new(q2)).add(Dd::new(q3))
    }

    fn sqrt(self) -> Dd {
        let s = Dd::new(self.hi.sqrt());
        // one Newton step doubles the digits
        let r = self.add(s.mul(s).neg());
        s.add(r.div(s.mul(Dd::new(2.0))))
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// 80-term power series of `J_ν` for `ν = twice/2`, in double-double.
fn series_oracle(twice: u32, x: f64) -> f64 {
    let half_x = Dd::new(x * 0.5);
    let q = half_x.mul(half_x).neg();
    // leading term (x/2)^ν / Γ(ν+1)
    let mut lead = Dd::new(1.0);
    let mut gamma = Dd::new(1.0);
    let whole = twice / 2;
    for _ in 0..whole {
        lead = lead.mul(half_x);
    }
    if twice % 2 == 1 {
        lead = lead.mul(half_x.sqrt());
        gamma = Dd::PI.sqrt();
        for j in 0..=whole {
            gamma = gamma.mul(Dd::new(j as f64 + 0.5));
        }
    } else {
        for j in 1..=whole {
            gamma = gamma.mul(Dd::new(j as f64));
        }
    }
    let nu = twice as f64 / 2.0;
    let mut term = lead.div(gamma);
    let mut sum = term;
    for m in 1..80 {
        term = term.mul(q).div(Dd::new(m as f64 * (m as f64 + nu)));
        sum = sum.add(term);
    }
    sum.to_f64()
}

fn newton_tan_x_equals_x(mut x: f64) -> f64 {
    // g(x) = sin x − x cos x vanishes where tan x = x
    for _ in 0..50 {
        let g = x.sin() - x * x.cos();
        let dg = x * x.sin();
        let step = g / dg;
        x -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    x
}

fn j0_series_f64(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..60 {
        term *= q / (m as f64 * m as f64);
        sum += term;
    }
    sum
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa0 = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if (f(m) > 0.0) == (fa0 > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn double_double_oracle_is_itself_sane() {
    // J_{1/2}(x) = √(2/(πx)) sin x
    for &x in &[0.3, 2.0, 17.0, 39.0] {
        let closed = (2.0 / (PI * x)).sqrt() * x.sin();
        assert!((series_oracle(1, x) - closed).abs() < 1e-14, "x = {x}");
    }
}

#[test]
fn half_integer_orders_match_series_on_a_grid() {
    for twice in (1..=15).step_by(2) {
        let order = BesselOrder::new(twice).unwrap();
        let zeros = bessel_zeros(order, 15).unwrap().zeros;
        let mut x = 0.1;
        while x <= 40.0 {
            let near_zero = zeros.iter().any(|z| (z - x).abs() < 1e-2);
            if !near_zero {
                let got = bessel_j(order, x).unwrap();
                let want = series_oracle(twice, x);
                assert!(
                    (got - want).abs() <= 1e-8 * want.abs(),
                    "nu = {twice}/2, x = {x}: {got} vs {want}"
                );
            }
            x += 0.173;
        }
    }
}

#[test]
fn integer_orders_match_series() {
    for n in 0..=4 {
        let order = BesselOrder::integer(n);
        let zeros = bessel_zeros(order, 12).unwrap().zeros;
        let mut x = 0.1;
        while x <= 30.0 {
            if !zeros.iter().any(|z| (z - x).abs() < 1e-2) {
                let got = bessel_j(order, x).unwrap();
                let want = series_oracle(2 * n, x);
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1e-3),
                    "n = {n}, x = {x}"
                );
            }
            x += 0.211;
        }
    }
}

#[test]
fn first_zero_of_j_three_halves_solves_tan_x_equals_x() {
    let oracle = newton_tan_x_equals_x(4.5);
    assert!((oracle - 4.493409457909064).abs() < 1e-14);
    let z = bessel_zeros(BesselOrder::new(3).unwrap(), 1).unwrap().zeros[0];
    assert!((z - oracle).abs() < 1e-12);
    assert!(
        bessel_j(BesselOrder::new(3).unwrap(), oracle)
            .unwrap()
            .abs()
            < 1e-10
    );
}

#[test]
fn j0_zeros_match_series_bisection() {
    let z1 = bisect(j0_series_f64, 2.0, 3.0);
    let z2 = bisect(j0_series_f64, 5.0, 6.0);
    assert!((z1 - 2.404825557695773).abs() < 1e-12);
    assert!((z2 - 5.520078110286311).abs() < 1e-12);
    let table = bessel_zeros(BesselOrder::integer(0), 2).unwrap().zeros;
    assert!((table[0] - z1).abs() < 1e-12);
    assert!((table[1] - z2).abs() < 1e-12);
}

#[test]
fn higher_zeros_against_frozen_values() {
    // independent double-double series + bisection, frozen
    let z52 = bisect(|x| series_oracle(5, x), 5.5, 6.0);
    assert!((z52 - 5.76345919689455).abs() < 1e-12);
    let z11 = bisect(|x| series_oracle(2, x), 3.5, 4.0);
    assert!((z11 - 3.831705970207512).abs() < 1e-12);
    let z21 = bisect(|x| series_oracle(4, x), 5.0, 5.3);
    assert!((z21 - 5.135622301840683).abs() < 1e-12);
    for (twice, z) in [(5, z52), (2, z11), (4, z21)] {
        let got = bessel_zeros(BesselOrder::new(twice).unwrap(), 1)
            .unwrap()
            .zeros[0];
        assert!((got - z).abs() < 1e-12, "{twice}: {got} vs {z}");
    }
}

#[test]
fn derivative_agrees_with_central_difference() {
    let h = 1e-5;
    for twice in [0, 1, 2, 3, 5, 8] {
        let order = BesselOrder::new(twice).unwrap();
        for &x in &[0.7, PI / 2.0, 3.3, 11.0] {
            let fd =
                (bessel_j(order, x + h).unwrap() - bessel_j(order, x - h).unwrap()) / (2.0 * h);
            let an = bessel_j_derivative(order, x).unwrap();
            assert!((fd - an).abs() <= 1e-8, "{twice}/2 at {x}: {an} vs {fd}");
        }
    }
    let d = bessel_j_derivative(BesselOrder::half(), PI).unwrap();
    assert!((d + 2f64.sqrt() / PI).abs() < 1e-12);
    let d0 = bessel_j_derivative(BesselOrder::integer(0), 1e-6).unwrap();
    assert!((d0 + 5e-7).abs() < 1e-15);
}

#[test]
fn exact_spectrum_third_level() {
    let s = exact_ab_spectrum(3).unwrap();
    let z52 = bisect(|x| series_oracle(5, x), 5.5, 6.0);
    assert!((s[2].lambda - z52 * z52).abs() < 1e-10);
    assert!((s[2].lambda - 33.217462).abs() < 1e-6);
    assert_eq!((s[2].n, s[2].k), (5, 1));
}

#[test]
fn closed_form_slopes_are_antisymmetric() {
    let c = closed_form_slopes().unwrap();
    assert!((c.mu1_slope + c.mu2_slope).abs() < 1e-10);
    assert!(c.mu1_slope < 0.0 && c.mu2_slope > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recurrence_matches_series(twice in (0u32..8).prop_map(|n| 2 * n + 1), x in 0.1f64..40.0) {
        let order = BesselOrder::new(twice).unwrap();
        let want = series_oracle(twice, x);
        let got = bessel_j(order, x).unwrap();
        let zeros = bessel_zeros(order, 15).unwrap().zeros;
        prop_assume!(zeros.iter().all(|z| (z - x).abs() >= 1e-2));
        prop_assert!((got - want).abs() <= 1e-8 * want.abs());
    }

    #[test]
    fn zero_tables_interlace(twice in 0u32..=20, count in 1usize..12) {
        let a = bessel_zeros(BesselOrder::new(twice).unwrap(), count).unwrap().zeros;
        let b = bessel_zeros(BesselOrder::new(twice + 2).unwrap(), count).unwrap().zeros;
        for k in 0..count {
            prop_assert!(a[k] < b[k]);
            if k + 1 < count {
                prop_assert!(b[k] < a[k + 1]);
                prop_assert!(a[k] < a[k + 1]);
            }
        }
    }

    #[test]
    fn chain_passes_for_every_size(max_n in 7u32..=29, count in 0usize..6) {
        let report = interlacing_check(max_n, count).unwrap();
        prop_assert!(report.pass);
        prop_assert!(report.chain.windows(2).all(|w| w[0].z < w[1].z));
    }
}
