//! Bessel functions of the first kind for integer and half-integer order,
//! their positive zeros, and the closed-form spectral data of the centred
//! half-flux Aharonov–Bohm operator on the unit disk.
//!
//! Every eigenvalue of the centred problem is a square of a zero of
//! `J_{n/2}` with `n` odd, and each one is double. These values are the
//! reference every numerical route in the crate is checked against.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest supported `2ν`.
pub const MAX_TWICE_ORDER: u32 = 30;

/// Largest number of zeros a single table may hold.
pub const MAX_ZERO_COUNT: usize = 50;

/// Largest number of distinct levels `exact_ab_spectrum` will list.
pub const MAX_EXACT_LEVELS: usize = 20;

/// Above this argument integer orders switch from the power series to
/// normalised backward recurrence.
const SERIES_CUTOFF: f64 = 8.0;

/// Order `ν = twice_order / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BesselOrder {
    pub twice_order: u32,
}

impl BesselOrder {
    pub fn new(twice_order: u32) -> Result<Self> {
        if twice_order > MAX_TWICE_ORDER {
            return Err(Error::UnsupportedOrder { twice_order });
        }
        Ok(Self { twice_order })
    }

    /// `J_{1/2}`.
    pub const fn half() -> Self {
        Self { twice_order: 1 }
    }

    pub const fn integer(n: u32) -> Self {
        Self { twice_order: 2 * n }
    }

    pub fn nu(self) -> f64 {
        self.twice_order as f64 / 2.0
    }

    pub fn is_half_integer(self) -> bool {
        self.twice_order % 2 == 1
    }
}

impl std::fmt::Display for BesselOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_half_integer() {
            write!(f, "{}/2", self.twice_order)
        } else {
            write!(f, "{}", self.twice_order / 2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroTable {
    pub order: BesselOrder,
    pub zeros: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactEigenvalue {
    /// Angular index; odd for the half-flux spectrum.
    pub n: u32,
    /// Radial index.
    pub k: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormSlopes {
    pub mu1_slope: f64,
    pub mu2_slope: f64,
    /// Tip coefficient of the cosine half-mode.
    pub a: f64,
    /// Tip coefficient of the sine half-mode.
    pub b: f64,
    /// Squared normalisation constant of the first centred eigenfunction.
    pub c_squared: f64,
    /// `∫₀¹ J_{1/2}(πr)² r dr`.
    pub radial_integral: f64,
}

fn check_argument(order: BesselOrder, x: f64) -> Result<()> {
    if order.twice_order > MAX_TWICE_ORDER {
        return Err(Error::UnsupportedOrder {
            twice_order: order.twice_order,
        });
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "Bessel argument must be positive, got {x}"
        )));
    }
    Ok(())
}

/// `J_ν(x)` for `x > 0`.
pub fn bessel_j(order: BesselOrder, x: f64) -> Result<f64> {
    check_argument(order, x)?;
    Ok(eval(order.twice_order as i64, x))
}

/// `J_ν'(x) = J_{ν-1}(x) - (ν/x) J_ν(x)`.
pub fn bessel_j_derivative(order: BesselOrder, x: f64) -> Result<f64> {
    check_argument(order, x)?;
    Ok(derivative(order.twice_order as i64, x))
}

fn derivative(twice: i64, x: f64) -> f64 {
    let nu = twice as f64 / 2.0;
    eval(twice - 2, x) - nu / x * eval(twice, x)
}

/// Evaluates `J_{twice/2}` for `twice >= -2`; the two negative orders are
/// the ones the derivative formula needs.
fn eval(twice: i64, x: f64) -> f64 {
    match twice {
        -2 => -integer_order(1, x),
        -1 => (2.0 / (PI * x)).sqrt() * x.cos(),
        t if t % 2 == 0 => integer_order((t / 2) as u32, x),
        t => half_integer_order(((t - 1) / 2) as u32, x),
    }
}

/// `J_{m+1/2}(x)`.
fn half_integer_order(m: u32, x: f64) -> f64 {
    let pref = (2.0 / (PI * x)).sqrt();
    let (s, c) = x.sin_cos();
    let j_half = pref * s;
    let j_minus_half = pref * c;
    if m == 0 {
        return j_half;
    }
    let nu = m as f64 + 0.5;
    if x >= nu {
        // upward recurrence is stable while the order stays below x
        let (mut prev, mut cur) = (j_minus_half, j_half);
        for i in 0..m {
            let order = i as f64 + 0.5;
            let next = 2.0 * order / x * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    } else {
        // Miller: recur downward from far above the order, normalise on
        // whichever of J_{±1/2} is better conditioned
        let start = m + 30 + x.ceil() as u32;
        let mut above = 0.0_f64;
        let mut cur = 1e-30_f64;
        let mut at_m = 0.0;
        let mut at_half = 0.0;
        // cur holds the value at index i (order i + 1/2)
        let mut i = start as i64;
        while i >= 0 {
            if i == m as i64 {
                at_m = cur;
            }
            if i == 0 {
                at_half = cur;
            }
            let order = i as f64 + 0.5;
            let below = 2.0 * order / x * cur - above;
            above = cur;
            cur = below;
            if cur.abs() > 1e250 {
                cur *= 1e-250;
                above *= 1e-250;
                at_m *= 1e-250;
                at_half *= 1e-250;
            }
            i -= 1;
        }
        // cur now holds index -1 (order -1/2)
        let at_minus_half = cur;
        let scale = if s.abs() >= c.abs() {
            j_half / at_half
        } else {
            j_minus_half / at_minus_half
        };
        at_m * scale
    }
}

/// `J_n(x)` for integer `n >= 0`.
fn integer_order(n: u32, x: f64) -> f64 {
    if x <= SERIES_CUTOFF {
        power_series(n as f64, x)
    } else {
        miller_integer(n, x)
    }
}

/// Power series with Neumaier-compensated summation.
fn power_series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let lead = half.powf(nu) / gamma_one_plus(nu);
    let q = -half * half;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut comp = 0.0_f64;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term.abs() < 1e-18 * sum.abs() && kf > half {
            break;
        }
    }
    lead * (sum + comp)
}

/// `Γ(1 + ν)` for integer or half-integer `ν >= 0`.
fn gamma_one_plus(nu: f64) -> f64 {
    let mut g = if nu.fract() == 0.0 {
        1.0
    } else {
        PI.sqrt() / 2.0
    };
    let mut v = if nu.fract() == 0.0 { 1.0 } else { 1.5 };
    while v < nu + 1.0 - 1e-12 {
        g *= v;
        v += 1.0;
    }
    g
}

/// Backward recurrence normalised with `J_0 + 2 Σ J_{2k} = 1`.
fn miller_integer(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let mut start = (top + 20.0 + (40.0 * top).sqrt()) as u32;
    start += start % 2;
    let mut above = 0.0_f64;
    let mut cur = 1e-30_f64;
    let mut norm = 0.0_f64;
    let mut at_n = 0.0_f64;
    let mut i = start;
    loop {
        if i == n {
            at_n = cur;
        }
        if i.is_multiple_of(2) {
            norm += if i == 0 { cur } else { 2.0 * cur };
        }
        if i == 0 {
            break;
        }
        let below = 2.0 * i as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            at_n *= 1e-250;
        }
        i -= 1;
    }
    at_n / norm
}

fn mcmahon_guess(nu: f64, k: usize) -> f64 {
    let beta = (k as f64 + nu / 2.0 - 0.25) * PI;
    let mu = 4.0 * nu * nu;
    beta - (mu - 1.0) / (8.0 * beta)
}

/// First `count` positive zeros of `J_ν`.
///
/// Each zero starts from McMahon's estimate (or the previous zero plus π
/// when that is larger), widens a bracket in steps of 0.5 until `J_ν`
/// changes sign, bisects to width 1e-3 and finishes with safeguarded
/// Newton steps.
pub fn bessel_zeros(order: BesselOrder, count: usize) -> Result<ZeroTable> {
    if order.twice_order > MAX_TWICE_ORDER {
        return Err(Error::UnsupportedOrder {
            twice_order: order.twice_order,
        });
    }
    if count > MAX_ZERO_COUNT {
        return Err(Error::Domain(format!(
            "at most {MAX_ZERO_COUNT} zeros per table, requested {count}"
        )));
    }
    let twice = order.twice_order as i64;
    let nu = order.nu();
    let f = |x: f64| eval(twice, x);
    let mut zeros: Vec<f64> = Vec::with_capacity(count);
    for k in 1..=count {
        // J_ν has no zeros in (0, ν]
        let floor = zeros.last().map_or(nu.max(1e-3), |&z| z + 0.5);
        let mut guess = mcmahon_guess(nu, k);
        if let Some(&prev) = zeros.last() {
            if guess <= prev + 1.0 {
                guess = prev + PI;
            }
        }
        let guess = guess.max(floor);
        let (mut lo, mut hi) = bracket(&f, guess, floor).ok_or(Error::BracketFailure {
            twice_order: order.twice_order,
            index: k,
        })?;
        let mut flo = f(lo);
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let z = newton(twice, lo, hi);
        // no zero may hide between the previous one and this one
        let scan_from = zeros.last().copied().unwrap_or(nu.max(1e-3));
        if sign_change_inside(&f, scan_from + 1e-6, z - 1e-6) {
            return Err(Error::BracketFailure {
                twice_order: order.twice_order,
                index: k,
            });
        }
        zeros.push(z);
    }
    Ok(ZeroTable { order, zeros })
}

fn bracket(f: &impl Fn(f64) -> f64, guess: f64, floor: f64) -> Option<(f64, f64)> {
    let step = 0.5;
    let fg = f(guess);
    if fg == 0.0 {
        return Some((guess, guess));
    }
    let mut left = guess;
    let mut right = guess;
    let mut f_left = fg;
    let mut f_right = fg;
    for _ in 0..200 {
        let new_right = right + step;
        let fr = f(new_right);
        if fr.signum() != f_right.signum() {
            return Some((right, new_right));
        }
        right = new_right;
        f_right = fr;
        if left - step >= floor {
            let new_left = left - step;
            let fl = f(new_left);
            if fl.signum() != f_left.signum() {
                return Some((new_left, left));
            }
            left = new_left;
            f_left = fl;
        }
    }
    None
}

fn sign_change_inside(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> bool {
    if b <= a {
        return false;
    }
    let steps = ((b - a) / 0.1).ceil().max(1.0) as usize;
    let mut prev = f(a);
    for i in 1..=steps {
        let x = a + (b - a) * i as f64 / steps as f64;
        let v = f(x);
        if v != 0.0 && prev != 0.0 && v.signum() != prev.signum() {
            return true;
        }
        prev = v;
    }
    false
}

fn newton(twice: i64, mut lo: f64, mut hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let f_lo = eval(twice, lo);
    let mut z = 0.5 * (lo + hi);
    let mut settled = false;
    for _ in 0..60 {
        let fz = eval(twice, z);
        if fz == 0.0 {
            return z;
        }
        if fz.signum() == f_lo.signum() {
            lo = z;
        } else {
            hi = z;
        }
        let d = derivative(twice, z);
        let mut next = z - fz / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let delta = (next - z).abs();
        z = next;
        // one extra step after the 1e-13 criterion lands on the last ulp
        if delta <= 1e-13 * z.abs().max(1.0) {
            if settled {
                break;
            }
            settled = true;
        }
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainEntry {
    pub twice_order: u32,
    pub k: usize,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterlacingReport {
    /// Zeros of the half-integer orders `J_{n/2}`, n odd, merged and sorted.
    pub chain: Vec<ChainEntry>,
    /// `z_{ν,k} < z_{ν+1/2,k} < z_{ν,k+1}` for every computed triple.
    pub adjacent_ok: bool,
    /// `z_{ν,k} < z_{ν+1,k} < z_{ν,k+1}` for every computed triple.
    pub porter_ok: bool,
    pub pass: bool,
}

/// Checks both interlacing families on the tables of `J_{n/2}`,
/// `n = 1..=max_n`, each holding `count` zeros.
pub fn interlacing_check(max_n: u32, count: usize) -> Result<InterlacingReport> {
    if count == 0 || max_n == 0 {
        return Ok(InterlacingReport {
            chain: Vec::new(),
            adjacent_ok: true,
            porter_ok: true,
            pass: true,
        });
    }
    // one more order than requested so every n <= max_n has both partners
    let top = (max_n + 2).min(MAX_TWICE_ORDER);
    let tables = (0..=top)
        .map(|t| bessel_zeros(BesselOrder::new(t)?, count))
        .collect::<Result<Vec<_>>>()?;

    let interlaced = |lower: &ZeroTable, upper: &ZeroTable| {
        (0..count).all(|k| {
            let below = lower.zeros[k] < upper.zeros[k];
            let above = k + 1 >= count || upper.zeros[k] < lower.zeros[k + 1];
            below && above
        })
    };
    let adjacent_ok =
        (1..=max_n.min(top - 1)).all(|n| interlaced(&tables[n as usize], &tables[n as usize + 1]));
    let porter_ok =
        (1..=max_n.min(top - 2)).all(|n| interlaced(&tables[n as usize], &tables[n as usize + 2]));

    let mut chain: Vec<ChainEntry> = (1..=max_n)
        .filter(|n| n % 2 == 1)
        .flat_map(|n| {
            tables[n as usize]
                .zeros
                .iter()
                .enumerate()
                .map(move |(i, &z)| ChainEntry {
                    twice_order: n,
                    k: i + 1,
                    z,
                })
        })
        .collect();
    chain.sort_by(|a, b| a.z.total_cmp(&b.z));
    let strictly_increasing = chain.windows(2).all(|w| w[0].z < w[1].z);

    Ok(InterlacingReport {
        chain,
        adjacent_ok,
        porter_ok,
        pass: adjacent_ok && porter_ok && strictly_increasing,
    })
}

/// The `count` smallest distinct eigenvalues of the half-flux operator with
/// the pole at the centre: squares of zeros of `J_{n/2}`, `n` odd. Every
/// listed value has multiplicity two.
pub fn exact_ab_spectrum(count: usize) -> Result<Vec<ExactEigenvalue>> {
    if count > MAX_EXACT_LEVELS {
        return Err(Error::Domain(format!(
            "at most {MAX_EXACT_LEVELS} exact levels, requested {count}"
        )));
    }
    let mut all = Vec::new();
    let top_n = MAX_TWICE_ORDER - 1;
    for n in (1..=top_n).step_by(2) {
        let table = bessel_zeros(BesselOrder::new(n)?, count)?;
        all.extend(
            table
                .zeros
                .iter()
                .enumerate()
                .map(|(i, &z)| ExactEigenvalue {
                    n,
                    k: i + 1,
                    lambda: z * z,
                }),
        );
    }
    all.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    all.truncate(count);
    // the first zero of J_ν exceeds ν, so omitted orders cannot intrude
    if let Some(last) = all.last() {
        let next_order = (top_n + 2) as f64 / 2.0;
        debug_assert!(last.lambda.sqrt() < next_order);
    }
    Ok(all)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> std::result::Result<f64, (f64, f64)> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err((left + right, delta.abs()));
        }
        let l = recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
        Ok(l + r)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40).map_err(|(estimate, error_estimate)| {
        Error::Quadrature {
            estimate,
            error_estimate,
        }
    })
}

/// Tip coefficients and branch slopes of the centred first eigenvalue.
///
/// The real eigenfunctions `C J_{1/2}(πr) cos(θ/2)` and
/// `C J_{1/2}(πr) sin(θ/2)` have unit norm on the disk when
/// `C² = (π ∫₀¹ J_{1/2}(πr)² r dr)⁻¹`. Near the pole `J_{1/2}(πr) ≈ √2 r^{1/2}`,
/// so both tip coefficients equal `√2 C`.
pub fn closed_form_slopes() -> Result<ClosedFormSlopes> {
    let order = BesselOrder::half();
    let integrand = |r: f64| {
        if r <= 0.0 {
            0.0
        } else {
            let j = eval(order.twice_order as i64, PI * r);
            j * j * r
        }
    };
    let radial_integral = adaptive_simpson(&integrand, 0.0, 1.0, 1e-14)?;
    let c_squared = 1.0 / (PI * radial_integral);
    // leading coefficient of J_{1/2}(πr) / r^{1/2}: (π/2)^{1/2} / Γ(3/2)
    let tip_scale = (PI / 2.0).sqrt() / gamma_one_plus(0.5);
    let a = c_squared.sqrt() * tip_scale;
    let b = a;
    Ok(ClosedFormSlopes {
        mu1_slope: -PI / 2.0 * b * b,
        mu2_slope: PI / 2.0 * a * a,
        a,
        b,
        c_squared,
        radial_integral,
    })
}

/// `z_{ν,k}²` for a single order, convenient for oracles.
pub fn zero_squared(order: BesselOrder, k: usize) -> Result<f64> {
    let t = bessel_zeros(order, k)?;
    Ok(t.zeros[k - 1] * t.zeros[k - 1])
}
