//! Wigner 3j and 6j symbols for small angular momenta.
//!
//! Arguments are passed doubled (`2j`, `2m`) so half-integer values stay
//! exact integers. Racah's closed-form sums are used; they are exact enough in
//! `f64` for the momenta that appear in the Yb+ ground and first excited
//! states.

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn is_triangle(a: i32, b: i32, c: i32) -> bool {
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

/// Triangle coefficient with doubled arguments.
fn delta(a: i32, b: i32, c: i32) -> f64 {
    (factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2)
        / factorial((a + b + c) / 2 + 1))
        .sqrt()
}

fn sign(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)` with doubled arguments.
pub fn wigner_3j(tj1: i32, tj2: i32, tj3: i32, tm1: i32, tm2: i32, tm3: i32) -> f64 {
    if tm1 + tm2 + tm3 != 0 || !is_triangle(tj1, tj2, tj3) {
        return 0.0;
    }
    for (j, m) in [(tj1, tm1), (tj2, tm2), (tj3, tm3)] {
        if m.abs() > j || (j + m) % 2 != 0 {
            return 0.0;
        }
    }
    let prefactor = sign((tj1 - tj2 - tm3) / 2)
        * delta(tj1, tj2, tj3)
        * (factorial((tj1 + tm1) / 2)
            * factorial((tj1 - tm1) / 2)
            * factorial((tj2 + tm2) / 2)
            * factorial((tj2 - tm2) / 2)
            * factorial((tj3 + tm3) / 2)
            * factorial((tj3 - tm3) / 2))
            .sqrt();
    let kmin = 0.max((tj2 - tj3 - tm1) / 2).max((tj1 - tj3 + tm2) / 2);
    let kmax = ((tj1 + tj2 - tj3) / 2).min((tj1 - tm1) / 2).min((tj2 + tm2) / 2);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        sum += sign(k)
            / (factorial(k)
                * factorial((tj3 - tj2 + tm1) / 2 + k)
                * factorial((tj3 - tj1 - tm2) / 2 + k)
                * factorial((tj1 + tj2 - tj3) / 2 - k)
                * factorial((tj1 - tm1) / 2 - k)
                * factorial((tj2 + tm2) / 2 - k));
    }
    prefactor * sum
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` with doubled arguments.
pub fn wigner_6j(tj1: i32, tj2: i32, tj3: i32, tj4: i32, tj5: i32, tj6: i32) -> f64 {
    let triads = [
        (tj1, tj2, tj3),
        (tj1, tj5, tj6),
        (tj4, tj2, tj6),
        (tj4, tj5, tj3),
    ];
    if triads.iter().any(|&(a, b, c)| !is_triangle(a, b, c)) {
        return 0.0;
    }
    let pre: f64 = triads.iter().map(|&(a, b, c)| delta(a, b, c)).product();
    let tmin = triads.iter().map(|&(a, b, c)| (a + b + c) / 2).max().unwrap();
    let tmax = ((tj1 + tj2 + tj4 + tj5) / 2)
        .min((tj2 + tj3 + tj5 + tj6) / 2)
        .min((tj3 + tj1 + tj6 + tj4) / 2);
    let mut sum = 0.0;
    for t in tmin..=tmax {
        let mut denom = 1.0;
        for &(a, b, c) in &triads {
            denom *= factorial(t - (a + b + c) / 2);
        }
        denom *= factorial((tj1 + tj2 + tj4 + tj5) / 2 - t)
            * factorial((tj2 + tj3 + tj5 + tj6) / 2 - t)
            * factorial((tj3 + tj1 + tj6 + tj4) / 2 - t);
        sum += sign(t) * factorial(t + 1) / denom;
    }
    pre * sum
}
