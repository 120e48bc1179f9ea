//! Adaptive Simpson quadrature, scalar and vector-valued.

/// Number of equal panels the interval is split into before adapting.
const PANELS: usize = 8;

/// `int_a^b f` to absolute tolerance `tol`, refining at most `max_depth` levels.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == PANELS { b } else { lo + h };
        let (fl, fm, fh) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = (hi - lo) / 6.0 * (fl + 4.0 * fm + fh);
        total += simpson_step(&f, lo, hi, fl, fm, fh, whole, tol / PANELS as f64, max_depth);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Vector-valued version: `f(t, out)` fills `out` (length `dim`); the error
/// test uses the largest component difference.
pub fn adaptive_simpson_vec<F: Fn(f64, &mut [f64])>(
    f: F,
    a: f64,
    b: f64,
    dim: usize,
    tol: f64,
    max_depth: u32,
) -> Vec<f64> {
    let mut total = vec![0.0; dim];
    if a == b {
        return total;
    }
    let eval = |t: f64| {
        let mut v = vec![0.0; dim];
        f(t, &mut v);
        v
    };
    let h = (b - a) / PANELS as f64;
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == PANELS { b } else { lo + h };
        let (fl, fm, fh) = (eval(lo), eval(0.5 * (lo + hi)), eval(hi));
        let whole = simpson(hi - lo, &fl, &fm, &fh);
        vec_step(&eval, lo, hi, &fl, &fm, &fh, &whole, tol / PANELS as f64, max_depth, &mut total);
    }
    total
}

fn simpson(width: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((a, m), b)| width / 6.0 * (a + 4.0 * m + b))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn vec_step<E: Fn(f64) -> Vec<f64>>(
    eval: &E,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
    acc: &mut [f64],
) {
    let m = 0.5 * (a + b);
    let (flm, frm) = (eval(0.5 * (a + m)), eval(0.5 * (m + b)));
    let left = simpson(m - a, fa, &flm, fm);
    let right = simpson(b - m, fm, &frm, fb);
    let err = left
        .iter()
        .zip(&right)
        .zip(whole)
        .map(|((l, r), w)| (l + r - w).abs())
        .fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        for (i, slot) in acc.iter_mut().enumerate() {
            let s = left[i] + right[i];
            *slot += s + (s - whole[i]) / 15.0;
        }
        return;
    }
    vec_step(eval, a, m, fa, &flm, fm, &left, 0.5 * tol, depth - 1, acc);
    vec_step(eval, m, b, fm, &frm, fb, &right, 0.5 * tol, depth - 1, acc);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let v = adaptive_simpson(|t| t * t * t, 0.0, 2.0, 1e-12, 20);
        assert!((v - 4.0).abs() < 1e-12);
        let v = adaptive_simpson(f64::exp, -1.0, 3.0, 1e-10, 20);
        assert!((v - (3f64.exp() - (-1f64).exp())).abs() < 1e-9);
        assert_eq!(adaptive_simpson(f64::exp, 1.0, 1.0, 1e-10, 20), 0.0);
    }

    #[test]
    fn vector_matches_scalar() {
        let v = adaptive_simpson_vec(
            |t, out| {
                out[0] = t.sin();
                out[1] = (-t * t).exp();
            },
            0.0,
            3.0,
            2,
            1e-11,
            20,
        );
        assert!((v[0] - (1.0 - 3f64.cos())).abs() < 1e-10);
        let s = adaptive_simpson(|t| (-t * t).exp(), 0.0, 3.0, 1e-11, 20);
        assert!((v[1] - s).abs() < 1e-10);
    }
}
