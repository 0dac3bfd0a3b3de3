//! Small numeric kernel: bracketed bisection, golden-section maximization,
//! and a real-quartic solver (Ferrari resolvent plus Newton polish).

/// Bisection on a bracketing interval; `f(lo)` and `f(hi)` must have
/// opposite signs (or one endpoint is an exact root). Shrinks the bracket
/// to an absolute width of `tol` and returns its midpoint.
pub fn bisect_root<F: FnMut(f64) -> f64>(
    mut lo: f64,
    mut hi: f64,
    mut f: F,
    tol: f64,
) -> Option<f64> {
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    let sign_lo = f_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Golden-section search for the maximizer of `f` on `[lo, hi]`, assuming a
/// unimodal objective there. Shrinks the bracket to relative width
/// `rel_tol`; returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(lo: f64, hi: f64, mut f: F, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if b - a <= rel_tol * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

/// `n` geometrically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// All real roots of the cubic `t^3 + a t^2 + b t + c`.
fn cubic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    // depressed: t = u - a/3 => u^3 + p u + q
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    let mut roots = if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-half_q + s).cbrt() + (-half_q - s).cbrt() + shift]
    } else if p == 0.0 && q == 0.0 {
        vec![shift]
    } else {
        // three real roots, trigonometric form
        let rho = (-third_p).max(0.0).sqrt();
        let arg = (-half_q / (rho * rho * rho)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                2.0 * rho * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift
            })
            .collect()
    };
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots
}

fn quadratic_real_roots(b: f64, c: f64, out: &mut Vec<f64>) {
    // x^2 + b x + c, numerically stable split
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return;
    }
    let s = disc.sqrt();
    let q = -0.5 * (b + b.signum() * s);
    if b == 0.0 {
        out.push(s / 2.0);
        out.push(-s / 2.0);
        return;
    }
    out.push(q);
    if q != 0.0 {
        out.push(c / q);
    } else {
        out.push(-b - q);
    }
}

fn eval_poly(coeffs: &[f64; 5], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn eval_poly_deriv(coeffs: &[f64; 5], x: f64) -> f64 {
    let [a4, a3, a2, a1, _] = *coeffs;
    ((4.0 * a4 * x + 3.0 * a3) * x + 2.0 * a2) * x + a1
}

fn newton_polish(coeffs: &[f64; 5], mut x: f64) -> f64 {
    let mut best = x;
    let mut best_abs = eval_poly(coeffs, x).abs();
    for _ in 0..50 {
        let f = eval_poly(coeffs, x);
        let df = eval_poly_deriv(coeffs, x);
        if df == 0.0 || !f.is_finite() {
            break;
        }
        let step = f / df;
        x -= step;
        let fx = eval_poly(coeffs, x).abs();
        if fx < best_abs {
            best_abs = fx;
            best = x;
        }
        if step.abs() <= 1e-16 * x.abs().max(1e-300) {
            break;
        }
    }
    best
}

/// All real roots of `a4 x^4 + a3 x^3 + a2 x^2 + a1 x + a0` (each multiple
/// root reported once), sorted ascending. Ferrari's resolvent-cubic method
/// with a Newton polish on the original coefficients.
pub fn real_quartic_roots(a4: f64, a3: f64, a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    assert!(a4 != 0.0, "leading quartic coefficient must be non-zero");
    let coeffs = [a4, a3, a2, a1, a0];
    // monic
    let b = a3 / a4;
    let c = a2 / a4;
    let d = a1 / a4;
    let e = a0 / a4;
    // depressed: x = y - b/4 => y^4 + p y^2 + q y + r
    let p = c - 3.0 * b * b / 8.0;
    let q = d - b * c / 2.0 + b * b * b / 8.0;
    let r = e - b * d / 4.0 + b * b * c / 16.0 - 3.0 * b * b * b * b / 256.0;
    let shift = -b / 4.0;
    let scale = 1.0 + p.abs() + q.abs() + r.abs();

    let mut ys: Vec<f64> = Vec::with_capacity(4);
    if q.abs() <= 1e-14 * scale {
        // biquadratic y^4 + p y^2 + r
        let mut zs = Vec::new();
        quadratic_real_roots(p, r, &mut zs);
        for z in zs {
            if z >= 0.0 {
                ys.push(z.sqrt());
                ys.push(-z.sqrt());
            }
        }
    } else {
        // resolvent 8 t^3 + 8 p t^2 + (2 p^2 - 8 r) t - q^2 = 0; any
        // positive root gives the factorization, the largest is the most
        // stable
        let ts = cubic_real_roots(p, (2.0 * p * p - 8.0 * r) / 8.0, -q * q / 8.0);
        let t = *ts.last().expect("cubic always has a real root");
        if t > 0.0 {
            let s = (2.0 * t).sqrt();
            let base = p / 2.0 + t;
            let off = q / (2.0 * s);
            quadratic_real_roots(s, base - off, &mut ys);
            quadratic_real_roots(-s, base + off, &mut ys);
        }
    }

    let mut roots: Vec<f64> = ys
        .into_iter()
        .map(|y| newton_polish(&coeffs, y + shift))
        .collect();
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * (x.abs() + y.abs()).max(1e-12));
    roots
}
