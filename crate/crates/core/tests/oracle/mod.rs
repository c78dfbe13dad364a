//! Reference values computed without the library's own special functions
//! or quadrature.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 20)
}

/// `∫ f` over `[a, b]` split into `pieces` equal panels.
pub fn panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces).map(|i| simpson(f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / pieces as f64)).sum()
}

/// Density of `T_t`: `t e^{tm} (2πs³)^{-1/2} exp(-(t²/s + m²s)/2)`.
pub fn subordinator_density(t: f64, m: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    (t.ln() + t * m - 0.5 * (2.0 * PI * s * s * s).ln() - 0.5 * (t * t / s + m * m * s)).exp()
}

/// Radial density `4πr² P_t(r)` as the Gaussian mixture
/// `∫ p_t(s) (2πs)^{-3/2} e^{-r²/(2s)} ds`. The trapezoid rule in `log s`
/// converges geometrically for this integrand.
pub fn radial_mixture_density(t: f64, m: f64, r: f64) -> f64 {
    let h = 0.02;
    let total: f64 = (-1500..=1500)
        .map(|k| {
            let v = k as f64 * h;
            let s = v.exp();
            let log = t.ln() + t * m - 0.5 * (2.0 * PI * s * s * s).ln() - 0.5 * (t * t / s + m * m * s)
                - 1.5 * (2.0 * PI * s).ln()
                - r * r / (2.0 * s);
            log.exp() * s
        })
        .sum();
    4.0 * PI * r * r * total * h
}

/// `K₂(x) = ∫₀^∞ e^{-x cosh u} cosh 2u du`, by the trapezoid rule (exact to
/// rounding for this entire, doubly decaying integrand).
pub fn bessel_k2(x: f64) -> f64 {
    let h = 0.01;
    let f = |u: f64| (-x * u.cosh()).exp() * (2.0 * u).cosh();
    h * (0.5 * f(0.0) + (1..5000).map(|k| f(k as f64 * h)).sum::<f64>())
}

/// Composite Simpson with `n` (even) intervals.
pub fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + inner + f(b))
}

/// Monotone table of a CDF on `[0, ∞)` built from a density, with the
/// abscissa map `x = scale·(u/(1-u))^power`.
pub struct CdfTable {
    u: Vec<f64>,
    cdf: Vec<f64>,
    scale: f64,
    power: f64,
}

impl CdfTable {
    /// Composite Simpson on `cells` equal cells in `u`.
    pub fn new<F: Fn(f64) -> f64>(density: F, cells: usize, scale: f64, power: f64) -> Self {
        let map = |u: f64| scale * (u / (1.0 - u)).powf(power);
        // d x / d u for the map above.
        let jac = |u: f64| {
            let q = u / (1.0 - u);
            scale * power * q.powf(power - 1.0) / ((1.0 - u) * (1.0 - u))
        };
        let g = |u: f64| {
            if u <= 0.0 || u >= 1.0 {
                return 0.0;
            }
            let v = density(map(u)) * jac(u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let h = 1.0 / cells as f64;
        let mut u = vec![0.0];
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        let mut left = g(0.0);
        for i in 0..cells - 1 {
            let a = i as f64 * h;
            let right = g(a + h);
            acc += h / 6.0 * (left + 4.0 * g(a + 0.5 * h) + right);
            left = right;
            u.push(a + h);
            cdf.push(acc);
        }
        Self { u, cdf, scale, power }
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let q = (x / self.scale).powf(1.0 / self.power);
        let u = q / (1.0 + q);
        let last = *self.u.last().unwrap();
        if u >= last {
            let f = *self.cdf.last().unwrap();
            return f + (1.0 - f) * (u - last) / (1.0 - last);
        }
        let i = self.u.partition_point(|&v| v <= u) - 1;
        let w = (u - self.u[i]) / (self.u[i + 1] - self.u[i]);
        self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// Two-sided Kolmogorov-Smirnov distance.
pub fn ks<F: Fn(f64) -> f64>(mut samples: Vec<f64>, cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `(g, e^{-t(√(-Δ+m²)-m)} g)` for `g = e^{-|x-c|²/(2w²)}` by Plancherel:
/// `∫ |ĝ(k)|² e^{-tψ(k)} d³k/(2π)³`.
pub fn free_gaussian_matrix_element(t: f64, m: f64, w: f64) -> f64 {
    let f = |k: f64| {
        let ghat2 = (2.0 * PI * w * w).powi(3) * (-k * k * w * w).exp();
        4.0 * PI * k * k * ghat2 * (-t * ((k * k + m * m).sqrt() - m)).exp() / (2.0 * PI).powi(3)
    };
    composite_simpson(&f, 0.0, 40.0 / w, 20_000)
}

/// `(e^{-tH} g)(0, +1)` for `g = e^{-|x|²/2}` on the `θ = +1` sector, with
/// constant `b`, `a = 0`, `V = 0`: `H` is diagonal in `k` and in the
/// eigenbasis of `σ·b`.
pub fn constant_b_semigroup_at_origin(t: f64, m: f64, b: [f64; 3]) -> f64 {
    let bn = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let cos = if bn > 0.0 { b[2] / bn } else { 1.0 };
    let e = |k: f64, s: f64| (-t * ((k * k + s * bn + m * m).sqrt() - m)).exp();
    let f = |k: f64| k * k * (-k * k / 2.0).exp() * (0.5 * (1.0 + cos) * e(k, -1.0) + 0.5 * (1.0 - cos) * e(k, 1.0));
    4.0 * PI * (2.0 * PI).powf(-1.5) * composite_simpson(&f, 0.0, 40.0, 20_000)
}
