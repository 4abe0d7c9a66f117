//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (Kronrod estimate, |Kronrod − Gauss| per component).
fn panel<F>(f: &F, a: f64, b: f64, dim: usize) -> (Vec<f64>, f64)
where
    F: Fn(f64) -> Vec<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for s in pts {
            let v = f(c + s * h * x);
            for d in 0..dim {
                k[d] += wk * v[d];
                // odd Kronrod nodes are the Gauss nodes
                if i % 2 == 1 {
                    g[d] += WG[i / 2] * v[d];
                }
            }
        }
    }
    let err = k.iter().zip(&g).map(|(a, b)| (h * (a - b)).abs()).fold(0.0, f64::max);
    (k.iter().map(|v| v * h).collect(), err)
}

/// ∫_a^b f, refined until each panel's error is below `tol·max(1, |panel|)`
/// scaled by its share of the interval. Works for a > b (sign flips).
pub fn integrate<F>(f: F, a: f64, b: f64, dim: usize, tol: f64) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    if a == b {
        return vec![0.0; dim];
    }
    if a > b {
        return integrate(f, b, a, dim, tol).into_iter().map(|v| -v).collect();
    }
    let mut total = vec![0.0; dim];
    let mut stack = vec![(a, b, 0u32)];
    let width = b - a;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = panel(&f, lo, hi, dim);
        let scale = val.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if err <= tol * scale * ((hi - lo) / width).max(1e-3) || depth >= 50 {
            for d in 0..dim {
                total[d] += val[d];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}

pub fn integrate_scalar<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate(|x| vec![f(x)], a, b, 1, tol)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        assert!((integrate_scalar(|x| x.powi(5), 0.0, 2.0, 1e-13) - 64.0 / 6.0).abs() < 1e-12);
        assert!((integrate_scalar(f64::exp, -1.0, 3.0, 1e-13) - (3f64.exp() - (-1f64).exp())).abs() < 1e-11);
        assert!((integrate_scalar(f64::exp, 3.0, -1.0, 1e-13) + (3f64.exp() - (-1f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn peaked_integrand() {
        let v = integrate_scalar(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-13);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn vector_components() {
        let v = integrate(|x| vec![x.sin(), x.cos()], 0.0, 1.0, 2, 1e-13);
        assert!((v[0] - (1.0 - 1f64.cos())).abs() < 1e-14);
        assert!((v[1] - 1f64.sin()).abs() < 1e-14);
    }
}
