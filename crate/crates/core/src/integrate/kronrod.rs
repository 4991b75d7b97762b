//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector integrands.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// Positive abscissae of the 15-point Kronrod rule, centre first.
const XGK: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.991_455_371_120_812_639_206_854_697_526_329,
];

const WGK: [f64; 8] = [
    0.209_482_141_084_727_828_012_999_174_891_714,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.022_935_322_010_529_224_963_732_008_058_970,
];

// 7-point Gauss weights for XGK[0], XGK[2], XGK[4], XGK[6].
const WG: [f64; 4] = [
    0.417_959_183_673_469_387_755_102_040_816_327,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.129_484_966_168_869_693_270_611_432_679_082,
];

/// Change of variables from the quadrature coordinate `t` to the sample point `x`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Chart<T> {
    /// `x = t` on `[a, b]`.
    Finite { a: T, b: T },
    /// `x = c + s·t/(1 − t²)` for `t ∈ (−1, 1)`.
    Line { c: T, s: T },
    /// `x = a + s·t/(1 − t)` for `t ∈ [0, 1)`.
    Lower { a: T, s: T },
    /// `x = b − s·t/(1 − t)` for `t ∈ [0, 1)`.
    Upper { b: T, s: T },
}

impl<T: Scalar> Chart<T> {
    /// Picks the chart for an interval given a centre/spread hint.
    pub(crate) fn for_interval(lo: T, hi: T, centre: T, spread: T) -> Self {
        let spread = if spread.is_finite() && spread > T::zero() {
            spread
        } else {
            T::one()
        };
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => Chart::Finite { a: lo, b: hi },
            (false, false) => Chart::Line {
                c: if centre.is_finite() { centre } else { T::zero() },
                s: spread,
            },
            (true, false) => Chart::Lower {
                a: lo,
                s: spread.max(centre - lo),
            },
            (false, true) => Chart::Upper {
                b: hi,
                s: spread.max(hi - centre),
            },
        }
    }

    pub(crate) fn t_range(&self) -> (T, T) {
        match *self {
            Chart::Finite { a, b } => (a, b),
            Chart::Line { .. } => (-T::one(), T::one()),
            Chart::Lower { .. } | Chart::Upper { .. } => (T::zero(), T::one()),
        }
    }

    /// Default number of equal initial panels in `t`.
    pub(crate) fn initial_panels(&self) -> usize {
        match self {
            Chart::Finite { .. } => 4,
            Chart::Line { .. } => 16,
            Chart::Lower { .. } | Chart::Upper { .. } => 8,
        }
    }

    /// Returns `(x, dx/dt)`.
    #[inline]
    pub(crate) fn map(&self, t: T) -> (T, T) {
        let one = T::one();
        match *self {
            Chart::Finite { .. } => (t, one),
            Chart::Line { c, s } => {
                let d = one - t * t;
                (c + s * t / d, s * (one + t * t) / (d * d))
            }
            Chart::Lower { a, s } => {
                let d = one - t;
                (a + s * t / d, s / (d * d))
            }
            Chart::Upper { b, s } => {
                let d = one - t;
                (b - s * t / d, s / (d * d))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Panel<T> {
    a: T,
    b: T,
    value: Vec<T>,
    error: T,
    err_vec: Vec<T>,
}

#[derive(Debug)]
pub(crate) struct QuadratureOutcome<T> {
    pub values: Vec<T>,
    pub errors: Vec<T>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Applies the 15-point rule on `[a, b]` in chart coordinates.
fn rule<T: Scalar, F>(
    chart: &Chart<T>,
    a: T,
    b: T,
    dim: usize,
    f: &mut F,
    scratch: &mut [T],
) -> Result<Panel<T>>
where
    F: FnMut(T, &mut [T]),
{
    let half = T::of(0.5);
    let centre = (a + b) * half;
    let half_len = (b - a) * half;
    let mut kron = vec![T::zero(); dim];
    let mut gauss = vec![T::zero(); dim];

    let mut eval = |t: T, scratch: &mut [T]| -> Result<()> {
        let (x, jac) = chart.map(t);
        scratch.iter_mut().for_each(|v| *v = T::zero());
        if !x.is_finite() || !jac.is_finite() {
            return Ok(());
        }
        f(x, scratch);
        if scratch.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { x: x.as_f64() });
        }
        for v in scratch.iter_mut() {
            *v *= jac;
        }
        Ok(())
    };

    eval(centre, scratch)?;
    for c in 0..dim {
        kron[c] += T::of(WGK[0]) * scratch[c];
        gauss[c] += T::of(WG[0]) * scratch[c];
    }
    for k in 1..8 {
        let dx = half_len * T::of(XGK[k]);
        for sign in [-T::one(), T::one()] {
            eval(centre + sign * dx, scratch)?;
            for c in 0..dim {
                kron[c] += T::of(WGK[k]) * scratch[c];
                if k % 2 == 0 {
                    gauss[c] += T::of(WG[k / 2]) * scratch[c];
                }
            }
        }
    }
    let mut err_vec = vec![T::zero(); dim];
    let mut error = T::zero();
    for c in 0..dim {
        kron[c] *= half_len;
        gauss[c] *= half_len;
        err_vec[c] = (kron[c] - gauss[c]).abs();
        error = error.max(err_vec[c]);
    }
    Ok(Panel {
        a,
        b,
        value: kron,
        error,
        err_vec,
    })
}

/// Integrates the vector function `f(x)` over the chart's range.
///
/// Panels with the largest Kronrod–Gauss discrepancy are bisected until the
/// summed discrepancy (max-norm over components) is below
/// `max(abs_tol, rel_tol · ‖I‖∞)` or the evaluation budget runs out.
pub(crate) fn adaptive<T: Scalar, F>(
    chart: Chart<T>,
    dim: usize,
    rel_tol: f64,
    abs_tol: f64,
    max_evals: usize,
    mut f: F,
) -> Result<QuadratureOutcome<T>>
where
    F: FnMut(T, &mut [T]),
{
    let (t0, t1) = chart.t_range();
    let n0 = chart.initial_panels();
    let width = (t1 - t0) / T::of_usize(n0);
    let mut scratch = vec![T::zero(); dim];
    let mut panels = Vec::with_capacity(n0 * 4);
    let mut evaluations = 0usize;
    for i in 0..n0 {
        let a = t0 + width * T::of_usize(i);
        let b = if i + 1 == n0 { t1 } else { a + width };
        panels.push(rule(&chart, a, b, dim, &mut f, &mut scratch)?);
        evaluations += 15;
    }
    let rel = T::of(rel_tol);
    let abs = T::of(abs_tol);
    let min_width = T::epsilon() * T::of(64.0) * (t1 - t0).abs().max(T::one());

    let totals = |panels: &[Panel<T>]| -> (Vec<T>, Vec<T>) {
        let mut v = vec![T::zero(); dim];
        let mut e = vec![T::zero(); dim];
        for p in panels {
            for c in 0..dim {
                v[c] += p.value[c];
                e[c] += p.err_vec[c];
            }
        }
        (v, e)
    };

    loop {
        let (values, errors) = totals(&panels);
        let scale = crate::scalar::max_abs(&values);
        let err = crate::scalar::max_abs(&errors);
        let target = abs.max(rel * scale);
        if err <= target {
            return Ok(QuadratureOutcome {
                values,
                errors,
                evaluations,
                converged: true,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.b - p.a > min_width)
            .max_by(|x, y| {
                x.1.error
                    .partial_cmp(&y.1.error)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            return Ok(QuadratureOutcome {
                values,
                errors,
                evaluations,
                converged: false,
            });
        };
        if evaluations + 30 > max_evals {
            return Ok(QuadratureOutcome {
                values,
                errors,
                evaluations,
                converged: false,
            });
        }
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) * T::of(0.5);
        panels.push(rule(&chart, p.a, mid, dim, &mut f, &mut scratch)?);
        panels.push(rule(&chart, mid, p.b, dim, &mut f, &mut scratch)?);
        evaluations += 30;
    }
}
