//! Smooth radial cutoff profiles shared by the mollifier and the dyadic
//! partition.
//!
//! Everything is built from `f(t) = exp(-1/t)` (zero for `t <= 0`), the
//! half of the classical bump `exp(-1/(1 - t^2))`. The step
//! `s(t) = f(t) / (f(t) + f(1 - t))` is `C^inf`, equals 0 for `t <= 0`, 1 for
//! `t >= 1`, and satisfies `s(t) + s(1 - t) = 1`.

/// Inner radius where the low-frequency cutoff `chi` starts to decay.
pub const CHI_INNER: f64 = 3.0 / 4.0;
/// Radius beyond which `chi` vanishes.
pub const CHI_OUTER: f64 = 4.0 / 3.0;

#[inline]
fn bump_half(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth monotone step from 0 (`t <= 0`) to 1 (`t >= 1`).
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = bump_half(t);
        let b = bump_half(1.0 - t);
        a / (a + b)
    }
}

/// Mollifier symbol: 1 on `[0, 1]`, 0 on `[2, inf)`, smooth in between.
#[inline]
pub fn mollifier(r: f64) -> f64 {
    smooth_step(2.0 - r)
}

/// Low-frequency cutoff `chi`: 1 on `|xi| <= 3/4`, 0 on `|xi| >= 4/3`.
#[inline]
pub fn chi(r: f64) -> f64 {
    smooth_step((CHI_OUTER - r) / (CHI_OUTER - CHI_INNER))
}

/// Dyadic annulus symbol `phi(xi) = chi(xi / 2) - chi(xi)`, supported in
/// `3/4 <= |xi| <= 8/3`.
#[inline]
pub fn phi(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}
