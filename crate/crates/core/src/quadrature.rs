//! Adaptive Simpson quadrature.
//!
//! All integrals in the crate (antiderivatives of discounts, the offset
//! logarithmic integral, limit formulas and pseudo-expectations) go through
//! [`integrate`] or [`integrate_geometric`]. The integrands are smooth, or
//! piecewise linear with a handful of kinks, on the domains used.

/// Stopping rule for the adaptive refinement.
///
/// A panel is accepted when the Richardson error estimate falls below
/// `max(abs, rel * |coarse estimate|)`, split evenly between the two halves
/// at each refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Tolerance {
    pub const fn absolute(abs: f64) -> Self {
        Tolerance {
            abs,
            rel: 0.0,
            max_depth: 60,
        }
    }

    pub const fn relative(rel: f64) -> Self {
        Tolerance {
            abs: 0.0,
            rel,
            max_depth: 60,
        }
    }

    pub const fn with_rel(self, rel: f64) -> Self {
        Tolerance { rel, ..self }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::absolute(1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the accepted panels' Richardson error estimates.
    pub error_estimate: f64,
    /// Set when some panel hit `max_depth` (or could not be bisected further)
    /// without meeting its tolerance.
    pub depth_exhausted: bool,
    pub evaluations: usize,
}

impl Quadrature {
    fn zero() -> Self {
        Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            depth_exhausted: false,
            evaluations: 0,
        }
    }

    fn absorb(&mut self, other: Quadrature) {
        self.value += other.value;
        self.error_estimate += other.error_estimate;
        self.depth_exhausted |= other.depth_exhausted;
        self.evaluations += other.evaluations;
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]`. Reversed bounds negate the result.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Quadrature {
    if a == b {
        return Quadrature::zero();
    }
    if a > b {
        let mut q = integrate(f, b, a, tol);
        q.value = -q.value;
        return q;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);

    // Coarse estimate for the relative part of the tolerance: 4 panels.
    let eps = if tol.rel > 0.0 {
        let q1 = 0.5 * (a + m);
        let q3 = 0.5 * (m + b);
        let coarse = simpson(a, m, fa, f(q1), fm).abs() + simpson(m, b, fm, f(q3), fb).abs();
        tol.abs.max(tol.rel * coarse)
    } else {
        tol.abs
    };

    let mut out = Quadrature::zero();
    out.evaluations = 3;
    let panel = Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
    };
    refine(&f, panel, eps, tol.max_depth, &mut out);
    out
}

fn refine<F: Fn(f64) -> f64>(f: &F, p: Panel, eps: f64, depth: u32, out: &mut Quadrature) {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    out.evaluations += 2;
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;

    let can_split = lm > p.a && rm < p.b && m > p.a && m < p.b;
    if delta.abs() <= 15.0 * eps || depth == 0 || !can_split {
        if delta.abs() > 15.0 * eps {
            out.depth_exhausted = true;
        }
        out.value += left + right + delta / 15.0;
        out.error_estimate += delta.abs() / 15.0;
        return;
    }
    refine(
        f,
        Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
        },
        0.5 * eps,
        depth - 1,
        out,
    );
    refine(
        f,
        Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
        },
        0.5 * eps,
        depth - 1,
        out,
    );
}

/// Integrates over `[a, b]` with `0 < a`, splitting at `a * 2^j`.
///
/// Integrands like `1/ln(1+s)` or `s^-beta` on `[1, 1e8]` vary on a
/// logarithmic scale; octave panels keep the refinement local. The absolute
/// tolerance is shared evenly among panels.
pub fn integrate_geometric<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Quadrature {
    assert!(a > 0.0, "geometric panels need a positive lower bound");
    if a >= b {
        return integrate(f, a, b, tol);
    }
    let octaves = (b / a).log2().ceil().max(1.0) as usize;
    let panel_tol = Tolerance {
        abs: tol.abs / octaves as f64,
        ..tol
    };
    let mut out = Quadrature::zero();
    let mut lo = a;
    for _ in 0..octaves {
        let hi = (lo * 2.0).min(b);
        out.absorb(integrate(&f, lo, hi, panel_tol));
        lo = hi;
        if lo >= b {
            break;
        }
    }
    out
}
