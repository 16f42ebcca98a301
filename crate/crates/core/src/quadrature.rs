//! Composite Gauss–Legendre rules on the unit interval.
//!
//! Continuous channel expectations are taken in the CDF domain
//! `E[g(|h|)] = ∫₀¹ g(F⁻¹(u)) du`, which maps the unbounded magnitude axis to
//! `[0, 1]`. The last panel is graded geometrically towards `u = 1` because
//! integrands that grow like `|h|²` pick up a logarithmic singularity there.

use std::sync::OnceLock;

/// Panels across the whole unit interval.
pub const PANELS: usize = 256;
/// Gauss–Legendre points per panel.
pub const ORDER: usize = 10;
const GRADE_LEVELS: usize = 40;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn push_panel(out: &mut Vec<(f64, f64)>, a: f64, b: f64) {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (xi, wi) in x.iter().zip(w) {
        out.push((mid + half * xi, half * wi));
    }
}

/// Weighted nodes `(u, w)` integrating over `[0, 1]`, with panel edges forced
/// at every cut in `(0, 1)`.
pub fn unit_nodes(cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut edges: Vec<f64> = cuts.iter().copied().filter(|c| *c > 0.0 && *c < 1.0).collect();
    edges.push(0.0);
    edges.push(1.0);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut out = Vec::with_capacity((PANELS + GRADE_LEVELS + 2 * edges.len()) * ORDER);
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b - a;
        let panels = ((PANELS as f64 * len).ceil() as usize).max(1);
        let step = len / panels as f64;
        let last_to_one = b == 1.0;
        for k in 0..panels {
            let lo = a + k as f64 * step;
            let hi = if k + 1 == panels { b } else { lo + step };
            if last_to_one && k + 1 == panels {
                // Geometric grading of [lo, 1].
                let mut left = lo;
                let width = 1.0 - lo;
                for level in 1..=GRADE_LEVELS {
                    let right = 1.0 - width * 0.5f64.powi(level as i32);
                    push_panel(&mut out, left, right);
                    left = right;
                }
            } else {
                push_panel(&mut out, lo, hi);
            }
        }
    }
    out
}

/// `∫₀¹ f(u) du` on [`unit_nodes`].
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, cuts: &[f64]) -> f64 {
    unit_nodes(cuts).into_iter().map(|(u, w)| w * f(u)).sum()
}
