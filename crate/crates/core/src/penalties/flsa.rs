//! Fused lasso signal approximation on a chain:
//! `argmin_t 0.5 ||t - y||^2 + tau * sum_j |t_{j+1} - t_j|`.
//!
//! Forward pass over the derivative of the running message, which is piecewise
//! linear and stored as knots in a two-ended array; clamping the derivative to
//! `[-tau, tau]` yields back-pointers `tm[k] <= tp[k]`. The backward pass clamps
//! each coordinate into its back-pointer interval. Linear worst-case time.

/// Caller-owned scratch buffers, reusable across calls.
#[derive(Debug, Default, Clone)]
pub struct FlsaWorkspace {
    knots: Vec<f64>,
    slope: Vec<f64>,
    offset: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FlsaWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Convenience wrapper allocating its own workspace.
pub fn flsa(y: &[f64], tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    flsa_into(y, tau, &mut out, &mut FlsaWorkspace::new());
    out
}

pub fn flsa_into(y: &[f64], tau: f64, out: &mut [f64], ws: &mut FlsaWorkspace) {
    let n = y.len();
    assert_eq!(out.len(), n, "output length must match input");
    if n == 0 {
        return;
    }
    if n == 1 || tau <= 0.0 {
        out.copy_from_slice(y);
        return;
    }

    ws.knots.resize(2 * n, 0.0);
    ws.slope.resize(2 * n, 0.0);
    ws.offset.resize(2 * n, 0.0);
    ws.lower.resize(n - 1, 0.0);
    ws.upper.resize(n - 1, 0.0);
    let FlsaWorkspace {
        knots: x,
        slope: a,
        offset: b,
        lower: tm,
        upper: tp,
    } = ws;

    tm[0] = y[0] - tau;
    tp[0] = y[0] + tau;
    let mut l = n - 1;
    let mut r = n;
    x[l] = tm[0];
    x[r] = tp[0];
    a[l] = 1.0;
    b[l] = tau - y[0];
    a[r] = -1.0;
    b[r] = y[0] + tau;
    let mut a_first = 1.0;
    let mut b_first = -tau - y[1];
    let mut a_last = -1.0;
    let mut b_last = y[1] - tau;

    for k in 1..n - 1 {
        // leftmost point where the message derivative exceeds -tau
        let (mut a_lo, mut b_lo) = (a_first, b_first);
        let mut lo = l;
        while lo <= r {
            if a_lo * x[lo] + b_lo > -tau {
                break;
            }
            a_lo += a[lo];
            b_lo += b[lo];
            lo += 1;
        }
        tm[k] = (-tau - b_lo) / a_lo;
        l = lo - 1;
        x[l] = tm[k];

        // rightmost point where it falls below tau
        let (mut a_hi, mut b_hi) = (a_last, b_last);
        let mut hi = r as isize;
        while hi >= l as isize {
            let h = hi as usize;
            if -a_hi * x[h] - b_hi < tau {
                break;
            }
            a_hi += a[h];
            b_hi += b[h];
            hi -= 1;
        }
        tp[k] = (tau + b_hi) / -a_hi;
        r = (hi + 1) as usize;
        x[r] = tp[k];

        a[l] = a_lo;
        b[l] = b_lo + tau;
        a[r] = a_hi;
        b[r] = b_hi + tau;
        a_first = 1.0;
        b_first = -tau - y[k + 1];
        a_last = -1.0;
        b_last = y[k + 1] - tau;
    }

    // zero of the final message derivative
    let (mut a_lo, mut b_lo) = (a_first, b_first);
    let mut lo = l;
    while lo <= r {
        if a_lo * x[lo] + b_lo > 0.0 {
            break;
        }
        a_lo += a[lo];
        b_lo += b[lo];
        lo += 1;
    }
    out[n - 1] = -b_lo / a_lo;

    for k in (0..n - 1).rev() {
        out[k] = out[k + 1].clamp(tm[k], tp[k]);
    }
}

/// `0.5 ||t - y||^2 + tau * TV(t)`.
pub fn flsa_objective(t: &[f64], y: &[f64], tau: f64) -> f64 {
    let fit: f64 = t.iter().zip(y).map(|(a, b)| 0.5 * (a - b).powi(2)).sum();
    let tv: f64 = t.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    fit + tau * tv
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Projected gradient on the dual `min 0.5 ||y - D^T u||^2, |u_k| <= tau`,
    /// with primal recovery `t = y - D^T u`.
    fn dual_reference(y: &[f64], tau: f64) -> Vec<f64> {
        let n = y.len();
        let mut u = vec![0.0; n - 1];
        let primal = |u: &[f64]| -> Vec<f64> {
            let mut t = y.to_vec();
            for (k, &uk) in u.iter().enumerate() {
                // D row k: -e_k + e_{k+1}
                t[k] += uk;
                t[k + 1] -= uk;
            }
            t
        };
        for _ in 0..200_000 {
            let t = primal(&u);
            for k in 0..n - 1 {
                // gradient of the dual objective is -(D t)_k
                let g = -(t[k + 1] - t[k]);
                u[k] = (u[k] - 0.25 * g).clamp(-tau, tau);
            }
        }
        primal(&u)
    }

    #[test]
    fn constant_input_is_fixed() {
        assert_eq!(flsa(&[2.0, 2.0, 2.0, 2.0], 3.0), vec![2.0; 4]);
    }

    #[test]
    fn two_point_cases() {
        assert_eq!(flsa(&[1.0, -1.0], 1.0), vec![0.0, 0.0]);
        assert_eq!(flsa(&[3.0, 1.0], 0.5), vec![2.5, 1.5]);
    }

    #[test]
    fn trivial_lengths_and_zero_tau() {
        assert!(flsa(&[], 1.0).is_empty());
        assert_eq!(flsa(&[4.0], 1.0), vec![4.0]);
        assert_eq!(flsa(&[1.0, 5.0, -2.0], 0.0), vec![1.0, 5.0, -2.0]);
    }

    #[test]
    fn matches_dual_projected_gradient() {
        let signals: [&[f64]; 4] = [
            &[0.3, 2.1, -1.4, 0.9, 0.8, 3.3, -0.2, 1.0, 1.1, -2.5],
            &[5.0, 4.0, 3.0, 2.0, 1.0, 0.0],
            &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0],
            &[0.0, 0.0, 10.0, 0.0, 0.0, -7.0, 2.0],
        ];
        for y in signals {
            for tau in [0.05, 0.4, 1.3, 6.0] {
                let got = flsa(y, tau);
                let reference = dual_reference(y, tau);
                for (g, r) in got.iter().zip(&reference) {
                    assert!(
                        (g - r).abs() < 1e-6,
                        "y={y:?} tau={tau}: {got:?} vs {reference:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn workspace_reuse_across_lengths() {
        let mut ws = FlsaWorkspace::new();
        let long = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 0.0, 3.0];
        let mut out = vec![0.0; long.len()];
        flsa_into(&long, 0.7, &mut out, &mut ws);
        let mut short = vec![0.0; 2];
        flsa_into(&[3.0, 1.0], 0.5, &mut short, &mut ws);
        assert_eq!(short, vec![2.5, 1.5]);
        assert_eq!(out, flsa(&long, 0.7));
    }
}
