//! Dormand-Prince 5(4) with step-size control on selected components.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub const DIM: usize = 6;
pub type State = [f64; DIM];

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Number of leading components entering the error norm.
    pub controlled: usize,
    pub h_max: f64,
}

pub enum Control {
    Continue,
    Stop,
}

/// Integrates from `(x0, y0)` towards `x_end`, calling `on_step(x_prev, y_prev,
/// x, y)` after every accepted step. Returns the final point.
pub fn integrate<F, S>(
    rhs: F,
    x0: f64,
    y0: State,
    x_end: f64,
    h0: f64,
    tol: Tolerances,
    mut on_step: S,
) -> Result<(f64, State)>
where
    F: Fn(f64, &State) -> State,
    S: FnMut(f64, &State, f64, &State) -> Control,
{
    let mut x = x0;
    let mut y = y0;
    let mut h = h0.min(tol.h_max).min(x_end - x0);
    let mut k = [[0.0; DIM]; 7];
    k[0] = rhs(x, &y);
    while x < x_end {
        if x + h > x_end {
            h = x_end - x;
        }
        let mut yn = y;
        for s in 1..7 {
            let mut ys = y;
            for j in 0..s {
                let a = A[s][j];
                if a != 0.0 {
                    for d in 0..DIM {
                        ys[d] += h * a * k[j][d];
                    }
                }
            }
            k[s] = rhs(x + C[s] * h, &ys);
            if s == 6 {
                yn = ys;
            }
        }
        let mut err: f64 = 0.0;
        for d in 0..tol.controlled {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][d];
            }
            let sc = tol.atol + tol.rtol * y[d].abs().max(yn[d].abs());
            err = err.max((h * e / sc).abs());
        }
        if !err.is_finite() {
            h *= 0.2;
        } else if err <= 1.0 {
            let xp = x;
            let yp = y;
            x += h;
            y = yn;
            k[0] = k[6];
            if let Control::Stop = on_step(xp, &yp, x, &y) {
                return Ok((x, y));
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * fac).min(tol.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
        if h < 1e-14 * x.abs().max(1.0) {
            return Err(Error::StepUnderflow(x));
        }
    }
    Ok((x, y))
}
