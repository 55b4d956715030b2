use nalgebra::{DMatrix, DVector};

/// `cos(2π m / nt)` and `sin(2π m / nt)` for `m in 0..nt`.
///
/// Values are reduced to the first octant before calling the libm routines,
/// so quarter-period samples come out as exact zeros and ones. `nt` must be
/// a multiple of 4.
pub fn unit_circle(nt: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(nt >= 4 && nt % 4 == 0, "sample count must be a multiple of 4");
    let mut c = vec![0.0; nt];
    let mut s = vec![0.0; nt];
    let step = std::f64::consts::TAU / nt as f64;
    for m in 0..nt {
        // Work with 8m to locate the octant without rounding.
        let eighth = 8 * m;
        let oct = eighth / nt;
        let (cv, sv) = match oct {
            0 => (cos_i(m, step), sin_i(m, step)),
            1 => {
                let r = nt / 4 - m;
                (sin_i(r, step), cos_i(r, step))
            }
            2 => {
                let r = m - nt / 4;
                (-sin_i(r, step), cos_i(r, step))
            }
            3 => {
                let r = nt / 2 - m;
                (-cos_i(r, step), sin_i(r, step))
            }
            _ if 2 * m == nt => (-1.0, 0.0),
            // Second half: reflect the already filled first half.
            _ => (c[nt - m], -s[nt - m]),
        };
        c[m] = cv;
        s[m] = sv;
    }
    (c, s)
}

fn cos_i(m: usize, step: f64) -> f64 {
    (m as f64 * step).cos()
}

fn sin_i(m: usize, step: f64) -> f64 {
    (m as f64 * step).sin()
}

/// Precomputed synthesis and analysis matrices for `H` harmonics on `nt`
/// equally spaced samples over one period.
#[derive(Debug, Clone)]
pub struct Basis {
    pub harmonics: usize,
    pub nt: usize,
    /// `nt × (2H+1)`: displacement samples are `synth · X`.
    pub synth: DMatrix<f64>,
    /// `nt × (2H+1)`: velocity samples are `ω · synth_dot · X`.
    pub synth_dot: DMatrix<f64>,
    /// `(2H+1) × nt`: coefficients are `analysis · f`.
    pub analysis: DMatrix<f64>,
}

impl Basis {
    pub fn new(harmonics: usize, nt: usize) -> Self {
        let (c, s) = unit_circle(nt);
        let n = 2 * harmonics + 1;
        let mut synth = DMatrix::zeros(nt, n);
        let mut synth_dot = DMatrix::zeros(nt, n);
        let mut analysis = DMatrix::zeros(n, nt);
        let two_over = 2.0 / nt as f64;
        for j in 0..nt {
            synth[(j, 0)] = 1.0;
            analysis[(0, j)] = 1.0 / nt as f64;
            for k in 1..=harmonics {
                let m = (k * j) % nt;
                let kf = k as f64;
                synth[(j, 2 * k - 1)] = c[m];
                synth[(j, 2 * k)] = s[m];
                synth_dot[(j, 2 * k - 1)] = -kf * s[m];
                synth_dot[(j, 2 * k)] = kf * c[m];
                analysis[(2 * k - 1, j)] = two_over * c[m];
                analysis[(2 * k, j)] = two_over * s[m];
            }
        }
        Self {
            harmonics,
            nt,
            synth,
            synth_dot,
            analysis,
        }
    }

    pub fn n_coeffs(&self) -> usize {
        2 * self.harmonics + 1
    }

    pub fn displacement(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.synth * x
    }

    pub fn velocity(&self, x: &DVector<f64>, omega: f64) -> DVector<f64> {
        (&self.synth_dot * x) * omega
    }

    pub fn coefficients(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.analysis * f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_points_are_exact() {
        let (c, s) = unit_circle(16);
        assert_eq!(c[4], 0.0);
        assert_eq!(s[4], 1.0);
        assert_eq!(c[8], -1.0);
        assert_eq!(s[8], 0.0);
        assert_eq!(c[12], 0.0);
        assert_eq!(s[12], -1.0);
    }

    #[test]
    fn table_matches_libm() {
        for nt in [4usize, 8, 64, 1024] {
            let (c, s) = unit_circle(nt);
            for m in 0..nt {
                let a = std::f64::consts::TAU * m as f64 / nt as f64;
                assert!((c[m] - a.cos()).abs() < 1e-15, "nt={nt} m={m}");
                assert!((s[m] - a.sin()).abs() < 1e-15, "nt={nt} m={m}");
            }
        }
    }
}
