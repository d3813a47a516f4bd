use crate::error::{Error, Result};

use super::special::{gamma_fn, BesselK};

/// Upper bound accepted for the smoothness parameter.
pub const MAX_SMOOTHNESS: f64 = 5.0;

/// Scaled distances beyond this evaluate to exactly zero.
const UNDERFLOW_DISTANCE: f64 = 700.0;

/// Scaled distances served by the table; outside it the direct formula is used.
const TABLE_MIN: f64 = 1e-10;
const TABLE_MAX: f64 = 600.0;
/// Piece width in `ln x`.
const TABLE_PIECE: f64 = 0.5;
const TABLE_NODES: usize = 16;

/// Matérn parameters: variance, spatial range, smoothness, plus a nugget that
/// covariance assembly adds on the diagonal only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub nugget: f64,
}

impl MaternParams {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Result<Self> {
        Self::with_nugget(theta1, theta2, theta3, 0.0)
    }

    pub fn with_nugget(theta1: f64, theta2: f64, theta3: f64, nugget: f64) -> Result<Self> {
        let p = Self {
            theta1,
            theta2,
            theta3,
            nugget,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_theta(theta: [f64; 3], nugget: f64) -> Result<Self> {
        Self::with_nugget(theta[0], theta[1], theta[2], nugget)
    }

    pub fn theta(&self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta1 > 0.0
            && self.theta2 > 0.0
            && self.theta3 > 0.0
            && self.theta3 <= MAX_SMOOTHNESS
            && self.theta1.is_finite()
            && self.theta2.is_finite()
            && self.nugget >= 0.0
            && self.nugget.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "invalid Matérn parameters theta=({}, {}, {}), nugget={}",
                self.theta1, self.theta2, self.theta3, self.nugget
            )))
        }
    }
}

/// A Matérn covariance function ready for repeated evaluation.
///
/// `C(r) = theta1 / (2^(theta3-1) G(theta3)) (r/theta2)^theta3 K_theta3(r/theta2)`
/// with `C(0) = theta1`.
#[derive(Debug, Clone)]
pub struct Matern {
    params: MaternParams,
    scale: f64,
    bessel: BesselK,
    table: Option<LogTable>,
}

impl Matern {
    pub fn new(params: MaternParams) -> Result<Self> {
        params.validate()?;
        let nu = params.theta3;
        let scale = params.theta1 / (2f64.powf(nu - 1.0) * gamma_fn(nu)?);
        Ok(Self {
            params,
            scale,
            bessel: BesselK::new(nu)?,
            table: None,
        })
    }

    /// Like [`Matern::new`], but for non-half-integer smoothness `ln C` is
    /// tabulated as piecewise Chebyshev interpolants in `ln(r/theta2)`.
    /// The absolute error in `ln C` is about 1e-14, so the relative error only
    /// grows in the far tail where `C` is negligible. Several times faster
    /// than the direct formula, which pays off above a few thousand evaluations.
    pub fn tabulated(params: MaternParams) -> Result<Self> {
        let mut m = Self::new(params)?;
        if !m.bessel.is_half_integer() {
            m.table = Some(LogTable::build(&m));
        }
        Ok(m)
    }

    pub fn params(&self) -> &MaternParams {
        &self.params
    }

    /// Covariance at distance `r >= 0`; the nugget is not included.
    pub fn eval(&self, r: f64) -> f64 {
        let p = &self.params;
        if r <= 0.0 {
            return p.theta1;
        }
        let x = r / p.theta2;
        if x > UNDERFLOW_DISTANCE {
            return 0.0;
        }
        match &self.table {
            Some(t) if (TABLE_MIN..=TABLE_MAX).contains(&x) => t.eval(x).min(p.theta1),
            _ => self.direct(x),
        }
    }

    fn direct(&self, x: f64) -> f64 {
        let p = &self.params;
        let pow = if self.bessel.is_half_integer() {
            x.powi((p.theta3 - 0.5) as i32) * x.sqrt()
        } else {
            x.powf(p.theta3)
        };
        let v = self.scale * pow * self.bessel.eval(x);
        // K_nu overflows before x^nu K_nu(x) leaves its limit theta1.
        if v.is_finite() {
            v.min(p.theta1)
        } else {
            p.theta1
        }
    }
}

#[derive(Debug, Clone)]
struct LogTable {
    theta1: f64,
    t0: f64,
    coef: Vec<[f64; TABLE_NODES]>,
}

impl LogTable {
    fn build(m: &Matern) -> Self {
        let t0 = TABLE_MIN.ln();
        let pieces = ((TABLE_MAX.ln() - t0) / TABLE_PIECE).ceil() as usize;
        let n = TABLE_NODES;
        let theta1 = m.params.theta1;
        let coef = (0..pieces)
            .map(|p| {
                let a = t0 + p as f64 * TABLE_PIECE;
                let f: Vec<f64> = (0..n)
                    .map(|k| {
                        let s = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
                        let x = (a + 0.5 * TABLE_PIECE * (1.0 + s)).exp();
                        (m.direct(x) / theta1).ln()
                    })
                    .collect();
                let mut c = [0.0; TABLE_NODES];
                for (j, cj) in c.iter_mut().enumerate() {
                    let sum: f64 = f
                        .iter()
                        .enumerate()
                        .map(|(k, fk)| {
                            fk * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos()
                        })
                        .sum();
                    *cj = 2.0 * sum / n as f64;
                }
                c[0] *= 0.5;
                c
            })
            .collect();
        Self { theta1, t0, coef }
    }

    fn eval(&self, x: f64) -> f64 {
        let pos = (x.ln() - self.t0) / TABLE_PIECE;
        let i = (pos as usize).min(self.coef.len() - 1);
        let s = 2.0 * (pos - i as f64) - 1.0;
        let c = &self.coef[i];
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c[1..].iter().rev() {
            let b0 = 2.0 * s * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        self.theta1 * (s * b1 - b2 + c[0]).exp()
    }
}

/// One-off Matérn evaluation; prefer [`Matern`] inside loops.
pub fn matern(r: f64, params: &MaternParams) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("negative distance {r}")));
    }
    Ok(Matern::new(*params)?.eval(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::bessel_k;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zero_distance_is_variance() {
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        assert_eq!(matern(0.0, &p).unwrap(), 1.0);
        let p = MaternParams::with_nugget(2.5, 0.3, 1.7, 0.1).unwrap();
        assert_eq!(matern(0.0, &p).unwrap(), 2.5);
    }

    #[test]
    fn exponential_case() {
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let v = matern(0.1, &p).unwrap();
        assert!(rel(v, (-1.0f64).exp()) < 1e-14);
        assert!((v - 0.367_879_4).abs() < 1e-7);
    }

    #[test]
    fn whittle_case() {
        let p = MaternParams::new(1.0, 0.1, 1.0).unwrap();
        let v = matern(0.1, &p).unwrap();
        assert!(rel(v, bessel_k(1.0, 1.0).unwrap()) < 1e-14);
    }

    #[test]
    fn decays_to_zero() {
        for nu in [0.2, 0.5, 1.0, 2.5, 5.0] {
            let p = MaternParams::new(3.0, 0.05, nu).unwrap();
            assert!(matern(100.0 * 0.05, &p).unwrap() < 1e-10 * 3.0, "{nu}");
            assert_eq!(matern(800.0 * 0.05, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn tiny_distances_stay_finite() {
        for nu in [0.1, 1.0, 5.0] {
            let p = MaternParams::new(1.0, 1.0, nu).unwrap();
            for r in [1e-300, 1e-100, 1e-20, 1e-8] {
                let v = matern(r, &p).unwrap();
                assert!(v.is_finite() && v > 0.0 && v <= 1.0, "{nu} {r} {v}");
            }
        }
    }

    #[test]
    fn invalid_params() {
        assert!(MaternParams::new(0.0, 0.1, 0.5).is_err());
        assert!(MaternParams::new(1.0, -0.1, 0.5).is_err());
        assert!(MaternParams::new(1.0, 0.1, 5.1).is_err());
        assert!(MaternParams::with_nugget(1.0, 0.1, 0.5, -1e-9).is_err());
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        assert!(matern(-1.0, &p).is_err());
    }

    #[test]
    fn table_agrees_with_direct_formula() {
        for nu in [0.05, 0.3, 0.77, 1.0, 1.37, 2.2, 3.0, 4.9] {
            let p = MaternParams::new(1.7, 0.2, nu).unwrap();
            let (fast, exact) = (Matern::tabulated(p).unwrap(), Matern::new(p).unwrap());
            for i in 0..4000 {
                let x = 10f64.powf(-11.0 + 14.0 * i as f64 / 4000.0);
                let (a, b) = (fast.eval(0.2 * x), exact.eval(0.2 * x));
                let bound = 1e-14 * (4.0 + (b / 1.7).ln().abs());
                assert!(rel(a, b) < bound || b < 1e-290, "nu={nu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn half_integer_table_is_direct() {
        let p = MaternParams::new(1.0, 0.1, 2.5).unwrap();
        let (fast, exact) = (Matern::tabulated(p).unwrap(), Matern::new(p).unwrap());
        for r in [1e-6, 0.01, 0.3, 2.0] {
            assert_eq!(fast.eval(r), exact.eval(r));
        }
    }

    proptest! {
        #[test]
        fn non_increasing_in_distance(t1 in 0.1f64..5.0, t2 in 0.005f64..2.0, t3 in 0.05f64..5.0) {
            let m = Matern::new(MaternParams::new(t1, t2, t3).unwrap()).unwrap();
            let mut prev = m.eval(0.0);
            for i in 1..=400 {
                let r = t2 * 20.0 * i as f64 / 400.0;
                let v = m.eval(r);
                prop_assert!(v <= prev * (1.0 + 1e-12), "r={} {} > {}", r, v, prev);
                prop_assert!(v >= 0.0 && v <= t1);
                prev = v;
            }
        }

        #[test]
        fn reductions(t1 in 0.1f64..5.0, t2 in 0.005f64..2.0, r in 0.0f64..3.0) {
            let e = matern(r, &MaternParams::new(t1, t2, 0.5).unwrap()).unwrap();
            prop_assert!(rel(e, t1 * (-r / t2).exp()) < 1e-9 || e < 1e-290);
            if r > 0.0 {
                let w = matern(r, &MaternParams::new(t1, t2, 1.0).unwrap()).unwrap();
                let x = r / t2;
                if x <= 700.0 {
                    let closed = t1 * x * bessel_k(1.0, x).unwrap();
                    prop_assert!(rel(w, closed) < 1e-9 || closed < 1e-290);
                }
            }
        }
    }
}
