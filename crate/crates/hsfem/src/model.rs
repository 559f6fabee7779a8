//! Constitutive closures of the cell model: the power pressure law
//! p(n) = k/(k-1) n^(k-1), its inverse, the saturation density
//! N_max(k) = n(P_max), the truncated growth law G, and initial data.

use crate::error::{Error, Result};

/// Growth rate as a function of pressure. Admissible laws satisfy G(0) > 0,
/// G = 0 at and above the homeostatic pressure, and strict decay in between.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthLaw {
    /// scale * atan(slope * (P_max - p)_+); the reference choice is
    /// scale = 200/pi, slope = 4.
    Arctan { scale: f64, slope: f64 },
    /// Monotone piecewise-linear table of (pressure, rate) knots, clamped to
    /// zero at P_max. Exists so property tests can stress the scheme with
    /// other admissible laws.
    Table { points: Vec<(f64, f64)> },
}

impl GrowthLaw {
    pub fn arctan_default() -> Self {
        GrowthLaw::Arctan {
            scale: 200.0 / std::f64::consts::PI,
            slope: 4.0,
        }
    }

    pub fn eval(&self, p: f64, p_max: f64) -> f64 {
        if p >= p_max {
            return 0.0;
        }
        match self {
            GrowthLaw::Arctan { scale, slope } => scale * (slope * (p_max - p)).atan(),
            GrowthLaw::Table { points } => {
                if points.is_empty() {
                    return 0.0;
                }
                if p <= points[0].0 {
                    return points[0].1;
                }
                for w in points.windows(2) {
                    let (p0, g0) = w[0];
                    let (p1, g1) = w[1];
                    if p <= p1 {
                        let s = (p - p0) / (p1 - p0);
                        return g0 + s * (g1 - g0);
                    }
                }
                // beyond the last knot but below P_max: taper linearly to zero
                let (pl, gl) = *points.last().unwrap();
                if pl >= p_max {
                    return 0.0;
                }
                gl * (p_max - p) / (p_max - pl)
            }
        }
    }

    /// Check the three admissibility conditions, sampling 1024 points of
    /// (0, P_max) for strict decay.
    pub fn validate(&self, p_max: f64) -> Result<()> {
        if !(p_max > 0.0) {
            return Err(Error::InvalidArgument(format!("P_max must be positive, got {p_max}")));
        }
        if !(self.eval(0.0, p_max) > 0.0) {
            return Err(Error::InvalidArgument("growth law must satisfy G(0) > 0".into()));
        }
        if self.eval(p_max, p_max) != 0.0 || self.eval(2.0 * p_max, p_max) != 0.0 {
            return Err(Error::InvalidArgument(
                "growth law must vanish at and above P_max".into(),
            ));
        }
        const SAMPLES: usize = 1024;
        let mut prev = self.eval(0.0, p_max);
        for i in 1..SAMPLES {
            let p = p_max * i as f64 / SAMPLES as f64;
            let g = self.eval(p, p_max);
            if !(g < prev) {
                return Err(Error::InvalidArgument(format!(
                    "growth law is not strictly decreasing near p = {p}"
                )));
            }
            prev = g;
        }
        Ok(())
    }
}

/// Physical and discretization parameters of one run.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Pressure-law exponent parameter, an integer >= 2.
    pub k: u32,
    /// Active-motion (random migration) coefficient, >= 0.
    pub nu: f64,
    /// Homeostatic pressure threshold, > 0.
    pub p_max: f64,
    pub growth: GrowthLaw,
    /// Amplitude of the Gaussian initial datum.
    pub alpha: f64,
    /// Uniform time step.
    pub tau: f64,
    pub t_final: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k < 2 {
            problems.push(format!("k must be an integer >= 2, got {}", self.k));
        }
        if !(self.nu >= 0.0) {
            problems.push(format!("nu must be >= 0, got {}", self.nu));
        }
        if !(self.p_max > 0.0) {
            problems.push(format!("P_max must be > 0, got {}", self.p_max));
        }
        if !(self.alpha > 0.0) {
            problems.push(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.tau > 0.0) {
            problems.push(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.t_final >= 0.0) {
            problems.push(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidArgument(problems.join("; ")));
        }
        self.growth.validate(self.p_max)
    }

    pub fn n_max(&self) -> f64 {
        n_max(self.k, self.p_max)
    }

    pub fn growth_at_zero(&self) -> f64 {
        self.growth.eval(0.0, self.p_max)
    }
}

/// p(n) = k/(k-1) n^(k-1), evaluated in the log domain for large k.
pub fn pressure(n: f64, k: u32) -> Result<f64> {
    if n < 0.0 {
        return Err(Error::Domain(format!("pressure is undefined for negative density {n}")));
    }
    if k < 2 {
        return Err(Error::Domain(format!("pressure law requires k >= 2, got {k}")));
    }
    if n == 0.0 {
        return Ok(0.0);
    }
    let km1 = (k - 1) as f64;
    Ok((km1 * n.ln()).exp() * k as f64 / km1)
}

/// Inverse pressure law n(p) = ((k-1)/k * p)^(1/(k-1)).
pub fn density_of_pressure(p: f64, k: u32) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::Domain(format!("density is undefined for negative pressure {p}")));
    }
    if k < 2 {
        return Err(Error::Domain(format!("pressure law requires k >= 2, got {k}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let km1 = (k - 1) as f64;
    Ok(((km1 / k as f64 * p).ln() / km1).exp())
}

/// Saturation density N_max(k) = n(P_max); densities in [0, N_max] map onto
/// pressures in [0, P_max] and vice versa.
pub fn n_max(k: u32, p_max: f64) -> f64 {
    density_of_pressure(p_max, k).expect("P_max validated positive")
}

/// Growth rate at pressure p.
pub fn growth(p: f64, law: &GrowthLaw, p_max: f64) -> f64 {
    law.eval(p, p_max)
}

/// The Gaussian initial datum alpha * exp(-(x^2 + y^2)).
pub fn initial_gaussian(alpha: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| alpha * (-(x * x + y * y)).exp()
}

/// n^k for integer k, exact at zero.
pub(crate) fn pow_ki(n: f64, k: u32) -> f64 {
    n.powi(k as i32)
}
