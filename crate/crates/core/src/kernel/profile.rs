use serde::{Deserialize, Serialize};

/// Smooth real profile used by separable kernels and right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Profile {
    /// `amp * exp(-((x - center) / width)^2)`
    Gaussian { center: f64, width: f64, amp: f64 },
    /// `amp * (1 - ((x - center) / radius)^2)^4` on `|x - center| < radius`, zero outside.
    PolyBump { center: f64, radius: f64, amp: f64 },
}

impl Profile {
    pub fn gaussian(center: f64, width: f64) -> Self {
        Profile::Gaussian {
            center,
            width,
            amp: 1.0,
        }
    }

    pub fn poly_bump(center: f64, radius: f64) -> Self {
        Profile::PolyBump {
            center,
            radius,
            amp: 1.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Gaussian { center, width, amp } => {
                let u = (x - center) / width;
                amp * (-u * u).exp()
            }
            Profile::PolyBump {
                center,
                radius,
                amp,
            } => {
                let u = (x - center) / radius;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    amp * (1.0 - u * u).powi(4)
                }
            }
        }
    }

    /// Closed support interval, if bounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Gaussian { .. } => None,
            Profile::PolyBump { center, radius, .. } => Some((center - radius, center + radius)),
        }
    }

    /// Exact `‖p‖₂²`.
    pub fn norm_sq(&self) -> f64 {
        match *self {
            Profile::Gaussian { width, amp, .. } => {
                amp * amp * width.abs() * (std::f64::consts::PI / 2.0).sqrt()
            }
            // ∫_{-1}^{1} (1-u²)^8 du = 2^17 · 8!² / 17!
            Profile::PolyBump { radius, amp, .. } => amp * amp * radius.abs() * 65536.0 / 109395.0,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        let (c, w, a) = match *self {
            Profile::Gaussian { center, width, amp } => (center, width, amp),
            Profile::PolyBump {
                center,
                radius,
                amp,
            } => (center, radius, amp),
        };
        if !(c.is_finite() && a.is_finite() && w.is_finite() && w > 0.0) {
            return Err(format!("profile parameters must be finite with positive width: {self:?}"));
        }
        Ok(())
    }
}

/// Orthonormal Hermite functions `ψ_0, …, ψ_{k-1}`, i.e. Gram–Schmidt of
/// `s^j exp(-s²/2)` in `L²(ℝ)`, evaluated by the three-term recurrence.
pub fn hermite_functions(k: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k);
    if k == 0 {
        return out;
    }
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(h0);
    if k == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * h0);
    for j in 1..k - 1 {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * out[j] - (jf / (jf + 1.0)).sqrt() * out[j - 1];
        out.push(next);
    }
    out
}
