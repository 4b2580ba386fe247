//! Time-harmonic boundary data and far fields from the `Sigma` time trace.
//!
//! Convention: `u_hat(x, k) = int u(x, t) e^{ikt} dt`, so the incident
//! `delta(t - x.d)` becomes `e^{ik x.d}` and outgoing fields behave like
//! `e^{ik|x|} / |x|^{(n-1)/2}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavesolver::BoundaryTrace;

/// Minimum sphere points per wavelength accepted by [`far_field`].
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Window {
    /// Fraction of the record at its end covered by the cosine taper.
    pub taper_fraction: f64,
    /// Divide out the Gaussian pulse factor `exp(-k^2 eps^2 / 2)`.
    pub deconvolve: bool,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            taper_fraction: 0.1,
            deconvolve: true,
        }
    }
}

impl Window {
    fn weight(&self, t: f64, t0: f64, t1: f64) -> f64 {
        let start = t1 - self.taper_fraction * (t1 - t0);
        if t <= start || self.taper_fraction <= 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (t - start) / (t1 - start)).cos())
        }
    }
}

/// `u_hat^s` and `d_nu u_hat^s` on the `Sigma` samples for each `k > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub n: usize,
    pub ks: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// `[k][point]`.
    pub values: Vec<Vec<Complex64>>,
    pub normal_derivs: Vec<Vec<Complex64>>,
}

/// Trapezoid rule for `int f(t) e^{ikt} dt` on a uniform record.
pub fn fourier_integral(samples: &[f64], t0: f64, dt: f64, k: f64) -> Complex64 {
    let m = samples.len();
    samples
        .iter()
        .enumerate()
        .map(|(l, f)| {
            let w = if l == 0 || l + 1 == m { 0.5 } else { 1.0 };
            Complex64::from_polar(w * f * dt, k * (t0 + l as f64 * dt))
        })
        .sum()
}

pub fn time_to_frequency(
    trace: &BoundaryTrace,
    ks: &[f64],
    window: &Window,
) -> Result<FrequencyTrace> {
    let nyquist = std::f64::consts::PI / trace.dt;
    for &k in ks {
        if !(k > 0.0) {
            return Err(Error::Invalid(format!(
                "frequencies must be positive, got {k}"
            )));
        }
        if k >= nyquist {
            return Err(Error::Nyquist { k, nyquist });
        }
    }
    if !(0.0..1.0).contains(&window.taper_fraction) {
        return Err(Error::Invalid("taper fraction must lie in [0, 1)".into()));
    }
    let levels = trace.sigma.len();
    if levels < 2 {
        return Err(Error::Invalid("time record too short".into()));
    }
    let (t0, dt) = (trace.sigma_t0, trace.dt);
    let t1 = t0 + (levels - 1) as f64 * dt;
    let taper: Vec<f64> = (0..levels)
        .map(|l| window.weight(t0 + l as f64 * dt, t0, t1))
        .collect();
    let n = trace.n;
    let per_point: Vec<(Vec<f64>, Vec<f64>)> = (0..trace.sigma_points.len())
        .map(|j| {
            let p = &trace.sigma_points[j];
            let u = (0..levels)
                .map(|l| taper[l] * trace.sigma[l][j].u)
                .collect();
            let dn = (0..levels)
                .map(|l| {
                    taper[l]
                        * (0..n)
                            .map(|a| trace.sigma[l][j].grad[a] * p[a])
                            .sum::<f64>()
                })
                .collect();
            (u, dn)
        })
        .collect();
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = ks
        .par_iter()
        .map(|&k| {
            let gain = if window.deconvolve {
                (0.5 * k * k * trace.eps * trace.eps).exp()
            } else {
                1.0
            };
            per_point
                .iter()
                .map(|(u, dn)| {
                    (
                        gain * fourier_integral(u, t0, dt, k),
                        gain * fourier_integral(dn, t0, dt, k),
                    )
                })
                .unzip()
        })
        .collect();
    let (values, normal_derivs) = rows.into_iter().unzip();
    Ok(FrequencyTrace {
        n,
        ks: ks.to_vec(),
        points: trace.sigma_points.clone(),
        weights: trace.sigma_weights.clone(),
        values,
        normal_derivs,
    })
}

/// Unit directions at angles `theta` in the `(x_0, x_{n-1})` plane.
pub fn plane_directions(n: usize, thetas: &[f64]) -> Vec<[f64; 3]> {
    thetas
        .iter()
        .map(|t| {
            let mut d = [0.0; 3];
            d[0] = t.cos();
            d[n - 1] = t.sin();
            d
        })
        .collect()
}

/// `gamma_n` of the outgoing kernel's far-field asymptotics.
pub fn far_field_constant(n: usize, k: f64) -> Complex64 {
    match n {
        2 => {
            Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)
                / (8.0 * std::f64::consts::PI * k).sqrt()
        }
        _ => Complex64::new(1.0 / (4.0 * std::f64::consts::PI), 0.0),
    }
}

/// Sphere points per wavelength at `k`.
pub fn points_per_wavelength(ft: &FrequencyTrace, k: f64) -> f64 {
    let m = ft.points.len() as f64;
    let spacing = match ft.n {
        2 => 2.0 * std::f64::consts::PI / m,
        _ => (4.0 * std::f64::consts::PI / m).sqrt(),
    };
    2.0 * std::f64::consts::PI / k / spacing
}

/// `u_inf(xh) = gamma_n int_{|y|=1} (u d_nu(y) e^{-ik xh.y} - d_nu u e^{-ik xh.y}) ds(y)`.
pub fn far_field(ft: &FrequencyTrace, k: f64, directions: &[[f64; 3]]) -> Result<Vec<Complex64>> {
    let ik = ft
        .ks
        .iter()
        .position(|q| (q - k).abs() <= 1e-12 * k.max(1.0))
        .ok_or_else(|| Error::Invalid(format!("frequency {k} not in the trace")))?;
    let ppw = points_per_wavelength(ft, k);
    if ppw < MIN_POINTS_PER_WAVELENGTH {
        return Err(Error::Undersampled {
            k,
            ppw,
            required: MIN_POINTS_PER_WAVELENGTH,
        });
    }
    let gamma = far_field_constant(ft.n, k);
    let n = ft.n;
    Ok(directions
        .par_iter()
        .map(|xh| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, y) in ft.points.iter().enumerate() {
                let xy: f64 = (0..n).map(|a| xh[a] * y[a]).sum();
                let e = Complex64::from_polar(1.0, -k * xy);
                // nu(y) = y on the unit sphere
                let du_kernel = Complex64::new(0.0, -k * xy) * e;
                acc += ft.weights[j] * (ft.values[ik][j] * du_kernel - ft.normal_derivs[ik][j] * e);
            }
            gamma * acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridConfig, SpaceTimeGrid};
    use crate::wavesolver::{boundary_trace_from_fn, SolverConfig};

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::build(&GridConfig {
            t0: -2.5,
            ..GridConfig::default().with_h(1.0 / 16.0)
        })
        .unwrap()
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = grid();
        let tr = boundary_trace_from_fn(&g, &SolverConfig::default(), |_, t| {
            (-(t - 2.0) * (t - 2.0)).exp()
        });
        let win = Window {
            deconvolve: false,
            ..Default::default()
        };
        let ks = [0.5, 1.0, 3.0, 7.0];
        let ft = time_to_frequency(&tr, &ks, &win).unwrap();
        for (i, k) in ks.iter().enumerate() {
            let exact =
                Complex64::from_polar(std::f64::consts::PI.sqrt() * (-k * k / 4.0).exp(), 2.0 * k);
            for v in &ft.values[i] {
                assert!((v - exact).norm() < 1e-6, "k={k}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn conjugate_symmetry_and_zero() {
        let s: Vec<f64> = (0..200)
            .map(|l| (l as f64 * 0.07).sin() * (-(l as f64) * 0.01).exp())
            .collect();
        let a = fourier_integral(&s, -1.0, 0.03, 2.5);
        let b = fourier_integral(&s, -1.0, 0.03, -2.5);
        assert!((a - b.conj()).norm() < 1e-12);
        assert_eq!(
            fourier_integral(&[0.0; 10], 0.0, 0.1, 1.0),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn nyquist_and_sampling_errors() {
        let g = grid();
        let tr = boundary_trace_from_fn(&g, &SolverConfig::default(), |_, _| 0.0);
        let big = std::f64::consts::PI / g.dt + 1.0;
        assert!(matches!(
            time_to_frequency(&tr, &[big], &Window::default()),
            Err(Error::Nyquist { .. })
        ));
        let ft = time_to_frequency(&tr, &[1.0, 60.0], &Window::default()).unwrap();
        assert!(far_field(&ft, 1.0, &plane_directions(2, &[0.0, 1.0]))
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
        assert!(matches!(
            far_field(&ft, 60.0, &plane_directions(2, &[0.0])),
            Err(Error::Undersampled { .. })
        ));
        assert!(far_field(&ft, 2.0, &plane_directions(2, &[0.0])).is_err());
    }

    #[test]
    fn plane_wave_has_no_far_field() {
        // a field with no sources outside the ball radiates nothing
        let g = grid();
        let k = 2.0;
        let tr = boundary_trace_from_fn(&g, &SolverConfig::default(), move |x, t| {
            (-(t - 2.0 - 0.6 * x[0] - 0.8 * x[1]).powi(2) * 4.0).exp()
        });
        let ft = time_to_frequency(
            &tr,
            &[k],
            &Window {
                deconvolve: false,
                ..Default::default()
            },
        )
        .unwrap();
        let ff = far_field(&ft, k, &plane_directions(2, &[0.0, 0.7, 2.0, 4.0])).unwrap();
        let scale = ft.values[0].iter().map(|z| z.norm()).fold(0.0, f64::max);
        for z in ff {
            assert!(z.norm() < 1e-2 * scale, "{z} vs {scale}");
        }
    }
}
