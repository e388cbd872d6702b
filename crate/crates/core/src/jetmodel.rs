//! Top-hat integral (entrainment) model of an inclined dense jet.
//!
//! The model integrates volume and momentum fluxes along the centerline arc
//! length with classical RK4 at a fixed step and extracts the five
//! characteristic coordinates from the resulting trajectory. It stands in for
//! a full CFD run as the data-generating oracle of the pipeline.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jetphys::{self, JetCase, JetGeometry};
use crate::rng;

/// √(ln 20): radius, in half-widths, where a Gaussian profile falls to 5%.
pub fn five_percent_radius() -> f64 {
    20f64.ln().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// RK4 step as a fraction of the nozzle diameter.
    pub step_fraction: f64,
    /// Integration stops with a divergence error once s > s_max_factor·d·Fr.
    pub s_max_factor: f64,
    /// Entrainment coefficient in the pure-jet limit.
    pub alpha_jet: f64,
    /// Entrainment coefficient in the pure-plume limit.
    pub alpha_plume: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step_fraction: 0.1,
            s_max_factor: 200.0,
            alpha_jet: 0.057,
            alpha_plume: 0.085,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub integrator: IntegratorConfig,
    /// Enables the surface (shallow water) and bed (Coanda) closures.
    pub boundary_effects: bool,
    /// σ of the multiplicative lognormal output noise.
    pub noise_sigma: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            integrator: IntegratorConfig::default(),
            boundary_effects: true,
            noise_sigma: 0.02,
        }
    }
}

/// One centerline sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlumeState {
    pub s: f64,
    pub x: f64,
    pub z: f64,
    pub q: f64,
    pub m_h: f64,
    pub m_v: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Centerline {
    pub samples: Vec<PlumeState>,
}

impl Centerline {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes the `s,x,z,q,m_h,m_v,b,c` CSV dump.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "x", "z", "q", "m_h", "m_v", "b", "c"])?;
        for p in &self.samples {
            w.write_record(
                [p.s, p.x, p.z, p.q, p.m_h, p.m_v, p.b, p.c].map(|v| v.to_string()),
            )?;
        }
        w.flush().map_err(|e| Error::io("<centerline>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

// Integrated variables: x, z, q, m_h, m_v.
type Vector = [f64; 5];

struct Rhs {
    g0p: f64,
    q0: f64,
    alpha_jet: f64,
    alpha_plume: f64,
}

impl Rhs {
    fn half_width(q: f64, m: f64) -> f64 {
        // q = π b² u and u = m / q
        q / (PI * m).sqrt()
    }

    fn eval(&self, y: &Vector) -> Vector {
        let [_, _, q, m_h, m_v] = *y;
        let m = m_h.hypot(m_v);
        let u = m / q;
        let b = Self::half_width(q, m);
        let cos_phi = m_h / m;
        let sin_phi = m_v / m;
        let g_local = self.g0p * self.q0 / q;
        let fr_local_sq = u * u / (g_local * b);
        let blend = (sin_phi.abs() / fr_local_sq).clamp(0.0, 1.0);
        let alpha = self.alpha_jet + (self.alpha_plume - self.alpha_jet) * blend;
        [
            cos_phi,
            sin_phi,
            2.0 * PI * b * alpha * u,
            0.0,
            // -g_local·π b² with π b² = q/u
            -self.g0p * self.q0 / u,
        ]
    }
}

fn axpy(y: &Vector, k: &Vector, h: f64) -> Vector {
    std::array::from_fn(|i| y[i] + h * k[i])
}

fn rk4_step(rhs: &Rhs, y: &Vector, h: f64) -> Vector {
    let k1 = rhs.eval(y);
    let k2 = rhs.eval(&axpy(y, &k1, 0.5 * h));
    let k3 = rhs.eval(&axpy(y, &k2, 0.5 * h));
    let k4 = rhs.eval(&axpy(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Integrates the centerline from the nozzle until it passes below the bed.
pub fn integrate(case: &JetCase, config: &IntegratorConfig) -> Result<Centerline> {
    let dq = jetphys::derive(case)?;
    let theta = case.theta_rad();
    let rhs = Rhs {
        g0p: dq.g0p,
        q0: dq.q,
        alpha_jet: config.alpha_jet,
        alpha_plume: config.alpha_plume,
    };
    let h = case.d * config.step_fraction;
    let s_max = config.s_max_factor * case.d * dq.fr;
    if !(h > 0.0) {
        return Err(Error::Config(format!("non-positive step {h}")));
    }

    let state = |s: f64, y: &Vector| {
        let m = y[3].hypot(y[4]);
        PlumeState {
            s,
            x: y[0],
            z: y[1],
            q: y[2],
            m_h: y[3],
            m_v: y[4],
            b: Rhs::half_width(y[2], m),
            c: dq.q / y[2],
        }
    };

    let mut y: Vector = [0.0, 0.0, dq.q, dq.m * theta.cos(), dq.m * theta.sin()];
    let mut samples = vec![PlumeState {
        s: 0.0,
        x: 0.0,
        z: 0.0,
        q: dq.q,
        m_h: y[3],
        m_v: y[4],
        b: case.d / 2.0,
        c: 1.0,
    }];
    let max_steps = (s_max / h).ceil() as usize + 1;
    for step in 1..=max_steps {
        let next = rk4_step(&rhs, &y, h);
        let s = step as f64 * h;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                s,
                reason: "non-finite state".into(),
            });
        }
        if next[2] <= y[2] {
            return Err(Error::Numeric {
                s,
                reason: "volume flux stopped increasing".into(),
            });
        }
        if next[0] <= y[0] {
            return Err(Error::Numeric {
                s,
                reason: "trajectory turned back horizontally".into(),
            });
        }
        y = next;
        samples.push(state(s, &y));
        if y[1] < -case.h_p {
            return Ok(Centerline { samples });
        }
        if s > s_max {
            break;
        }
    }
    Err(Error::Divergence { s_max })
}

/// Vertex of the parabola through three points.
fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<(f64, f64)> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) || !a.is_finite() {
        return None;
    }
    let bcoef = d01 - a * (x0 + x1);
    let xv = -bcoef / (2.0 * a);
    // Newton form evaluated at the vertex.
    let yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
    Some((xv, yv))
}

fn descending_crossing(samples: &[PlumeState], from: usize, level: f64) -> Option<f64> {
    samples[from..].windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.z > level && b.z <= level {
            Some(a.x + (level - a.z) * (b.x - a.x) / (b.z - a.z))
        } else {
            None
        }
    })
}

/// Extracts peak, terminal rise, return and impact points from a centerline.
pub fn extract_geometry(centerline: &Centerline, case: &JetCase) -> Result<JetGeometry> {
    let s = &centerline.samples;
    if s.len() < 3 {
        return Err(Error::Shape(format!("only {} samples", s.len())));
    }
    let imax = s
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.z > s[best].z { i } else { best });
    if imax == 0 || imax == s.len() - 1 {
        return Err(Error::Shape("no interior maximum of z".into()));
    }
    let (lo, mid, hi) = (&s[imax - 1], &s[imax], &s[imax + 1]);
    let (x_m, z_m) =
        parabola_vertex((lo.x, lo.z), (mid.x, mid.z), (hi.x, hi.z)).unwrap_or((mid.x, mid.z));
    let b_peak = {
        let (a, b) = if x_m < mid.x { (lo, mid) } else { (mid, hi) };
        let t = ((x_m - a.x) / (b.x - a.x)).clamp(0.0, 1.0);
        a.b + t * (b.b - a.b)
    };
    let z_t = z_m + b_peak * five_percent_radius();
    let x_r = descending_crossing(s, imax, 0.0).ok_or_else(|| {
        Error::Truncation("centerline never returns to the nozzle elevation".into())
    })?;
    let x_i = descending_crossing(s, imax, -case.h_p)
        .ok_or_else(|| Error::Truncation("centerline never reaches the bed".into()))?;
    Ok(JetGeometry {
        x_m,
        z_m,
        z_t,
        x_r,
        x_i,
    })
}

/// Outcome of one oracle evaluation, with the regime closures that fired.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub geometry: JetGeometry,
    pub centerline: Centerline,
    /// The terminal rise proxy reached the free surface and was clamped to H.
    pub surface_clamped: bool,
    pub shallow_stretch: f64,
    pub coanda_stretch: f64,
}

/// Applies the surface and bed closures to a raw geometry.
fn apply_boundaries(raw: JetGeometry, case: &JetCase) -> Result<(JetGeometry, bool, f64, f64)> {
    let dq = jetphys::derive(case)?;
    let mut g = raw;
    let mut clamped = false;
    if g.z_t > case.depth {
        g.z_t = case.depth;
        g.z_m = g.z_m.min(case.depth);
        clamped = true;
    }
    let shallow = 1.0 + 0.3 * (dq.shallow_ratio - 0.65).clamp(0.0, 1.0);
    g.x_m *= shallow;
    g.x_r *= shallow;
    g.x_i *= shallow;
    let coanda = if dq.coanda_ratio < 0.2 {
        1.0 + 0.2 * (0.2 - dq.coanda_ratio) / 0.2
    } else {
        1.0
    };
    g.x_r *= coanda;
    g.x_i *= coanda;
    Ok((g, clamped, shallow, coanda))
}

/// Multiplies each output by exp(σ·N(0,1)) and restores the ordering
/// invariants that independent noise can break.
fn perturb(g: JetGeometry, sigma: f64, seed: u64) -> JetGeometry {
    let mut r = rng::rng(seed);
    let mut v = g.to_array();
    for x in &mut v {
        let n: f64 = StandardNormal.sample(&mut r);
        *x *= (sigma * n).exp();
    }
    let mut out = JetGeometry::from_array(v);
    out.x_r = out.x_r.max(out.x_m);
    out.x_i = out.x_i.max(out.x_r);
    out.z_t = out.z_t.max(out.z_m);
    out
}

pub fn oracle_run(case: &JetCase, config: &OracleConfig, noise_seed: Option<u64>) -> Result<OracleRun> {
    let centerline = integrate(case, &config.integrator)?;
    let raw = extract_geometry(&centerline, case)?;
    let (mut geometry, surface_clamped, shallow_stretch, coanda_stretch) = if config.boundary_effects {
        apply_boundaries(raw, case)?
    } else {
        (raw, false, 1.0, 1.0)
    };
    if let Some(seed) = noise_seed {
        geometry = perturb(geometry, config.noise_sigma, seed);
    }
    geometry.validate()?;
    Ok(OracleRun {
        geometry,
        centerline,
        surface_clamped,
        shallow_stretch,
        coanda_stretch,
    })
}

/// Geometry of one case; noisy and seed-deterministic when `noise_seed` is set.
pub fn oracle(case: &JetCase, config: &OracleConfig, noise_seed: Option<u64>) -> Result<JetGeometry> {
    oracle_run(case, config, noise_seed).map(|r| r.geometry)
}
