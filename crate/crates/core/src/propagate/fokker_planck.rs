use num_complex::Complex64;

use super::closed::EdgeMask;
use super::{check_mass, Diagnostics, Outflow, Propagator, StepperConfig};
use crate::error::{invalid, Error, Result};
use crate::grid::{cis, transpose_into, FftPair};
use crate::potential::SoftCoulomb;
use crate::state::{Observables, PhaseGrid, PhaseSpaceDensity, SystemKind, SystemState};

/// Phase-space transport
///
/// `d rho/dt = -p d_x rho + (V'(x) - E) d_p rho + 2 gamma d_p (p rho) + D d_p^2 rho`
///
/// split as `kick(dt/2) drift(dt) kick(dt/2)`. The drift shifts every momentum
/// row along `x` spectrally. The kick shifts every position row along `p`
/// spectrally, applies the exact diffusion factor, and is wrapped in two
/// conservative central-difference damping updates.
pub struct FokkerPlanck {
    model: SoftCoulomb,
    grid: PhaseGrid,
    nx: usize,
    np: usize,
    dt: f64,
    gamma: f64,
    clip: bool,
    rho: Vec<f64>,
    trans: Vec<f64>,
    buf: Vec<Complex64>,
    shift_a: Vec<Complex64>,
    shift_b: Vec<Complex64>,
    fft_p: FftPair,
    fft_x: FftPair,
    xs: Vec<f64>,
    ps: Vec<f64>,
    force: Vec<f64>,
    vprime: Vec<f64>,
    diff: Vec<f64>,
    mask: Option<Vec<f64>>,
    outflow: Outflow,
    obs: Observables,
    diag: Diagnostics,
    initial_mass: f64,
}

/// Negative values down to this level are left in place.
const CLIP_FLOOR: f64 = 1e-12;

/// `out[m] = exp(-i m dk s)` for `m = 0..=n/2`, re-anchored every 64 terms.
fn fill_shift(out: &mut [Complex64], dk: f64, s: f64) {
    let step = cis(-dk * s);
    for (block, chunk) in out.chunks_mut(64).enumerate() {
        let mut ph = cis(-dk * s * (block * 64) as f64);
        for o in chunk {
            *o = ph;
            ph *= step;
        }
    }
}

/// Multiplier of a real-to-real shift at FFT bin `k`: Hermitian, real at Nyquist.
#[inline]
fn multiplier(half: &[Complex64], k: usize, n: usize) -> Complex64 {
    if k < n / 2 {
        half[k]
    } else if k == n / 2 {
        Complex64::new(half[k].re, 0.0)
    } else {
        half[n - k].conj()
    }
}

/// Filters two real rows with one complex transform.
fn filter_pair(
    fft: &mut FftPair,
    buf: &mut [Complex64],
    a: &mut [f64],
    b: &mut [f64],
    ha: &[Complex64],
    hb: &[Complex64],
    damping: Option<&[f64]>,
) {
    let n = a.len();
    for ((z, &x), &y) in buf.iter_mut().zip(a.iter()).zip(b.iter()) {
        *z = Complex64::new(x, y);
    }
    fft.forward(buf);
    let half_i = Complex64::new(0.0, -0.5);
    let i = Complex64::new(0.0, 1.0);
    for k in 0..=n / 2 {
        let k2 = (n - k) % n;
        let (z1, z2) = (buf[k], buf[k2]);
        let a1 = (z1 + z2.conj()) * 0.5;
        let b1 = (z1 - z2.conj()) * half_i;
        let a2 = (z2 + z1.conj()) * 0.5;
        let b2 = (z2 - z1.conj()) * half_i;
        let (g1, g2) = match damping {
            Some(d) => (d[k], d[k2]),
            None => (1.0, 1.0),
        };
        buf[k] = (multiplier(ha, k, n) * a1 + i * multiplier(hb, k, n) * b1) * g1;
        buf[k2] = (multiplier(ha, k2, n) * a2 + i * multiplier(hb, k2, n) * b2) * g2;
    }
    fft.inverse(buf);
    for ((z, x), y) in buf.iter().zip(a.iter_mut()).zip(b.iter_mut()) {
        *x = z.re;
        *y = z.im;
    }
}

impl FokkerPlanck {
    pub fn new(d: PhaseSpaceDensity, model: SoftCoulomb, cfg: &StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = d.grid;
        grid.validate()?;
        let (nx, np) = (grid.x.n, grid.p.n);
        let dt = cfg.dt;
        let xs = grid.x.points();
        let (_, vprime) = model.sample(&grid.x);
        let kp = grid.p.wavenumbers();
        let mask = if cfg.absorber.width > 0.0 || cfg.absorber.p_width > 0.0 {
            let mx = EdgeMask::new(&grid.x, cfg.absorber.width)
                .map(|m| m.values)
                .unwrap_or_else(|| vec![1.0; nx]);
            let mp = if cfg.absorber.p_width > 0.0 {
                grid.p.edge_mask(cfg.absorber.p_width)
            } else {
                vec![1.0; np]
            };
            Some(
                mx.iter()
                    .flat_map(|a| mp.iter().map(move |b| a * b))
                    .collect(),
            )
        } else {
            None
        };
        let mut s = Self {
            model,
            grid,
            nx,
            np,
            dt,
            gamma: cfg.gamma,
            clip: cfg.clip_negative,
            trans: vec![0.0; nx * np],
            buf: vec![Complex64::default(); nx.max(np)],
            shift_a: vec![Complex64::default(); nx.max(np) / 2 + 1],
            shift_b: vec![Complex64::default(); nx.max(np) / 2 + 1],
            fft_p: FftPair::new(np),
            fft_x: FftPair::new(nx),
            ps: grid.p.points(),
            force: vprime.iter().map(|v| -v).collect(),
            vprime,
            xs,
            diff: kp
                .iter()
                .map(|k| (-cfg.diffusion * k * k * 0.5 * dt).exp())
                .collect(),
            mask,
            outflow: Outflow::default(),
            obs: Observables::default(),
            diag: Diagnostics::default(),
            initial_mass: 0.0,
            rho: d.rho,
        };
        if s.rho.iter().any(|v| !v.is_finite()) {
            return Err(invalid("phase-space density contains non-finite values"));
        }
        s.refresh();
        s.initial_mass = s.obs.norm;
        Ok(s)
    }

    pub fn density(&self) -> PhaseSpaceDensity {
        PhaseSpaceDensity {
            grid: self.grid,
            rho: self.rho.clone(),
        }
    }

    fn refresh(&mut self) {
        let np = self.np;
        let (mut m, mut sx, mut sp, mut sv) = (0.0, 0.0, 0.0, 0.0);
        for (ix, row) in self.rho.chunks(np).enumerate() {
            let rm: f64 = row.iter().sum();
            let rp: f64 = row.iter().zip(&self.ps).map(|(r, p)| r * p).sum();
            m += rm;
            sx += self.xs[ix] * rm;
            sv += self.vprime[ix] * rm;
            sp += rp;
        }
        let c = self.grid.cell();
        let (ox, op, ov) = self.outflow.moments(&self.model);
        let p = sp * c + op;
        self.obs = Observables {
            x: sx * c + ox,
            p,
            vprime: sv * c + ov,
            a: -2.0 * self.gamma * p,
            norm: m * c,
        };
    }

    /// Conservative explicit update of `2 gamma d_p (p rho)` over `tau`.
    fn damp(&mut self, tau: f64) {
        if self.gamma == 0.0 {
            return;
        }
        let np = self.np;
        let c = 2.0 * self.gamma * tau / (2.0 * self.grid.p.dx());
        let ps = &self.ps;
        let q = &mut self.buf;
        for row in self.rho.chunks_mut(np) {
            for j in 0..np {
                q[j].re = ps[j] * row[j];
            }
            for j in 0..np {
                let up = q[(j + 1) % np].re;
                let down = q[(j + np - 1) % np].re;
                row[j] += c * (up - down);
            }
        }
    }

    fn kick(&mut self, e: f64, tau: f64) {
        let np = self.np;
        let dk = self.grid.p.wavenumbers()[1];
        let half = np / 2 + 1;
        for r in 0..self.nx / 2 {
            let (ia, ib) = (2 * r, 2 * r + 1);
            fill_shift(&mut self.shift_a[..half], dk, (self.force[ia] + e) * tau);
            fill_shift(&mut self.shift_b[..half], dk, (self.force[ib] + e) * tau);
            let (lo, hi) = self.rho.split_at_mut(ib * np);
            let a = &mut lo[ia * np..ia * np + np];
            let b = &mut hi[..np];
            filter_pair(
                &mut self.fft_p,
                &mut self.buf[..np],
                a,
                b,
                &self.shift_a[..half],
                &self.shift_b[..half],
                Some(&self.diff),
            );
        }
    }

    fn drift(&mut self) {
        let (nx, np) = (self.nx, self.np);
        transpose_into(&self.rho, &mut self.trans, nx, np);
        let dk = self.grid.x.wavenumbers()[1];
        let half = nx / 2 + 1;
        for r in 0..np / 2 {
            let (ia, ib) = (2 * r, 2 * r + 1);
            fill_shift(&mut self.shift_a[..half], dk, self.ps[ia] * self.dt);
            fill_shift(&mut self.shift_b[..half], dk, self.ps[ib] * self.dt);
            let (lo, hi) = self.trans.split_at_mut(ib * nx);
            filter_pair(
                &mut self.fft_x,
                &mut self.buf[..nx],
                &mut lo[ia * nx..ia * nx + nx],
                &mut hi[..nx],
                &self.shift_a[..half],
                &self.shift_b[..half],
                None,
            );
        }
        transpose_into(&self.trans, &mut self.rho, np, nx);
    }

    fn absorb(&mut self) {
        let Some(mask) = &self.mask else { return };
        let np = self.np;
        let c = self.grid.cell();
        let mut side = [[0.0f64; 3]; 2];
        for (ix, (row, mrow)) in self.rho.chunks_mut(np).zip(mask.chunks(np)).enumerate() {
            let x = self.xs[ix];
            let s = &mut side[usize::from(x >= 0.0)];
            for ((r, &m), &p) in row.iter_mut().zip(mrow).zip(&self.ps) {
                if m < 1.0 {
                    let removed = (1.0 - m) * *r;
                    s[0] += removed;
                    s[1] += x * removed;
                    s[2] += p * removed;
                    *r *= m;
                }
            }
        }
        for (k, s) in side.iter().enumerate() {
            if s[0] != 0.0 {
                self.outflow.absorb(k == 0, s[0] * c, s[1] * c, s[2] * c);
            }
        }
    }

    /// Zeroes values below `-CLIP_FLOOR`, then restores the mass, `<x>` and
    /// `<p>` that were lost by reweighting with `1 + a + b x + c p`.
    fn clip_negative(&mut self) -> Result<()> {
        let np = self.np;
        let mut lost = [0.0; 3];
        for (ix, row) in self.rho.chunks_mut(np).enumerate() {
            let x = self.xs[ix];
            for (v, &p) in row.iter_mut().zip(&self.ps) {
                if *v < -CLIP_FLOOR {
                    lost[0] += *v;
                    lost[1] += x * *v;
                    lost[2] += p * *v;
                    *v = 0.0;
                }
            }
        }
        if lost[0] == 0.0 {
            return Ok(());
        }
        let removed = -lost[0] * self.grid.cell();
        self.diag.clipped += removed;
        if removed > 1e-6 {
            return Err(Error::Instability {
                step: self.diag.steps,
                reason: format!("negative density {removed:.3e} beyond clip tolerance"),
            });
        }
        let mut m = [[0.0; 3]; 3];
        for (ix, row) in self.rho.chunks(np).enumerate() {
            let x = self.xs[ix];
            for (&v, &p) in row.iter().zip(&self.ps) {
                let phi = [1.0, x, p];
                for i in 0..3 {
                    for j in i..3 {
                        m[i][j] += v * phi[i] * phi[j];
                    }
                }
            }
        }
        for i in 0..3 {
            for j in 0..i {
                m[i][j] = m[j][i];
            }
        }
        let Some([a, b, c]) = solve3(m, lost) else {
            return Err(Error::Instability {
                step: self.diag.steps,
                reason: "degenerate density while clipping".into(),
            });
        };
        for (ix, row) in self.rho.chunks_mut(np).enumerate() {
            let base = 1.0 + a + b * self.xs[ix];
            for (v, &p) in row.iter_mut().zip(&self.ps) {
                *v *= base + c * p;
            }
        }
        Ok(())
    }
}

/// Cramer's rule; `None` for a singular matrix.
fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = r[i];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

impl Propagator for FokkerPlanck {
    fn kind(&self) -> SystemKind {
        SystemKind::FokkerPlanck
    }

    fn observables(&self) -> Observables {
        self.obs
    }

    fn step(&mut self, e_mid: f64) -> Result<()> {
        if !e_mid.is_finite() {
            return Err(invalid("non-finite field value"));
        }
        let dt = self.dt;
        let f = 1.0 - 0.5 * self.gamma * dt;

        self.damp(0.25 * dt);
        self.kick(e_mid, 0.5 * dt);
        self.damp(0.25 * dt);
        self.drift();
        self.damp(0.25 * dt);
        self.kick(e_mid, 0.5 * dt);
        self.damp(0.25 * dt);

        self.outflow.damp(f);
        self.outflow.kick(&self.model, e_mid, 0.5 * dt);
        self.outflow.damp(f);
        self.outflow.drift(dt);
        self.outflow.damp(f);
        self.outflow.kick(&self.model, e_mid, 0.5 * dt);
        self.outflow.damp(f);
        self.diag.steps += 1;

        self.absorb();
        if self.clip {
            self.clip_negative()?;
        }
        self.refresh();
        self.diag.absorbed = self.outflow.mass();
        check_mass(
            &mut self.diag,
            self.obs.norm + self.outflow.mass(),
            self.initial_mass,
            1e-6,
        )
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diag
    }

    fn outflow(&self) -> Outflow {
        self.outflow
    }

    fn state(&self) -> SystemState {
        SystemState::FokkerPlanck(self.density())
    }
}
