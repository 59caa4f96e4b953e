//! Explicit Runge–Kutta integration of order 8 with a 7th-order continuous
//! extension (DOP853), adaptive or with a fixed step.

use super::dop853_tableau::{B, BHH, DENSE_STAGES, D, ER, STAGES};
use crate::error::FlowError;

/// Integrator settings.
#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Integrate with this constant step and no error control.
    pub fixed_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, h0: None, h_max: f64::INFINITY, max_steps: 200_000, fixed_step: None }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }

    pub fn fixed(h: f64) -> Self {
        Self { fixed_step: Some(h), ..Self::default() }
    }
}

/// Step counters.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Interpolant on one accepted step.
#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    cont: [Vec<f64>; 8],
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        for i in 0..out.len() {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            out[i] = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
    }
}

/// Dense solution on `[t0, t_end]` (or `[t_end, t0]` when integrating backwards).
#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub t0: f64,
    pub t_end: f64,
    pub y0: Vec<f64>,
    /// Accepted step end points, starting with `t0`.
    pub ts: Vec<f64>,
    /// States at `ts`.
    pub ys: Vec<Vec<f64>>,
    segments: Vec<Segment>,
    pub stats: OdeStats,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    /// Interpolated state at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, FlowError> {
        let (lo, hi) = if self.t_end >= self.t0 { (self.t0, self.t_end) } else { (self.t_end, self.t0) };
        let slack = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if t < lo - slack || t > hi + slack {
            return Err(FlowError::OutOfRange { t, lo, hi });
        }
        if self.segments.is_empty() {
            return Ok(self.y0.clone());
        }
        let forward = self.t_end >= self.t0;
        // Segment whose interval contains t.
        let k = self.ts[1..].partition_point(|&tk| if forward { tk < t } else { tk > t });
        let seg = &self.segments[k.min(self.segments.len() - 1)];
        let mut out = vec![0.0; self.dim()];
        seg.eval(t, &mut out);
        Ok(out)
    }

    /// Final state.
    pub fn last(&self) -> &[f64] {
        self.ys.last().expect("solution has at least the initial state")
    }
}

fn combo(y: &[f64], h: f64, ks: &[Vec<f64>], coeffs: &[(usize, f64)], out: &mut [f64]) {
    out.copy_from_slice(y);
    for &(j, a) in coeffs {
        let ha = h * a;
        for (o, k) in out.iter_mut().zip(&ks[j]) {
            *o += ha * k;
        }
    }
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sk: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let dnf = rms(f0);
    let dny = rms(y0);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(opts.h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + dir * h * k).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + dir * h, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let der2 = rms(&diff) / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
    (100.0 * h).min(h1).min(opts.h_max)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, keeping a dense interpolant.
pub fn dop853<F>(mut f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<OdeSolution, FlowError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut sol = OdeSolution {
        t0,
        t_end,
        y0: y0.to_vec(),
        ts: vec![t0],
        ys: vec![y0.to_vec()],
        segments: Vec::new(),
        stats: OdeStats::default(),
    };
    if t_end == t0 {
        return Ok(sol);
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::IntegrationFailure { t: t0, reason: "non-finite initial state".into() });
    }
    let dir = if t_end > t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 16];
    let mut y = y0.to_vec();
    let mut t = t0;
    f(t, &y, &mut k[0]);
    sol.stats.evaluations += 1;

    let mut h = match (opts.fixed_step, opts.h0) {
        (Some(hf), _) => hf.abs(),
        (None, Some(h0)) => h0.abs(),
        (None, None) => initial_step(&mut f, t, &y, &k[0].clone(), dir, opts),
    };
    let mut last_rejected = false;
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut steps = 0usize;

    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 1e-14 * span.max(1.0) {
            break;
        }
        if steps >= opts.max_steps {
            return Err(FlowError::IntegrationFailure { t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        steps += 1;
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(FlowError::IntegrationFailure { t, reason: "step size collapsed".into() });
        }
        let hs = dir * h;

        for (s, (cs, row)) in STAGES.iter().enumerate() {
            combo(&y, hs, &k, row, &mut tmp);
            let (_, tail) = k.split_at_mut(s + 1);
            f(t + cs * hs, &tmp, &mut tail[0]);
        }
        sol.stats.evaluations += STAGES.len();
        // k[0..12] now hold stages 1..=12.
        let mut bsum = vec![0.0; n];
        for &(j, b) in B {
            for i in 0..n {
                bsum[i] += b * k[j][i];
            }
        }
        for i in 0..n {
            y_new[i] = y[i] + hs * bsum[i];
        }

        let accept;
        let mut h_new;
        if opts.fixed_step.is_some() {
            accept = true;
            h_new = h;
        } else {
            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..n {
                let sk = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                let mut e2 = bsum[i];
                for &(j, c) in BHH {
                    e2 -= c * k[j][i];
                }
                let mut e = 0.0;
                for &(j, c) in ER {
                    e += c * k[j][i];
                }
                err2 += (e2 / sk).powi(2);
                err += (e / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h * err * (1.0 / (deno * n as f64)).sqrt();
            if !err.is_finite() {
                h *= 0.1;
                last_rejected = true;
                sol.stats.rejected += 1;
                continue;
            }
            let fac11 = err.powf(1.0 / 8.0);
            let fac = (1.0 / 6.0f64).max((1.0 / 0.333f64).min(fac11 / 0.9));
            h_new = h / fac;
            accept = err <= 1.0;
            if !accept {
                h_new = h / (1.0 / 0.333f64).min(fac11 / 0.9);
            }
        }

        if accept {
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(FlowError::IntegrationFailure { t, reason: "non-finite state".into() });
            }
            let t_new = if last { t_end } else { t + hs };
            // Stage 13: derivative at the new point.
            {
                let (_, tail) = k.split_at_mut(12);
                f(t_new, &y_new, &mut tail[0]);
            }
            for (s, (cs, row)) in DENSE_STAGES.iter().enumerate() {
                combo(&y, hs, &k, row, &mut tmp);
                let (_, tail) = k.split_at_mut(13 + s);
                f(t + cs * hs, &tmp, &mut tail[0]);
            }
            sol.stats.evaluations += 4;
            let ydiff: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
            let bspl: Vec<f64> = (0..n).map(|i| hs * k[0][i] - ydiff[i]).collect();
            let c4: Vec<f64> = (0..n).map(|i| ydiff[i] - hs * k[12][i] - bspl[i]).collect();
            let mut dense: [Vec<f64>; 4] = Default::default();
            for (r, row) in D.iter().enumerate() {
                let mut v = vec![0.0; n];
                for &(j, dcoef) in row.iter() {
                    for i in 0..n {
                        v[i] += dcoef * k[j][i];
                    }
                }
                v.iter_mut().for_each(|x| *x *= hs);
                dense[r] = v;
            }
            let [d5, d6, d7, d8] = dense;
            sol.segments.push(Segment { t0: t, h: hs, cont: [y.clone(), ydiff, bspl, c4, d5, d6, d7, d8] });
            let k13 = k[12].clone();
            k[0].copy_from_slice(&k13);
            y.copy_from_slice(&y_new);
            t = t_new;
            sol.ts.push(t);
            sol.ys.push(y.clone());
            sol.stats.accepted += 1;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
        } else {
            last_rejected = true;
            sol.stats.rejected += 1;
        }
        h = h_new.min(opts.h_max);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let sol = dop853(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            10.0,
            &OdeOptions::default(),
        )
        .unwrap();
        let y = sol.last();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
        for &t in &[0.0, 0.37, 3.3, 7.77, 10.0] {
            let y = sol.eval(t).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-9, "t={t}: {}", y[0] - t.cos());
        }
        assert!(sol.eval(10.5).is_err());
    }

    #[test]
    fn order_eight_convergence_in_fixed_mode() {
        let run = |h: f64| {
            let sol = dop853(|t, y, dy| dy[0] = y[0] * t.cos(), 0.0, &[1.0], 2.0, &OdeOptions::fixed(h)).unwrap();
            (sol.last()[0] - 2f64.sin().exp()).abs()
        };
        let (e1, e2) = (run(0.2), run(0.1));
        let order = (e1 / e2).log2();
        assert!(order > 7.0, "observed order {order}");
    }

    #[test]
    fn backward_integration() {
        let sol = dop853(|_, y, dy| dy[0] = -y[0], 1.0, &[1.0], -1.0, &OdeOptions::default()).unwrap();
        assert!((sol.last()[0] - 2f64.exp()).abs() < 1e-9);
        assert!((sol.eval(0.0).unwrap()[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let sol = dop853(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -4.0 * y[0];
            },
            0.0,
            &[0.0, 2.0],
            3.0,
            &OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        let worst = (0..300)
            .map(|i| {
                let t = i as f64 * 0.01;
                (sol.eval(t).unwrap()[0] - (2.0 * t).sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }
}
