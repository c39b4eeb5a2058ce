use std::fmt::Write as _;

use serde::Serialize;

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, ones, outer, Col, Mat, Row};
use crate::matan::{FPlusWindow, MatanSolution, RFamily};
use crate::passage::PassageVectors;
use crate::stationary::{censored_p0, Censored, InfiniteSolution};

/// Blocks `H(k;l)` of the fundamental deviation matrix for `k <= K`, `l <= L`,
/// with `E(k;l) = H(k;l) + (k / -sigma) e pi(l)` where defined.
#[derive(Clone, Debug)]
pub struct DeviationWindow {
    pub k_max: usize,
    pub l_max: usize,
    pub sigma: f64,
    pub censored: Censored,
    /// `H(0;l)`.
    pub h0: Vec<Mat>,
    /// `||pi0~ RHS(l)||_inf` of each boundary system.
    pub certificates: Vec<f64>,
    /// `||(I - P0~) H(0;l) - RHS(l)||_inf`.
    pub boundary_residuals: Vec<f64>,
    /// Largest `|H(k;l) + (k/-sigma) e pi(l) - E(k;l)|` over the window.
    pub decomposition_gap: f64,
    /// `max_k |E(k;l)|` per column level.
    pub e_bound: Vec<f64>,
    /// Whether that maximum moved by less than 1% over the last quarter of `k`.
    pub e_stable: Vec<bool>,
    h: Vec<Mat>,
    e: Vec<Option<Mat>>,
    g: Mat,
    xe: Col,
    /// `(I - Phi(0))^-1 B(-1) H(0;l)`.
    lift: Vec<Mat>,
    pi: Vec<Row>,
    fplus: FPlusWindow,
    passage: PassageVectors,
}

/// Walks `n -> (G^n, G^n Xe)` upward from a start level.
struct PowerWalk<'a> {
    g: &'a Mat,
    gn: Mat,
    gxe: Col,
    n: usize,
}

impl<'a> PowerWalk<'a> {
    fn new(g: &'a Mat, xe: &Col) -> Self {
        Self {
            g,
            gn: Mat::identity(g.nrows(), g.nrows()),
            gxe: xe.clone(),
            n: 0,
        }
    }

    fn advance_to(&mut self, n: usize) {
        while self.n < n {
            self.gn = self.g * &self.gn;
            self.gxe = self.g * &self.gxe;
            self.n += 1;
        }
    }
}

impl DeviationWindow {
    pub fn build(
        spec: &ChainSpec,
        sol: &MatanSolution,
        pi: &InfiniteSolution,
        k_max: usize,
        l_max: usize,
    ) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::WindowTooSmall { required: 1 });
        }
        let w = k_max.max(l_max).max(1);
        let r = RFamily::new(spec, sol, w + 1, 1e-15)?;
        let fplus = FPlusWindow::new(sol, &r, w)?;
        let passage = PassageVectors::new(spec, sol, &r, k_max)?;
        let censored = censored_p0(spec, &r)?;
        let sigma = passage.sigma;
        let m0 = spec.m0();
        let m1 = spec.m1();
        let pis: Vec<Row> = (0..=l_max).map(|l| pi.pi.level(l)).collect();
        let u0 = passage.u(0);

        let reg = Mat::identity(m0, m0) - &censored.p0 + outer(&ones(m0), &censored.pi0);
        let lu = reg.clone().lu();
        let mut h0 = Vec::with_capacity(l_max + 1);
        let mut certificates = Vec::with_capacity(l_max + 1);
        let mut boundary_residuals = Vec::with_capacity(l_max + 1);
        for l in 0..=l_max {
            let rhs = if l == 0 {
                Mat::identity(m0, m0) - outer(&u0, &pis[0])
            } else {
                let mut acc = -outer(&u0, &pis[l]);
                for m in 1..=l {
                    acc += spec.b(m as i64) * fplus.block(m, l);
                }
                acc += r.s_b(l + 1) * &sol.g * fplus.block(l, l);
                acc
            };
            let cert = (&censored.pi0 * &rhs).amax();
            if cert > 1e-9 {
                return Err(Error::Inconsistent {
                    what: format!("solvability of the boundary system for H(0;{l})"),
                    residual: cert,
                    tolerance: 1e-9,
                });
            }
            let x = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("I - P0~ + e pi0~".into()))?;
            let res = ((Mat::identity(m0, m0) - &censored.p0) * &x - &rhs).amax();
            certificates.push(cert);
            boundary_residuals.push(res);
            h0.push(x);
        }
        let down = &sol.phi_inv * spec.b_down();
        let lift: Vec<Mat> = h0.iter().map(|h| &down * h).collect();
        let xe = &passage.resolvent * ones(m1);

        let mut win = Self {
            k_max,
            l_max,
            sigma,
            censored,
            h0,
            certificates,
            boundary_residuals,
            decomposition_gap: 0.0,
            e_bound: vec![0.0; l_max + 1],
            e_stable: vec![true; l_max + 1],
            h: Vec::with_capacity(k_max * (l_max + 1)),
            e: Vec::with_capacity(k_max * (l_max + 1)),
            g: sol.g.clone(),
            xe,
            lift,
            pi: pis,
            fplus,
            passage,
        };
        let mut h = Vec::with_capacity(k_max * (l_max + 1));
        let mut e = Vec::with_capacity(k_max * (l_max + 1));
        let mut gap = 0.0f64;
        let mut running: Vec<Vec<f64>> = vec![Vec::new(); l_max + 1];
        for k in 1..=k_max {
            for l in 0..=l_max {
                let hb = win.h_exact(k, l)?;
                let eb = if k >= l.max(1) {
                    let eb = win.e_exact(k, l)?;
                    let recon = &hb + outer(&ones(m1), &win.pi[l]) * (k as f64 / -sigma);
                    let scale = 1.0 + max_abs(&eb);
                    gap = gap.max(max_abs(&(recon - &eb)) / scale);
                    let prev = running[l].last().copied().unwrap_or(0.0);
                    running[l].push(prev.max(max_abs(&eb)));
                    Some(eb)
                } else {
                    None
                };
                h.push(hb);
                e.push(eb);
            }
        }
        win.h = h;
        win.e = e;
        win.decomposition_gap = gap;
        for (l, run) in running.iter().enumerate() {
            if let Some(&last) = run.last() {
                win.e_bound[l] = last;
                let q = run.len() - run.len().div_ceil(4);
                let base = run[q.min(run.len() - 1)];
                win.e_stable[l] = last <= base * 1.01 + 1e-300;
            }
        }
        Ok(win)
    }

    pub fn pi_level(&self, l: usize) -> &Row {
        &self.pi[l]
    }

    pub fn passage(&self) -> &PassageVectors {
        &self.passage
    }

    fn check_column(&self, l: usize) -> Result<()> {
        if l > self.l_max {
            return Err(Error::WindowTooSmall { required: l });
        }
        Ok(())
    }

    /// `H(k;l)` from the block formula, for any `k >= 1` and `l <= L`.
    pub fn h_exact(&self, k: usize, l: usize) -> Result<Mat> {
        self.check_column(l)?;
        if k == 0 {
            return Ok(self.h0[l].clone());
        }
        let mut walk = PowerWalk::new(&self.g, &self.xe);
        walk.advance_to(k - 1);
        let mut x = &walk.gn * &self.lift[l];
        if l > 0 {
            x += self.fplus.get(k, l)?;
        }
        let u = self.passage.u(k);
        x -= outer(&u, &self.pi[l]);
        Ok(x)
    }

    /// `E(k;l)` for `k >= max(l, 1)`.
    pub fn e_exact(&self, k: usize, l: usize) -> Result<Mat> {
        self.check_column(l)?;
        if k < l.max(1) {
            return Err(Error::Domain(format!("E({k};{l}) needs k >= max(l, 1)")));
        }
        let mut walk = PowerWalk::new(&self.g, &self.xe);
        let mut x = Mat::zeros(self.g.nrows(), self.pi[l].len());
        if l > 0 {
            walk.advance_to(k - l);
            x += &walk.gn * self.fplus.block(l, l);
        }
        walk.advance_to(k - 1);
        x += &walk.gn * &self.lift[l];
        walk.advance_to(k);
        x -= outer(&(&self.xe - &walk.gxe), &self.pi[l]);
        Ok(x)
    }

    /// Stored `H(k;l)` for `k <= K`; higher levels are evaluated exactly.
    pub fn h(&self, k: usize, l: usize) -> Result<Mat> {
        self.check_column(l)?;
        match k {
            0 => Ok(self.h0[l].clone()),
            _ if k <= self.k_max => Ok(self.h[(k - 1) * (self.l_max + 1) + l].clone()),
            _ => self.h_exact(k, l),
        }
    }

    pub fn e(&self, k: usize, l: usize) -> Result<Mat> {
        if (1..=self.k_max).contains(&k) && l <= self.l_max {
            if let Some(x) = &self.e[(k - 1) * (self.l_max + 1) + l] {
                return Ok(x.clone());
            }
        }
        self.e_exact(k, l)
    }

    /// `H(n;l)` for `n = 0..=upto`, built incrementally.
    pub fn h_column(&self, l: usize, upto: usize) -> Result<Vec<Mat>> {
        self.check_column(l)?;
        let m1 = self.g.nrows();
        let mut out = Vec::with_capacity(upto + 1);
        out.push(self.h0[l].clone());
        let mut walk = PowerWalk::new(&self.g, &self.xe);
        let mut fp: Option<Mat> = None;
        let w = self.fplus.w();
        for n in 1..=upto {
            walk.advance_to(n - 1);
            let mut x = &walk.gn * &self.lift[l];
            if l > 0 {
                let f = if n <= w {
                    self.fplus.block(n, l).clone()
                } else {
                    &self.g * fp.as_ref().expect("previous F+ block")
                };
                x += &f;
                fp = Some(f);
            }
            walk.advance_to(n);
            let u = &self.xe - &walk.gxe + ones(m1) * (n as f64 / -self.sigma);
            x -= outer(&u, &self.pi[l]);
            out.push(x);
        }
        Ok(out)
    }

    /// `E(n;l)` for `n = from..=upto`, `from >= max(l, 1)`.
    pub fn e_column(&self, l: usize, from: usize, upto: usize) -> Result<Vec<Mat>> {
        self.check_column(l)?;
        if from < l.max(1) {
            return Err(Error::Domain(format!("E({from};{l}) needs n >= max(l, 1)")));
        }
        let mut out = Vec::with_capacity(upto + 1 - from);
        let mut walk = PowerWalk::new(&self.g, &self.xe);
        let mut fp = if l > 0 {
            let mut x = self.fplus.block(l, l).clone();
            for _ in l..from {
                x = &self.g * x;
            }
            Some(x)
        } else {
            None
        };
        for n in from..=upto {
            if n > from {
                fp = fp.map(|x| &self.g * x);
            }
            walk.advance_to(n - 1);
            let mut x = &walk.gn * &self.lift[l];
            if let Some(f) = &fp {
                x += f;
            }
            walk.advance_to(n);
            x -= outer(&(&self.xe - &walk.gxe), &self.pi[l]);
            out.push(x);
        }
        Ok(out)
    }

    /// CSV rows `k,l,i,j,H,E`; `E` is empty where undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,l,i,j,H,E\n");
        for l in 0..=self.l_max {
            let h = &self.h0[l];
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    let _ = writeln!(out, "0,{l},{i},{j},{:.17e},", h[(i, j)]);
                }
            }
        }
        for k in 1..=self.k_max {
            for l in 0..=self.l_max {
                let idx = (k - 1) * (self.l_max + 1) + l;
                let h = &self.h[idx];
                for i in 0..h.nrows() {
                    for j in 0..h.ncols() {
                        let e = match &self.e[idx] {
                            Some(e) => format!("{:.17e}", e[(i, j)]),
                            None => String::new(),
                        };
                        let _ = writeln!(out, "{k},{l},{i},{j},{:.17e},{e}", h[(i, j)]);
                    }
                }
            }
        }
        out
    }

    pub fn summary(&self) -> WindowSummary {
        WindowSummary {
            k_max: self.k_max,
            l_max: self.l_max,
            max_certificate: self.certificates.iter().copied().fold(0.0, f64::max),
            max_boundary_residual: self.boundary_residuals.iter().copied().fold(0.0, f64::max),
            decomposition_gap: self.decomposition_gap,
            e_bound: self.e_bound.clone(),
            e_stable: self.e_stable.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowSummary {
    pub k_max: usize,
    pub l_max: usize,
    pub max_certificate: f64,
    pub max_boundary_residual: f64,
    pub decomposition_gap: f64,
    pub e_bound: Vec<f64>,
    pub e_stable: Vec<bool>,
}
