use super::gth::gth;
use crate::chain::{ChainSpec, FiniteChainSpec};
use crate::error::{Error, Result};
use crate::linalg::{inverse, ones, Col, Mat, Row};

/// Mean hitting times of level 0 on a last-column truncation.
#[derive(Clone, Debug)]
pub struct FirstPassage {
    /// `u[k]` for levels `0..=kmax`.
    pub u: Vec<Col>,
    /// Probability of reaching the truncation level before level 0, from level `kmax`.
    pub leak: f64,
}

/// Solves `u = e + P u` on levels `1..=trunc` (level 0 absorbing) of the
/// last-column truncation and gets `u(0)` from one step out of level 0.
pub fn first_passage_solve(
    spec: &ChainSpec,
    trunc: usize,
    kmax: usize,
    max_leak: f64,
) -> Result<FirstPassage> {
    if kmax >= trunc {
        return Err(Error::Domain(format!(
            "kmax {kmax} must be below trunc {trunc}"
        )));
    }
    let finite = FiniteChainSpec::last_column(spec, trunc)?;
    let p = finite.assemble();
    let (m0, m1) = (spec.m0(), spec.m1());
    let n = p.nrows() - m0;
    let q = p.view((m0, m0), (n, n)).into_owned();
    let eye = Mat::identity(n, n);
    let lu = (&eye - &q).lu();
    let body = lu
        .solve(&Col::from_element(n, 1.0))
        .ok_or_else(|| Error::Singular("first-passage system".into()))?;

    // leak: hit the top level before level 0
    let top = n - m1;
    let q2 = q.view((0, 0), (top, top)).into_owned();
    let r = q.view((0, top), (top, m1)).into_owned() * ones(m1);
    let hit = (Mat::identity(top, top) - q2)
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::Singular("leak system".into()))?;
    let leak = if kmax == 0 {
        0.0
    } else {
        hit.rows((kmax - 1) * m1, m1).max()
    };
    if leak > max_leak {
        return Err(Error::Inconsistent {
            what: format!("first-passage truncation at level {trunc}"),
            residual: leak,
            tolerance: max_leak,
        });
    }

    let row0 = p.view((0, m0), (m0, n));
    let u0 = Col::from_element(m0, 1.0) + row0 * &body;
    let mut u = vec![u0];
    for k in 1..=kmax {
        u.push(body.rows((k - 1) * m1, m1).into_owned());
    }
    Ok(FirstPassage { u, leak })
}

/// Fundamental deviation matrix of a truncated chain from occupation
/// counts before the first visit to a reference state.
#[derive(Clone, Debug)]
pub struct DefinitionalH {
    pub p: Mat,
    pub pi: Row,
    pub h: Mat,
    spec: ChainSpec,
}

impl DefinitionalH {
    /// `H(k;l)` block.
    pub fn block(&self, k: usize, l: usize) -> Mat {
        let s = &self.spec;
        self.h
            .view((s.offset(k), s.offset(l)), (s.phases(k), s.phases(l)))
            .into_owned()
    }

    /// `(I - e pi) H` with the truncated chain's own `pi`.
    pub fn projected(&self) -> Mat {
        let pih = &self.pi * &self.h;
        let mut d = self.h.clone();
        for mut row in d.row_iter_mut() {
            row -= &pih;
        }
        d
    }

    pub fn projected_block(&self, k: usize, l: usize) -> Mat {
        let s = &self.spec;
        self.projected()
            .view((s.offset(k), s.offset(l)), (s.phases(k), s.phases(l)))
            .into_owned()
    }

    /// `max |(I - P) H - (I - e pi)|` over the whole truncated chain.
    pub fn poisson_residual(&self) -> f64 {
        let n = self.p.nrows();
        let lhs = (Mat::identity(n, n) - &self.p) * &self.h;
        let rhs = Mat::identity(n, n) - ones(n) * &self.pi;
        (lhs - rhs).amax()
    }
}

/// `H = N - (N e) pi` where `N = (I - Q)^-1` and `Q` is the last-column
/// truncation at `trunc` with the column of `reference = (level, phase)` zeroed.
pub fn h_definitional(
    spec: &ChainSpec,
    trunc: usize,
    reference: (usize, usize),
) -> Result<DefinitionalH> {
    let p = FiniteChainSpec::last_column(spec, trunc)?.assemble();
    let pi = gth(&p)?;
    let n = p.nrows();
    let col = spec.offset(reference.0) + reference.1;
    if reference.0 > trunc || reference.1 >= spec.phases(reference.0) {
        return Err(Error::Domain(
            "reference state outside the truncated chain".into(),
        ));
    }
    let mut q = p.clone();
    q.column_mut(col).fill(0.0);
    let occupation = inverse(&(Mat::identity(n, n) - q), "occupation matrix")?;
    let mean_return = &occupation * ones(n);
    let h = &occupation - mean_return * &pi;
    Ok(DefinitionalH {
        p,
        pi,
        h,
        spec: spec.clone(),
    })
}
