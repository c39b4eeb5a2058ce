use crate::error::{Error, Result};
use crate::linalg::{max_abs, ones, Mat, Row};

const STALL_WINDOW: usize = 200;

/// Result of summing `P^n - e pi`.
#[derive(Clone, Debug)]
pub struct PartialSums {
    pub d: Mat,
    pub terms: usize,
    /// `max |P^n - e pi|` at the last term.
    pub last_term: f64,
    /// Whether the Cesaro mean of the partial sums was returned.
    pub cesaro: bool,
}

/// `sum_{n=0}^{n_max} (P^n - e pi)`, stopping once a term drops below `tol`.
///
/// If the terms stop shrinking (a periodic chain) and `allow_cesaro` is set,
/// the Cesaro mean of the partial sums is returned instead.
pub fn power_partial_sums(
    p: &Mat,
    pi: &Row,
    n_max: usize,
    tol: f64,
    allow_cesaro: bool,
) -> Result<PartialSums> {
    let n = p.nrows();
    let epi = ones(n) * pi;
    let mut term = Mat::identity(n, n) - &epi;
    let mut sum = term.clone();
    let mut cesaro_acc = sum.clone();
    let mut last = max_abs(&term);
    let mut sizes = vec![last];
    let mut count = 1usize;
    for step in 1..=n_max {
        let next = p * &term;
        let size = max_abs(&next);
        term = next;
        sum += &term;
        cesaro_acc += &sum;
        count += 1;
        if size < tol {
            return Ok(PartialSums {
                d: sum,
                terms: step + 1,
                last_term: size,
                cesaro: false,
            });
        }
        last = size;
        sizes.push(size);
        // no decay over a long stretch
        if !allow_cesaro
            && step >= STALL_WINDOW
            && size >= sizes[step - STALL_WINDOW] * (1.0 - 1e-9)
        {
            return Err(Error::NoConvergence {
                what: "power partial sums (periodic chain? use Cesaro mode)".into(),
                iterations: step,
                residual: size,
            });
        }
    }
    if allow_cesaro && last >= tol {
        return Ok(PartialSums {
            d: cesaro_acc / count as f64,
            terms: count,
            last_term: last,
            cesaro: true,
        });
    }
    Ok(PartialSums {
        d: sum,
        terms: count,
        last_term: last,
        cesaro: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::gth;

    #[test]
    fn two_state_matches_fundamental_matrix() {
        let p = Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let pi = gth(&p).unwrap();
        let epi = ones(2) * &pi;
        let eye = Mat::identity(2, 2);
        let closed = (&eye - &p + &epi).try_inverse().unwrap() * (&eye - &epi);
        let sums = power_partial_sums(&p, &pi, 10_000, 1e-16, false).unwrap();
        assert!((sums.d - closed).amax() < 1e-10);
        let zero = power_partial_sums(&p, &pi, 0, 0.0, false).unwrap();
        assert!((zero.d - (&eye - &epi)).amax() < 1e-15);
    }
}
