use crate::error::{Error, Result};
use crate::linalg::{closed_classes, Mat, Row};

/// Stationary vector of a row-stochastic matrix by Grassmann-Taksar-Heyman
/// elimination, restricted to the single closed class.
pub fn gth(p: &Mat) -> Result<Row> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::Dimension(
            "gth needs a nonempty square matrix".into(),
        ));
    }
    if p.iter().any(|x| *x < 0.0) {
        return Err(Error::Negative("matrix passed to gth".into()));
    }
    let mut classes = closed_classes(p);
    if classes.len() != 1 {
        return Err(Error::MultipleClosedClasses { classes });
    }
    let states = classes.pop().unwrap();
    let m = states.len();
    let mut a = vec![0.0; m * m];
    for (r, &i) in states.iter().enumerate() {
        for (c, &j) in states.iter().enumerate() {
            a[r * m + c] = p[(i, j)];
        }
    }
    for k in (1..m).rev() {
        let s: f64 = a[k * m..k * m + k].iter().sum();
        if s <= 0.0 {
            return Err(Error::Reducible(
                "closed class lost a state during elimination".into(),
            ));
        }
        for i in 0..k {
            a[i * m + k] /= s;
        }
        for i in 0..k {
            let f = a[i * m + k];
            if f == 0.0 {
                continue;
            }
            let (head, tail) = a.split_at_mut(k * m);
            let row_k = &tail[..k];
            let row_i = &mut head[i * m..i * m + k];
            for (x, y) in row_i.iter_mut().zip(row_k) {
                *x += f * y;
            }
        }
    }
    let mut x = vec![0.0; m];
    x[0] = 1.0;
    for k in 1..m {
        x[k] = (0..k).map(|i| x[i] * a[i * m + k]).sum();
    }
    let total: f64 = x.iter().sum();
    let mut out = Row::zeros(n);
    for (r, &i) in states.iter().enumerate() {
        out[i] = x[r] / total;
    }
    Ok(out)
}

/// Stationary vector from an LU solve with one balance equation replaced by
/// the normalization; for cross-checking [`gth`] on irreducible chains.
pub fn lu_stationary(p: &Mat) -> Result<Row> {
    let n = p.nrows();
    let mut system = Mat::identity(n, n) - p.transpose();
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("balance equations".into()))?;
    Ok(x.transpose())
}
