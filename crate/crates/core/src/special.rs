//! Hurwitz zeta function for exact power-law tail sums.

/// B_{2j} / (2j)! for j = 1..=12.
const BERNOULLI_OVER_FACTORIAL: [f64; 12] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0,
    77683.0 / 14101100039391805440000.0,
    -236364091.0 / 1693824136731743669452800000.0,
];

/// Number of leading terms always summed directly before switching to
/// Euler-Maclaurin; the correction series below is accurate to roundoff
/// once the base exceeds this.
const DIRECT_BASE: f64 = 30.0;

/// `sum_{k>=0} (q + k)^(-s)` for `s > 1`, `q > 0`.
///
/// Euler-Maclaurin summation after shifting `q` past [`DIRECT_BASE`];
/// relative accuracy is a few ulps for the parameter ranges used here.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0, "hurwitz_zeta requires s > 1, got {s}");
    assert!(q > 0.0, "hurwitz_zeta requires q > 0, got {q}");
    let shift = if q >= DIRECT_BASE {
        0
    } else {
        (DIRECT_BASE - q).ceil() as usize
    };
    // small terms first
    let direct: f64 = (0..shift).rev().map(|k| (q + k as f64).powf(-s)).sum();
    let a = q + shift as f64;
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times a^(-s-2j+1)
    let mut factor = s * a.powf(-s - 1.0);
    let inv_a2 = 1.0 / (a * a);
    for (j, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = coeff * factor;
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        let j2 = 2.0 * (j as f64 + 1.0);
        factor *= (s + j2 - 1.0) * (s + j2) * inv_a2;
    }
    direct + tail
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
